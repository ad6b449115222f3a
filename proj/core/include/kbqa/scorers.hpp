#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kbqa {

class ScorerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Phrase-level similarity in [0,1]. Implementations must be stateless after
// construction so concurrent score() calls are safe.
class SimilarityScorer {
public:
    virtual ~SimilarityScorer() = default;
    virtual std::string_view name() const = 0;
    virtual double score(std::string_view query, std::string_view candidate) const = 0;
};

// Dice coefficient over padded character trigrams of the case-folded,
// whitespace-collapsed strings. Symmetric; score(a,a) == 1.0.
std::unique_ptr<SimilarityScorer> make_char_trigram_scorer();

// Okapi BM25 (k1=1.2, b=0.75) scoring `candidate` as a document against the
// corpus statistics, squashed into [0,1) via s/(s+1). Raw scores are kept
// non-negative with the +1 idf variant, so the squash is monotone.
std::unique_ptr<SimilarityScorer> make_bm25_scorer(std::span<const std::string> corpus);

// Cosine similarity over vectors read from an embedding file, mapped to
// [0,1] via (c+1)/2. A pair with any missing vector falls back to trigrams.
//
// File format: UTF-8 text, header line "#dim d", then one entry per line:
// text<TAB>v1 v2 ... vd (space-separated decimals). Keys are matched after
// case-folding and whitespace collapsing.
std::unique_ptr<SimilarityScorer> make_dense_file_scorer(const std::string& path);

}  // namespace kbqa
