#include "kbqa/scorers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kbqa/kb_store.hpp"

namespace kbqa {

namespace {

std::string normalize(std::string_view text) { return KbStore::normalize_surface(text); }

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// ---------------------------------------------------------------------------
// Character trigrams
// ---------------------------------------------------------------------------

class CharTrigramScorer final : public SimilarityScorer {
public:
    std::string_view name() const override { return "char-trigram"; }

    double score(std::string_view query, std::string_view candidate) const override {
        const std::string a = normalize(query);
        const std::string b = normalize(candidate);
        if (a == b) return 1.0;
        const auto ta = trigrams(a);
        const auto tb = trigrams(b);
        if (ta.empty() || tb.empty()) return 0.0;
        std::size_t common = 0;
        for (const auto& gram : ta)
            if (tb.contains(gram)) ++common;
        return 2.0 * static_cast<double>(common) / static_cast<double>(ta.size() + tb.size());
    }

private:
    static std::unordered_set<std::string> trigrams(const std::string& text) {
        std::unordered_set<std::string> grams;
        if (text.empty()) return grams;
        const std::string padded = "\x02\x02" + text + "\x03\x03";
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i) grams.insert(padded.substr(i, 3));
        return grams;
    }
};

// ---------------------------------------------------------------------------
// Okapi BM25
// ---------------------------------------------------------------------------

class Bm25Scorer final : public SimilarityScorer {
public:
    explicit Bm25Scorer(std::span<const std::string> corpus) {
        std::size_t total_length = 0;
        for (const auto& document : corpus) {
            const auto tokens = word_tokens(document);
            total_length += tokens.size();
            std::unordered_set<std::string> seen(tokens.begin(), tokens.end());
            for (const auto& term : seen) ++document_frequency_[term];
        }
        corpus_size_ = corpus.size();
        average_length_ = corpus_size_ > 0
                              ? static_cast<double>(total_length) / static_cast<double>(corpus_size_)
                              : 1.0;
        if (average_length_ <= 0.0) average_length_ = 1.0;
    }

    std::string_view name() const override { return "lexical-bm25"; }

    double score(std::string_view query, std::string_view candidate) const override {
        const auto query_terms = word_tokens(query);
        const auto doc_terms = word_tokens(candidate);
        if (query_terms.empty() || doc_terms.empty()) return 0.0;

        std::unordered_map<std::string, std::size_t> tf;
        for (const auto& term : doc_terms) ++tf[term];
        const double dl = static_cast<double>(doc_terms.size());

        double s = 0.0;
        for (const auto& term : query_terms) {
            auto it = tf.find(term);
            if (it == tf.end()) continue;
            const double f = static_cast<double>(it->second);
            s += idf(term) * (f * (kK1 + 1.0)) /
                 (f + kK1 * (1.0 - kB + kB * dl / average_length_));
        }
        return s / (s + 1.0);
    }

private:
    static constexpr double kK1 = 1.2;
    static constexpr double kB = 0.75;

    double idf(const std::string& term) const {
        auto it = document_frequency_.find(term);
        const double df = it == document_frequency_.end() ? 0.0 : static_cast<double>(it->second);
        const double n = static_cast<double>(corpus_size_);
        return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    }

    std::unordered_map<std::string, std::size_t> document_frequency_;
    std::size_t corpus_size_ = 0;
    double average_length_ = 1.0;
};

// ---------------------------------------------------------------------------
// Dense vectors from file
// ---------------------------------------------------------------------------

class DenseFileScorer final : public SimilarityScorer {
public:
    explicit DenseFileScorer(const std::string& path) : fallback_(make_char_trigram_scorer()) {
        std::ifstream in(path);
        if (!in) throw ScorerError("cannot open embedding file: " + path);
        std::string line;
        std::size_t lineno = 0;
        std::size_t dim = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            if (line[0] == '#') {
                std::istringstream header(line.substr(1));
                std::string word;
                header >> word >> dim;
                if (word != "dim" || dim == 0)
                    throw ScorerError(path + ":" + std::to_string(lineno) + ": bad header line");
                continue;
            }
            if (dim == 0)
                throw ScorerError(path + ": missing '#dim d' header before first entry");
            const std::size_t tab = line.find('\t');
            if (tab == std::string::npos)
                throw ScorerError(path + ":" + std::to_string(lineno) + ": missing TAB separator");
            std::vector<double> vec;
            vec.reserve(dim);
            std::istringstream values(line.substr(tab + 1));
            double v = 0.0;
            while (values >> v) vec.push_back(v);
            if (vec.size() != dim)
                throw ScorerError(path + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(dim) + " components, got " +
                                  std::to_string(vec.size()));
            vectors_[normalize(line.substr(0, tab))] = std::move(vec);
        }
    }

    std::string_view name() const override { return "dense-file"; }

    double score(std::string_view query, std::string_view candidate) const override {
        auto qa = vectors_.find(normalize(query));
        auto qb = vectors_.find(normalize(candidate));
        if (qa == vectors_.end() || qb == vectors_.end())
            return fallback_->score(query, candidate);
        const double cosine = cosine_similarity(qa->second, qb->second);
        return (cosine + 1.0) / 2.0;
    }

private:
    static double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        if (na == 0.0 || nb == 0.0) return 0.0;
        return dot / (std::sqrt(na) * std::sqrt(nb));
    }

    std::unordered_map<std::string, std::vector<double>> vectors_;
    std::unique_ptr<SimilarityScorer> fallback_;
};

}  // namespace

std::unique_ptr<SimilarityScorer> make_char_trigram_scorer() {
    return std::make_unique<CharTrigramScorer>();
}

std::unique_ptr<SimilarityScorer> make_bm25_scorer(std::span<const std::string> corpus) {
    return std::make_unique<Bm25Scorer>(corpus);
}

std::unique_ptr<SimilarityScorer> make_dense_file_scorer(const std::string& path) {
    return std::make_unique<DenseFileScorer>(path);
}

}  // namespace kbqa
