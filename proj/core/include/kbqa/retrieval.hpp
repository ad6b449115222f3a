#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kbqa/executor.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/logical_form.hpp"
#include "kbqa/scorers.hpp"
#include "kbqa/sparql.hpp"

namespace kbqa {

enum class ScorerKind { CharTrigram, LexicalBm25, DenseFile };

std::string_view to_string(ScorerKind kind);
std::optional<ScorerKind> scorer_kind_from_string(std::string_view name);

struct RetrievalConfig {
    int k_e = 10;  // entity candidates kept per slot
    int k_r = 10;  // relation candidates kept per slot
    int k_1 = 8;   // entity-phase permutations kept per candidate form
    int k_2 = 8;   // relation-phase permutations kept per candidate form
    double t_e = 0.0;
    double t_r = 0.0;
    double t_1 = 0.0;
    double t_2 = 0.0;
    ScorerKind scorer = ScorerKind::CharTrigram;
    std::string embeddings_path;  // dense-file scorer input
    int neighborhood_hops = 1;
    std::size_t max_permutations = 10'000;
    bool entity_retrieval = true;    // off = alias exact match only
    bool relation_retrieval = true;  // off = exact textualization match only

    void validate() const;  // throws std::invalid_argument
};

// A candidate form somewhere along the grounding pipeline. The score is the
// product of the similarities of the slots replaced so far (1.0 initially).
struct ScoredCandidate {
    LogicalForm form;
    int beam_rank = 0;
    double score = 1.0;
};

// Entity and relation scorers share an instance except for BM25, whose
// corpus statistics differ between the label set and the relation set.
struct ScorerSet {
    std::shared_ptr<const SimilarityScorer> entity;
    std::shared_ptr<const SimilarityScorer> relation;
};

ScorerSet make_scorers(const RetrievalConfig& config, const KbStore& kb);

// Textualized rendering a relation is scored under: segments joined by " , ",
// exactly the text between the brackets of its slot encoding.
std::string relation_phrase(std::string_view dotted);

// Keeps items scoring >= threshold, sorted by descending score (stable on
// ties), truncated to k.
template <class T>
std::vector<T> top_k_with_threshold(std::vector<T> items, int k, double threshold) {
    std::erase_if(items, [&](const T& item) { return item.score < threshold; });
    std::stable_sort(items.begin(), items.end(),
                     [](const T& a, const T& b) { return a.score > b.score; });
    if (k >= 0 && items.size() > static_cast<std::size_t>(k))
        items.resize(static_cast<std::size_t>(k));
    return items;
}

// Entity phase: per textual entity slot, merge alias exact matches with
// scorer rankings over the whole label set (keeping the max score per
// entity), prune by (k_e, t_e), permute assignments best-first, prune by
// (k_1, t_1). A slot with no candidates yields no permutations.
std::vector<ScoredCandidate> retrieve_entities(const LogicalForm& form, int beam_rank,
                                               const KbStore& kb, const RetrievalConfig& config,
                                               const SimilarityScorer& scorer);

// Relation phase: candidates come from the neighborhood of each form's
// grounded entities (plus the exact textualization match when it names a KB
// relation), pruned by (k_r, t_r); permutations pruned by (k_2, t_2).
// Output preserves the order of `candidates`; each block is score-descending.
std::vector<ScoredCandidate> retrieve_relations(std::span<const ScoredCandidate> candidates,
                                                const KbStore& kb, const RetrievalConfig& config,
                                                const SimilarityScorer& scorer);

struct GroundResult {
    sparql::SparqlQuery query;
    AnswerSet answers;
    LogicalForm grounded;
};

// Full grounding of a beam of textual forms (beam order = rank): entity
// phase, relation phase, then the first candidate (outer key beam rank,
// inner key descending score) whose query executes to a non-empty answer.
std::optional<GroundResult> ground(std::span<const LogicalForm> beam, const KbStore& kb,
                                   const RetrievalConfig& config, const ScorerSet& scorers);

// Mean over pairs of the mean similarity between a query and its retrieved
// texts. Throws std::invalid_argument on an empty input or an empty set.
double retrieval_efficiency(
    std::span<const std::pair<std::string, std::vector<std::string>>> pairs,
    const SimilarityScorer& scorer);

}  // namespace kbqa
