#include "kbqa/retrieval.hpp"

#include <map>
#include <queue>
#include <set>
#include <stdexcept>

namespace kbqa {

std::string_view to_string(ScorerKind kind) {
    switch (kind) {
        case ScorerKind::CharTrigram: return "char-trigram";
        case ScorerKind::LexicalBm25: return "lexical-bm25";
        case ScorerKind::DenseFile: return "dense-file";
    }
    return "char-trigram";
}

std::optional<ScorerKind> scorer_kind_from_string(std::string_view name) {
    if (name == "char-trigram") return ScorerKind::CharTrigram;
    if (name == "lexical-bm25") return ScorerKind::LexicalBm25;
    if (name == "dense-file") return ScorerKind::DenseFile;
    return std::nullopt;
}

void RetrievalConfig::validate() const {
    auto check_k = [](int k, const char* name) {
        if (k < 1) throw std::invalid_argument(std::string(name) + " must be >= 1");
    };
    check_k(k_e, "k_e");
    check_k(k_r, "k_r");
    check_k(k_1, "k_1");
    check_k(k_2, "k_2");
    auto check_t = [](double t, const char* name) {
        if (t < 0.0 || t > 1.0)
            throw std::invalid_argument(std::string(name) + " must be in [0,1]");
    };
    check_t(t_e, "t_e");
    check_t(t_r, "t_r");
    check_t(t_1, "t_1");
    check_t(t_2, "t_2");
    if (neighborhood_hops < 1) throw std::invalid_argument("neighborhood_hops must be >= 1");
    if (max_permutations < 1) throw std::invalid_argument("max_permutations must be >= 1");
    if (scorer == ScorerKind::DenseFile && embeddings_path.empty())
        throw std::invalid_argument("dense-file scorer needs an embeddings path");
}

ScorerSet make_scorers(const RetrievalConfig& config, const KbStore& kb) {
    ScorerSet set;
    switch (config.scorer) {
        case ScorerKind::CharTrigram: {
            std::shared_ptr<const SimilarityScorer> shared = make_char_trigram_scorer();
            set.entity = shared;
            set.relation = shared;
            break;
        }
        case ScorerKind::LexicalBm25: {
            std::vector<std::string> label_corpus;
            label_corpus.reserve(kb.labels().size());
            for (const auto& [id, label] : kb.labels()) label_corpus.push_back(label);
            set.entity = make_bm25_scorer(label_corpus);

            std::vector<std::string> relation_corpus;
            relation_corpus.reserve(kb.relations().size());
            for (const auto& relation : kb.relations())
                relation_corpus.push_back(relation_phrase(relation));
            set.relation = make_bm25_scorer(relation_corpus);
            break;
        }
        case ScorerKind::DenseFile: {
            std::shared_ptr<const SimilarityScorer> shared =
                make_dense_file_scorer(config.embeddings_path);
            set.entity = shared;
            set.relation = shared;
            break;
        }
    }
    return set;
}

std::string relation_phrase(std::string_view dotted) {
    std::string phrase;
    for (const auto& segment : relation_to_segments(dotted)) {
        if (!phrase.empty()) phrase += " , ";
        phrase += segment;
    }
    return phrase;
}

namespace {

std::string slot_phrase(const RelationSlot& slot) {
    std::string phrase;
    for (const auto& segment : slot.segments) {
        if (!phrase.empty()) phrase += " , ";
        phrase += segment;
    }
    return phrase;
}

std::vector<EntitySlot*> entity_slots(LogicalForm& lf) {
    std::vector<EntitySlot*> slots;
    auto walk = [&](auto&& self, LogicalForm& node) -> void {
        if (node.kind == NodeKind::EntityLeaf) slots.push_back(&node.entity);
        for (auto& child : node.children) self(self, child);
    };
    walk(walk, lf);
    return slots;
}

std::vector<RelationSlot*> relation_slots(LogicalForm& lf) {
    std::vector<RelationSlot*> slots;
    auto walk = [&](auto&& self, LogicalForm& node) -> void {
        if (node.kind == NodeKind::RelationLeaf) slots.push_back(&node.relation);
        for (auto& child : node.children) self(self, child);
    };
    walk(walk, lf);
    return slots;
}

struct ScoredText {
    std::string text;  // entity ID or dotted relation name
    double score = 0.0;
};

// Best-first enumeration of slot assignments by descending score product
// (ties: lexicographically smallest index vector first). `base` multiplies
// every product; enumeration stops at `limit` emissions or once the product
// falls below `threshold`.
class ProductEnumerator {
public:
    ProductEnumerator(const std::vector<std::vector<ScoredText>>& options, double base)
        : options_(options), base_(base) {}

    // Calls emit(assignment, score) in descending score order.
    template <class Emit>
    void enumerate(std::size_t limit, double threshold, int keep, Emit&& emit) {
        for (const auto& list : options_)
            if (list.empty()) return;

        struct State {
            double score;
            std::vector<std::size_t> indices;
        };
        auto later = [](const State& a, const State& b) {
            if (a.score != b.score) return a.score < b.score;
            return a.indices > b.indices;
        };
        std::priority_queue<State, std::vector<State>, decltype(later)> frontier(later);
        std::set<std::vector<std::size_t>> seen;

        std::vector<std::size_t> start(options_.size(), 0);
        frontier.push({product(start), start});
        seen.insert(start);

        std::size_t emitted = 0;
        int kept = 0;
        while (!frontier.empty() && emitted < limit) {
            State state = frontier.top();
            frontier.pop();
            if (state.score < threshold) break;  // descending order: nothing better follows
            emit(state.indices, state.score);
            ++emitted;
            if (keep >= 0 && ++kept >= keep) break;

            for (std::size_t i = 0; i < options_.size(); ++i) {
                if (state.indices[i] + 1 >= options_[i].size()) continue;
                std::vector<std::size_t> next = state.indices;
                ++next[i];
                if (seen.insert(next).second) frontier.push({product(next), next});
            }
        }
    }

private:
    double product(const std::vector<std::size_t>& indices) const {
        double p = base_;
        for (std::size_t i = 0; i < indices.size(); ++i) p *= options_[i][indices[i]].score;
        return p;
    }

    const std::vector<std::vector<ScoredText>>& options_;
    double base_;
};

std::vector<ScoredText> sorted_candidates(std::map<std::string, double> by_text, int k,
                                          double threshold) {
    std::vector<ScoredText> items;
    items.reserve(by_text.size());
    for (auto& [text, score] : by_text) items.push_back({text, score});
    // std::map iteration is ascending by text, so the stable top-k sort
    // breaks score ties deterministically.
    return top_k_with_threshold(std::move(items), k, threshold);
}

}  // namespace

std::vector<ScoredCandidate> retrieve_entities(const LogicalForm& form, int beam_rank,
                                               const KbStore& kb, const RetrievalConfig& config,
                                               const SimilarityScorer& scorer) {
    LogicalForm working = form;
    std::vector<EntitySlot*> slots;
    for (EntitySlot* slot : entity_slots(working)) {
        if (slot->state == SlotState::Grounded) continue;
        if (slot->state == SlotState::Masked) return {};  // nothing to match against
        slots.push_back(slot);
    }
    if (slots.empty()) return {ScoredCandidate{std::move(working), beam_rank, 1.0}};

    std::vector<std::vector<ScoredText>> options;
    options.reserve(slots.size());
    for (EntitySlot* slot : slots) {
        std::map<std::string, double> merged;
        if (config.entity_retrieval) {
            for (const auto& [id, label] : kb.labels()) {
                const double s = scorer.score(slot->label, label);
                auto it = merged.find(id);
                if (it == merged.end() || it->second < s) merged[id] = s;
            }
        }
        for (const auto& [id, weight] : kb.entity_candidates(slot->label)) {
            auto it = merged.find(id);
            if (it == merged.end() || it->second < weight) merged[id] = weight;
        }
        options.push_back(sorted_candidates(std::move(merged), config.k_e, config.t_e));
        if (options.back().empty()) return {};
    }

    std::vector<ScoredCandidate> results;
    ProductEnumerator enumerator(options, 1.0);
    enumerator.enumerate(config.max_permutations, config.t_1, config.k_1,
                         [&](const std::vector<std::size_t>& indices, double score) {
                             for (std::size_t i = 0; i < slots.size(); ++i)
                                 *slots[i] = EntitySlot::grounded(options[i][indices[i]].text);
                             results.push_back(ScoredCandidate{working, beam_rank, score});
                         });
    return results;
}

std::vector<ScoredCandidate> retrieve_relations(std::span<const ScoredCandidate> candidates,
                                                const KbStore& kb, const RetrievalConfig& config,
                                                const SimilarityScorer& scorer) {
    std::vector<ScoredCandidate> results;
    for (const ScoredCandidate& candidate : candidates) {
        LogicalForm working = candidate.form;

        std::set<std::string> grounded_entities;
        for (EntitySlot* slot : entity_slots(working))
            if (slot->state == SlotState::Grounded) grounded_entities.insert(slot->id);

        std::vector<RelationSlot*> slots;
        bool dead = false;
        for (RelationSlot* slot : relation_slots(working)) {
            if (slot->state == SlotState::Grounded) continue;
            if (slot->state == SlotState::Masked) {
                dead = true;
                break;
            }
            slots.push_back(slot);
        }
        if (dead) continue;
        if (slots.empty()) {
            results.push_back(ScoredCandidate{std::move(working), candidate.beam_rank,
                                              candidate.score});
            continue;
        }

        const std::set<std::string> nearby =
            kb.neighborhood(grounded_entities, config.neighborhood_hops);

        std::vector<std::vector<ScoredText>> options;
        options.reserve(slots.size());
        bool slot_without_candidates = false;
        for (RelationSlot* slot : slots) {
            std::map<std::string, double> merged;
            const std::string phrase = slot_phrase(*slot);
            if (config.relation_retrieval) {
                for (const auto& relation : nearby)
                    merged[relation] = scorer.score(phrase, relation_phrase(relation));
            }
            // The exact textualization inverse always competes at full score,
            // whatever the scorer; this is what keeps exactly-spelled slots
            // grounding at rank 1.
            try {
                const std::string exact = relation_from_text(slot->segments);
                if (kb.has_relation(exact)) merged[exact] = 1.0;
            } catch (const std::invalid_argument&) {
                // unmappable segments: retrieval candidates only
            }
            options.push_back(sorted_candidates(std::move(merged), config.k_r, config.t_r));
            if (options.back().empty()) {
                slot_without_candidates = true;
                break;
            }
        }
        if (slot_without_candidates) continue;

        ProductEnumerator enumerator(options, candidate.score);
        enumerator.enumerate(config.max_permutations, config.t_2, config.k_2,
                             [&](const std::vector<std::size_t>& indices, double score) {
                                 for (std::size_t i = 0; i < slots.size(); ++i)
                                     *slots[i] =
                                         RelationSlot::grounded(options[i][indices[i]].text);
                                 results.push_back(
                                     ScoredCandidate{working, candidate.beam_rank, score});
                             });
    }
    return results;
}

std::optional<GroundResult> ground(std::span<const LogicalForm> beam, const KbStore& kb,
                                   const RetrievalConfig& config, const ScorerSet& scorers) {
    config.validate();

    std::vector<ScoredCandidate> entity_phase;
    for (std::size_t rank = 0; rank < beam.size(); ++rank) {
        auto candidates =
            retrieve_entities(beam[rank], static_cast<int>(rank), kb, config, *scorers.entity);
        entity_phase.insert(entity_phase.end(), std::make_move_iterator(candidates.begin()),
                            std::make_move_iterator(candidates.end()));
    }

    std::vector<ScoredCandidate> relation_phase =
        retrieve_relations(entity_phase, kb, config, *scorers.relation);

    std::stable_sort(relation_phase.begin(), relation_phase.end(),
                     [](const ScoredCandidate& a, const ScoredCandidate& b) {
                         if (a.beam_rank != b.beam_rank) return a.beam_rank < b.beam_rank;
                         return a.score > b.score;
                     });

    for (ScoredCandidate& candidate : relation_phase) {
        sparql::SparqlQuery query;
        try {
            query = sparql::convert(candidate.form);
        } catch (const sparql::SparqlError&) {
            continue;  // not expressible, so not executable
        }
        if (!is_executable(candidate.form, kb)) continue;
        AnswerSet answers = execute(candidate.form, kb);
        return GroundResult{std::move(query), std::move(answers), std::move(candidate.form)};
    }
    return std::nullopt;
}

double retrieval_efficiency(
    std::span<const std::pair<std::string, std::vector<std::string>>> pairs,
    const SimilarityScorer& scorer) {
    if (pairs.empty()) throw std::invalid_argument("retrieval_efficiency: no pairs");
    double total = 0.0;
    for (const auto& [query, retrieved] : pairs) {
        if (retrieved.empty())
            throw std::invalid_argument("retrieval_efficiency: empty retrieved set");
        double sum = 0.0;
        for (const auto& text : retrieved) sum += scorer.score(query, text);
        total += sum / static_cast<double>(retrieved.size());
    }
    return total / static_cast<double>(pairs.size());
}

}  // namespace kbqa
