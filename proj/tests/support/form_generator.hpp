#pragma once

#include <random>
#include <vector>

#include "kbqa/kb_store.hpp"
#include "kbqa/logical_form.hpp"

namespace kbqa::test {

// Random grammar-valid AST for parse/print round trips. Slots are uniformly
// grounded or uniformly textual depending on `mode`; every operator can
// appear; leaf content is drawn from synthetic pools.
LogicalForm random_form(std::mt19937_64& rng, ParseMode mode, int max_depth = 6);

// Random grounded, type-correct, operator-rooted query over a KB: relation
// object kinds are respected, comparisons only apply to literal-valued
// sub-forms, and COUNT appears only at the root. Most leaves are drawn from
// the KB so results are frequently non-empty.
class GroundedQueryGenerator {
public:
    explicit GroundedQueryGenerator(const KbStore& kb);

    LogicalForm next(std::mt19937_64& rng);

    // Query rooted at a specific operator (COUNT wraps a random sub-form).
    LogicalForm rooted(std::mt19937_64& rng, NodeKind root);

private:
    struct RelationInfo {
        std::string name;
        bool literal_valued = false;
        LiteralKind kind = LiteralKind::Integer;  // when literal_valued
        std::vector<std::string> subjects;
        std::vector<std::string> object_entities;
        std::vector<Literal> object_literals;
    };

    LogicalForm entity_sub(std::mt19937_64& rng, int depth);
    LogicalForm literal_sub(std::mt19937_64& rng, int depth, const RelationInfo*& source);
    LogicalForm join_value(std::mt19937_64& rng, const RelationInfo& rel, int depth);
    const RelationInfo& pick(std::mt19937_64& rng, const std::vector<std::size_t>& pool);
    Literal pick_bound(std::mt19937_64& rng, const RelationInfo& rel);

    std::vector<RelationInfo> relations_;
    std::vector<std::size_t> entity_valued_;
    std::vector<std::size_t> literal_valued_;
    std::vector<std::string> all_entities_;
};

}  // namespace kbqa::test
