#include "kbqa/executor.hpp"

#include <algorithm>

namespace kbqa {

AnswerSet AnswerSet::of_entities(std::set<std::string> ids) {
    AnswerSet out;
    out.kind = Kind::Entities;
    out.entities = std::move(ids);
    return out;
}

AnswerSet AnswerSet::of_literals(std::set<Literal> values) {
    AnswerSet out;
    out.kind = Kind::Literals;
    out.literals = std::move(values);
    return out;
}

AnswerSet AnswerSet::of_count(std::uint64_t n) {
    AnswerSet out;
    out.kind = Kind::Count;
    out.count = n;
    return out;
}

std::size_t AnswerSet::size() const {
    return kind == Kind::Literals ? literals.size() : entities.size();
}

std::vector<std::string> AnswerSet::to_strings() const {
    std::vector<std::string> out;
    switch (kind) {
        case Kind::Count:
            out.push_back(std::to_string(count));
            break;
        case Kind::Entities:
            out.assign(entities.begin(), entities.end());
            break;
        case Kind::Literals:
            for (const auto& lit : literals) out.push_back(lit.lexical);
            std::sort(out.begin(), out.end());
            break;
    }
    return out;
}

bool operator==(const AnswerSet& a, const AnswerSet& b) {
    if (a.kind == AnswerSet::Kind::Count || b.kind == AnswerSet::Kind::Count)
        return a.kind == b.kind && a.count == b.count;
    if (a.empty() && b.empty()) return true;  // empty sets match regardless of kind tag
    return a.kind == b.kind && a.entities == b.entities && a.literals == b.literals;
}

namespace {

class Evaluator {
public:
    Evaluator(const KbStore& kb, const ExecOptions& options) : kb_(kb), options_(options) {}

    AnswerSet eval(const LogicalForm& lf) {
        switch (lf.kind) {
            case NodeKind::EntityLeaf: {
                if (lf.entity.state != SlotState::Grounded)
                    throw EvalError("cannot execute an ungrounded entity slot");
                return AnswerSet::of_entities({lf.entity.id});
            }
            case NodeKind::LiteralLeaf: {
                if (!lf.literal) throw EvalError("cannot execute a masked literal");
                return AnswerSet::of_literals({*lf.literal});
            }
            case NodeKind::RelationLeaf:
                throw EvalError("relation leaf is not a value");
            case NodeKind::Join:
                return eval_join(lf);
            case NodeKind::And:
                return eval_and(lf);
            case NodeKind::Count: {
                AnswerSet sub = eval_set(lf.children[0], "COUNT");
                return AnswerSet::of_count(sub.size());
            }
            case NodeKind::ArgMax:
            case NodeKind::ArgMin:
                return eval_arg_extreme(lf);
            default:
                return eval_comparison(lf);
        }
    }

private:
    const KbStore& kb_;
    const ExecOptions& options_;
    std::size_t expanded_ = 0;

    void charge(std::size_t members) {
        expanded_ += members;
        if (expanded_ > options_.expansion_cap)
            throw EvalError("expansion cap exceeded");
    }

    const RelationSlot& relation_of(const LogicalForm& leaf) const {
        if (leaf.relation.state != SlotState::Grounded)
            throw EvalError("cannot execute an ungrounded relation slot");
        return leaf.relation;
    }

    // Evaluates a child that must denote a set (not a count).
    AnswerSet eval_set(const LogicalForm& lf, const char* context) {
        AnswerSet result = eval(lf);
        if (result.kind == AnswerSet::Kind::Count)
            throw EvalError(std::string(context) + " cannot consume an aggregate result");
        return result;
    }

    AnswerSet eval_join(const LogicalForm& lf) {
        const std::string& relation = relation_of(lf.children[0]).dotted;
        AnswerSet value = eval_set(lf.children[1], "JOIN");

        if (!lf.reverse) {
            // (JOIN r o): subjects whose r-edge reaches any member of o.
            std::set<std::string> subjects;
            auto collect = [&](const TripleObject& object) {
                const auto& matches = kb_.subjects_of(relation, object);
                charge(matches.size());
                subjects.insert(matches.begin(), matches.end());
            };
            if (value.kind == AnswerSet::Kind::Literals)
                for (const auto& lit : value.literals) collect(TripleObject{lit});
            else
                for (const auto& id : value.entities) collect(TripleObject{id});
            return AnswerSet::of_entities(std::move(subjects));
        }

        // (JOIN (R r) s): objects reachable from members of s over r.
        // Literal members denote no subjects, so they contribute nothing.
        std::set<std::string> object_entities;
        std::set<Literal> object_literals;
        for (const auto& id : value.entities) {
            for (const auto& object : kb_.objects_of(id, relation)) {
                charge(1);
                if (const auto* entity = std::get_if<std::string>(&object))
                    object_entities.insert(*entity);
                else
                    object_literals.insert(std::get<Literal>(object));
            }
        }
        if (!object_entities.empty() && !object_literals.empty())
            throw EvalError("relation '" + relation + "' yields mixed entity/literal objects");
        if (!object_literals.empty()) return AnswerSet::of_literals(std::move(object_literals));
        return AnswerSet::of_entities(std::move(object_entities));
    }

    AnswerSet eval_and(const LogicalForm& lf) {
        AnswerSet lhs = eval_set(lf.children[0], "AND");
        AnswerSet rhs = eval_set(lf.children[1], "AND");
        if (lhs.empty() || rhs.empty())
            return AnswerSet::of_entities({});
        if (lhs.kind != rhs.kind)
            throw EvalError("AND over mismatched kinds (entities vs literals)");
        if (lhs.kind == AnswerSet::Kind::Entities) {
            std::set<std::string> result;
            std::set_intersection(lhs.entities.begin(), lhs.entities.end(), rhs.entities.begin(),
                                  rhs.entities.end(), std::inserter(result, result.begin()));
            return AnswerSet::of_entities(std::move(result));
        }
        std::set<Literal> result;
        std::set_intersection(lhs.literals.begin(), lhs.literals.end(), rhs.literals.begin(),
                              rhs.literals.end(), std::inserter(result, result.begin()));
        return AnswerSet::of_literals(std::move(result));
    }

    AnswerSet eval_arg_extreme(const LogicalForm& lf) {
        const bool want_max = lf.kind == NodeKind::ArgMax;
        const std::string& relation = relation_of(lf.children[1]).dotted;
        AnswerSet sub = eval_set(lf.children[0], "ARGMAX/ARGMIN");
        if (sub.kind == AnswerSet::Kind::Literals && !sub.literals.empty())
            throw EvalError("ARGMAX/ARGMIN requires an entity set");

        // Collect each entity's literal projections over `relation`; entities
        // without projections simply cannot attain the extremum.
        std::optional<Literal> extremum;
        std::vector<std::pair<std::string, Literal>> projections;
        for (const auto& id : sub.entities) {
            for (const auto& object : kb_.objects_of(id, relation)) {
                const auto* lit = std::get_if<Literal>(&object);
                if (lit == nullptr) continue;
                charge(1);
                projections.emplace_back(id, *lit);
                if (!extremum) {
                    extremum = *lit;
                    continue;
                }
                auto order = lit->compare(*extremum);
                if (!order)
                    throw EvalError("incomparable literal kinds under ARGMAX/ARGMIN projection");
                if ((want_max && *order > 0) || (!want_max && *order < 0)) extremum = *lit;
            }
        }
        std::set<std::string> winners;
        if (extremum) {
            for (const auto& [id, lit] : projections) {
                auto order = lit.compare(*extremum);
                if (!order)
                    throw EvalError("incomparable literal kinds under ARGMAX/ARGMIN projection");
                if (*order == 0) winners.insert(id);
            }
        }
        return AnswerSet::of_entities(std::move(winners));
    }

    AnswerSet eval_comparison(const LogicalForm& lf) {
        const LogicalForm& bound_leaf = lf.children[1];
        if (bound_leaf.kind != NodeKind::LiteralLeaf || !bound_leaf.literal)
            throw EvalError("comparison bound must be a literal");
        const Literal& bound = *bound_leaf.literal;

        AnswerSet sub = eval_set(lf.children[0], "comparison");
        if (sub.kind == AnswerSet::Kind::Entities && !sub.entities.empty())
            throw EvalError("comparison over non-literal operands");

        std::set<Literal> kept;
        for (const auto& lit : sub.literals) {
            auto order = lit.compare(bound);
            if (!order) throw EvalError("incomparable literal kinds in comparison");
            const bool keep = lf.kind == NodeKind::Gt   ? *order > 0
                              : lf.kind == NodeKind::Ge ? *order >= 0
                              : lf.kind == NodeKind::Lt ? *order < 0
                                                        : *order <= 0;
            if (keep) kept.insert(lit);
        }
        return AnswerSet::of_literals(std::move(kept));
    }
};

}  // namespace

AnswerSet execute(const LogicalForm& lf, const KbStore& kb, const ExecOptions& options) {
    return Evaluator(kb, options).eval(lf);
}

bool is_executable(const LogicalForm& lf, const KbStore& kb) noexcept {
    try {
        AnswerSet result = execute(lf, kb);
        if (result.kind == AnswerSet::Kind::Count) return result.count > 0;
        return !result.empty();
    } catch (...) {
        return false;
    }
}

}  // namespace kbqa
