#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbqa/kb_store.hpp"
#include "kbqa/logical_form.hpp"

namespace kbqa {

// Result of evaluating a logical form: a set of entities, a set of literals,
// or a single count. Empty entity and literal sets compare equal.
struct AnswerSet {
    enum class Kind { Entities, Literals, Count };

    Kind kind = Kind::Entities;
    std::set<std::string> entities;
    std::set<Literal> literals;
    std::uint64_t count = 0;

    static AnswerSet of_entities(std::set<std::string> ids);
    static AnswerSet of_literals(std::set<Literal> values);
    static AnswerSet of_count(std::uint64_t n);

    bool empty() const { return kind != Kind::Count && entities.empty() && literals.empty(); }
    std::size_t size() const;

    // Members (or the count) as sorted strings; the wire form of answers.
    std::vector<std::string> to_strings() const;

    friend bool operator==(const AnswerSet& a, const AnswerSet& b);
};

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExecOptions {
    // Upper bound on materialized intermediate members per query; exceeding
    // it raises EvalError rather than running away on a pathological form.
    std::size_t expansion_cap = 1'000'000;
};

// Evaluates a grounded, arity-valid logical form against the store.
// Throws EvalError on kind mismatches, incomparable literals, ungrounded
// slots, or a blown expansion cap.
AnswerSet execute(const LogicalForm& lf, const KbStore& kb, const ExecOptions& options = {});

// True iff execute() succeeds and the result is non-empty (for counts: the
// counted sub-form is non-empty). Errors map to false.
bool is_executable(const LogicalForm& lf, const KbStore& kb) noexcept;

}  // namespace kbqa
