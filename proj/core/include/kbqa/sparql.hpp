#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kbqa/executor.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/logical_form.hpp"

namespace kbqa {
namespace sparql {

class SparqlError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Subset AST
// ---------------------------------------------------------------------------
//
// The emitted grammar is deliberately small: one PREFIX line, a SELECT head
// (plain or COUNT), triple patterns over ns:-prefixed terms, comparison
// FILTERs, group braces for conjunction nesting, and MAX/MIN subselects for
// argmax/argmin. Everything else is rejected as out of subset.

struct SparqlTerm {
    enum class Kind { Variable, Entity, Relation, LiteralTerm };

    Kind kind = Kind::Variable;
    int var = -1;         // Variable
    std::string iri;      // Entity / Relation: the ns: local part
    Literal literal;      // LiteralTerm

    static SparqlTerm variable(int index);
    static SparqlTerm entity(std::string id);
    static SparqlTerm relation(std::string dotted);
    static SparqlTerm literal_term(Literal value);
};

enum class FilterOp { Gt, Ge, Lt, Le, Eq };

struct PatternItem;

struct TriplePattern {
    SparqlTerm subject;
    SparqlTerm predicate;
    SparqlTerm object;
};

struct FilterCompare {
    int lhs_var = -1;
    FilterOp op = FilterOp::Eq;
    SparqlTerm rhs;  // literal for comparisons, variable for argmax equality
};

struct GroupBlock {
    std::vector<PatternItem> items;
};

struct SubSelect {
    bool maximize = true;
    int agg_var = -1;  // aggregated variable inside the subselect
    int out_var = -1;  // variable the aggregate binds in the outer scope
    std::vector<PatternItem> items;
};

struct PatternItem {
    std::variant<TriplePattern, FilterCompare, GroupBlock, SubSelect> node;
};

struct SparqlQuery {
    std::string text;  // exactly reproducible from the AST fields below
    bool count = false;
    std::vector<PatternItem> body;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Deterministic compilation of a grounded logical form. The answer variable
// is ?x0; fresh variables are numbered in emission (pre-order) order.
SparqlQuery convert(const LogicalForm& lf);

// Parses exactly the emitted grammar; out-of-subset constructs are rejected
// with an error naming the offending token.
SparqlQuery parse_subset(std::string_view text);

// Renders the AST back to text; parse_subset(to_text(q)) reproduces q.
std::string to_text(const SparqlQuery& query);

// Independent pattern-matching evaluator over the raw triple list. Shares no
// evaluation code with execute(), so the two can cross-check each other.
AnswerSet execute_sparql(const SparqlQuery& query, const KbStore& kb);

// Inverse of convert over the emitted subset: invert(convert(lf)) == lf.
LogicalForm invert(const SparqlQuery& query);

}  // namespace sparql
}  // namespace kbqa
