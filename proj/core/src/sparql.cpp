#include "kbqa/sparql.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <set>

namespace kbqa {
namespace sparql {

namespace {

constexpr std::string_view kPrefixLine = "PREFIX ns: <http://rdf.freebase.com/ns/>";
constexpr std::string_view kSelectHead = "SELECT DISTINCT ?x0 WHERE {";
constexpr std::string_view kCountHead = "SELECT (COUNT(DISTINCT ?x0) AS ?cnt) WHERE {";

std::string_view op_text(FilterOp op) {
    switch (op) {
        case FilterOp::Gt: return ">";
        case FilterOp::Ge: return ">=";
        case FilterOp::Lt: return "<";
        case FilterOp::Le: return "<=";
        case FilterOp::Eq: return "=";
    }
    return "=";
}

}  // namespace

SparqlTerm SparqlTerm::variable(int index) {
    SparqlTerm t;
    t.kind = Kind::Variable;
    t.var = index;
    return t;
}

SparqlTerm SparqlTerm::entity(std::string id) {
    SparqlTerm t;
    t.kind = Kind::Entity;
    t.iri = std::move(id);
    return t;
}

SparqlTerm SparqlTerm::relation(std::string dotted) {
    SparqlTerm t;
    t.kind = Kind::Relation;
    t.iri = std::move(dotted);
    return t;
}

SparqlTerm SparqlTerm::literal_term(Literal value) {
    SparqlTerm t;
    t.kind = Kind::LiteralTerm;
    t.literal = std::move(value);
    return t;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string render_term(const SparqlTerm& term) {
    switch (term.kind) {
        case SparqlTerm::Kind::Variable: return "?x" + std::to_string(term.var);
        case SparqlTerm::Kind::Entity:
        case SparqlTerm::Kind::Relation: return "ns:" + term.iri;
        case SparqlTerm::Kind::LiteralTerm:
            return '"' + term.literal.lexical + "\"^^ns:" +
                   std::string(to_string(term.literal.kind));
    }
    return {};
}

void render_items(const std::vector<PatternItem>& items, std::string& out) {
    for (const auto& item : items) {
        if (const auto* triple = std::get_if<TriplePattern>(&item.node)) {
            out += render_term(triple->subject) + ' ' + render_term(triple->predicate) + ' ' +
                   render_term(triple->object) + " .\n";
        } else if (const auto* filter = std::get_if<FilterCompare>(&item.node)) {
            out += "FILTER(?x" + std::to_string(filter->lhs_var) + ' ' +
                   std::string(op_text(filter->op)) + ' ' + render_term(filter->rhs) + ")\n";
        } else if (const auto* group = std::get_if<GroupBlock>(&item.node)) {
            out += "{\n";
            render_items(group->items, out);
            out += "}\n";
        } else {
            const auto& sub = std::get<SubSelect>(item.node);
            out += "{\n";
            out += std::string("SELECT (") + (sub.maximize ? "MAX" : "MIN") + "(?x" +
                   std::to_string(sub.agg_var) + ") AS ?x" + std::to_string(sub.out_var) +
                   ") WHERE {\n";
            render_items(sub.items, out);
            out += "}\n";
            out += "}\n";
        }
    }
}

}  // namespace

std::string to_text(const SparqlQuery& query) {
    std::string out;
    out += kPrefixLine;
    out += '\n';
    out += query.count ? kCountHead : kSelectHead;
    out += '\n';
    render_items(query.body, out);
    out += '}';
    return out;
}

// ---------------------------------------------------------------------------
// Conversion from logical forms
// ---------------------------------------------------------------------------

namespace {

class Converter {
public:
    SparqlQuery run(const LogicalForm& lf) {
        const FormState state = grounding_state(lf);
        if (state != FormState::Grounded && state != FormState::NoSlots)
            throw SparqlError("convert requires a fully grounded logical form");

        SparqlQuery query;
        const LogicalForm* root = &lf;
        if (lf.kind == NodeKind::Count) {
            query.count = true;
            root = &lf.children[0];
        }
        if (!is_operator(root->kind))
            throw SparqlError("bare leaf forms have no query equivalent");
        compile(*root, 0, query.body);
        query.text = to_text(query);
        return query;
    }

private:
    int next_var_ = 1;

    int fresh_var() { return next_var_++; }

    static SparqlTerm value_leaf_term(const LogicalForm& leaf) {
        if (leaf.kind == NodeKind::EntityLeaf) return SparqlTerm::entity(leaf.entity.id);
        if (!leaf.literal) throw SparqlError("masked literal has no query equivalent");
        return SparqlTerm::literal_term(*leaf.literal);
    }

    void compile(const LogicalForm& lf, int var, std::vector<PatternItem>& out) {
        switch (lf.kind) {
            case NodeKind::Join: compile_join(lf, var, out); return;
            case NodeKind::And: {
                compile_conjunct(lf.children[0], var, out);
                compile_conjunct(lf.children[1], var, out);
                return;
            }
            case NodeKind::ArgMax:
            case NodeKind::ArgMin: compile_arg_extreme(lf, var, out); return;
            case NodeKind::Gt:
            case NodeKind::Ge:
            case NodeKind::Lt:
            case NodeKind::Le: {
                compile(lf.children[0], var, out);
                const LogicalForm& bound = lf.children[1];
                if (!bound.literal) throw SparqlError("masked literal has no query equivalent");
                FilterCompare filter;
                filter.lhs_var = var;
                filter.op = lf.kind == NodeKind::Gt   ? FilterOp::Gt
                            : lf.kind == NodeKind::Ge ? FilterOp::Ge
                            : lf.kind == NodeKind::Lt ? FilterOp::Lt
                                                      : FilterOp::Le;
                filter.rhs = SparqlTerm::literal_term(*bound.literal);
                out.push_back({std::move(filter)});
                return;
            }
            case NodeKind::Count:
                throw SparqlError("COUNT is only supported at the root");
            default:
                throw SparqlError("cannot compile a bare leaf sub-form");
        }
    }

    // AND children that are not plain JOINs are wrapped in group braces so
    // the conjunction tree shape survives the round trip through text.
    void compile_conjunct(const LogicalForm& child, int var, std::vector<PatternItem>& out) {
        if (child.kind == NodeKind::Join) {
            compile(child, var, out);
            return;
        }
        GroupBlock group;
        compile(child, var, group.items);
        out.push_back({std::move(group)});
    }

    void compile_join(const LogicalForm& lf, int var, std::vector<PatternItem>& out) {
        const RelationSlot& rel = lf.children[0].relation;
        if (rel.state != SlotState::Grounded) throw SparqlError("ungrounded relation slot");
        const LogicalForm& value = lf.children[1];
        const SparqlTerm anchor = SparqlTerm::variable(var);
        const SparqlTerm predicate = SparqlTerm::relation(rel.dotted);

        SparqlTerm value_term;
        const bool nested = is_operator(value.kind);
        int value_var = -1;
        if (nested) {
            value_var = fresh_var();
            value_term = SparqlTerm::variable(value_var);
        } else {
            if (value.kind == NodeKind::EntityLeaf && value.entity.state != SlotState::Grounded)
                throw SparqlError("ungrounded entity slot");
            value_term = value_leaf_term(value);
        }

        TriplePattern triple;
        if (lf.reverse) {
            triple = {value_term, predicate, anchor};
        } else {
            triple = {anchor, predicate, value_term};
        }
        out.push_back({std::move(triple)});
        if (nested) compile(value, value_var, out);
    }

    void compile_arg_extreme(const LogicalForm& lf, int var, std::vector<PatternItem>& out) {
        const RelationSlot& rel = lf.children[1].relation;
        if (rel.state != SlotState::Grounded) throw SparqlError("ungrounded relation slot");
        const LogicalForm& sub = lf.children[0];

        compile(sub, var, out);

        const int proj_var = fresh_var();
        out.push_back({TriplePattern{SparqlTerm::variable(var), SparqlTerm::relation(rel.dotted),
                                     SparqlTerm::variable(proj_var)}});

        SubSelect subselect;
        subselect.maximize = lf.kind == NodeKind::ArgMax;
        const int inner_anchor = fresh_var();
        compile(sub, inner_anchor, subselect.items);
        subselect.agg_var = fresh_var();
        subselect.items.push_back(
            {TriplePattern{SparqlTerm::variable(inner_anchor), SparqlTerm::relation(rel.dotted),
                           SparqlTerm::variable(subselect.agg_var)}});
        subselect.out_var = fresh_var();
        const int out_var = subselect.out_var;
        out.push_back({std::move(subselect)});

        FilterCompare filter;
        filter.lhs_var = proj_var;
        filter.op = FilterOp::Eq;
        filter.rhs = SparqlTerm::variable(out_var);
        out.push_back({std::move(filter)});
    }
};

}  // namespace

SparqlQuery convert(const LogicalForm& lf) { return Converter().run(lf); }

// ---------------------------------------------------------------------------
// Subset parser
// ---------------------------------------------------------------------------

namespace {

const char* kUnsupportedKeywords[] = {"OPTIONAL", "UNION",  "ORDER", "LIMIT",
                                      "OFFSET",   "GROUP",  "HAVING", "MINUS",
                                      "VALUES",   "BIND",   "SERVICE", "GRAPH",
                                      "ASK",      "CONSTRUCT", "DESCRIBE"};

class SubsetParser {
public:
    explicit SubsetParser(std::string_view text) {
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t nl = text.find('\n', start);
            if (nl == std::string_view::npos) {
                lines_.emplace_back(text.substr(start));
                break;
            }
            lines_.emplace_back(text.substr(start, nl - start));
            start = nl + 1;
        }
    }

    SparqlQuery run() {
        if (lines_.empty() || (lines_.size() == 1 && lines_[0].empty()))
            throw SparqlError("syntax error: empty query");
        expect_line(kPrefixLine);

        SparqlQuery query;
        const std::string_view head = next_line();
        if (head == kSelectHead) {
            query.count = false;
        } else if (head == kCountHead) {
            query.count = true;
        } else {
            check_unsupported(head);
            throw SparqlError("syntax error in SELECT head: '" + std::string(head) + "'");
        }

        query.body = parse_items();
        if (pos_ != lines_.size())
            throw SparqlError("trailing content after closing brace: '" +
                              std::string(lines_[pos_]) + "'");
        query.text = to_text(query);
        return query;
    }

private:
    std::vector<std::string> lines_;
    std::size_t pos_ = 0;

    bool at_end() const { return pos_ >= lines_.size(); }

    std::string_view peek_line() const {
        if (at_end()) throw SparqlError("unexpected end of query");
        return lines_[pos_];
    }

    std::string_view next_line() {
        std::string_view line = peek_line();
        ++pos_;
        return line;
    }

    void expect_line(std::string_view expected) {
        if (at_end() || lines_[pos_] != expected)
            throw SparqlError("expected '" + std::string(expected) + "'" +
                              (at_end() ? "" : ", got '" + lines_[pos_] + "'"));
        ++pos_;
    }

    static void check_unsupported(std::string_view line) {
        std::string_view token = line.substr(0, line.find(' '));
        for (const char* keyword : kUnsupportedKeywords)
            if (token == keyword)
                throw SparqlError("unsupported construct: " + std::string(keyword));
    }

    // Parses items until the closing '}' of the current scope (consumed).
    std::vector<PatternItem> parse_items() {
        std::vector<PatternItem> items;
        while (true) {
            std::string_view line = peek_line();
            if (line == "}") {
                ++pos_;
                return items;
            }
            if (line == "{") {
                ++pos_;
                if (!at_end() && peek_line().substr(0, 8) == "SELECT (") {
                    items.push_back({parse_subselect()});
                } else {
                    GroupBlock group;
                    group.items = parse_items();
                    items.push_back({std::move(group)});
                }
                continue;
            }
            if (line.substr(0, 7) == "FILTER(") {
                items.push_back({parse_filter(line)});
                ++pos_;
                continue;
            }
            check_unsupported(line);
            items.push_back({parse_triple(line)});
            ++pos_;
        }
    }

    SubSelect parse_subselect() {
        const std::string_view head = next_line();
        // SELECT (MAX(?xA) AS ?xB) WHERE {
        SubSelect sub;
        std::string_view rest = head;
        if (rest.substr(0, 8) != "SELECT (")
            throw SparqlError("syntax error in subquery head: '" + std::string(head) + "'");
        rest.remove_prefix(8);
        if (rest.substr(0, 4) == "MAX(") {
            sub.maximize = true;
            rest.remove_prefix(4);
        } else if (rest.substr(0, 4) == "MIN(") {
            sub.maximize = false;
            rest.remove_prefix(4);
        } else {
            throw SparqlError("unsupported aggregate in subquery: '" + std::string(head) + "'");
        }
        std::size_t close = rest.find(')');
        if (close == std::string_view::npos)
            throw SparqlError("syntax error in subquery head: '" + std::string(head) + "'");
        sub.agg_var = parse_var(rest.substr(0, close));
        rest.remove_prefix(close + 1);
        if (rest.substr(0, 4) != " AS ")
            throw SparqlError("syntax error in subquery head: '" + std::string(head) + "'");
        rest.remove_prefix(4);
        close = rest.find(')');
        if (close == std::string_view::npos || rest.substr(close) != ") WHERE {")
            throw SparqlError("syntax error in subquery head: '" + std::string(head) + "'");
        sub.out_var = parse_var(rest.substr(0, close));
        sub.items = parse_items();  // consumes the subselect's '}'
        expect_line("}");           // and the wrapping block's '}'
        return sub;
    }

    FilterCompare parse_filter(std::string_view line) {
        if (line.back() != ')')
            throw SparqlError("syntax error in FILTER: '" + std::string(line) + "'");
        std::string_view inner = line.substr(7, line.size() - 8);
        std::size_t sp1 = inner.find(' ');
        std::size_t sp2 = inner.rfind(' ');
        if (sp1 == std::string_view::npos || sp2 == sp1)
            throw SparqlError("syntax error in FILTER: '" + std::string(line) + "'");
        FilterCompare filter;
        filter.lhs_var = parse_var(inner.substr(0, sp1));
        const std::string_view op = inner.substr(sp1 + 1, sp2 - sp1 - 1);
        if (op == ">") filter.op = FilterOp::Gt;
        else if (op == ">=") filter.op = FilterOp::Ge;
        else if (op == "<") filter.op = FilterOp::Lt;
        else if (op == "<=") filter.op = FilterOp::Le;
        else if (op == "=") filter.op = FilterOp::Eq;
        else throw SparqlError("unsupported filter operator: '" + std::string(op) + "'");
        filter.rhs = parse_term(inner.substr(sp2 + 1), TermPosition::FilterRhs);
        return filter;
    }

    TriplePattern parse_triple(std::string_view line) {
        if (line.size() < 2 || line.substr(line.size() - 2) != " .")
            throw SparqlError("pattern line must end with ' .': '" + std::string(line) + "'");
        std::string_view body = line.substr(0, line.size() - 2);
        std::size_t sp1 = body.find(' ');
        std::size_t sp2 = body.rfind(' ');
        if (sp1 == std::string_view::npos || sp2 == sp1)
            throw SparqlError("syntax error in triple pattern: '" + std::string(line) + "'");
        TriplePattern triple;
        triple.subject = parse_term(body.substr(0, sp1), TermPosition::SubjectObject);
        triple.predicate = parse_term(body.substr(sp1 + 1, sp2 - sp1 - 1), TermPosition::Predicate);
        triple.object = parse_term(body.substr(sp2 + 1), TermPosition::SubjectObject);
        return triple;
    }

    enum class TermPosition { SubjectObject, Predicate, FilterRhs };

    static int parse_var(std::string_view text) {
        if (text.substr(0, 2) != "?x")
            throw SparqlError("expected variable, got '" + std::string(text) + "'");
        int index = -1;
        auto digits = text.substr(2);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || index < 0)
            throw SparqlError("bad variable name '" + std::string(text) + "'");
        return index;
    }

    static SparqlTerm parse_term(std::string_view text, TermPosition position) {
        if (text.empty()) throw SparqlError("empty term");
        if (text[0] == '?') {
            if (position == TermPosition::Predicate)
                throw SparqlError("unsupported construct: variable predicate");
            return SparqlTerm::variable(parse_var(text));
        }
        if (text[0] == '"') {
            if (position == TermPosition::Predicate)
                throw SparqlError("literal cannot be a predicate");
            std::size_t close = text.find('"', 1);
            if (close == std::string_view::npos)
                throw SparqlError("unterminated literal: '" + std::string(text) + "'");
            std::string lexical(text.substr(1, close - 1));
            std::string_view tag = text.substr(close + 1);
            if (tag.substr(0, 5) != "^^ns:")
                throw SparqlError("literal needs a ^^ns: kind tag: '" + std::string(text) + "'");
            auto kind = literal_kind_from_string(tag.substr(5));
            if (!kind)
                throw SparqlError("unknown literal kind tag '" + std::string(tag.substr(5)) + "'");
            auto inferred = Literal::infer(lexical);
            if (!inferred || inferred->kind != *kind)
                throw SparqlError("literal lexical form does not match its kind tag: '" +
                                  std::string(text) + "'");
            return SparqlTerm::literal_term(*inferred);
        }
        if (text.substr(0, 3) == "ns:") {
            std::string local(text.substr(3));
            if (local.empty()) throw SparqlError("empty ns: term");
            if (position == TermPosition::Predicate) {
                for (const auto& segment : relation_to_segments(local))
                    if (segment.empty())
                        throw SparqlError("bad relation name '" + local + "'");
                return SparqlTerm::relation(std::move(local));
            }
            if (!EntitySlot::valid_id(local))
                throw SparqlError("expected an entity ID, got 'ns:" + local + "'");
            return SparqlTerm::entity(std::move(local));
        }
        throw SparqlError("unsupported term: '" + std::string(text) + "'");
    }
};

}  // namespace

SparqlQuery parse_subset(std::string_view text) { return SubsetParser(text).run(); }

// ---------------------------------------------------------------------------
// Evaluation (independent of the direct executor)
// ---------------------------------------------------------------------------

namespace {

using Binding = std::map<int, TripleObject>;

bool objects_equal(const TripleObject& a, const TripleObject& b) {
    if (a.index() != b.index()) return false;
    if (const auto* id = std::get_if<std::string>(&a)) return *id == std::get<std::string>(b);
    const auto& la = std::get<Literal>(a);
    const auto& lb = std::get<Literal>(b);
    return la.kind == lb.kind && la.lexical == lb.lexical;
}

class SubsetEvaluator {
public:
    explicit SubsetEvaluator(const KbStore& kb) : kb_(kb) {}

    AnswerSet run(const SparqlQuery& query) {
        std::vector<Binding> rows{Binding{}};
        rows = eval_items(query.body, std::move(rows));

        std::set<std::string> entity_values;
        std::set<Literal> literal_values;
        for (const auto& row : rows) {
            auto it = row.find(0);
            if (it == row.end()) throw SparqlError("unbound select variable ?x0");
            if (const auto* id = std::get_if<std::string>(&it->second))
                entity_values.insert(*id);
            else
                literal_values.insert(std::get<Literal>(it->second));
        }
        if (!entity_values.empty() && !literal_values.empty())
            throw SparqlError("mixed entity/literal bindings for ?x0");

        if (query.count)
            return AnswerSet::of_count(entity_values.size() + literal_values.size());
        if (!literal_values.empty()) return AnswerSet::of_literals(std::move(literal_values));
        return AnswerSet::of_entities(std::move(entity_values));
    }

private:
    const KbStore& kb_;

    std::vector<Binding> eval_items(const std::vector<PatternItem>& items,
                                    std::vector<Binding> rows) {
        for (const auto& item : items) {
            if (const auto* triple = std::get_if<TriplePattern>(&item.node))
                rows = eval_triple(*triple, std::move(rows));
            else if (const auto* filter = std::get_if<FilterCompare>(&item.node))
                rows = eval_filter(*filter, std::move(rows));
            else if (const auto* group = std::get_if<GroupBlock>(&item.node))
                rows = eval_items(group->items, std::move(rows));
            else
                rows = eval_subselect(std::get<SubSelect>(item.node), std::move(rows));
            if (rows.empty()) return rows;
        }
        return rows;
    }

    // Resolves a term under a binding; nullopt = unbound variable.
    static std::optional<TripleObject> resolve(const SparqlTerm& term, const Binding& row) {
        switch (term.kind) {
            case SparqlTerm::Kind::Variable: {
                auto it = row.find(term.var);
                if (it == row.end()) return std::nullopt;
                return it->second;
            }
            case SparqlTerm::Kind::Entity: return TripleObject{term.iri};
            case SparqlTerm::Kind::LiteralTerm: return TripleObject{term.literal};
            case SparqlTerm::Kind::Relation:
                throw SparqlError("relation term outside predicate position");
        }
        return std::nullopt;
    }

    std::vector<Binding> eval_triple(const TriplePattern& pattern, std::vector<Binding> rows) {
        if (pattern.predicate.kind != SparqlTerm::Kind::Relation)
            throw SparqlError("unsupported construct: non-constant predicate");
        const bool self_loop = pattern.subject.kind == SparqlTerm::Kind::Variable &&
                               pattern.object.kind == SparqlTerm::Kind::Variable &&
                               pattern.subject.var == pattern.object.var;
        std::vector<Binding> out;
        for (const auto& row : rows) {
            const auto subject = resolve(pattern.subject, row);
            const auto object = resolve(pattern.object, row);
            for (const auto& triple : kb_.triples()) {
                if (triple.relation != pattern.predicate.iri) continue;
                const TripleObject triple_subject{triple.subject};
                if (subject && !objects_equal(*subject, triple_subject)) continue;
                if (object && !objects_equal(*object, triple.object)) continue;
                if (self_loop && !objects_equal(triple_subject, triple.object)) continue;
                Binding extended = row;
                if (!subject) extended[pattern.subject.var] = triple_subject;
                if (!object) extended[pattern.object.var] = triple.object;
                out.push_back(std::move(extended));
            }
        }
        return out;
    }

    std::vector<Binding> eval_filter(const FilterCompare& filter, std::vector<Binding> rows) {
        std::vector<Binding> out;
        for (auto& row : rows) {
            auto lhs_it = row.find(filter.lhs_var);
            if (lhs_it == row.end()) throw SparqlError("FILTER references unbound variable");
            const TripleObject& lhs = lhs_it->second;
            auto rhs = resolve(filter.rhs, row);
            if (!rhs) throw SparqlError("FILTER references unbound variable");

            bool keep = false;
            if (filter.op == FilterOp::Eq) {
                if (object_is_entity(lhs) != object_is_entity(*rhs)) {
                    keep = false;
                } else if (object_is_entity(lhs)) {
                    keep = std::get<std::string>(lhs) == std::get<std::string>(*rhs);
                } else {
                    auto order = std::get<Literal>(lhs).compare(std::get<Literal>(*rhs));
                    if (!order) throw SparqlError("incomparable literals in FILTER");
                    keep = *order == 0;
                }
            } else {
                if (object_is_entity(lhs) || object_is_entity(*rhs))
                    throw SparqlError("comparison over non-literal term");
                auto order = std::get<Literal>(lhs).compare(std::get<Literal>(*rhs));
                if (!order) throw SparqlError("incomparable literals in FILTER");
                keep = filter.op == FilterOp::Gt   ? *order > 0
                       : filter.op == FilterOp::Ge ? *order >= 0
                       : filter.op == FilterOp::Lt ? *order < 0
                                                   : *order <= 0;
            }
            if (keep) out.push_back(std::move(row));
        }
        return out;
    }

    std::vector<Binding> eval_subselect(const SubSelect& sub, std::vector<Binding> rows) {
        std::vector<Binding> inner = eval_items(sub.items, {Binding{}});
        std::optional<Literal> extremum;
        for (const auto& row : inner) {
            auto it = row.find(sub.agg_var);
            if (it == row.end()) throw SparqlError("aggregate over unbound variable");
            const auto* lit = std::get_if<Literal>(&it->second);
            if (lit == nullptr) throw SparqlError("MAX/MIN over non-literal values");
            if (!extremum) {
                extremum = *lit;
                continue;
            }
            auto order = lit->compare(*extremum);
            if (!order) throw SparqlError("incomparable literals under MAX/MIN");
            if ((sub.maximize && *order > 0) || (!sub.maximize && *order < 0)) extremum = *lit;
        }
        if (!extremum) return {};  // empty aggregate kills the outer rows
        std::vector<Binding> out;
        for (auto& row : rows) {
            Binding extended = std::move(row);
            extended[sub.out_var] = TripleObject{*extremum};
            out.push_back(std::move(extended));
        }
        return out;
    }
};

}  // namespace

AnswerSet execute_sparql(const SparqlQuery& query, const KbStore& kb) {
    return SubsetEvaluator(kb).run(query);
}

// ---------------------------------------------------------------------------
// Inversion
// ---------------------------------------------------------------------------

namespace {

// Reconstructs logical forms from the emitted pattern discipline: every
// fresh variable is introduced by exactly one triple linking it to an older
// variable, conjuncts at a variable fold into binary ANDs (group braces mark
// nested conjunctions), trailing comparison filters fold into GT/GE/LT/LE,
// and the projection-triple + MAX/MIN-subselect + equality-filter signature
// folds into ARGMAX/ARGMIN.
class Inverter {
public:
    LogicalForm run(const SparqlQuery& query) {
        std::size_t cursor = 0;
        LogicalForm form = reconstruct(0, query.body, cursor);
        if (cursor != query.body.size())
            throw SparqlError("unsupported: disconnected graph pattern");
        if (query.count) return LogicalForm::count(std::move(form));
        return form;
    }

private:
    static int min_var(const SparqlTerm& term) {
        return term.kind == SparqlTerm::Kind::Variable ? term.var : -1;
    }

    // The context variable an item is anchored to: the smallest variable it
    // mentions (context variables are always allocated before fresh ones).
    static int anchor_var(const PatternItem& item) {
        if (const auto* triple = std::get_if<TriplePattern>(&item.node)) {
            int a = min_var(triple->subject);
            int b = min_var(triple->object);
            if (a < 0) return b;
            if (b < 0) return a;
            return std::min(a, b);
        }
        if (const auto* filter = std::get_if<FilterCompare>(&item.node)) {
            int rhs = min_var(filter->rhs);
            return rhs < 0 ? filter->lhs_var : std::min(filter->lhs_var, rhs);
        }
        if (const auto* group = std::get_if<GroupBlock>(&item.node)) {
            if (group->items.empty()) throw SparqlError("unsupported: empty group");
            return anchor_var(group->items.front());
        }
        return -1;  // bare subselects never anchor; they are eaten by the argmax signature
    }

    static LogicalForm leaf_from_term(const SparqlTerm& term) {
        if (term.kind == SparqlTerm::Kind::Entity)
            return LogicalForm::entity_leaf(EntitySlot::grounded(term.iri));
        if (term.kind == SparqlTerm::Kind::LiteralTerm)
            return LogicalForm::literal_leaf(term.literal);
        throw SparqlError("unsupported term in value position");
    }

    static LogicalForm fold(std::vector<LogicalForm> conjuncts) {
        if (conjuncts.size() == 1) return std::move(conjuncts[0]);
        if (conjuncts.size() == 2)
            return LogicalForm::and_of(std::move(conjuncts[0]), std::move(conjuncts[1]));
        throw SparqlError("unsupported: cannot reconstruct conjunction of " +
                          std::to_string(conjuncts.size()) + " parts");
    }

    LogicalForm reconstruct(int var, const std::vector<PatternItem>& items, std::size_t& cursor) {
        std::vector<LogicalForm> conjuncts;
        while (cursor < items.size()) {
            const PatternItem& item = items[cursor];
            if (anchor_var(item) != var) break;

            if (const auto* group = std::get_if<GroupBlock>(&item.node)) {
                ++cursor;
                std::size_t inner = 0;
                LogicalForm sub = reconstruct(var, group->items, inner);
                if (inner != group->items.size())
                    throw SparqlError("unsupported: disconnected pattern inside group");
                conjuncts.push_back(std::move(sub));
                continue;
            }

            if (const auto* triple = std::get_if<TriplePattern>(&item.node)) {
                const bool forward = triple->subject.kind == SparqlTerm::Kind::Variable &&
                                     triple->subject.var == var;
                const SparqlTerm& other = forward ? triple->object : triple->subject;

                if (forward && other.kind == SparqlTerm::Kind::Variable &&
                    matches_arg_extreme(*triple, items, cursor)) {
                    const auto& sub = std::get<SubSelect>(items[cursor + 1].node);
                    if (conjuncts.empty())
                        throw SparqlError("unsupported: MAX/MIN projection with no operand");
                    LogicalForm operand = fold(std::move(conjuncts));
                    conjuncts.clear();
                    validate_subselect(*triple, sub, operand);
                    conjuncts.push_back(LogicalForm::arg_extreme(
                        sub.maximize, std::move(operand),
                        RelationSlot::grounded(triple->predicate.iri)));
                    cursor += 3;  // projection triple, subselect, equality filter
                    continue;
                }

                ++cursor;
                RelationSlot rel = RelationSlot::grounded(triple->predicate.iri);
                if (other.kind != SparqlTerm::Kind::Variable) {
                    conjuncts.push_back(
                        LogicalForm::join(std::move(rel), leaf_from_term(other), !forward));
                    continue;
                }
                if (other.var == var) throw SparqlError("unsupported: self-loop pattern");
                LogicalForm value = reconstruct(other.var, items, cursor);
                conjuncts.push_back(LogicalForm::join(std::move(rel), std::move(value), !forward));
                continue;
            }

            if (const auto* filter = std::get_if<FilterCompare>(&item.node)) {
                if (filter->op == FilterOp::Eq)
                    throw SparqlError("unsupported: equality filter outside MAX/MIN pattern");
                if (filter->rhs.kind != SparqlTerm::Kind::LiteralTerm)
                    throw SparqlError("unsupported: comparison filter needs a literal bound");
                if (conjuncts.empty())
                    throw SparqlError("unsupported: filter before any pattern");
                NodeKind op = filter->op == FilterOp::Gt   ? NodeKind::Gt
                              : filter->op == FilterOp::Ge ? NodeKind::Ge
                              : filter->op == FilterOp::Lt ? NodeKind::Lt
                                                           : NodeKind::Le;
                LogicalForm sub = fold(std::move(conjuncts));
                conjuncts.clear();
                conjuncts.push_back(
                    LogicalForm::comparison(op, std::move(sub), filter->rhs.literal));
                ++cursor;
                continue;
            }

            throw SparqlError("unsupported: subquery outside MAX/MIN pattern");
        }
        if (conjuncts.empty()) throw SparqlError("unsupported: no pattern for variable");
        return fold(std::move(conjuncts));
    }

    static bool matches_arg_extreme(const TriplePattern& projection,
                                    const std::vector<PatternItem>& items, std::size_t cursor) {
        if (cursor + 2 >= items.size()) return false;
        const auto* sub = std::get_if<SubSelect>(&items[cursor + 1].node);
        const auto* eq = std::get_if<FilterCompare>(&items[cursor + 2].node);
        return sub != nullptr && eq != nullptr && eq->op == FilterOp::Eq &&
               eq->lhs_var == projection.object.var &&
               eq->rhs.kind == SparqlTerm::Kind::Variable && eq->rhs.var == sub->out_var;
    }

    // The subselect body must be the operand recompiled at a fresh anchor
    // plus one projection triple over the same relation.
    void validate_subselect(const TriplePattern& projection, const SubSelect& sub,
                            const LogicalForm& operand) {
        if (sub.items.size() < 2) throw SparqlError("unsupported: malformed MAX/MIN subquery");
        const auto* inner_proj = std::get_if<TriplePattern>(&sub.items.back().node);
        if (inner_proj == nullptr || inner_proj->subject.kind != SparqlTerm::Kind::Variable ||
            inner_proj->object.kind != SparqlTerm::Kind::Variable ||
            inner_proj->object.var != sub.agg_var ||
            inner_proj->predicate.iri != projection.predicate.iri)
            throw SparqlError("unsupported: malformed MAX/MIN subquery");

        std::vector<PatternItem> inner_body(sub.items.begin(), sub.items.end() - 1);
        std::size_t inner_cursor = 0;
        LogicalForm inner_form = reconstruct(inner_proj->subject.var, inner_body, inner_cursor);
        if (inner_cursor != inner_body.size())
            throw SparqlError("unsupported: disconnected pattern inside MAX/MIN subquery");
        if (!(inner_form == operand))
            throw SparqlError("unsupported: MAX/MIN subquery body does not match its operand");
    }
};

}  // namespace

LogicalForm invert(const SparqlQuery& query) {
    Inverter inverter;
    return inverter.run(query);
}

}  // namespace sparql
}  // namespace kbqa
