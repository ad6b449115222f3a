#include "kbqa/logical_form.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace kbqa {

namespace {

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Literal
// ---------------------------------------------------------------------------

std::string_view to_string(LiteralKind kind) {
    switch (kind) {
        case LiteralKind::Integer: return "integer";
        case LiteralKind::Float: return "float";
        case LiteralKind::Year: return "year";
        case LiteralKind::YearMonth: return "year_month";
        case LiteralKind::Date: return "date";
    }
    return "integer";
}

std::optional<LiteralKind> literal_kind_from_string(std::string_view name) {
    if (name == "integer") return LiteralKind::Integer;
    if (name == "float") return LiteralKind::Float;
    if (name == "year") return LiteralKind::Year;
    if (name == "year_month") return LiteralKind::YearMonth;
    if (name == "date") return LiteralKind::Date;
    return std::nullopt;
}

std::optional<Literal> Literal::infer(std::string_view text) {
    if (text.empty()) return std::nullopt;

    std::string_view digits = text;
    const bool negative = digits.front() == '-';
    if (negative) digits.remove_prefix(1);
    if (digits.empty()) return std::nullopt;

    // integer / year: 4-digit unsigned tokens are years
    if (all_digits(digits)) {
        if (!negative && digits.size() == 4) return Literal{std::string(text), LiteralKind::Year};
        return Literal{std::string(text), LiteralKind::Integer};
    }

    // float: -?digits.digits
    if (auto dot = digits.find('.'); dot != std::string_view::npos) {
        if (dot > 0 && all_digits(digits.substr(0, dot)) && all_digits(digits.substr(dot + 1)))
            return Literal{std::string(text), LiteralKind::Float};
        return std::nullopt;
    }

    // year-month / date (never signed)
    if (negative) return std::nullopt;
    if (digits.size() == 7 && digits[4] == '-' && all_digits(digits.substr(0, 4)) &&
        all_digits(digits.substr(5)))
        return Literal{std::string(text), LiteralKind::YearMonth};
    if (digits.size() == 10 && digits[4] == '-' && digits[7] == '-' &&
        all_digits(digits.substr(0, 4)) && all_digits(digits.substr(5, 2)) &&
        all_digits(digits.substr(8)))
        return Literal{std::string(text), LiteralKind::Date};
    return std::nullopt;
}

namespace {

struct DateValue {
    int year = 0;
    int month = 1;
    int day = 1;
    auto operator<=>(const DateValue&) const = default;
};

int parse_int(std::string_view s) {
    int value = 0;
    std::from_chars(s.data(), s.data() + s.size(), value);
    return value;
}

DateValue temporal_value(const Literal& lit) {
    std::string_view s = lit.lexical;
    DateValue v;
    v.year = parse_int(s.substr(0, 4));
    if (lit.kind != LiteralKind::Year) v.month = parse_int(s.substr(5, 2));
    if (lit.kind == LiteralKind::Date) v.day = parse_int(s.substr(8, 2));
    return v;
}

}  // namespace

std::optional<int> Literal::compare(const Literal& other) const {
    if (is_numeric() != other.is_numeric()) return std::nullopt;
    if (is_numeric()) {
        const double a = std::stod(lexical);
        const double b = std::stod(other.lexical);
        return a < b ? -1 : (a > b ? 1 : 0);
    }
    const DateValue a = temporal_value(*this);
    const DateValue b = temporal_value(other);
    return a < b ? -1 : (a > b ? 1 : 0);
}

// ---------------------------------------------------------------------------
// Slots
// ---------------------------------------------------------------------------

bool EntitySlot::valid_id(std::string_view id) {
    if (id.size() < 3 || (id[0] != 'm' && id[0] != 'g') || id[1] != '.') return false;
    return std::all_of(id.begin() + 2, id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

EntitySlot EntitySlot::grounded(std::string id) {
    EntitySlot slot;
    slot.state = SlotState::Grounded;
    slot.id = std::move(id);
    return slot;
}

EntitySlot EntitySlot::textual(std::string label) {
    EntitySlot slot;
    slot.state = SlotState::Textual;
    slot.label = std::move(label);
    return slot;
}

RelationSlot RelationSlot::grounded(std::string dotted) {
    RelationSlot slot;
    slot.state = SlotState::Grounded;
    slot.dotted = std::move(dotted);
    return slot;
}

RelationSlot RelationSlot::textual(std::vector<std::string> segments) {
    RelationSlot slot;
    slot.state = SlotState::Textual;
    slot.segments = std::move(segments);
    return slot;
}

// ---------------------------------------------------------------------------
// Node helpers
// ---------------------------------------------------------------------------

bool is_operator(NodeKind kind) {
    return kind != NodeKind::EntityLeaf && kind != NodeKind::RelationLeaf &&
           kind != NodeKind::LiteralLeaf;
}

bool is_comparison(NodeKind kind) {
    return kind == NodeKind::Gt || kind == NodeKind::Ge || kind == NodeKind::Lt ||
           kind == NodeKind::Le;
}

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Join: return "JOIN";
        case NodeKind::And: return "AND";
        case NodeKind::Count: return "COUNT";
        case NodeKind::ArgMax: return "ARGMAX";
        case NodeKind::ArgMin: return "ARGMIN";
        case NodeKind::Gt: return "GT";
        case NodeKind::Ge: return "GE";
        case NodeKind::Lt: return "LT";
        case NodeKind::Le: return "LE";
        case NodeKind::EntityLeaf: return "entity";
        case NodeKind::RelationLeaf: return "relation";
        case NodeKind::LiteralLeaf: return "literal";
    }
    return "?";
}

LogicalForm LogicalForm::entity_leaf(EntitySlot slot) {
    LogicalForm lf;
    lf.kind = NodeKind::EntityLeaf;
    lf.entity = std::move(slot);
    return lf;
}

LogicalForm LogicalForm::relation_leaf(RelationSlot slot) {
    LogicalForm lf;
    lf.kind = NodeKind::RelationLeaf;
    lf.relation = std::move(slot);
    return lf;
}

LogicalForm LogicalForm::literal_leaf(Literal value) {
    LogicalForm lf;
    lf.kind = NodeKind::LiteralLeaf;
    lf.literal = std::move(value);
    return lf;
}

LogicalForm LogicalForm::masked_literal_leaf() {
    LogicalForm lf;
    lf.kind = NodeKind::LiteralLeaf;
    return lf;
}

LogicalForm LogicalForm::join(RelationSlot rel, LogicalForm value, bool reverse) {
    LogicalForm lf;
    lf.kind = NodeKind::Join;
    lf.reverse = reverse;
    lf.children.push_back(relation_leaf(std::move(rel)));
    lf.children.push_back(std::move(value));
    return lf;
}

LogicalForm LogicalForm::and_of(LogicalForm lhs, LogicalForm rhs) {
    LogicalForm lf;
    lf.kind = NodeKind::And;
    lf.children.push_back(std::move(lhs));
    lf.children.push_back(std::move(rhs));
    return lf;
}

LogicalForm LogicalForm::count(LogicalForm sub) {
    LogicalForm lf;
    lf.kind = NodeKind::Count;
    lf.children.push_back(std::move(sub));
    return lf;
}

LogicalForm LogicalForm::arg_extreme(bool max, LogicalForm sub, RelationSlot rel) {
    LogicalForm lf;
    lf.kind = max ? NodeKind::ArgMax : NodeKind::ArgMin;
    lf.children.push_back(std::move(sub));
    lf.children.push_back(relation_leaf(std::move(rel)));
    return lf;
}

LogicalForm LogicalForm::comparison(NodeKind op, LogicalForm sub, Literal bound) {
    LogicalForm lf;
    lf.kind = op;
    lf.children.push_back(std::move(sub));
    lf.children.push_back(literal_leaf(std::move(bound)));
    return lf;
}

FormState grounding_state(const LogicalForm& lf) {
    bool has_grounded = false, has_textual = false, has_masked = false;

    auto visit = [&](auto&& self, const LogicalForm& node) -> void {
        switch (node.kind) {
            case NodeKind::EntityLeaf:
                (node.entity.state == SlotState::Grounded  ? has_grounded
                 : node.entity.state == SlotState::Textual ? has_textual
                                                           : has_masked) = true;
                break;
            case NodeKind::RelationLeaf:
                (node.relation.state == SlotState::Grounded  ? has_grounded
                 : node.relation.state == SlotState::Textual ? has_textual
                                                             : has_masked) = true;
                break;
            default:
                break;
        }
        for (const auto& child : node.children) self(self, child);
    };
    visit(visit, lf);

    if (has_grounded && has_textual) return FormState::Mixed;
    if (has_grounded) return FormState::Grounded;
    if (has_textual) return FormState::Textual;
    if (has_masked) return FormState::Masked;
    return FormState::NoSlots;
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

namespace {

void print_entity(const EntitySlot& slot, std::string& out) {
    switch (slot.state) {
        case SlotState::Grounded: out += slot.id; break;
        case SlotState::Textual: out += "[ " + slot.label + " ]"; break;
        case SlotState::Masked: out += "[]"; break;
    }
}

void print_relation(const RelationSlot& slot, std::string& out) {
    switch (slot.state) {
        case SlotState::Grounded: out += slot.dotted; break;
        case SlotState::Textual: {
            out += "[ ";
            for (std::size_t i = 0; i < slot.segments.size(); ++i) {
                if (i > 0) out += " , ";
                out += slot.segments[i];
            }
            out += " ]";
            break;
        }
        case SlotState::Masked: out += "[]"; break;
    }
}

void print_node(const LogicalForm& lf, std::string& out) {
    switch (lf.kind) {
        case NodeKind::EntityLeaf:
            print_entity(lf.entity, out);
            return;
        case NodeKind::RelationLeaf:
            print_relation(lf.relation, out);
            return;
        case NodeKind::LiteralLeaf:
            out += lf.literal ? lf.literal->lexical : "[]";
            return;
        case NodeKind::Join:
            out += "(JOIN ";
            if (lf.reverse) {
                out += "(R ";
                print_node(lf.children[0], out);
                out += ')';
            } else {
                print_node(lf.children[0], out);
            }
            out += ' ';
            print_node(lf.children[1], out);
            out += ')';
            return;
        default:
            out += '(';
            out += to_string(lf.kind);
            for (const auto& child : lf.children) {
                out += ' ';
                print_node(child, out);
            }
            out += ')';
            return;
    }
}

}  // namespace

std::string print(const LogicalForm& lf) {
    std::string out;
    print_node(lf, out);
    return out;
}

// ---------------------------------------------------------------------------
// Skeleton
// ---------------------------------------------------------------------------

LogicalForm skeleton(const LogicalForm& lf) {
    LogicalForm masked = lf;
    auto mask = [](auto&& self, LogicalForm& node) -> void {
        switch (node.kind) {
            case NodeKind::EntityLeaf: node.entity = EntitySlot::masked(); break;
            case NodeKind::RelationLeaf: node.relation = RelationSlot::masked(); break;
            case NodeKind::LiteralLeaf: node.literal.reset(); break;
            default: break;
        }
        for (auto& child : node.children) self(self, child);
    };
    mask(mask, masked);
    return masked;
}

std::string skeleton_text(const LogicalForm& lf) { return print(skeleton(lf)); }

// ---------------------------------------------------------------------------
// Textualization
// ---------------------------------------------------------------------------

MissingLabels::MissingLabels(std::vector<std::string> ids)
    : std::runtime_error([&ids] {
          std::string msg = "no label for entity ID(s):";
          for (const auto& id : ids) msg += " " + id;
          return msg;
      }()),
      ids_(std::move(ids)) {}

std::vector<std::string> relation_to_segments(std::string_view dotted) {
    std::vector<std::string> segments;
    std::size_t start = 0;
    while (start <= dotted.size()) {
        std::size_t dot = dotted.find('.', start);
        if (dot == std::string_view::npos) dot = dotted.size();
        std::string segment(dotted.substr(start, dot - start));
        std::replace(segment.begin(), segment.end(), '_', ' ');
        segments.push_back(std::move(segment));
        start = dot + 1;
    }
    return segments;
}

std::string relation_from_text(const std::vector<std::string>& segments) {
    if (segments.empty()) throw std::invalid_argument("relation needs at least one segment");
    std::string dotted;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (segments[i].empty()) throw std::invalid_argument("empty relation segment");
        if (i > 0) dotted += '.';
        std::string segment = segments[i];
        std::replace(segment.begin(), segment.end(), ' ', '_');
        dotted += segment;
    }
    return dotted;
}

LogicalForm textualize(const LogicalForm& lf,
                       const std::unordered_map<std::string, std::string>& labels_by_id) {
    std::vector<std::string> missing;
    LogicalForm textual = lf;

    auto convert = [&](auto&& self, LogicalForm& node) -> void {
        switch (node.kind) {
            case NodeKind::EntityLeaf:
                if (node.entity.state == SlotState::Grounded) {
                    auto it = labels_by_id.find(node.entity.id);
                    if (it == labels_by_id.end())
                        missing.push_back(node.entity.id);
                    else
                        node.entity = EntitySlot::textual(it->second);
                }
                break;
            case NodeKind::RelationLeaf:
                if (node.relation.state == SlotState::Grounded)
                    node.relation = RelationSlot::textual(relation_to_segments(node.relation.dotted));
                break;
            default:
                break;
        }
        for (auto& child : node.children) self(self, child);
    };
    convert(convert, textual);

    if (!missing.empty()) throw MissingLabels(std::move(missing));
    return textual;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

struct Token {
    std::string text;
    std::size_t index;
};

bool is_delimiter(char c) { return c == '(' || c == ')' || c == '[' || c == ']'; }

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (is_delimiter(c)) {
            tokens.push_back({std::string(1, c), tokens.size()});
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) &&
               !is_delimiter(text[i]))
            ++i;
        tokens.push_back({std::string(text.substr(start, i - start)), tokens.size()});
    }
    return tokens;
}

class Parser {
public:
    Parser(std::vector<Token> tokens, ParseMode mode) : tokens_(std::move(tokens)), mode_(mode) {}

    LogicalForm run() {
        if (tokens_.empty()) throw ParseError("empty input", 0);
        LogicalForm lf = parse_value();
        if (pos_ != tokens_.size())
            throw ParseError("trailing tokens after form: '" + peek().text + "'", pos_);
        return lf;
    }

private:
    std::vector<Token> tokens_;
    ParseMode mode_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& message) const {
        throw ParseError(message, pos_ < tokens_.size() ? pos_ : tokens_.size());
    }

    bool at_end() const { return pos_ >= tokens_.size(); }

    const Token& peek() const {
        if (at_end()) throw ParseError("unexpected end of input", tokens_.size());
        return tokens_[pos_];
    }

    Token next() {
        Token token = peek();
        ++pos_;
        return token;
    }

    void expect(std::string_view text) {
        if (at_end() || peek().text != text)
            fail("expected '" + std::string(text) + "'" +
                 (at_end() ? " at end of input" : ", got '" + peek().text + "'"));
        ++pos_;
    }

    // Operator form, e.g. "(JOIN r v)". `pos_` sits on '('.
    LogicalForm parse_operator() {
        expect("(");
        const Token op = next();
        LogicalForm lf;
        if (op.text == "JOIN") {
            bool reverse = false;
            RelationSlot rel = parse_relation_position(&reverse);
            LogicalForm value = parse_value();
            lf = LogicalForm::join(std::move(rel), std::move(value), reverse);
        } else if (op.text == "AND") {
            LogicalForm lhs = parse_subform("AND");
            LogicalForm rhs = parse_subform("AND");
            lf = LogicalForm::and_of(std::move(lhs), std::move(rhs));
        } else if (op.text == "COUNT") {
            lf = LogicalForm::count(parse_subform("COUNT"));
        } else if (op.text == "ARGMAX" || op.text == "ARGMIN") {
            LogicalForm sub = parse_subform(op.text);
            RelationSlot rel = parse_relation_position(nullptr);
            lf = LogicalForm::arg_extreme(op.text == "ARGMAX", std::move(sub), std::move(rel));
        } else if (op.text == "GT" || op.text == "GE" || op.text == "LT" || op.text == "LE") {
            NodeKind kind = op.text == "GT"   ? NodeKind::Gt
                            : op.text == "GE" ? NodeKind::Ge
                            : op.text == "LT" ? NodeKind::Lt
                                              : NodeKind::Le;
            LogicalForm sub = parse_subform(op.text);
            LogicalForm bound = parse_literal_position();
            lf.kind = kind;
            lf.children.push_back(std::move(sub));
            lf.children.push_back(std::move(bound));
        } else if (op.text == "R") {
            fail("(R ...) is only valid in the relation position of JOIN");
        } else {
            fail("unknown operator '" + op.text + "'");
        }
        expect(")");
        return lf;
    }

    // Operator-rooted child (AND/COUNT/comparison/ARGMAX operands).
    LogicalForm parse_subform(std::string_view parent) {
        if (at_end()) fail("missing operand of " + std::string(parent));
        if (peek().text != "(")
            fail(std::string(parent) + " operand must be an operator form, got '" + peek().text +
                 "'");
        return parse_operator();
    }

    // First JOIN argument or second ARGMAX/ARGMIN argument. `reverse` is
    // non-null only where the (R ...) wrapper is admissible.
    RelationSlot parse_relation_position(bool* reverse) {
        if (at_end()) fail("missing relation");
        if (peek().text == "(") {
            if (reverse == nullptr) fail("(R ...) is not allowed here");
            expect("(");
            expect("R");
            *reverse = true;
            RelationSlot rel = parse_relation_position(nullptr);
            expect(")");
            return rel;
        }
        if (peek().text == "[") return parse_bracketed_relation();
        const Token token = next();
        if (token.text == ")" || token.text == "]")
            throw ParseError("missing relation before '" + token.text + "'", token.index);
        if (mode_ == ParseMode::Textual)
            throw ParseError("mixed grounding state: bare relation name '" + token.text +
                                 "' in textual mode",
                             token.index);
        return parse_dotted_relation(token);
    }

    RelationSlot parse_dotted_relation(const Token& token) {
        std::size_t start = 0;
        while (start <= token.text.size()) {
            std::size_t dot = token.text.find('.', start);
            if (dot == std::string_view::npos) dot = token.text.size();
            if (dot == start)
                throw ParseError("empty segment in relation name '" + token.text + "'",
                                 token.index);
            start = dot + 1;
        }
        return RelationSlot::grounded(token.text);
    }

    // "[ seg tokens , seg tokens , ... ]" or "[]" (masked). `pos_` sits on '['.
    RelationSlot parse_bracketed_relation() {
        expect("[");
        if (!at_end() && peek().text == "]") {
            ++pos_;
            return RelationSlot::masked();
        }
        if (mode_ == ParseMode::Grounded)
            fail("mixed grounding state: bracketed relation in grounded mode");
        std::vector<std::string> segments;
        std::string current;
        while (true) {
            if (at_end()) fail("unterminated relation bracket");
            Token token = next();
            if (token.text == "]") break;
            if (token.text == "(" || token.text == ")" || token.text == "[")
                throw ParseError("unexpected '" + token.text + "' inside relation bracket",
                                 token.index);
            if (token.text == ",") {
                if (current.empty())
                    throw ParseError("empty relation segment", token.index);
                segments.push_back(std::move(current));
                current.clear();
                continue;
            }
            if (!current.empty()) current += ' ';
            current += token.text;
        }
        if (current.empty()) fail("empty relation segment");
        segments.push_back(std::move(current));
        return RelationSlot::textual(std::move(segments));
    }

    // "[ label tokens ]" or "[]" (masked). `pos_` sits on '['.
    LogicalForm parse_bracketed_entity() {
        expect("[");
        if (!at_end() && peek().text == "]") {
            ++pos_;
            return LogicalForm::entity_leaf(EntitySlot::masked());
        }
        if (mode_ == ParseMode::Grounded)
            fail("mixed grounding state: bracketed entity in grounded mode");
        std::string label;
        while (true) {
            if (at_end()) fail("unterminated entity bracket");
            Token token = next();
            if (token.text == "]") break;
            if (token.text == "(" || token.text == ")" || token.text == "[")
                throw ParseError("unexpected '" + token.text + "' inside entity bracket",
                                 token.index);
            if (!label.empty()) label += ' ';
            label += token.text;
        }
        return LogicalForm::entity_leaf(EntitySlot::textual(std::move(label)));
    }

    // Second JOIN argument, or a whole form (bare leaves are legal roots).
    LogicalForm parse_value() {
        if (at_end()) fail("missing value");
        if (peek().text == "(") return parse_operator();
        if (peek().text == "[") return parse_bracketed_entity();
        const Token token = next();
        if (token.text == ")" || token.text == "]")
            throw ParseError("missing value before '" + token.text + "'", token.index);
        if (auto literal = Literal::infer(token.text))
            return LogicalForm::literal_leaf(std::move(*literal));
        if (EntitySlot::valid_id(token.text)) {
            if (mode_ == ParseMode::Textual)
                throw ParseError("mixed grounding state: entity ID '" + token.text +
                                     "' in textual mode",
                                 token.index);
            return LogicalForm::entity_leaf(EntitySlot::grounded(token.text));
        }
        throw ParseError("expected entity, literal, or sub-form, got '" + token.text + "'",
                         token.index);
    }

    // Comparison bound: a literal token, or "[]" in skeleton text.
    LogicalForm parse_literal_position() {
        if (at_end()) fail("missing comparison literal");
        if (peek().text == "[") {
            expect("[");
            expect("]");
            return LogicalForm::masked_literal_leaf();
        }
        const Token token = next();
        auto literal = Literal::infer(token.text);
        if (!literal)
            throw ParseError("comparison bound must be a literal, got '" + token.text + "'",
                             token.index);
        return LogicalForm::literal_leaf(std::move(*literal));
    }
};

}  // namespace

LogicalForm parse(std::string_view text, ParseMode mode) {
    return Parser(tokenize(text), mode).run();
}

}  // namespace kbqa
