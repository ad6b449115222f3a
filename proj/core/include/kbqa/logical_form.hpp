#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kbqa {

// ---------------------------------------------------------------------------
// Leaf payloads
// ---------------------------------------------------------------------------

enum class LiteralKind { Integer, Float, Year, YearMonth, Date };

std::string_view to_string(LiteralKind kind);
std::optional<LiteralKind> literal_kind_from_string(std::string_view name);

// A typed KB literal. The lexical form is kept verbatim; the kind is inferred
// from the token shape. Exactly-4-digit unsigned integers are years.
struct Literal {
    std::string lexical;
    LiteralKind kind = LiteralKind::Integer;

    // Returns nullopt when the text matches none of the five literal shapes.
    static std::optional<Literal> infer(std::string_view text);
    static bool looks_like(std::string_view text) { return infer(text).has_value(); }

    bool is_numeric() const { return kind == LiteralKind::Integer || kind == LiteralKind::Float; }
    bool is_temporal() const { return !is_numeric(); }

    // Three-way value comparison: negative/zero/positive, or nullopt when the
    // kinds are incomparable (numeric vs temporal). Years coerce to YYYY-01-01
    // and year-months to YYYY-MM-01 before date comparison.
    std::optional<int> compare(const Literal& other) const;

    bool operator==(const Literal&) const = default;
    // Deterministic total order for set storage; value comparison is compare().
    bool operator<(const Literal& other) const {
        return lexical != other.lexical ? lexical < other.lexical : kind < other.kind;
    }
};

enum class SlotState { Grounded, Textual, Masked };

struct EntitySlot {
    SlotState state = SlotState::Masked;
    std::string id;     // grounded: "m.0fm2h" / "g.1234"
    std::string label;  // textual: label tokens joined by single spaces

    static EntitySlot grounded(std::string id);
    static EntitySlot textual(std::string label);
    static EntitySlot masked() { return {}; }
    static bool valid_id(std::string_view id);

    bool operator==(const EntitySlot&) const = default;
};

struct RelationSlot {
    SlotState state = SlotState::Masked;
    std::string dotted;                 // grounded: "people.person.gender"
    std::vector<std::string> segments;  // textual: underscore-expanded segments

    static RelationSlot grounded(std::string dotted);
    static RelationSlot textual(std::vector<std::string> segments);
    static RelationSlot masked() { return {}; }

    bool operator==(const RelationSlot&) const = default;
};

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

enum class NodeKind {
    Join,       // children: [RelationLeaf, value]; `reverse` selects the object side
    And,        // children: [sub, sub]
    Count,      // children: [sub]
    ArgMax,     // children: [sub, RelationLeaf]
    ArgMin,
    Gt,         // children: [sub, LiteralLeaf]
    Ge,
    Lt,
    Le,
    EntityLeaf,
    RelationLeaf,
    LiteralLeaf,
};

bool is_operator(NodeKind kind);
bool is_comparison(NodeKind kind);
std::string_view to_string(NodeKind kind);

struct LogicalForm {
    NodeKind kind = NodeKind::EntityLeaf;
    bool reverse = false;  // Join only: query the object position instead of the subject
    std::vector<LogicalForm> children;
    EntitySlot entity;                // EntityLeaf payload
    RelationSlot relation;            // RelationLeaf payload
    std::optional<Literal> literal;   // LiteralLeaf payload; nullopt renders as a masked slot

    bool operator==(const LogicalForm&) const = default;

    static LogicalForm entity_leaf(EntitySlot slot);
    static LogicalForm relation_leaf(RelationSlot slot);
    static LogicalForm literal_leaf(Literal value);
    static LogicalForm masked_literal_leaf();
    static LogicalForm join(RelationSlot rel, LogicalForm value, bool reverse = false);
    static LogicalForm and_of(LogicalForm lhs, LogicalForm rhs);
    static LogicalForm count(LogicalForm sub);
    static LogicalForm arg_extreme(bool max, LogicalForm sub, RelationSlot rel);
    static LogicalForm comparison(NodeKind op, LogicalForm sub, Literal bound);
};

// Aggregate slot state of a form: Mixed when grounded and textual slots
// coexist, NoSlots when the form has no entity/relation slots at all.
enum class FormState { Grounded, Textual, Masked, Mixed, NoSlots };
FormState grounding_state(const LogicalForm& lf);

// ---------------------------------------------------------------------------
// Parse / print
// ---------------------------------------------------------------------------

enum class ParseMode { Grounded, Textual };

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t token_index)
        : std::runtime_error(message), token_index_(token_index) {}
    std::size_t token_index() const { return token_index_; }

private:
    std::size_t token_index_;
};

class MissingLabels : public std::runtime_error {
public:
    explicit MissingLabels(std::vector<std::string> ids);
    const std::vector<std::string>& ids() const { return ids_; }

private:
    std::vector<std::string> ids_;
};

// Parses the S-expression encoding. Grounded mode expects bare entity IDs and
// dotted relation names; textual mode expects bracketed labels and segment
// lists. Empty brackets parse as masked slots in either mode.
LogicalForm parse(std::string_view text, ParseMode mode);

// Canonical rendering: single spaces, relation segments comma-separated,
// masked slots as "[]". parse(print(x), mode) == x for uniform-state forms.
std::string print(const LogicalForm& lf);

// Structure with every entity, relation, and literal slot masked.
LogicalForm skeleton(const LogicalForm& lf);
std::string skeleton_text(const LogicalForm& lf);

// Grounded -> textual slot conversion. Throws MissingLabels listing every
// entity ID absent from the table.
LogicalForm textualize(const LogicalForm& lf,
                       const std::unordered_map<std::string, std::string>& labels_by_id);

// "people" + "sibling s" -> "people.sibling_s": spaces collapse to
// underscores, segments join with dots. Inverse of relation_to_segments.
std::string relation_from_text(const std::vector<std::string>& segments);
std::vector<std::string> relation_to_segments(std::string_view dotted);

}  // namespace kbqa
