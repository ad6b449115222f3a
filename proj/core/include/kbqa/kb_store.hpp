#pragma once

#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "kbqa/logical_form.hpp"

namespace kbqa {

// Triple object: an entity ID or a typed literal.
using TripleObject = std::variant<std::string, Literal>;

bool object_is_entity(const TripleObject& object);
std::string object_to_string(const TripleObject& object);

struct Triple {
    std::string subject;
    std::string relation;
    TripleObject object;

    bool operator==(const Triple&) const = default;
};

class KbLoadError : public std::runtime_error {
public:
    KbLoadError(const std::string& file, std::size_t line, const std::string& message);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Immutable in-memory knowledge base. All lookups are read-only after load,
// so concurrent readers need no synchronization.
class KbStore {
public:
    // File formats (UTF-8, TAB-separated, one record per line):
    //   triples: subject<TAB>relation<TAB>object   (object is an entity ID when
    //            it matches the (m|g).xxx pattern, otherwise a literal)
    //   labels:  entityID<TAB>label
    //   aliases: surface<TAB>entityID<TAB>weight   (weight in [0,1])
    // Every entity's own label is always an alias of itself with weight 1.0.
    static KbStore load(const std::string& triples_path, const std::string& labels_path,
                        const std::string& aliases_path);

    // In-memory construction, mainly for tests.
    static KbStore from_data(std::vector<Triple> triples,
                             std::unordered_map<std::string, std::string> labels,
                             std::vector<std::tuple<std::string, std::string, double>> aliases);

    // Just the entityID -> label table of a labels file.
    static std::unordered_map<std::string, std::string> load_labels(const std::string& path);

    std::span<const Triple> triples() const { return triples_; }
    const std::unordered_map<std::string, std::string>& labels() const { return labels_; }
    const std::vector<std::string>& relations() const { return relations_; }

    std::size_t entity_count() const { return labels_.size(); }
    std::size_t relation_count() const { return relations_.size(); }
    std::size_t triple_count() const { return triples_.size(); }

    bool has_relation(std::string_view relation) const;
    // Label of a known entity; empty view when the ID is unknown.
    std::string_view label(std::string_view entity_id) const;

    // { s | (s, relation, object) }. Unknown keys yield the empty set.
    const std::set<std::string>& subjects_of(std::string_view relation,
                                             const TripleObject& object) const;

    // { o | (subject, relation, o) }.
    std::span<const TripleObject> objects_of(std::string_view subject,
                                             std::string_view relation) const;

    // Relations incident (either direction) to `entities` within `hops`
    // expansion steps; hops=1 is the directly incident set.
    std::set<std::string> neighborhood(const std::set<std::string>& entities, int hops = 1) const;

    // Alias lookup on the case-folded, whitespace-collapsed surface form.
    // Candidates come back in descending weight order (ties: ID ascending).
    std::vector<std::pair<std::string, double>> entity_candidates(std::string_view surface) const;

    // Case-fold + collapse internal whitespace; the alias-table key transform.
    static std::string normalize_surface(std::string_view surface);

private:
    KbStore() = default;
    void build_indexes();

    std::vector<Triple> triples_;
    std::unordered_map<std::string, std::string> labels_;
    std::vector<std::string> relations_;
    std::unordered_set<std::string> relation_set_;

    std::unordered_map<std::string, std::set<std::string>> subjects_by_relation_object_;
    std::unordered_map<std::string, std::vector<TripleObject>> objects_by_subject_relation_;
    std::unordered_map<std::string, std::set<std::string>> incident_relations_;
    std::unordered_map<std::string, std::set<std::string>> adjacent_entities_;
    std::unordered_map<std::string, std::vector<std::pair<std::string, double>>> aliases_;
};

}  // namespace kbqa
