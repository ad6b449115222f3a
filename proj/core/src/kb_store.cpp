#include "kbqa/kb_store.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace kbqa {

namespace {

const std::set<std::string> kEmptyStringSet;

// Index keys embed a kind tag so the entity "m.x" and a hypothetical literal
// "m.x" can never collide.
std::string object_key(const TripleObject& object) {
    if (const auto* id = std::get_if<std::string>(&object)) return "E:" + *id;
    const auto& lit = std::get<Literal>(object);
    return "L:" + std::string(to_string(lit.kind)) + ":" + lit.lexical;
}

std::string relation_object_key(std::string_view relation, const TripleObject& object) {
    return std::string(relation) + '\t' + object_key(object);
}

std::string subject_relation_key(std::string_view subject, std::string_view relation) {
    return std::string(subject) + '\t' + std::string(relation);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

std::optional<TripleObject> parse_object(const std::string& text) {
    if (EntitySlot::valid_id(text)) return TripleObject{text};
    if (auto literal = Literal::infer(text)) return TripleObject{*literal};
    return std::nullopt;
}

}  // namespace

bool object_is_entity(const TripleObject& object) {
    return std::holds_alternative<std::string>(object);
}

std::string object_to_string(const TripleObject& object) {
    if (const auto* id = std::get_if<std::string>(&object)) return *id;
    return std::get<Literal>(object).lexical;
}

KbLoadError::KbLoadError(const std::string& file, std::size_t line, const std::string& message)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + message), line_(line) {}

std::string KbStore::normalize_surface(std::string_view surface) {
    std::string out;
    out.reserve(surface.size());
    bool pending_space = false;
    for (char c : surface) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::unordered_map<std::string, std::string> KbStore::load_labels(const std::string& path) {
    std::unordered_map<std::string, std::string> labels;
    std::ifstream in(path);
    if (!in) throw KbLoadError(path, 0, "cannot open file");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            throw KbLoadError(path, lineno, "expected entityID<TAB>label");
        if (!EntitySlot::valid_id(fields[0]))
            throw KbLoadError(path, lineno, "invalid entity ID '" + fields[0] + "'");
        labels[fields[0]] = fields[1];
    }
    return labels;
}

KbStore KbStore::load(const std::string& triples_path, const std::string& labels_path,
                      const std::string& aliases_path) {
    std::unordered_map<std::string, std::string> labels = load_labels(labels_path);

    std::vector<Triple> triples;
    {
        std::ifstream in(triples_path);
        if (!in) throw KbLoadError(triples_path, 0, "cannot open file");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto fields = split_tabs(line);
            if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
                throw KbLoadError(triples_path, lineno, "expected subject<TAB>relation<TAB>object");
            if (!labels.contains(fields[0]))
                throw KbLoadError(triples_path, lineno,
                                  "triple subject '" + fields[0] + "' has no label entry");
            auto object = parse_object(fields[2]);
            if (!object)
                throw KbLoadError(triples_path, lineno,
                                  "object '" + fields[2] + "' is neither an entity ID nor a literal");
            triples.push_back({fields[0], fields[1], std::move(*object)});
        }
    }

    std::vector<std::tuple<std::string, std::string, double>> aliases;
    {
        std::ifstream in(aliases_path);
        if (!in) throw KbLoadError(aliases_path, 0, "cannot open file");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto fields = split_tabs(line);
            if (fields.size() != 3 || fields[0].empty() || fields[1].empty())
                throw KbLoadError(aliases_path, lineno, "expected surface<TAB>entityID<TAB>weight");
            double weight = 0.0;
            try {
                weight = std::stod(fields[2]);
            } catch (const std::exception&) {
                throw KbLoadError(aliases_path, lineno, "bad weight '" + fields[2] + "'");
            }
            if (weight < 0.0 || weight > 1.0)
                throw KbLoadError(aliases_path, lineno, "weight outside [0,1]");
            aliases.emplace_back(fields[0], fields[1], weight);
        }
    }

    return from_data(std::move(triples), std::move(labels), std::move(aliases));
}

KbStore KbStore::from_data(std::vector<Triple> triples,
                           std::unordered_map<std::string, std::string> labels,
                           std::vector<std::tuple<std::string, std::string, double>> aliases) {
    KbStore store;
    store.labels_ = std::move(labels);

    // Dedup triples; the executor relies on set semantics.
    std::sort(triples.begin(), triples.end(), [](const Triple& a, const Triple& b) {
        if (a.subject != b.subject) return a.subject < b.subject;
        if (a.relation != b.relation) return a.relation < b.relation;
        return object_key(a.object) < object_key(b.object);
    });
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    store.triples_ = std::move(triples);

    // Every label is a self-alias with weight 1.0; explicit aliases merge in
    // keeping the highest weight per (surface, entity).
    std::map<std::pair<std::string, std::string>, double> merged;
    for (const auto& [id, label] : store.labels_)
        merged[{normalize_surface(label), id}] = 1.0;
    for (const auto& [surface, id, weight] : aliases) {
        auto key = std::make_pair(normalize_surface(surface), id);
        auto it = merged.find(key);
        if (it == merged.end() || it->second < weight) merged[key] = weight;
    }
    for (const auto& [key, weight] : merged)
        store.aliases_[key.first].emplace_back(key.second, weight);
    for (auto& [surface, candidates] : store.aliases_)
        std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });

    store.build_indexes();
    return store;
}

void KbStore::build_indexes() {
    std::set<std::string> relation_names;
    for (const auto& triple : triples_) {
        relation_names.insert(triple.relation);
        subjects_by_relation_object_[relation_object_key(triple.relation, triple.object)].insert(
            triple.subject);
        objects_by_subject_relation_[subject_relation_key(triple.subject, triple.relation)]
            .push_back(triple.object);
        incident_relations_[triple.subject].insert(triple.relation);
        if (const auto* object_id = std::get_if<std::string>(&triple.object)) {
            incident_relations_[*object_id].insert(triple.relation);
            adjacent_entities_[triple.subject].insert(*object_id);
            adjacent_entities_[*object_id].insert(triple.subject);
        }
    }
    relations_.assign(relation_names.begin(), relation_names.end());
    relation_set_.insert(relations_.begin(), relations_.end());
}

bool KbStore::has_relation(std::string_view relation) const {
    return relation_set_.contains(std::string(relation));
}

std::string_view KbStore::label(std::string_view entity_id) const {
    auto it = labels_.find(std::string(entity_id));
    return it == labels_.end() ? std::string_view{} : std::string_view(it->second);
}

const std::set<std::string>& KbStore::subjects_of(std::string_view relation,
                                                  const TripleObject& object) const {
    auto it = subjects_by_relation_object_.find(relation_object_key(relation, object));
    return it == subjects_by_relation_object_.end() ? kEmptyStringSet : it->second;
}

std::span<const TripleObject> KbStore::objects_of(std::string_view subject,
                                                  std::string_view relation) const {
    auto it = objects_by_subject_relation_.find(subject_relation_key(subject, relation));
    return it == objects_by_subject_relation_.end() ? std::span<const TripleObject>{}
                                                    : std::span<const TripleObject>(it->second);
}

std::set<std::string> KbStore::neighborhood(const std::set<std::string>& entities,
                                            int hops) const {
    std::set<std::string> result;
    std::set<std::string> frontier = entities;
    std::set<std::string> visited = entities;
    for (int hop = 0; hop < hops && !frontier.empty(); ++hop) {
        std::set<std::string> next;
        for (const auto& entity : frontier) {
            if (auto it = incident_relations_.find(entity); it != incident_relations_.end())
                result.insert(it->second.begin(), it->second.end());
            if (auto it = adjacent_entities_.find(entity); it != adjacent_entities_.end())
                for (const auto& neighbor : it->second)
                    if (visited.insert(neighbor).second) next.insert(neighbor);
        }
        frontier = std::move(next);
    }
    return result;
}

std::vector<std::pair<std::string, double>> KbStore::entity_candidates(
    std::string_view surface) const {
    auto it = aliases_.find(normalize_surface(surface));
    if (it == aliases_.end()) return {};
    return it->second;
}

}  // namespace kbqa
