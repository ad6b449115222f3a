#include "kbqa/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "kbqa/executor.hpp"
#include "kbqa/logical_form.hpp"
#include "kbqa/sparql.hpp"

namespace kbqa {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Instruction data
// ---------------------------------------------------------------------------

std::size_t whitespace_token_count(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        const bool space = std::isspace(static_cast<unsigned char>(c));
        if (!space && !in_token) ++count;
        in_token = !space;
    }
    return count;
}

TrainingData build_training_data(std::span<const DatasetRecord> records, const KbStore& kb) {
    TrainingData data;
    for (const DatasetRecord& record : records) {
        LogicalForm gold;
        try {
            gold = parse(record.logical_form, ParseMode::Grounded);
        } catch (const ParseError& e) {
            throw IoError("record " + record.id + ": bad gold form: " + e.what());
        }
        InstructionRecord out;
        out.instruction = std::string(kInstructionText);
        out.input = record.question;
        try {
            out.output = print(textualize(gold, kb.labels()));
        } catch (const MissingLabels&) {
            data.skipped_ids.push_back(record.id);
            continue;
        }
        const std::size_t tokens = whitespace_token_count(out.instruction) +
                                   whitespace_token_count(out.input) +
                                   whitespace_token_count(out.output);
        data.max_tokens = std::max(data.max_tokens, tokens);
        data.records.push_back(std::move(out));
    }
    return data;
}

// ---------------------------------------------------------------------------
// Answering
// ---------------------------------------------------------------------------

Prediction answer(const CandidateBeam& beam, const KbStore& kb, const RetrievalConfig& config,
                  const ScorerSet& scorers) {
    Prediction prediction;
    prediction.id = beam.id;

    std::vector<LogicalForm> forms;
    for (const BeamCandidate& candidate : beam.candidates) {
        try {
            LogicalForm form = parse(candidate.text, ParseMode::Textual);
            prediction.beam_canonical.push_back(print(form));
            forms.push_back(std::move(form));
        } catch (const ParseError&) {
            prediction.beam_canonical.push_back(std::nullopt);
            ++prediction.unparseable_candidates;
        }
    }

    auto result = ground(forms, kb, config, scorers);
    if (result) {
        prediction.answers = result->answers.to_strings();
        prediction.sparql = result->query.text;
        prediction.logical_form = print(result->grounded);
    }
    return prediction;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

std::vector<GoldReference> make_gold_references(std::span<const DatasetRecord> records,
                                                const KbStore& kb) {
    return make_gold_references(records, kb.labels());
}

std::vector<GoldReference> make_gold_references(
    std::span<const DatasetRecord> records,
    const std::unordered_map<std::string, std::string>& labels_by_id) {
    std::vector<GoldReference> golds;
    golds.reserve(records.size());
    for (const DatasetRecord& record : records) {
        GoldReference gold;
        gold.record = record;
        try {
            gold.textual_form =
                print(textualize(parse(record.logical_form, ParseMode::Grounded), labels_by_id));
        } catch (const std::exception&) {
            gold.textual_form = std::nullopt;
        }
        golds.push_back(std::move(gold));
    }
    return golds;
}

namespace {

double answer_f1(const std::set<std::string>& predicted, const std::set<std::string>& gold) {
    if (predicted.empty() && gold.empty()) return 1.0;
    if (predicted.empty() || gold.empty()) return 0.0;
    std::vector<std::string> common;
    std::set_intersection(predicted.begin(), predicted.end(), gold.begin(), gold.end(),
                          std::back_inserter(common));
    if (common.empty()) return 0.0;
    const double precision = static_cast<double>(common.size()) / predicted.size();
    const double recall = static_cast<double>(common.size()) / gold.size();
    return 2.0 * precision * recall / (precision + recall);
}

std::optional<std::string> candidate_skeleton(const std::string& canonical) {
    try {
        return skeleton_text(parse(canonical, ParseMode::Textual));
    } catch (const ParseError&) {
        return std::nullopt;
    }
}

}  // namespace

Metrics evaluate(std::span<const Prediction> predictions, std::span<const GoldReference> golds) {
    std::map<std::string, const Prediction*> by_id;
    for (const Prediction& prediction : predictions) {
        if (!by_id.emplace(prediction.id, &prediction).second)
            throw std::invalid_argument("duplicate prediction ID: " + prediction.id);
    }
    if (by_id.size() != golds.size())
        throw std::invalid_argument("prediction/gold ID mismatch: " +
                                    std::to_string(by_id.size()) + " predictions vs " +
                                    std::to_string(golds.size()) + " golds");

    const bool text_metrics = std::all_of(golds.begin(), golds.end(), [](const GoldReference& g) {
        return g.textual_form.has_value();
    });

    Metrics metrics;
    metrics.question_count = golds.size();
    double f1_sum = 0.0, hits_sum = 0.0, acc_sum = 0.0, em_sum = 0.0, bm_sum = 0.0, sm_sum = 0.0;

    for (const GoldReference& gold : golds) {
        auto it = by_id.find(gold.record.id);
        if (it == by_id.end())
            throw std::invalid_argument("no prediction for question ID: " + gold.record.id);
        const Prediction& prediction = *it->second;

        const std::set<std::string> predicted(prediction.answers.begin(),
                                              prediction.answers.end());
        const std::set<std::string> expected(gold.record.answers.begin(),
                                             gold.record.answers.end());

        f1_sum += answer_f1(predicted, expected);
        // Hits@1 takes the lexicographically first member as the designated
        // top answer; an empty prediction scores zero.
        if (!predicted.empty() && expected.contains(*predicted.begin())) hits_sum += 1.0;
        if (predicted == expected) acc_sum += 1.0;

        if (text_metrics) {
            const std::string& gold_text = *gold.textual_form;
            const auto& beam = prediction.beam_canonical;
            if (!beam.empty() && beam.front() && *beam.front() == gold_text) em_sum += 1.0;
            if (std::any_of(beam.begin(), beam.end(), [&](const auto& c) {
                    return c && *c == gold_text;
                }))
                bm_sum += 1.0;

            const std::string gold_skeleton =
                skeleton_text(parse(gold_text, ParseMode::Textual));
            if (std::any_of(beam.begin(), beam.end(), [&](const auto& c) {
                    if (!c) return false;
                    auto sk = candidate_skeleton(*c);
                    return sk && *sk == gold_skeleton;
                }))
                sm_sum += 1.0;

            const std::size_t tokens = whitespace_token_count(kInstructionText) +
                                       whitespace_token_count(gold.record.question) +
                                       whitespace_token_count(gold_text);
            metrics.max_tokens = std::max(metrics.max_tokens, tokens);
        }
    }

    const double n = golds.empty() ? 1.0 : static_cast<double>(golds.size());
    metrics.f1 = f1_sum / n;
    metrics.hits_at_1 = hits_sum / n;
    metrics.acc = acc_sum / n;
    if (text_metrics && !golds.empty()) {
        metrics.em = em_sum / n;
        metrics.bm = bm_sum / n;
        metrics.sm = sm_sum / n;
    }
    return metrics;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

namespace {

// Runs `parse_line` per non-empty line, turning exceptions into IoError with
// the offending line number.
template <class Fn>
void for_each_json_line(const std::string& path, Fn&& parse_line) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json parsed;
        try {
            parsed = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            parse_line(parsed);
        } catch (const json::exception& e) {
            throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::vector<BeamCandidate> candidates_from_json(const json& array) {
    std::vector<BeamCandidate> candidates;
    for (const auto& entry : array) {
        BeamCandidate candidate;
        candidate.text = entry.at("text").get<std::string>();
        if (entry.contains("score")) candidate.score = entry.at("score").get<double>();
        candidates.push_back(std::move(candidate));
    }
    return candidates;
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::vector<DatasetRecord> records;
    for_each_json_line(path, [&](const json& line) {
        DatasetRecord record;
        record.id = line.at("id").get<std::string>();
        record.question = line.at("question").get<std::string>();
        record.logical_form = line.at("logical_form").get<std::string>();
        record.answers = line.at("answers").get<std::vector<std::string>>();
        records.push_back(std::move(record));
    });
    return records;
}

std::vector<CandidateBeam> ingest_candidates(const std::string& path) {
    std::vector<CandidateBeam> beams;
    for_each_json_line(path, [&](const json& line) {
        CandidateBeam beam;
        beam.id = line.at("id").get<std::string>();
        beam.candidates = candidates_from_json(line.at("candidates"));
        beams.push_back(std::move(beam));
    });
    return beams;
}

std::vector<Prediction> load_predictions(const std::string& path) {
    std::vector<Prediction> predictions;
    for_each_json_line(path, [&](const json& line) {
        Prediction prediction;
        prediction.id = line.at("id").get<std::string>();
        prediction.answers = line.at("answers").get<std::vector<std::string>>();
        prediction.sparql = line.at("sparql").get<std::string>();
        prediction.logical_form = line.at("logical_form").get<std::string>();
        predictions.push_back(std::move(prediction));
    });
    return predictions;
}

void write_instruction_data(std::span<const InstructionRecord> records, std::ostream& out) {
    for (const InstructionRecord& record : records) {
        json line;
        line["instruction"] = record.instruction;
        line["input"] = record.input;
        line["output"] = record.output;
        out << line.dump() << '\n';
    }
}

void write_predictions(std::span<const Prediction> predictions, std::ostream& out) {
    for (const Prediction& prediction : predictions) {
        json line;
        line["id"] = prediction.id;
        line["answers"] = prediction.answers;
        line["sparql"] = prediction.sparql;
        line["logical_form"] = prediction.logical_form;
        out << line.dump() << '\n';
    }
}

CandidateBeam fetch_candidates(const std::string& service_url, const std::string& question,
                               int beam_size) {
    // Split "http://host:port/path" into client base and request path.
    std::size_t scheme = service_url.find("://");
    if (scheme == std::string::npos) throw HttpError("bad service URL: " + service_url);
    std::size_t path_start = service_url.find('/', scheme + 3);
    const std::string base =
        path_start == std::string::npos ? service_url : service_url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : service_url.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(60, 0);

    json body;
    body["question"] = question;
    body["beam_size"] = beam_size;
    auto response = client.Post(path, body.dump(), "application/json");
    if (!response)
        throw HttpError("generation service unreachable: " + service_url + " (" +
                        httplib::to_string(response.error()) + ")");
    if (response->status != 200)
        throw HttpError("generation service returned HTTP " + std::to_string(response->status));

    CandidateBeam beam;
    try {
        beam.candidates = candidates_from_json(json::parse(response->body).at("candidates"));
    } catch (const json::exception& e) {
        throw HttpError(std::string("bad generation service response: ") + e.what());
    }
    return beam;
}

void attach_beams(std::vector<Prediction>& predictions, std::span<const CandidateBeam> beams) {
    std::map<std::string, const CandidateBeam*> by_id;
    for (const CandidateBeam& beam : beams) by_id[beam.id] = &beam;
    for (Prediction& prediction : predictions) {
        auto it = by_id.find(prediction.id);
        if (it == by_id.end()) continue;
        prediction.beam_canonical.clear();
        prediction.unparseable_candidates = 0;
        for (const BeamCandidate& candidate : it->second->candidates) {
            try {
                prediction.beam_canonical.push_back(print(parse(candidate.text, ParseMode::Textual)));
            } catch (const ParseError&) {
                prediction.beam_canonical.push_back(std::nullopt);
                ++prediction.unparseable_candidates;
            }
        }
    }
}

}  // namespace kbqa
