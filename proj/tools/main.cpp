#include <atomic>
#include <fstream>
#include <limits>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "kbqa/executor.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/logical_form.hpp"
#include "kbqa/pipeline.hpp"
#include "kbqa/retrieval.hpp"
#include "kbqa/sparql.hpp"

using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitInternalError = 2;

struct KbPathOptions {
    std::string triples;
    std::string labels;
    std::string aliases;
};

struct RetrievalOptions {
    kbqa::RetrievalConfig config;
    std::string scorer_name = "char-trigram";
    bool no_entity_retrieval = false;
    bool no_relation_retrieval = false;
};

// `required` is off for subcommands with --config, where the file may supply
// the paths; those validate after the merge.
void add_kb_options(CLI::App* cmd, KbPathOptions& kb, bool required = true) {
    cmd->add_option("--triples", kb.triples, "KB triples file (TSV)")->required(required);
    cmd->add_option("--labels", kb.labels, "entity labels file (TSV)")->required(required);
    cmd->add_option("--aliases", kb.aliases, "entity aliases file (TSV)")->required(required);
}

void require_kb_paths(const KbPathOptions& kb) {
    if (kb.triples.empty() || kb.labels.empty() || kb.aliases.empty())
        throw kbqa::IoError("KB paths missing: --triples, --labels, and --aliases are required "
                            "(flags or config file)");
}

void add_retrieval_options(CLI::App* cmd, RetrievalOptions& opts) {
    cmd->add_option("--scorer", opts.scorer_name,
                    "similarity scorer: char-trigram | lexical-bm25 | dense-file");
    cmd->add_option("--embeddings", opts.config.embeddings_path,
                    "embedding file for the dense-file scorer");
    cmd->add_option("--k-e", opts.config.k_e, "entity candidates per slot");
    cmd->add_option("--k-r", opts.config.k_r, "relation candidates per slot");
    cmd->add_option("--k-1", opts.config.k_1, "entity permutations per candidate form");
    cmd->add_option("--k-2", opts.config.k_2, "relation permutations per candidate form");
    cmd->add_option("--t-e", opts.config.t_e, "entity score threshold");
    cmd->add_option("--t-r", opts.config.t_r, "relation score threshold");
    cmd->add_option("--t-1", opts.config.t_1, "entity permutation score threshold");
    cmd->add_option("--t-2", opts.config.t_2, "relation permutation score threshold");
    cmd->add_option("--hops", opts.config.neighborhood_hops, "neighborhood expansion hops");
    cmd->add_option("--max-permutations", opts.config.max_permutations,
                    "hard cap on enumerated slot assignments per form");
    cmd->add_flag("--no-entity-retrieval", opts.no_entity_retrieval,
                  "ground entity slots by exact alias match only");
    cmd->add_flag("--no-relation-retrieval", opts.no_relation_retrieval,
                  "ground relation slots by exact textualization match only");
}

// Flat key=value config file; '#' starts a comment. Flags given on the
// command line take precedence, so the file only fills in unset options.
void apply_config_file(const std::string& path, CLI::App* cmd, KbPathOptions& kb,
                       RetrievalOptions& opts) {
    std::ifstream in(path);
    if (!in) throw kbqa::IoError("cannot open config file: " + path);

    auto unset = [&](const std::string& flag) {
        auto* option = cmd->get_option_no_throw(flag);
        return option != nullptr && option->count() == 0;
    };

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back())))
            line.pop_back();
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw kbqa::IoError(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(0, 1);
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
            return s;
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        auto as_int = [&](const std::string& v) {
            try {
                return std::stoi(v);
            } catch (const std::exception&) {
                throw kbqa::IoError(path + ":" + std::to_string(lineno) + ": bad integer '" + v +
                                    "'");
            }
        };
        auto as_double = [&](const std::string& v) {
            try {
                return std::stod(v);
            } catch (const std::exception&) {
                throw kbqa::IoError(path + ":" + std::to_string(lineno) + ": bad number '" + v +
                                    "'");
            }
        };
        auto as_bool = [&](const std::string& v) {
            if (v == "true" || v == "1") return true;
            if (v == "false" || v == "0") return false;
            throw kbqa::IoError(path + ":" + std::to_string(lineno) + ": bad boolean '" + v + "'");
        };

        if (key == "triples") {
            if (unset("--triples")) kb.triples = value;
        } else if (key == "labels") {
            if (unset("--labels")) kb.labels = value;
        } else if (key == "aliases") {
            if (unset("--aliases")) kb.aliases = value;
        } else if (key == "scorer") {
            if (unset("--scorer")) opts.scorer_name = value;
        } else if (key == "embeddings") {
            if (unset("--embeddings")) opts.config.embeddings_path = value;
        } else if (key == "k_e") {
            if (unset("--k-e")) opts.config.k_e = as_int(value);
        } else if (key == "k_r") {
            if (unset("--k-r")) opts.config.k_r = as_int(value);
        } else if (key == "k_1") {
            if (unset("--k-1")) opts.config.k_1 = as_int(value);
        } else if (key == "k_2") {
            if (unset("--k-2")) opts.config.k_2 = as_int(value);
        } else if (key == "t_e") {
            if (unset("--t-e")) opts.config.t_e = as_double(value);
        } else if (key == "t_r") {
            if (unset("--t-r")) opts.config.t_r = as_double(value);
        } else if (key == "t_1") {
            if (unset("--t-1")) opts.config.t_1 = as_double(value);
        } else if (key == "t_2") {
            if (unset("--t-2")) opts.config.t_2 = as_double(value);
        } else if (key == "hops") {
            if (unset("--hops")) opts.config.neighborhood_hops = as_int(value);
        } else if (key == "max_permutations") {
            if (unset("--max-permutations"))
                opts.config.max_permutations = static_cast<std::size_t>(as_int(value));
        } else if (key == "entity_retrieval") {
            if (unset("--no-entity-retrieval")) opts.no_entity_retrieval = !as_bool(value);
        } else if (key == "relation_retrieval") {
            if (unset("--no-relation-retrieval")) opts.no_relation_retrieval = !as_bool(value);
        } else {
            throw kbqa::IoError(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                                "'");
        }
    }
}

kbqa::RetrievalConfig finalize_retrieval(RetrievalOptions& opts) {
    auto kind = kbqa::scorer_kind_from_string(opts.scorer_name);
    if (!kind) throw kbqa::IoError("unknown scorer '" + opts.scorer_name + "'");
    opts.config.scorer = *kind;
    opts.config.entity_retrieval = !opts.no_entity_retrieval;
    opts.config.relation_retrieval = !opts.no_relation_retrieval;
    opts.config.validate();
    return opts.config;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw kbqa::IoError("cannot open output file: " + path);
    return out;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

int run_build_kb(const KbPathOptions& paths, const std::string& report_path) {
    kbqa::KbStore kb = kbqa::KbStore::load(paths.triples, paths.labels, paths.aliases);
    json report;
    report["entities"] = kb.entity_count();
    report["relations"] = kb.relation_count();
    report["triples"] = kb.triple_count();
    if (report_path.empty()) {
        std::cout << report.dump() << '\n';
    } else {
        open_output(report_path) << report.dump() << '\n';
    }
    std::cerr << "loaded " << kb.triple_count() << " triples, " << kb.entity_count()
              << " entities, " << kb.relation_count() << " relations\n";
    return kExitOk;
}

int run_train_data(const KbPathOptions& paths, const std::string& dataset_path,
                   const std::string& out_path) {
    kbqa::KbStore kb = kbqa::KbStore::load(paths.triples, paths.labels, paths.aliases);
    auto records = kbqa::load_dataset(dataset_path);
    kbqa::TrainingData data = kbqa::build_training_data(records, kb);
    for (const auto& id : data.skipped_ids)
        std::cerr << "warning: skipped record " << id << " (entity without label)\n";
    std::cerr << "wrote " << data.records.size() << " records (" << data.skipped_ids.size()
              << " skipped), max tokens " << data.max_tokens << "\n";
    if (out_path == "-") {
        kbqa::write_instruction_data(data.records, std::cout);
    } else {
        auto out = open_output(out_path);
        kbqa::write_instruction_data(data.records, out);
    }
    return kExitOk;
}

int run_answer(const KbPathOptions& paths, kbqa::RetrievalConfig config,
               const std::string& beams_path, const std::string& service_url,
               const std::string& dataset_path, int beam_size, const std::string& out_path) {
    kbqa::KbStore kb = kbqa::KbStore::load(paths.triples, paths.labels, paths.aliases);
    kbqa::ScorerSet scorers = kbqa::make_scorers(config, kb);

    std::vector<kbqa::CandidateBeam> beams;
    if (!beams_path.empty()) {
        beams = kbqa::ingest_candidates(beams_path);
    } else {
        // beams come from the generation service, one question at a time
        for (const kbqa::DatasetRecord& record : kbqa::load_dataset(dataset_path)) {
            kbqa::CandidateBeam beam =
                kbqa::fetch_candidates(service_url, record.question, beam_size);
            beam.id = record.id;
            beams.push_back(std::move(beam));
        }
    }

    std::vector<kbqa::Prediction> predictions;
    std::size_t answered = 0;
    for (const kbqa::CandidateBeam& beam : beams) {
        predictions.push_back(kbqa::answer(beam, kb, config, scorers));
        if (!predictions.back().answers.empty()) ++answered;
    }
    std::cerr << "answered " << answered << "/" << beams.size() << " questions\n";

    if (out_path == "-") {
        kbqa::write_predictions(predictions, std::cout);
    } else {
        auto out = open_output(out_path);
        kbqa::write_predictions(predictions, out);
    }
    return kExitOk;
}

int run_eval(const std::string& predictions_path, const std::string& gold_path,
             const std::string& labels_path, const std::string& beams_path,
             const std::string& out_json) {
    auto predictions = kbqa::load_predictions(predictions_path);
    auto records = kbqa::load_dataset(gold_path);

    // EM/BM/SM need both the textual gold forms (--labels) and the candidate
    // texts (--beams); with only one of them the answer metrics are reported.
    const bool text_metrics = !labels_path.empty() && !beams_path.empty();
    if (!labels_path.empty() && beams_path.empty())
        std::cerr << "note: --labels without --beams; EM/BM/SM not computed\n";

    std::vector<kbqa::GoldReference> golds;
    if (text_metrics) {
        golds = kbqa::make_gold_references(records, kbqa::KbStore::load_labels(labels_path));
        kbqa::attach_beams(predictions, kbqa::ingest_candidates(beams_path));
    } else {
        for (auto& record : records) golds.push_back({std::move(record), std::nullopt});
    }

    kbqa::Metrics metrics = kbqa::evaluate(predictions, golds);
    json out;
    out["questions"] = metrics.question_count;
    out["f1"] = metrics.f1;
    out["hits_at_1"] = metrics.hits_at_1;
    out["acc"] = metrics.acc;
    if (metrics.em) {
        out["em"] = *metrics.em;
        out["bm"] = *metrics.bm;
        out["sm"] = *metrics.sm;
        out["max_tokens"] = metrics.max_tokens;
    }
    if (out_json.empty() || out_json == "-") {
        std::cout << out.dump(2) << '\n';
    } else {
        open_output(out_json) << out.dump(2) << '\n';
    }
    return kExitOk;
}

int run_analyze_retrieval(const KbPathOptions& paths, kbqa::RetrievalConfig config,
                          const std::string& dataset_path, const std::string& mode, int top_k,
                          const std::string& out_json) {
    kbqa::KbStore kb = kbqa::KbStore::load(paths.triples, paths.labels, paths.aliases);
    kbqa::ScorerSet scorers = kbqa::make_scorers(config, kb);
    auto records = kbqa::load_dataset(dataset_path);
    if (records.empty()) throw kbqa::IoError("dataset is empty: " + dataset_path);

    std::vector<std::string> label_pool;
    for (const auto& [id, label] : kb.labels()) label_pool.push_back(label);
    std::sort(label_pool.begin(), label_pool.end());
    std::vector<std::string> relation_pool;
    for (const auto& relation : kb.relations())
        relation_pool.push_back(kbqa::relation_phrase(relation));

    struct Scored {
        std::string text;
        double score;
    };
    // Retrieved set: the top-k positively scoring documents; a query that
    // matches nothing keeps its single best document so the pair still counts.
    auto top_texts = [&](const std::string& query, const std::vector<std::string>& pool,
                         const kbqa::SimilarityScorer& scorer) {
        std::vector<Scored> scored;
        scored.reserve(pool.size());
        for (const auto& text : pool) scored.push_back({text, scorer.score(query, text)});
        auto kept =
            kbqa::top_k_with_threshold(scored, top_k, std::numeric_limits<double>::min());
        if (kept.empty()) kept = kbqa::top_k_with_threshold(std::move(scored), 1, 0.0);
        std::vector<std::string> texts;
        for (auto& item : kept) texts.push_back(std::move(item.text));
        return texts;
    };

    // NL-R queries with the question text; AG-R queries with the slot phrases
    // of the gold textual form.
    std::vector<std::pair<std::string, std::vector<std::string>>> entity_pairs, relation_pairs;
    for (const kbqa::DatasetRecord& record : records) {
        kbqa::LogicalForm gold = kbqa::textualize(
            kbqa::parse(record.logical_form, kbqa::ParseMode::Grounded), kb.labels());
        std::vector<std::string> entity_queries, relation_queries;
        if (mode == "nl-r") {
            entity_queries = {record.question};
            relation_queries = {record.question};
        } else {
            auto walk = [&](auto&& self, const kbqa::LogicalForm& node) -> void {
                if (node.kind == kbqa::NodeKind::EntityLeaf &&
                    node.entity.state == kbqa::SlotState::Textual)
                    entity_queries.push_back(node.entity.label);
                if (node.kind == kbqa::NodeKind::RelationLeaf &&
                    node.relation.state == kbqa::SlotState::Textual) {
                    std::string phrase;
                    for (const auto& segment : node.relation.segments) {
                        if (!phrase.empty()) phrase += " , ";
                        phrase += segment;
                    }
                    relation_queries.push_back(phrase);
                }
                for (const auto& child : node.children) self(self, child);
            };
            walk(walk, gold);
        }
        for (const auto& query : entity_queries)
            entity_pairs.emplace_back(query, top_texts(query, label_pool, *scorers.entity));
        for (const auto& query : relation_queries)
            relation_pairs.emplace_back(query, top_texts(query, relation_pool, *scorers.relation));
    }

    json out;
    out["mode"] = mode;
    out["scorer"] = std::string(kbqa::to_string(config.scorer));
    out["top_k"] = top_k;
    out["entity_pairs"] = entity_pairs.size();
    out["relation_pairs"] = relation_pairs.size();
    out["entity_efficiency"] = kbqa::retrieval_efficiency(entity_pairs, *scorers.entity);
    out["relation_efficiency"] = kbqa::retrieval_efficiency(relation_pairs, *scorers.relation);
    if (out_json.empty() || out_json == "-") {
        std::cout << out.dump(2) << '\n';
    } else {
        open_output(out_json) << out.dump(2) << '\n';
    }
    return kExitOk;
}

int run_serve(const KbPathOptions& paths, kbqa::RetrievalConfig config, int port) {
    kbqa::KbStore kb = kbqa::KbStore::load(paths.triples, paths.labels, paths.aliases);
    kbqa::ScorerSet scorers = kbqa::make_scorers(config, kb);

    httplib::Server server;
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& response) {
        response.set_content("ok", "text/plain");
    });
    server.Post("/answer", [&](const httplib::Request& request, httplib::Response& response) {
        kbqa::CandidateBeam beam;
        try {
            json body = json::parse(request.body);
            beam.id = body.value("id", "");
            for (const auto& entry : body.at("candidates")) {
                kbqa::BeamCandidate candidate;
                candidate.text = entry.at("text").get<std::string>();
                if (entry.contains("score")) candidate.score = entry.at("score").get<double>();
                beam.candidates.push_back(std::move(candidate));
            }
        } catch (const json::exception& e) {
            response.status = 400;
            json error;
            error["error"] = e.what();
            response.set_content(error.dump(), "application/json");
            return;
        }
        kbqa::Prediction prediction = kbqa::answer(beam, kb, config, scorers);
        json out;
        out["id"] = prediction.id;
        out["answers"] = prediction.answers;
        out["sparql"] = prediction.sparql;
        out["logical_form"] = prediction.logical_form;
        out["unparseable_candidates"] = prediction.unparseable_candidates;
        response.set_content(out.dump(), "application/json");
    });

    std::cerr << "kb loaded (" << kb.triple_count() << " triples); listening on port " << port
              << "\n";
    if (!server.listen("0.0.0.0", port))
        throw kbqa::IoError("cannot bind port " + std::to_string(port));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grounding engine for beam-generated logical forms over an in-memory KB"};
    app.require_subcommand(1);

    // build-kb
    auto* build_kb = app.add_subcommand("build-kb", "load and validate a KB, print counts");
    KbPathOptions build_kb_paths;
    add_kb_options(build_kb, build_kb_paths);
    std::string build_kb_report;
    build_kb->add_option("--out-report", build_kb_report, "write the counts report to a file");

    // train-data
    auto* train = app.add_subcommand("train-data", "build instruction-tuning records");
    KbPathOptions train_paths;
    add_kb_options(train, train_paths);
    std::string train_dataset, train_out = "-";
    train->add_option("--dataset", train_dataset, "gold dataset (JSON lines)")->required();
    train->add_option("--out", train_out, "output path ('-' for stdout)");

    // answer
    auto* answer_cmd = app.add_subcommand("answer", "ground candidate beams and execute them");
    KbPathOptions answer_paths;
    add_kb_options(answer_cmd, answer_paths, /*required=*/false);
    RetrievalOptions answer_retrieval;
    add_retrieval_options(answer_cmd, answer_retrieval);
    std::string answer_beams, answer_service, answer_dataset, answer_out = "-";
    std::string answer_config_file;
    int answer_beam_size = 8;
    answer_cmd->add_option("--beams", answer_beams, "candidate beams file (JSON lines)");
    answer_cmd->add_option("--service", answer_service, "generation service URL");
    answer_cmd->add_option("--dataset", answer_dataset,
                           "questions to send to the generation service");
    answer_cmd->add_option("--beam-size", answer_beam_size, "beam size requested per question");
    answer_cmd->add_option("--config", answer_config_file, "key=value config file");
    answer_cmd->add_option("--out", answer_out, "predictions output ('-' for stdout)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold answers");
    std::string eval_predictions, eval_gold, eval_labels, eval_beams, eval_out;
    eval_cmd->add_option("--predictions", eval_predictions, "predictions file")->required();
    eval_cmd->add_option("--gold", eval_gold, "gold dataset file")->required();
    eval_cmd->add_option("--labels", eval_labels,
                         "labels file; enables EM/BM/SM and max-token reporting");
    eval_cmd->add_option("--beams", eval_beams, "beams file; enables EM/BM/SM");
    eval_cmd->add_option("--out-json", eval_out, "metrics output ('-' for stdout)");

    // analyze-retrieval
    auto* analyze = app.add_subcommand("analyze-retrieval",
                                       "average retrieval similarity, question vs slot queries");
    KbPathOptions analyze_paths;
    add_kb_options(analyze, analyze_paths);
    RetrievalOptions analyze_retrieval;
    add_retrieval_options(analyze, analyze_retrieval);
    std::string analyze_dataset, analyze_mode, analyze_out;
    int analyze_k = 3;
    analyze->add_option("--dataset", analyze_dataset, "gold dataset (JSON lines)")->required();
    analyze->add_option("--mode", analyze_mode, "query source: nl-r | ag-r")
        ->required()
        ->check(CLI::IsMember({"nl-r", "ag-r"}));
    analyze->add_option("--top-k", analyze_k, "retrieved set size per query");
    analyze->add_option("--out-json", analyze_out, "output path ('-' for stdout)");

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP answering endpoint over a loaded KB");
    KbPathOptions serve_paths;
    add_kb_options(serve, serve_paths, /*required=*/false);
    RetrievalOptions serve_retrieval;
    add_retrieval_options(serve, serve_retrieval);
    std::string serve_config_file;
    int serve_port = 8080;
    serve->add_option("--port", serve_port, "listen port");
    serve->add_option("--config", serve_config_file, "key=value config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build_kb->parsed()) return run_build_kb(build_kb_paths, build_kb_report);
        if (train->parsed()) return run_train_data(train_paths, train_dataset, train_out);
        if (answer_cmd->parsed()) {
            if (!answer_config_file.empty())
                apply_config_file(answer_config_file, answer_cmd, answer_paths, answer_retrieval);
            if (answer_beams.empty() == answer_service.empty()) {
                std::cerr << "error: exactly one of --beams or --service is required\n";
                return kExitInputError;
            }
            if (!answer_service.empty() && answer_dataset.empty()) {
                std::cerr << "error: --service mode needs --dataset for the questions\n";
                return kExitInputError;
            }
            require_kb_paths(answer_paths);
            return run_answer(answer_paths, finalize_retrieval(answer_retrieval), answer_beams,
                              answer_service, answer_dataset, answer_beam_size, answer_out);
        }
        if (eval_cmd->parsed())
            return run_eval(eval_predictions, eval_gold, eval_labels, eval_beams, eval_out);
        if (analyze->parsed())
            return run_analyze_retrieval(analyze_paths, finalize_retrieval(analyze_retrieval),
                                         analyze_dataset, analyze_mode, analyze_k, analyze_out);
        if (serve->parsed()) {
            if (!serve_config_file.empty())
                apply_config_file(serve_config_file, serve, serve_paths, serve_retrieval);
            require_kb_paths(serve_paths);
            return run_serve(serve_paths, finalize_retrieval(serve_retrieval), serve_port);
        }
    } catch (const kbqa::KbLoadError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const kbqa::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const kbqa::HttpError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const kbqa::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternalError;
    }
    return kExitInternalError;
}
