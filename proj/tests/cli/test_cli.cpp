#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "support/fixtures.hpp"

using json = nlohmann::json;
using kbqa::test::data_path;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Runs the CLI with stdout/stderr captured to temp files.
RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const std::string base = "/tmp/kbqa_cli_" + std::to_string(getpid()) + "_" +
                             std::to_string(counter++);
    const std::string command =
        std::string(KBQA_CLI_PATH) + " " + args + " >" + base + ".out 2>" + base + ".err";
    const int status = std::system(command.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(base + ".out");
    result.err = slurp(base + ".err");
    return result;
}

std::string kb_flags() {
    return "--triples " + data_path("kb_triples.tsv") + " --labels " + data_path("kb_labels.tsv") +
           " --aliases " + data_path("kb_aliases.tsv");
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("build-kb reports fixture counts and fails cleanly on missing files") {
    RunResult ok = run_cli("build-kb " + kb_flags());
    CHECK(ok.exit_code == 0);
    json report = json::parse(ok.out);
    CHECK(report.at("triples") == 47);
    CHECK(report.at("entities") == 18);
    CHECK(report.at("relations") == 15);

    RunResult missing = run_cli("build-kb --triples /nonexistent.tsv --labels " +
                                data_path("kb_labels.tsv") + " --aliases " +
                                data_path("kb_aliases.tsv"));
    CHECK(missing.exit_code == 1);
    CHECK(missing.err.find("/nonexistent.tsv") != std::string::npos);

    // empty KB is fine
    const std::string empty = "/tmp/kbqa_cli_empty.tsv";
    std::ofstream(empty).close();
    RunResult zero = run_cli("build-kb --triples " + empty + " --labels " + empty + " --aliases " +
                             empty);
    CHECK(zero.exit_code == 0);
    CHECK(json::parse(zero.out).at("triples") == 0);
}

TEST_CASE("train-data emits the instruction records byte for byte") {
    RunResult result = run_cli("train-data " + kb_flags() + " --dataset " +
                               data_path("dataset_gold.jsonl") + " --out -");
    CHECK(result.exit_code == 0);
    std::istringstream lines(result.out);
    std::string first;
    std::getline(lines, first);
    json record = json::parse(first);
    CHECK(record.at("instruction") ==
          "Generate a Logical Form query that retrieves the information corresponding to the "
          "given question.");
    CHECK(record.at("input") == "What is the name of justin bieber brother?");
    CHECK(record.at("output") ==
          "(AND (JOIN [ people , person , gender ] [ Male ]) (JOIN (R [ people , sibling "
          "relationship , sibling ]) (JOIN (R [ people , person , sibling s ]) [ Justin Bieber "
          "])))");
}

TEST_CASE("answer + eval round trip scores 1.0 on the gold beams") {
    const std::string predictions = "/tmp/kbqa_cli_predictions.jsonl";
    RunResult answered = run_cli("answer " + kb_flags() + " --beams " +
                                 data_path("beams_gold.jsonl") + " --out " + predictions);
    REQUIRE(answered.exit_code == 0);

    RunResult scored = run_cli("eval --predictions " + predictions + " --gold " +
                               data_path("dataset_gold.jsonl") + " --labels " +
                               data_path("kb_labels.tsv") + " --beams " +
                               data_path("beams_gold.jsonl"));
    REQUIRE(scored.exit_code == 0);
    json metrics = json::parse(scored.out);
    CHECK(metrics.at("f1") == 1.0);
    CHECK(metrics.at("hits_at_1") == 1.0);
    CHECK(metrics.at("acc") == 1.0);
    CHECK(metrics.at("em") == 1.0);
    CHECK(metrics.at("bm") == 1.0);
    CHECK(metrics.at("sm") == 1.0);
}

TEST_CASE("ablation flags change grounding behavior on perturbed input") {
    const std::string beams = "/tmp/kbqa_cli_typo_beams.jsonl";
    {
        std::ofstream out(beams);
        json line;
        line["id"] = "q3";
        line["candidates"] =
            json::array({{{"text", "(JOIN (R [ people , person , gender ]) [ Justn Bieber ])"}}});
        out << line.dump() << "\n";
    }
    const std::string predictions = "/tmp/kbqa_cli_typo_predictions.jsonl";

    RunResult full = run_cli("answer " + kb_flags() + " --beams " + beams + " --out " + predictions);
    REQUIRE(full.exit_code == 0);
    CHECK(json::parse(slurp(predictions)).at("answers") == json::array({"m.05zppz"}));

    RunResult ablated = run_cli("answer " + kb_flags() + " --no-entity-retrieval --beams " +
                                beams + " --out " + predictions);
    REQUIRE(ablated.exit_code == 0);
    CHECK(json::parse(slurp(predictions)).at("answers") == json::array());
}

TEST_CASE("config file fills defaults and flags take precedence") {
    const std::string config = "/tmp/kbqa_cli_config.txt";
    {
        std::ofstream out(config);
        out << "# fixture paths\n";
        out << "triples = " << data_path("kb_triples.tsv") << "\n";
        out << "labels = " << data_path("kb_labels.tsv") << "\n";
        out << "aliases = " << data_path("kb_aliases.tsv") << "\n";
        out << "k_e = 5\n";
        out << "scorer = char-trigram\n";
    }
    RunResult result = run_cli("answer --config " + config + " --beams " +
                               data_path("beams_gold.jsonl") + " --out -");
    CHECK(result.exit_code == 0);

    const std::string bad = "/tmp/kbqa_cli_bad_config.txt";
    {
        std::ofstream out(bad);
        out << "unknown_key = 3\n";
    }
    RunResult rejected = run_cli("answer --config " + bad + " --beams " +
                                 data_path("beams_gold.jsonl") + " --out -");
    CHECK(rejected.exit_code == 1);
    CHECK(rejected.err.find("unknown_key") != std::string::npos);
}

TEST_CASE("eval rejects mismatched prediction/gold IDs") {
    const std::string predictions = "/tmp/kbqa_cli_mismatch.jsonl";
    {
        std::ofstream out(predictions);
        out << R"json({"id": "zzz", "answers": [], "sparql": "", "logical_form": ""})json"
            << "\n";
    }
    RunResult result = run_cli("eval --predictions " + predictions + " --gold " +
                               data_path("dataset_gold.jsonl"));
    CHECK(result.exit_code == 1);
}

TEST_CASE("analyze-retrieval prefers slot queries over question queries") {
    auto efficiency = [&](const std::string& mode, const std::string& scorer) {
        RunResult result = run_cli("analyze-retrieval " + kb_flags() + " --dataset " +
                                   data_path("dataset_gold.jsonl") + " --mode " + mode +
                                   " --scorer " + scorer + " --top-k 3");
        REQUIRE(result.exit_code == 0);
        json out = json::parse(result.out);
        return std::pair<double, double>(out.at("entity_efficiency").get<double>(),
                                         out.at("relation_efficiency").get<double>());
    };
    for (const std::string scorer : {"char-trigram", "lexical-bm25"}) {
        auto [ag_entity, ag_relation] = efficiency("ag-r", scorer);
        auto [nl_entity, nl_relation] = efficiency("nl-r", scorer);
        CHECK(ag_entity >= nl_entity);
        CHECK(ag_relation >= nl_relation);
    }

    RunResult empty = run_cli("analyze-retrieval " + kb_flags() +
                              " --dataset /dev/null --mode ag-r");
    CHECK(empty.exit_code == 1);
}

TEST_CASE("answer pulls beams from a generation service") {
    // stub generator: returns the gold textual form for the brother question
    httplib::Server stub;
    stub.Post("/generate", [](const httplib::Request& request, httplib::Response& response) {
        auto body = nlohmann::json::parse(request.body);
        nlohmann::json out;
        if (body.at("question").get<std::string>().find("brother") != std::string::npos) {
            out["candidates"] = nlohmann::json::array(
                {{{"text",
                   "(AND (JOIN [ people , person , gender ] [ Male ]) (JOIN (R [ people , "
                   "sibling relationship , sibling ]) (JOIN (R [ people , person , sibling s ]) "
                   "[ Justin Bieber ])))"}}});
        } else {
            out["candidates"] = nlohmann::json::array();
        }
        response.set_content(out.dump(), "application/json");
    });
    const int port = stub.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { stub.listen_after_bind(); });
    stub.wait_until_ready();

    const std::string dataset = "/tmp/kbqa_cli_service_dataset.jsonl";
    {
        std::ofstream out(dataset);
        out << R"json({"id": "q1", "question": "What is the name of justin bieber brother?", )json"
            << R"json("logical_form": "(JOIN people.person.gender m.05zppz)", "answers": ["m.0gxnnwc"]})json"
            << "\n";
    }
    const std::string predictions = "/tmp/kbqa_cli_service_predictions.jsonl";
    RunResult result = run_cli("answer " + kb_flags() + " --service http://127.0.0.1:" +
                               std::to_string(port) + "/generate --dataset " + dataset +
                               " --beam-size 4 --out " + predictions);
    REQUIRE(result.exit_code == 0);
    json prediction = json::parse(slurp(predictions));
    CHECK(prediction.at("id") == "q1");
    CHECK(prediction.at("answers") == json::array({"m.0gxnnwc"}));

    // a dead service is an input error, not a silent empty prediction
    stub.stop();
    thread.join();
    RunResult dead = run_cli("answer " + kb_flags() + " --service http://127.0.0.1:" +
                             std::to_string(port) + "/generate --dataset " + dataset + " --out -");
    CHECK(dead.exit_code == 1);
}

TEST_CASE("serve answers over HTTP") {
    const int port = 18000 + static_cast<int>(getpid() % 2000);

    const pid_t child = fork();
    REQUIRE(child >= 0);
    if (child == 0) {
        const std::string port_text = std::to_string(port);
        execl(KBQA_CLI_PATH, KBQA_CLI_PATH, "serve", "--port", port_text.c_str(), "--triples",
              data_path("kb_triples.tsv").c_str(), "--labels", data_path("kb_labels.tsv").c_str(),
              "--aliases", data_path("kb_aliases.tsv").c_str(), (char*)nullptr);
        _exit(127);
    }

    httplib::Client client("127.0.0.1", port);
    client.set_connection_timeout(1, 0);

    bool healthy = false;
    for (int attempt = 0; attempt < 100 && !healthy; ++attempt) {
        auto response = client.Get("/healthz");
        if (response && response->status == 200) {
            healthy = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    REQUIRE(healthy);

    json beam;
    beam["id"] = "q1";
    beam["candidates"] = json::array(
        {{{"text",
           "(AND (JOIN [ people , person , gender ] [ Male ]) (JOIN (R [ people , sibling "
           "relationship , sibling ]) (JOIN (R [ people , person , sibling s ]) [ Justin Bieber "
           "])))"}}});
    auto answered = client.Post("/answer", beam.dump(), "application/json");
    REQUIRE(answered);
    CHECK(answered->status == 200);
    json prediction = json::parse(answered->body);
    CHECK(prediction.at("answers") == json::array({"m.0gxnnwc"}));
    CHECK(prediction.at("logical_form").get<std::string>().find("m.0gxnnwc") == std::string::npos);

    auto malformed = client.Post("/answer", "{not json", "application/json");
    REQUIRE(malformed);
    CHECK(malformed->status == 400);

    kill(child, SIGTERM);
    int status = 0;
    waitpid(child, &status, 0);
}

TEST_SUITE_END();
