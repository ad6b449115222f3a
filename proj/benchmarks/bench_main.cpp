#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "kbqa/executor.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/logical_form.hpp"
#include "kbqa/retrieval.hpp"
#include "kbqa/scorers.hpp"
#include "kbqa/sparql.hpp"

namespace {

const char* kTextualForm =
    "(AND (JOIN [ people , person , gender ] [ Male ]) (JOIN (R [ people , sibling relationship "
    ", sibling ]) (JOIN (R [ people , person , sibling s ]) [ Justin Bieber ])))";
const char* kGroundedForm =
    "(AND (JOIN people.person.gender m.05zppz) (JOIN (R people.sibling_relationship.sibling) "
    "(JOIN (R people.person.sibling_s) m.06w2sn5)))";

std::string data_file(const char* name) {
    return std::string(KBQA_BENCH_DATA_DIR) + "/" + name;
}

const kbqa::KbStore& bench_kb() {
    static const kbqa::KbStore kb = kbqa::KbStore::load(
        data_file("kb_triples.tsv"), data_file("kb_labels.tsv"), data_file("kb_aliases.tsv"));
    return kb;
}

void BM_ParseTextual(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(kbqa::parse(kTextualForm, kbqa::ParseMode::Textual));
}
BENCHMARK(BM_ParseTextual);

void BM_PrintForm(benchmark::State& state) {
    const kbqa::LogicalForm lf = kbqa::parse(kTextualForm, kbqa::ParseMode::Textual);
    for (auto _ : state) benchmark::DoNotOptimize(kbqa::print(lf));
}
BENCHMARK(BM_PrintForm);

void BM_SkeletonText(benchmark::State& state) {
    const kbqa::LogicalForm lf = kbqa::parse(kTextualForm, kbqa::ParseMode::Textual);
    for (auto _ : state) benchmark::DoNotOptimize(kbqa::skeleton_text(lf));
}
BENCHMARK(BM_SkeletonText);

void BM_ExecuteDirect(benchmark::State& state) {
    const kbqa::LogicalForm lf = kbqa::parse(kGroundedForm, kbqa::ParseMode::Grounded);
    const kbqa::KbStore& kb = bench_kb();
    for (auto _ : state) benchmark::DoNotOptimize(kbqa::execute(lf, kb));
}
BENCHMARK(BM_ExecuteDirect);

void BM_ConvertToQuery(benchmark::State& state) {
    const kbqa::LogicalForm lf = kbqa::parse(kGroundedForm, kbqa::ParseMode::Grounded);
    for (auto _ : state) benchmark::DoNotOptimize(kbqa::sparql::convert(lf));
}
BENCHMARK(BM_ConvertToQuery);

void BM_ExecuteSparqlInterpreter(benchmark::State& state) {
    const kbqa::sparql::SparqlQuery query =
        kbqa::sparql::convert(kbqa::parse(kGroundedForm, kbqa::ParseMode::Grounded));
    const kbqa::KbStore& kb = bench_kb();
    for (auto _ : state) benchmark::DoNotOptimize(kbqa::sparql::execute_sparql(query, kb));
}
BENCHMARK(BM_ExecuteSparqlInterpreter);

void BM_TrigramScore(benchmark::State& state) {
    auto scorer = kbqa::make_char_trigram_scorer();
    for (auto _ : state)
        benchmark::DoNotOptimize(scorer->score("Justn Bieber", "Justin Bieber"));
}
BENCHMARK(BM_TrigramScore);

void BM_Bm25Score(benchmark::State& state) {
    std::vector<std::string> corpus;
    for (const auto& [id, label] : bench_kb().labels()) corpus.push_back(label);
    auto scorer = kbqa::make_bm25_scorer(corpus);
    for (auto _ : state)
        benchmark::DoNotOptimize(scorer->score("justin bieber brother", "Justin Bieber"));
}
BENCHMARK(BM_Bm25Score);

void BM_TopKWithThreshold(benchmark::State& state) {
    struct Scored {
        int tag;
        double score;
    };
    std::mt19937_64 rng(7);
    std::vector<Scored> items;
    for (int i = 0; i < 1000; ++i)
        items.push_back({i, static_cast<double>(rng() % 1000) / 999.0});
    for (auto _ : state) {
        auto copy = items;
        benchmark::DoNotOptimize(kbqa::top_k_with_threshold(std::move(copy), 10, 0.25));
    }
}
BENCHMARK(BM_TopKWithThreshold);

void BM_GroundGoldBeam(benchmark::State& state) {
    const kbqa::KbStore& kb = bench_kb();
    kbqa::RetrievalConfig config;
    config.scorer = kbqa::ScorerKind::CharTrigram;
    config.neighborhood_hops = 2;
    const kbqa::ScorerSet scorers = kbqa::make_scorers(config, kb);
    const std::vector<kbqa::LogicalForm> beam = {
        kbqa::parse(kTextualForm, kbqa::ParseMode::Textual)};
    for (auto _ : state) benchmark::DoNotOptimize(kbqa::ground(beam, kb, config, scorers));
}
BENCHMARK(BM_GroundGoldBeam);

}  // namespace

BENCHMARK_MAIN();
