#include "support/fixtures.hpp"

namespace kbqa::test {

std::string data_path(const std::string& name) {
    return std::string(KBQA_TEST_DATA_DIR) + "/" + name;
}

const KbStore& fixture_kb() {
    static const KbStore store = KbStore::load(
        data_path("kb_triples.tsv"), data_path("kb_labels.tsv"), data_path("kb_aliases.tsv"));
    return store;
}

std::vector<DatasetRecord> fixture_dataset() { return load_dataset(data_path("dataset_gold.jsonl")); }

}  // namespace kbqa::test
