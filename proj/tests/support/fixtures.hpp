#pragma once

#include <string>

#include "kbqa/kb_store.hpp"
#include "kbqa/pipeline.hpp"

namespace kbqa::test {

// Absolute path of a file under tests/data.
std::string data_path(const std::string& name);

// The ~50-triple fixture KB, loaded once per process.
const KbStore& fixture_kb();

std::vector<DatasetRecord> fixture_dataset();

}  // namespace kbqa::test
