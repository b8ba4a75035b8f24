// Locating and loading the fixture bundles shipped under tests/.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "keysim/ingest.hpp"

namespace reftest {

std::filesystem::path fixture_dir();
std::filesystem::path corpus_dir();

/// Stems of every `*.bundle` in the fixture directory, sorted.
std::vector<std::string> fixture_names();

/// The function named after the bundle `<name>.bundle`.
keysim::Function load_fixture(std::string_view name);

/// Every block has at most one successor and the entry walk never revisits a
/// block.
bool is_straight_line(const keysim::Function& f);

}  // namespace reftest
