#include "fixtures.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace reftest {

std::filesystem::path fixture_dir() { return KEYSIM_TEST_DATA_DIR "/fixtures"; }
std::filesystem::path corpus_dir() { return KEYSIM_TEST_DATA_DIR "/corpus"; }

std::vector<std::string> fixture_names() {
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(fixture_dir()))
    if (entry.path().extension() == ".bundle") out.push_back(entry.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

keysim::Function load_fixture(std::string_view name) {
  auto program = keysim::load_bundle(fixture_dir() / (std::string{name} + ".bundle"));
  const keysim::Function* f = program.find(name);
  if (!f) throw std::runtime_error("fixture without function " + std::string{name});
  return *f;
}

bool is_straight_line(const keysim::Function& f) {
  std::set<keysim::BlockId> seen;
  keysim::BlockId at = f.entry;
  for (;;) {
    if (!seen.insert(at).second) return false;
    const auto& b = f.block(at);
    if (b.successors.size() > 1) return false;
    if (b.successors.empty()) return true;
    at = b.successors.front().target;
  }
}

}  // namespace reftest
