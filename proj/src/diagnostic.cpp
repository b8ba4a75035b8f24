#include "keysim/diagnostic.hpp"

#include <algorithm>
#include <cstdio>

namespace keysim {

std::string hex(std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string to_string(const Diagnostic& d) {
  std::string out;
  if (d.address) out = hex(*d.address) + ": ";
  return out + d.message;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

}  // namespace keysim
