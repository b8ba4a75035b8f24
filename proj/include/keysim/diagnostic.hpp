#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace keysim {

enum class Severity { Warning, Error };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string message;
  std::optional<std::uint64_t> address;

  static Diagnostic warning(std::string msg, std::optional<std::uint64_t> addr = std::nullopt) {
    return {Severity::Warning, std::move(msg), addr};
  }
  static Diagnostic error(std::string msg, std::optional<std::uint64_t> addr = std::nullopt) {
    return {Severity::Error, std::move(msg), addr};
  }
};

/// Renders `ADDR: message` when an address is attached, else just the message.
std::string to_string(const Diagnostic& d);
std::string hex(std::uint64_t value);

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace keysim
