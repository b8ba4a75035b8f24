// Differential check of the lifter: each instruction runs through the micro-op
// interpreter and through the reference semantics on the same random state.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "keysim/arch.hpp"

namespace reftest {

/// One instruction form per line of assembly, covering every mnemonic and
/// operand shape the lifter accepts for `arch`.
std::vector<std::string> equivalence_cases(keysim::Arch arch);

struct EquivalenceResult {
  std::size_t valuations = 0;
  std::size_t condition_checks = 0;
  std::vector<std::string> mismatches;  // first few, human readable
  std::size_t mismatch_count = 0;
};

/// Runs `text` under `valuations` random machine states. Each state first
/// executes a random comparison so that flag-preserving instructions are
/// checked too. After the instruction, every branch condition whose outcome
/// the single last-comparison record determines exactly is compared by
/// lifting the matching conditional branch.
EquivalenceResult check_equivalence(keysim::Arch arch, const std::string& text, std::size_t valuations,
                                    std::uint64_t seed);

}  // namespace reftest
