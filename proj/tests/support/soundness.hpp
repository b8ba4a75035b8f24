// Concrete soundness checks: symbolic return values against reference runs,
// and simplifier rewrites against their inputs.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "keysim/ingest.hpp"
#include "keysim/simplify.hpp"

namespace reftest {

struct SoundnessResult {
  std::size_t vectors = 0;
  std::size_t mismatches = 0;
  std::string return_text;         // the symbolic return value checked
  std::vector<std::string> notes;  // first few mismatches
};

/// Executes `f` symbolically once, then for `vectors` random parameter and
/// machine states compares the return observation evaluated under those
/// bindings with a reference run on the same state.
SoundnessResult check_return_soundness(const keysim::Function& f, std::size_t vectors, std::uint64_t seed);

struct RewriteCheck {
  std::size_t samples = 0;      // distinct firing nodes (rules) or expressions (global)
  std::size_t valuations = 0;
  std::size_t mismatches = 0;
  std::size_t budget_exhausted = 0;
  std::size_t not_fixpoint = 0;
  std::size_t round_trip_failures = 0;
  std::vector<std::string> notes;
};

/// Collects up to `max_firings` nodes `rule` fires on, drawn from random
/// expressions of `width` (and their simplified forms), then checks
/// `valuations` random valuations spread over them.
RewriteCheck check_rule(const keysim::RewriteRule& rule, unsigned width, std::size_t valuations,
                        std::size_t max_firings = 50);

/// `count` random expressions of `width` and the given depth, each simplified
/// and checked under `valuations_each` valuations, for being a fixpoint, and
/// for parsing back from its canonical text.
RewriteCheck check_simplify(unsigned width, unsigned depth, std::size_t count, std::size_t valuations_each,
                            std::uint64_t seed);

}  // namespace reftest
