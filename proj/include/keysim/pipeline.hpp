// End-to-end analysis of one function and the bench harness.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "keysim/compare.hpp"
#include "keysim/ingest.hpp"
#include "keysim/keyir.hpp"
#include "keysim/lift.hpp"
#include "keysim/symexec.hpp"

namespace keysim {

/// Raised for unusable inputs: unreadable bundles, missing functions,
/// structurally invalid CFGs.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Analysis {
  LiftedFunction lifted;
  ValueSets values;
  KeyGraph graph;
  /// CFG warnings, lift, execution and graph diagnostics, in that order.
  std::vector<Diagnostic> diagnostics;
};

/// Throws InputError when validate_cfg reports errors.
Analysis analyze(const Function& f, const ExecConfig& config = {});

/// Looks up `name` in `program`; throws InputError naming both when absent.
const Function& require_function(const Program& program, std::string_view name);

struct BenchPair {
  std::filesystem::path bundle_a;
  std::string function_a;
  std::filesystem::path bundle_b;
  std::string function_b;
  bool label = false;
};

/// Reads `bundleA functionA bundleB functionB label` rows (tabs or spaces).
/// Relative bundle paths resolve against the directory of `tsv`. Blank lines
/// and `#` comments are skipped.
std::vector<BenchPair> load_pairs(const std::filesystem::path& tsv);

struct BenchRow {
  BenchPair pair;
  double aggregate = 0;
  bool verdict = false;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::size_t true_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;

  std::size_t total() const { return rows.size(); }
  double accuracy() const;
};

BenchResult run_bench(const std::vector<BenchPair>& pairs, const ExecConfig& exec, const CompareParams& params);

}  // namespace keysim
