// Path-sampled symbolic execution over the micro-IR.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "keysim/diagnostic.hpp"
#include "keysim/expr.hpp"
#include "keysim/lift.hpp"

namespace keysim {

// ------------------------------------------------------------------ loops

struct LoopInfo {
  std::set<BlockId> reachable;
  /// (tail, header) pairs whose header dominates the tail.
  std::set<std::pair<BlockId, BlockId>> back_edges;
  /// Natural loop body (header included) per header, merged across the
  /// header's back-edges.
  std::map<BlockId, std::set<BlockId>> bodies;
  /// Retreating edges whose target does not dominate their source.
  std::set<std::pair<BlockId, BlockId>> irreducible_edges;
  std::vector<Diagnostic> diagnostics;

  bool is_back_edge(BlockId from, BlockId to) const { return back_edges.contains({from, to}); }
  bool is_irreducible(BlockId from, BlockId to) const { return irreducible_edges.contains({from, to}); }
  const std::set<BlockId>* body(BlockId header) const;
};

LoopInfo detect_loops(const Function& f);

/// Number of times a loop body runs per activation, and the traversal cap for
/// irreducible edges.
inline constexpr int kLoopPasses = 2;

// ------------------------------------------------------------------ paths

enum class LoopEventKind {
  Enter,     // first pass of a loop begins at its header
  Repeat,    // back-edge taken, second pass begins
  ExitMode,  // back-edge taken after the second pass; the walk must leave
  Leave,     // control left the loop body
};

struct LoopEvent {
  LoopEventKind kind;
  BlockId header;
  friend bool operator==(const LoopEvent&, const LoopEvent&) = default;
};

struct PathStep {
  BlockId block = 0;
  /// Loop transitions that happen on the edge into `block`.
  std::vector<LoopEvent> events;
  /// True while some loop is being left after its second pass; observations
  /// made in such steps are not recorded.
  bool exit_mode = false;
  friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct Path {
  /// Block whose stored exit state seeds this path; empty for the main path.
  std::optional<BlockId> fork_from;
  std::vector<PathStep> steps;

  std::vector<BlockId> blocks() const;
  friend bool operator==(const Path&, const Path&) = default;
};

struct RunPlan {
  Path main_path;
  std::vector<Path> aux_paths;
  std::uint64_t seed = 0;

  std::set<BlockId> covered() const;
};

inline constexpr std::size_t kMaxPathSteps = 4096;

/// Random walk from the entry: uniform choice among successors, with loop
/// bodies run twice before the walk may leave them.
Path sample_main_path(const Function& f, const LoopInfo& loops, std::mt19937_64& rng);

/// Auxiliary paths reaching every reachable block outside `covered`. Each path
/// forks from a covered block, prefers uncovered successors, and stops once
/// every admissible successor is covered.
std::vector<Path> cover_residual(const Function& f, const LoopInfo& loops, std::set<BlockId> covered,
                                 std::mt19937_64& rng);

// ------------------------------------------------------------------ state

struct SymCompare {
  Expr lhs;
  Expr rhs;
  CmpFlavor flavor;
  friend bool operator==(const SymCompare&, const SymCompare&) = default;
};

struct SymState {
  Arch arch = Arch::X86_64;
  CallConv convention = CallConv::SysV64;
  /// Full-width value of every register in the architecture's file.
  std::map<std::string, Expr, std::less<>> registers;
  /// Keyed by the canonical text of the simplified address.
  std::map<std::string, Expr, std::less<>> memory;
  std::optional<SymCompare> lastcmp;
  /// Argument registers written since entry or the previous call, with the
  /// width of their last write.
  std::map<std::string, unsigned, std::less<>> arg_writes;

  /// Parameter registers hold VAR0..VARn-1, the stack pointer holds `sp`, and
  /// every other register a symbol named after itself.
  static SymState initial(Arch arch, CallConv conv);

  Expr read(const RegRef& r) const;
  void write(const RegRef& r, const Expr& value);
  Expr address(const AddrTemplate& a) const;
  Expr load(const Expr& address, unsigned width) const;
  void store(const Expr& address, const Expr& value);
};

/// Values an instruction produced in one execution, by slot name:
///   dst:<reg>   register written
///   addr/value  memory write (stack pushes excluded)
///   lhs/rhs     comparison operands; flag-setting arithmetic gives (result, 0)
///   argN        call arguments
///   ret         return register at a return
using Observation = std::vector<std::pair<std::string, Expr>>;

const Expr* find_slot(const Observation& o, std::string_view name);
std::string to_string(const Observation& o);

/// Executes the micro-ops of the instruction at `site`. All produced values
/// are simplified.
Observation step_instruction(SymState& s, const std::vector<MicroOp>& ops, std::uint64_t site);

/// Call arguments visible at a call site: the convention's argument
/// registers up to the last one written since entry or the previous call,
/// capped at `arity`, each read at the width of its last write.
std::vector<Expr> call_args(const SymState& s, CallConv conv, unsigned arity);

// ------------------------------------------------------------------ runs

inline constexpr std::size_t kDefaultStepBudget = 50'000;
inline constexpr unsigned kDefaultRuns = 8;
inline constexpr std::uint64_t kDefaultSeed = 0x5eed'c0de'2024ULL;

using ObservationMap = std::map<std::uint64_t, std::set<Observation>>;

struct RunResult {
  RunPlan plan;
  ObservationMap observations;
  std::vector<Diagnostic> diagnostics;
};

struct ExecConfig {
  unsigned runs = kDefaultRuns;
  std::uint64_t seed = kDefaultSeed;
  std::size_t step_budget = kDefaultStepBudget;
};

std::uint64_t run_seed(std::uint64_t seed, unsigned run_index);

RunResult run_once(const LiftedFunction& lf, const LoopInfo& loops, std::uint64_t seed,
                   std::size_t step_budget = kDefaultStepBudget);

struct ValueSets {
  ObservationMap values;
  unsigned run_count = 0;
  std::vector<Diagnostic> diagnostics;
};

ValueSets execute(const LiftedFunction& lf, const ExecConfig& config = {});

}  // namespace keysim
