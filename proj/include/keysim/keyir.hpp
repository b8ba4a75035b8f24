// Key instructions (calls, comparisons, returns, memory writes) and the graph
// that links them by control flow.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "keysim/symexec.hpp"

namespace keysim {

enum class KeyKind { Call, Compare, Return, MemWrite };

std::string_view to_string(KeyKind k);
std::optional<KeyKind> parse_key_kind(std::string_view text);
/// Calls, comparisons and returns steer control flow; memory writes do not.
inline bool affects_control_flow(KeyKind k) { return k != KeyKind::MemWrite; }

struct CallPayload {
  std::string callee;
  std::vector<Expr> args;
};
struct ComparePayload {
  Expr lhs;
  Expr rhs;
  CmpFlavor flavor;
};
struct ReturnPayload {
  Expr value;
};
struct MemWritePayload {
  Expr addr;
  Expr value;
};

using KeyPayload = std::variant<CallPayload, ComparePayload, ReturnPayload, MemWritePayload>;

KeyKind kind_of(const KeyPayload& p);
/// One-line rendering, e.g. `printf(var0, 0x1)` or `var0 + 0x1 cmp 0xa`.
std::string to_string(const KeyPayload& p);

struct KeyNode {
  unsigned id = 0;
  std::uint64_t address = 0;
  KeyKind kind = KeyKind::Call;
  std::string mnemonic;
  /// Distinct payloads, ordered by rendered text.
  std::vector<KeyPayload> payloads;
};

struct KeyGraph {
  std::vector<KeyNode> nodes;
  /// Directed (from, to) node ids, sorted and unique.
  std::vector<std::pair<unsigned, unsigned>> edges;
  std::vector<Diagnostic> diagnostics;

  const KeyNode* find(std::uint64_t address) const;
  /// Nodes within `k` undirected hops of `id`, excluding `id` itself.
  std::vector<unsigned> neighborhood(unsigned id, unsigned k) const;
};

/// Precedence CALL > RETURN > COMPARE > MEMWRITE. Flag-setting arithmetic
/// counts as COMPARE only when `flags_consumed` (its result feeds a
/// conditional branch). Stores that only spill pushed registers are ignored.
std::optional<KeyKind> classify(const Instruction& ins, const std::vector<MicroOp>& micro, Arch arch,
                                bool flags_consumed = false);

/// Addresses of flag-setting arithmetic that is the last flag writer before a
/// conditional branch in the same block.
std::set<std::uint64_t> flag_consumers(const LiftedFunction& lf);

/// Values of the return register observed at each return site.
std::vector<Expr> return_value(const LiftedFunction& lf, const ValueSets& vs,
                               std::vector<Diagnostic>* diagnostics = nullptr);

KeyGraph build_key_graph(const LiftedFunction& lf, const ValueSets& vs);

}  // namespace keysim
