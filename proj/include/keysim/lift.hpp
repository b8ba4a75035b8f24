// Micro-IR shared by the x86-64 and ARM32 front ends.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "keysim/arch.hpp"
#include "keysim/diagnostic.hpp"
#include "keysim/ingest.hpp"

namespace keysim {

/// Instruction-local scratch value.
struct Temp {
  unsigned id = 0;
  unsigned width = 0;
  friend bool operator==(const Temp&, const Temp&) = default;
};

struct Imm {
  std::uint64_t value = 0;
  unsigned width = 0;
  friend bool operator==(const Imm&, const Imm&) = default;
};

/// base + index*scale + disp, computed at `width` bits (the address width).
struct AddrTemplate {
  std::optional<RegRef> base;
  std::optional<RegRef> index;
  unsigned scale = 1;
  std::int64_t disp = 0;
  unsigned width = 64;
  friend bool operator==(const AddrTemplate&, const AddrTemplate&) = default;
};

using Loc = std::variant<RegRef, Temp>;
using Value = std::variant<RegRef, Temp, Imm, AddrTemplate>;

enum class ArithOp { Add, Sub, Mul, And, Or, Xor, Shl, Shr, Sar, Not, Neg };
enum class Extend { None, Zero, Sign };
enum class CmpFlavor { SubCmp, AndTst };
enum class Cond { None, Eq, Ne, Slt, Sle, Sgt, Sge, Ult, Ule, Ugt, Uge, Neg, Pos };

namespace micro {

/// dst := src, optionally widened.
struct Move {
  Loc dst;
  Value src;
  Extend ext = Extend::None;
};

/// dst := lhs op rhs. `rhs` is ignored for NOT and NEG. When `sets_flags` is
/// true the last-comparison record becomes (result, 0, SUB_CMP).
struct BinOp {
  ArithOp op;
  Loc dst;
  Value lhs;
  Value rhs;
  bool sets_flags = false;
};

struct Load {
  Loc dst;
  AddrTemplate addr;
  unsigned width;
};

/// `push_slot` marks stores produced by expanding PUSH.
struct Store {
  AddrTemplate addr;
  Value src;
  unsigned width;
  bool push_slot = false;
};

struct Compare {
  Value lhs;
  Value rhs;
  CmpFlavor flavor;
};

struct Branch {
  Cond cond = Cond::None;
};

/// `target` is the callee symbol, address text, or register name.
struct Call {
  std::string target;
};

struct Ret {};

/// Stack push/pop of a word; see expand().
struct Push {
  Value src;
};

struct Pop {
  Loc dst;
};

/// Unsupported instruction; its destination (when known) is havocked.
struct Unsupported {
  std::string mnemonic;
  std::optional<Loc> dst;
};

}  // namespace micro

using MicroOp = std::variant<micro::Move, micro::BinOp, micro::Load, micro::Store, micro::Compare,
                             micro::Branch, micro::Call, micro::Ret, micro::Push, micro::Pop,
                             micro::Unsupported>;

unsigned width_of(const Value& v);
unsigned width_of(const Loc& l);

/// PUSH and POP expand to an explicit stack-pointer update plus STORE/LOAD;
/// every other op expands to itself.
std::vector<MicroOp> expand(const MicroOp& op, Arch arch);

bool writes_flags(const MicroOp& op);

struct LiftResult {
  std::vector<MicroOp> ops;
  std::optional<Diagnostic> diagnostic;
};

LiftResult lift_instruction(const Instruction& ins, Arch arch, CallConv conv);

struct LiftedFunction {
  Function function;
  std::map<std::uint64_t, std::vector<MicroOp>> micro;
  std::vector<Diagnostic> diagnostics;

  const std::vector<MicroOp>& ops_at(std::uint64_t address) const;  // throws std::out_of_range
  Arch arch() const { return function.arch; }
  CallConv convention() const { return function.convention; }
};

LiftedFunction lift_function(const Function& f);

std::string to_string(const MicroOp& op);
std::string to_string(Cond c);

}  // namespace keysim
