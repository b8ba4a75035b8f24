// CFG bundle documents: the hand-writable front end standing in for a
// disassembler's function/CFG export.
//
//   program <name>
//   function <name> arch=<x86_64|arm32> [cc=<sysv64|win64|aapcs32>] entry=<id>
//   block <id> @<hex-addr> succ=<id:kind,...>
//   <hex-addr> <mnemonic> <operand>{, <operand>}
//
// `#` starts a comment; kind is one of ft, taken, jmp.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "keysim/arch.hpp"
#include "keysim/diagnostic.hpp"

namespace keysim {

using BlockId = std::uint32_t;

struct RegisterOperand {
  RegRef reg;
  friend bool operator==(const RegisterOperand&, const RegisterOperand&) = default;
};

struct ImmediateOperand {
  std::uint64_t value = 0;
  friend bool operator==(const ImmediateOperand&, const ImmediateOperand&) = default;
};

/// `[base + index*scale + disp]` on x86-64, `[rn, #off]` / `[rn, rm]` on ARM32.
/// `width` is 0 unless a size prefix (`dword ptr`) was given.
struct MemoryOperand {
  std::optional<RegRef> base;
  std::optional<RegRef> index;
  unsigned scale = 1;
  std::int64_t disp = 0;
  unsigned width = 0;
  friend bool operator==(const MemoryOperand&, const MemoryOperand&) = default;
};

/// Call and branch targets given by name.
struct SymbolOperand {
  std::string name;
  friend bool operator==(const SymbolOperand&, const SymbolOperand&) = default;
};

/// ARM `{r4, r5, lr}`.
struct RegisterListOperand {
  std::vector<RegRef> regs;
  friend bool operator==(const RegisterListOperand&, const RegisterListOperand&) = default;
};

using OperandValue = std::variant<RegisterOperand, ImmediateOperand, MemoryOperand, SymbolOperand,
                                  RegisterListOperand>;

struct Operand {
  std::string text;
  OperandValue value;
  friend bool operator==(const Operand&, const Operand&) = default;
};

struct Instruction {
  std::uint64_t address = 0;
  std::string mnemonic;
  std::vector<Operand> operands;
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

enum class EdgeKind { Fallthrough, Taken, Unconditional };

struct Edge {
  BlockId target = 0;
  EdgeKind kind = EdgeKind::Fallthrough;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct BasicBlock {
  BlockId id = 0;
  std::uint64_t address = 0;
  std::vector<Instruction> instructions;
  std::vector<Edge> successors;
  friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

struct Function {
  std::string name;
  Arch arch = Arch::X86_64;
  CallConv convention = CallConv::SysV64;
  BlockId entry = 0;
  std::vector<BasicBlock> blocks;

  const BasicBlock* find_block(BlockId id) const;
  const BasicBlock& block(BlockId id) const;  // throws std::out_of_range
  friend bool operator==(const Function&, const Function&) = default;
};

struct Program {
  std::string source_name;
  std::vector<Function> functions;

  const Function* find(std::string_view name) const;
  friend bool operator==(const Program&, const Program&) = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Parses one operand under the grammar of `arch`. Throws std::invalid_argument
/// with a message on malformed text.
Operand parse_operand(std::string_view text, Arch arch);

Program parse_bundle(std::string_view text, std::string source_name = "<bundle>");
Program load_bundle(const std::filesystem::path& path);
std::string serialize_bundle(const Program& program);

/// Structural checks on a function. Errors for broken invariants, warnings for
/// blocks unreachable from the entry.
std::vector<Diagnostic> validate_cfg(const Function& f);

bool is_conditional_branch(Arch arch, std::string_view mnemonic);

}  // namespace keysim
