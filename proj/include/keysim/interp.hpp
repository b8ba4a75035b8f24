// Concrete interpreter over the micro-IR. Used to cross-check the lifter and
// the symbolic engine against concrete runs.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "keysim/lift.hpp"

namespace keysim {

struct ConcreteCmp {
  std::uint64_t lhs = 0;
  std::uint64_t rhs = 0;
  unsigned width = 64;
  CmpFlavor flavor = CmpFlavor::SubCmp;
};

/// Truth value of a branch condition given the last comparison record.
/// Signed/unsigned orderings compare lhs with rhs; NEG/POS test the sign of
/// lhs - rhs (or lhs & rhs for AND_TST). With AND_TST the unsigned "below"
/// relations follow a cleared carry.
bool evaluate_condition(Cond cond, const ConcreteCmp& cmp);

class ConcreteMachine {
 public:
  /// Contents of a memory byte that was never written.
  using MemoryImage = std::function<std::uint8_t(std::uint64_t)>;

  explicit ConcreteMachine(Arch arch, std::uint64_t memory_seed = 0);
  ConcreteMachine(Arch arch, MemoryImage initial);

  Arch arch() const { return arch_; }

  /// Full-width register access by canonical name (`rax`, `r0`).
  std::uint64_t reg(std::string_view name) const;
  void set_reg(std::string_view name, std::uint64_t value);

  std::uint64_t read(const RegRef& r) const;
  void write(const RegRef& r, std::uint64_t value);

  /// Little-endian memory. Bytes never written come from the memory image,
  /// by default a pseudo-random function of (memory_seed, address).
  std::uint64_t load(std::uint64_t address, unsigned width) const;
  void store(std::uint64_t address, std::uint64_t value, unsigned width);
  const std::map<std::uint64_t, std::uint8_t>& written_memory() const { return memory_; }

  const std::optional<ConcreteCmp>& last_compare() const { return lastcmp_; }
  bool returned() const { return returned_; }
  /// Outcome of the most recent BRANCH; nullopt before any branch.
  std::optional<bool> branch_taken() const { return branch_taken_; }
  const std::vector<std::string>& calls() const { return calls_; }

  /// Executes the micro-ops of one instruction. Temps are local to the call.
  void execute(const std::vector<MicroOp>& ops);

 private:
  std::uint64_t value(const Value& v, const std::map<unsigned, std::uint64_t>& temps) const;
  std::uint64_t address(const AddrTemplate& a) const;
  void assign(const Loc& l, std::uint64_t v, std::map<unsigned, std::uint64_t>& temps);
  void step(const MicroOp& op, std::map<unsigned, std::uint64_t>& temps);

  Arch arch_;
  MemoryImage initial_;
  std::map<std::string, std::uint64_t, std::less<>> regs_;
  std::map<std::uint64_t, std::uint8_t> memory_;
  std::optional<ConcreteCmp> lastcmp_;
  bool returned_ = false;
  std::optional<bool> branch_taken_;
  std::vector<std::string> calls_;
};

}  // namespace keysim
