// Architecture and calling-convention tables shared by every stage.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace keysim {

enum class Arch { X86_64, ARM32 };
enum class CallConv { SysV64, Win64, Aapcs32 };

std::string_view to_string(Arch arch);
std::string_view to_string(CallConv conv);
std::optional<Arch> parse_arch(std::string_view tag);
std::optional<CallConv> parse_convention(std::string_view tag);

CallConv default_convention(Arch arch);
bool convention_matches(Arch arch, CallConv conv);

/// Width in bits of a general-purpose register (and of addresses).
unsigned word_width(Arch arch);

/// A view of a full general-purpose register: `eax` is {rax, 32, 0},
/// `ah` is {rax, 8, 8}.
struct RegRef {
  std::string name;
  unsigned width = 0;
  unsigned shift = 0;

  friend bool operator==(const RegRef&, const RegRef&) = default;
};

std::optional<RegRef> lookup_register(Arch arch, std::string_view name);

/// Full register names, in architectural numbering order.
std::span<const std::string_view> register_file(Arch arch);

std::string_view stack_pointer(Arch arch);
std::string_view return_register(Arch arch);

/// Index of a register in the ARM numbering (r0 = 0 ... pc = 15).
int arm_register_number(std::string_view full_name);

std::span<const std::string_view> argument_registers(CallConv conv);
std::span<const std::string_view> caller_saved_registers(CallConv conv);
unsigned default_arity(CallConv conv);

inline std::uint64_t width_mask(unsigned width) {
  return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

}  // namespace keysim
