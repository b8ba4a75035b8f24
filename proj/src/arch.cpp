#include "keysim/arch.hpp"

#include <array>
#include <map>

namespace keysim {

namespace {

constexpr std::array<std::string_view, 16> kX86Regs = {
    "rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
    "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15"};

constexpr std::array<std::string_view, 16> kArmRegs = {
    "r0", "r1", "r2",  "r3",  "r4",  "r5", "r6", "r7",
    "r8", "r9", "r10", "r11", "r12", "sp", "lr", "pc"};

constexpr std::array<std::string_view, 6> kSysVArgs = {"rdi", "rsi", "rdx", "rcx", "r8", "r9"};
constexpr std::array<std::string_view, 4> kWin64Args = {"rcx", "rdx", "r8", "r9"};
constexpr std::array<std::string_view, 4> kAapcsArgs = {"r0", "r1", "r2", "r3"};

constexpr std::array<std::string_view, 9> kSysVClobber = {"rax", "rcx", "rdx", "rsi", "rdi",
                                                          "r8",  "r9",  "r10", "r11"};
constexpr std::array<std::string_view, 7> kWin64Clobber = {"rax", "rcx", "rdx", "r8",
                                                           "r9",  "r10", "r11"};
constexpr std::array<std::string_view, 5> kAapcsClobber = {"r0", "r1", "r2", "r3", "r12"};

const std::map<std::string, RegRef, std::less<>>& x86_views() {
  static const auto table = [] {
    std::map<std::string, RegRef, std::less<>> t;
    constexpr std::array<std::array<std::string_view, 4>, 8> legacy = {{
        {"eax", "ax", "al", "ah"},
        {"ecx", "cx", "cl", "ch"},
        {"edx", "dx", "dl", "dh"},
        {"ebx", "bx", "bl", "bh"},
        {"esp", "sp", "spl", ""},
        {"ebp", "bp", "bpl", ""},
        {"esi", "si", "sil", ""},
        {"edi", "di", "dil", ""},
    }};
    for (std::size_t i = 0; i < kX86Regs.size(); ++i) {
      std::string full{kX86Regs[i]};
      t[full] = {full, 64, 0};
      if (i < 8) {
        const auto& v = legacy[i];
        t[std::string{v[0]}] = {full, 32, 0};
        t[std::string{v[1]}] = {full, 16, 0};
        t[std::string{v[2]}] = {full, 8, 0};
        if (!v[3].empty()) t[std::string{v[3]}] = {full, 8, 8};
      } else {
        t[full + "d"] = {full, 32, 0};
        t[full + "w"] = {full, 16, 0};
        t[full + "b"] = {full, 8, 0};
      }
    }
    return t;
  }();
  return table;
}

const std::map<std::string, RegRef, std::less<>>& arm_views() {
  static const auto table = [] {
    std::map<std::string, RegRef, std::less<>> t;
    for (auto r : kArmRegs) t[std::string{r}] = {std::string{r}, 32, 0};
    t["r13"] = {"sp", 32, 0};
    t["r14"] = {"lr", 32, 0};
    t["r15"] = {"pc", 32, 0};
    t["fp"] = {"r11", 32, 0};
    t["ip"] = {"r12", 32, 0};
    return t;
  }();
  return table;
}

}  // namespace

std::string_view to_string(Arch arch) { return arch == Arch::X86_64 ? "x86_64" : "arm32"; }

std::string_view to_string(CallConv conv) {
  switch (conv) {
    case CallConv::SysV64: return "sysv64";
    case CallConv::Win64: return "win64";
    case CallConv::Aapcs32: return "aapcs32";
  }
  return "?";
}

std::optional<Arch> parse_arch(std::string_view tag) {
  if (tag == "x86_64") return Arch::X86_64;
  if (tag == "arm32") return Arch::ARM32;
  return std::nullopt;
}

std::optional<CallConv> parse_convention(std::string_view tag) {
  if (tag == "sysv64") return CallConv::SysV64;
  if (tag == "win64") return CallConv::Win64;
  if (tag == "aapcs32") return CallConv::Aapcs32;
  return std::nullopt;
}

CallConv default_convention(Arch arch) {
  return arch == Arch::X86_64 ? CallConv::SysV64 : CallConv::Aapcs32;
}

bool convention_matches(Arch arch, CallConv conv) {
  return arch == Arch::X86_64 ? conv != CallConv::Aapcs32 : conv == CallConv::Aapcs32;
}

unsigned word_width(Arch arch) { return arch == Arch::X86_64 ? 64 : 32; }

std::optional<RegRef> lookup_register(Arch arch, std::string_view name) {
  const auto& table = arch == Arch::X86_64 ? x86_views() : arm_views();
  if (auto it = table.find(name); it != table.end()) return it->second;
  return std::nullopt;
}

std::span<const std::string_view> register_file(Arch arch) {
  if (arch == Arch::X86_64) return kX86Regs;
  return kArmRegs;
}

std::string_view stack_pointer(Arch arch) { return arch == Arch::X86_64 ? "rsp" : "sp"; }
std::string_view return_register(Arch arch) { return arch == Arch::X86_64 ? "rax" : "r0"; }

int arm_register_number(std::string_view full_name) {
  for (std::size_t i = 0; i < kArmRegs.size(); ++i)
    if (kArmRegs[i] == full_name) return static_cast<int>(i);
  return -1;
}

std::span<const std::string_view> argument_registers(CallConv conv) {
  switch (conv) {
    case CallConv::SysV64: return kSysVArgs;
    case CallConv::Win64: return kWin64Args;
    case CallConv::Aapcs32: return kAapcsArgs;
  }
  return {};
}

std::span<const std::string_view> caller_saved_registers(CallConv conv) {
  switch (conv) {
    case CallConv::SysV64: return kSysVClobber;
    case CallConv::Win64: return kWin64Clobber;
    case CallConv::Aapcs32: return kAapcsClobber;
  }
  return {};
}

unsigned default_arity(CallConv conv) { return conv == CallConv::SysV64 ? 6 : 4; }

}  // namespace keysim
