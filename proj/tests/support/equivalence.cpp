#include "equivalence.hpp"

#include <map>
#include <random>
#include <sstream>

#include "keysim/ingest.hpp"
#include "keysim/interp.hpp"
#include "keysim/lift.hpp"
#include "oracles.hpp"
#include "reference.hpp"

namespace reftest {

using keysim::Arch;

std::vector<std::string> equivalence_cases(Arch arch) {
  if (arch == Arch::X86_64)
    return {
        "nop",
        "mov rax, rbx", "mov eax, ebx", "mov ax, bx", "mov al, bl", "mov ah, bl", "mov bh, ch",
        "mov rax, 0x123456789abcdef0", "mov ecx, 0xdeadbeef", "mov r9w, 0x1234",
        "mov [rdi+0x10], rsi", "mov rax, [rdi+rsi*8-0x20]", "mov dword ptr [rbx], 0x7fff",
        "mov byte ptr [rcx+1], dl", "mov r10d, dword ptr [rsp+8]",
        "movzx eax, bl", "movzx rax, word ptr [rdi]", "movzx ecx, ah", "movsx rcx, dl",
        "movsx eax, word ptr [rsi+2]", "movsxd rax, ecx",
        "lea rax, [rbx+rcx*4+0x10]", "lea ecx, [rdi+rsi]", "lea rdx, [rsp-0x18]",
        "add rax, rbx", "add eax, 0x7fffffff", "add al, cl", "add [rdi], rax", "add rcx, [rsi+8]",
        "add dword ptr [rdx], 5",
        "sub rax, rbx", "sub ecx, edx", "sub r8w, 0x10", "sub [rsp+0x20], rdi", "sub rsp, 0x28",
        "and rax, rbx", "and eax, 0xff00", "and byte ptr [rdi], cl", "or rax, [rsi]", "or cx, dx",
        "xor eax, eax", "xor rax, rbx", "xor dl, 0x80",
        "cmp rax, rbx", "cmp ecx, 0x10", "cmp byte ptr [rdi], 0x7f", "cmp rax, [rsi]", "cmp ax, bx",
        "test rax, rax", "test eax, ecx", "test cl, 1", "test qword ptr [rdi], rdx",
        "imul rax, rbx", "imul ecx, dword ptr [rdi]", "imul rax, rbx, 0x1234", "imul r8d, r9d, 7",
        "not rax", "not cx", "neg rax", "neg dword ptr [rdi]",
        "inc rax", "dec ecx", "inc byte ptr [rsi]", "dec r11w",
        "shl rax, 4", "shr eax, 31", "sar rdx, 63", "sal r8, 1", "shl rax, cl", "shr edx, cl",
        "sar rbx, cl", "sar bx, cl", "shl rax", "sar ecx",
        "push rbx", "push 0x1234", "push qword ptr [rdi+8]", "pop rbp", "pop r12",
        "call memcpy", "ret", "jmp 0x2000",
    };
  return {
      "mov r0, r1", "mov r2, #0xff", "mvn r3, r4", "mvn r0, #0", "movs r0, r1", "mvns r2, r3",
      "add r0, r1, r2", "add r0, r1, #16", "add r3, r4", "adds r0, r1, r2",
      "sub r0, r1, r2", "sub sp, sp, #8", "subs r1, r1, #1",
      "rsb r0, r1, #0", "rsbs r0, r1, r2",
      "mul r0, r1, r2", "muls r3, r4, r5", "mul r0, r1",
      "and r0, r1, #0xff", "ands r0, r1, r2", "orr r0, r1, r2", "orrs r0, r0, #1", "eor r0, r1, r2",
      "eors r2, r3, #0x80",
      "lsl r0, r1, #3", "lsr r0, r1, #31", "asr r0, r1, #1", "lsl r0, r1, r2", "lsr r0, r1, r2",
      "asr r0, r1, r2", "lsls r0, r1, #4", "asrs r0, r1, r2", "lsr r0, r1, #32", "asr r0, r1, #32",
      "cmp r0, r1", "cmp r0, #10", "tst r0, r1", "tst r0, #1",
      "ldr r0, [r1]", "ldr r0, [r1, #4]", "ldr r0, [r1, r2]", "ldrb r0, [r1, #3]", "ldrh r0, [r1, #2]",
      "ldrsb r0, [r1]", "ldrsh r3, [r1, #6]",
      "str r0, [r1]", "str r0, [r1, #8]", "strb r0, [r1, r2]", "strh r0, [r1, #2]",
      "push {r4, r5, lr}", "push {r0}", "pop {r4, r5}", "pop {r4, pc}", "pop {r4-r6, pc}",
      "b 0x200", "bl memcpy", "bx lr",
  };
}

namespace {

keysim::Instruction parse_one(Arch arch, const std::string& text) {
  std::ostringstream doc;
  doc << "program p\nfunction f arch=" << keysim::to_string(arch) << " entry=0\nblock 0 @0x1000 succ=\n0x1000 "
      << text << "\n";
  return keysim::parse_bundle(doc.str()).functions.at(0).blocks.at(0).instructions.at(0);
}

std::uint64_t pick(std::mt19937_64& rng, unsigned width) {
  const std::uint64_t sign = 1ULL << (width - 1);
  std::uint64_t v;
  switch (rng() % 8) {
    case 0: v = 0; break;
    case 1: v = 1; break;
    case 2: v = ~0ULL; break;
    case 3: v = sign; break;
    case 4: v = sign - 1; break;
    case 5: v = rng() % 70; break;
    default: v = rng(); break;
  }
  return v & keysim::width_mask(width);
}

const std::vector<std::string>& conditions(Arch arch) {
  static const std::vector<std::string> x86{"e", "ne", "l", "le", "g", "ge", "b", "be", "a", "ae", "s", "ns"};
  static const std::vector<std::string> arm{"eq", "ne", "lt", "le", "gt", "ge", "hi", "ls", "hs", "lo", "mi", "pl"};
  return arch == Arch::X86_64 ? x86 : arm;
}

bool zero_sign_only(Arch arch, const std::string& c) {
  return arch == Arch::X86_64 ? (c == "e" || c == "ne" || c == "s" || c == "ns")
                              : (c == "eq" || c == "ne" || c == "mi" || c == "pl");
}

/// Conditions whose outcome the last-comparison record fixes exactly after
/// `ops` ran.
std::vector<std::string> exact_conditions(Arch arch, const std::vector<keysim::MicroOp>& ops) {
  bool zs_only = false;
  for (const auto& op : ops) {
    if (auto c = std::get_if<keysim::micro::Compare>(&op)) {
      // ARM tst leaves C and V as they were.
      zs_only = arch == Arch::ARM32 && c->flavor == keysim::CmpFlavor::AndTst;
    } else if (auto b = std::get_if<keysim::micro::BinOp>(&op); b && b->sets_flags) {
      // x86 logic ops clear CF and OF, which (result, 0) reproduces.
      const bool logic = b->op == keysim::ArithOp::And || b->op == keysim::ArithOp::Or ||
                         b->op == keysim::ArithOp::Xor;
      zs_only = !(arch == Arch::X86_64 && logic);
    }
  }
  std::vector<std::string> out;
  for (const auto& c : conditions(arch))
    if (!zs_only || zero_sign_only(arch, c)) out.push_back(c);
  return out;
}

std::string describe(const std::string& text, std::size_t valuation, const std::string& what) {
  return "`" + text + "` valuation " + std::to_string(valuation) + ": " + what;
}

}  // namespace

EquivalenceResult check_equivalence(Arch arch, const std::string& text, std::size_t valuations, std::uint64_t seed) {
  const auto ins = parse_one(arch, text);
  const auto lifted = keysim::lift_instruction(ins, arch, keysim::default_convention(arch));
  const unsigned word = keysim::word_width(arch);
  const auto regs = keysim::register_file(arch);
  const bool x86 = arch == Arch::X86_64;
  const bool shift = ins.mnemonic == "shl" || ins.mnemonic == "sal" || ins.mnemonic == "shr" || ins.mnemonic == "sar";
  const bool count_in_cl = x86 && shift && text.ends_with(", cl");

  EquivalenceResult result;
  auto fail = [&](std::size_t i, const std::string& what) {
    if (result.mismatches.size() < 8) result.mismatches.push_back(describe(text, i, what));
    ++result.mismatch_count;
  };
  if (lifted.diagnostic) {
    fail(0, "lift failed: " + keysim::to_string(*lifted.diagnostic));
    return result;
  }

  std::mt19937_64 rng(seed);
  static const char* x86_cmp_regs[] = {"rax", "rbx", "rcx", "rdx", "rsi", "rdi", "r8", "r9"};
  std::vector<keysim::Instruction> prefixes;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b)
      prefixes.push_back(parse_one(arch, x86 ? std::string{"cmp "} + x86_cmp_regs[a] + ", " + x86_cmp_regs[b]
                                             : "cmp r" + std::to_string(a) + ", r" + std::to_string(b)));
  std::map<std::string, std::vector<keysim::MicroOp>> branches;
  for (const auto& c : conditions(arch))
    branches[c] = keysim::lift_instruction(parse_one(arch, (x86 ? "j" : "b") + c + " 0x2000"), arch,
                                           keysim::default_convention(arch)).ops;
  for (std::size_t i = 0; i < valuations; ++i) {
    const std::uint64_t mem_seed = rng();
    auto image = [mem_seed](std::uint64_t a) { return memory_byte(mem_seed, a); };
    Machine ref(arch);
    ref.initial_byte = image;
    keysim::ConcreteMachine lib(arch, image);
    for (auto name : regs) {
      const std::uint64_t v = pick(rng, word);
      ref.regs[std::string{name}] = v;
      lib.set_reg(name, v);
    }

    // Prefix comparison so flag-preserving instructions have flags to keep.
    const auto& pins = prefixes[rng() % prefixes.size()];
    step(ref, pins);
    lib.execute(keysim::lift_instruction(pins, arch, keysim::default_convention(arch)).ops);

    std::uint64_t cl_count = 1;
    if (count_in_cl) {
      const unsigned w = std::get<keysim::RegisterOperand>(ins.operands.at(0).value).reg.width;
      cl_count = ref.regs.at("rcx") & (w == 64 ? 63 : 31);
    }

    ++result.valuations;
    try {
      step(ref, ins);
    } catch (const std::exception& e) {
      fail(i, std::string{"reference rejected it: "} + e.what());
      continue;
    }
    lib.execute(lifted.ops);

    for (auto name : regs)
      if (ref.regs.at(std::string{name}) != lib.reg(name))
        fail(i, "register " + std::string{name} + " ref=" + keysim::hex(ref.regs.at(std::string{name})) +
                    " lifted=" + keysim::hex(lib.reg(name)));
    if (ref.written != lib.written_memory()) fail(i, "written memory differs");
    if (ref.returned != lib.returned()) fail(i, "return flag differs");
    if (ref.calls != lib.calls()) fail(i, "call targets differ");
    if (ref.taken && ref.taken != lib.branch_taken()) fail(i, "branch outcome differs");

    if (cl_count == 0) continue;  // zero-count shifts leave flags in place
    for (const auto& c : exact_conditions(arch, lifted.ops)) {
      keysim::ConcreteMachine probe = lib;
      probe.execute(branches.at(c));
      ++result.condition_checks;
      const bool want = condition(arch, c, *ref.flags);
      if (probe.branch_taken() != want) fail(i, "condition " + c + " ref=" + (want ? "taken" : "not taken"));
    }
  }
  return result;
}

}  // namespace reftest
