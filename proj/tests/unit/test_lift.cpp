#include <gtest/gtest.h>

#include "equivalence.hpp"
#include "keysim/interp.hpp"
#include "keysim/lift.hpp"

using namespace keysim;

namespace {

Function parse_function(const std::string& body, const std::string& arch = "x86_64") {
  return parse_bundle("program p\nfunction f arch=" + arch + " entry=0\nblock 0 @0x1000 succ=\n" + body)
      .functions.at(0);
}

std::vector<MicroOp> lift_text(const std::string& line, Arch arch = Arch::X86_64) {
  auto f = parse_function("0x1000 " + line + "\n", std::string{to_string(arch)});
  auto r = lift_instruction(f.blocks[0].instructions[0], arch, default_convention(arch));
  EXPECT_FALSE(r.diagnostic) << line;
  return r.ops;
}

std::vector<std::string> rendered(const std::vector<MicroOp>& ops) {
  std::vector<std::string> out;
  for (const auto& op : ops) out.push_back(to_string(op));
  return out;
}

}  // namespace

TEST(Lift, AddRegisterImmediate) {
  auto ops = lift_text("add rax, 8");
  ASSERT_EQ(ops.size(), 1u);
  const auto* b = std::get_if<micro::BinOp>(&ops[0]);
  ASSERT_NE(b, nullptr);
  EXPECT_EQ(b->op, ArithOp::Add);
  EXPECT_EQ(std::get<RegRef>(b->dst).name, "rax");
  EXPECT_EQ(std::get<RegRef>(b->lhs).name, "rax");
  EXPECT_EQ(std::get<Imm>(b->rhs).value, 8u);
}

TEST(Lift, LeaComputesAddressWithoutMemoryAccess) {
  auto ops = lift_text("lea rax, [rdi+8]");
  ASSERT_EQ(ops.size(), 1u);
  ASSERT_TRUE(std::holds_alternative<micro::Move>(ops[0]));
  ConcreteMachine m(Arch::X86_64);
  m.set_reg("rdi", 100);
  m.execute(ops);
  EXPECT_EQ(m.reg("rax"), 108u);
  EXPECT_TRUE(m.written_memory().empty());
}

TEST(Lift, ArmStoreToStackSlot) {
  auto ops = lift_text("str r1, [sp, #4]", Arch::ARM32);
  ASSERT_EQ(ops.size(), 1u);
  const auto* s = std::get_if<micro::Store>(&ops[0]);
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->addr.base->name, "sp");
  EXPECT_EQ(s->addr.disp, 4);
  EXPECT_EQ(std::get<RegRef>(s->src).name, "r1");
  EXPECT_EQ(s->width, 32u);
}

TEST(Lift, ReturnSequenceKeepsPopsAsStackOps) {
  auto f = parse_function("0x1000 mov eax, 0xFFFFFFFF\n0x1005 pop rbx\n0x1006 pop rbp\n0x1007 ret\n");
  auto lf = lift_function(f);
  EXPECT_TRUE(lf.diagnostics.empty());
  std::vector<std::size_t> kinds;
  for (const auto& ins : f.blocks[0].instructions)
    for (const auto& op : lf.ops_at(ins.address)) kinds.push_back(op.index());
  EXPECT_EQ(kinds, (std::vector<std::size_t>{0, 9, 9, 7}));  // MOVE, POP, POP, RET
}

TEST(Lift, ThreeSupportedInstructionsGiveThreeEntries) {
  auto lf = lift_function(parse_function("0x1000 mov rax, rdi\n0x1003 add rax, rsi\n0x1006 ret\n"));
  EXPECT_EQ(lf.micro.size(), 3u);
  EXPECT_TRUE(lf.diagnostics.empty());
}

TEST(Lift, UnsupportedMnemonicBecomesMarkerWithDiagnostic) {
  auto lf = lift_function(parse_function("0x1000 mov rax, rdi\n0x1003 cpuid\n0x1005 ret\n"));
  ASSERT_EQ(lf.diagnostics.size(), 1u);
  EXPECT_EQ(to_string(lf.diagnostics[0]), "0x1003: unsupported mnemonic 'cpuid'");
  const auto& ops = lf.ops_at(0x1003);
  ASSERT_EQ(ops.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<micro::Unsupported>(ops[0]));
}

TEST(Lift, UnsupportedDestinationIsRecorded) {
  auto f = parse_function("0x1000 bsr rax, rdi\n");
  auto r = lift_instruction(f.blocks[0].instructions[0], Arch::X86_64, CallConv::SysV64);
  ASSERT_TRUE(r.diagnostic);
  const auto& u = std::get<micro::Unsupported>(r.ops.at(0));
  ASSERT_TRUE(u.dst);
  EXPECT_EQ(std::get<RegRef>(*u.dst).name, "rax");
}

TEST(Lift, ThirtyTwoBitWriteZeroExtends) {
  ConcreteMachine m(Arch::X86_64);
  m.set_reg("rax", ~0ULL);
  m.set_reg("rbx", 0x11223344);
  m.execute(lift_text("mov eax, ebx"));
  EXPECT_EQ(m.reg("rax"), 0x11223344u);
  m.set_reg("rax", ~0ULL);
  m.execute(lift_text("mov ax, bx"));
  EXPECT_EQ(m.reg("rax"), 0xffffffffffff3344u);
}

TEST(Lift, ArmNeverEmitsSixtyFourBitWidths) {
  for (const auto& text : reftest::equivalence_cases(Arch::ARM32))
    for (const auto& op : lift_text(text, Arch::ARM32))
      for (const auto& e : expand(op, Arch::ARM32))
        EXPECT_EQ(to_string(e).find(":64"), std::string::npos) << text << " -> " << to_string(e);
}

TEST(Lift, PushExpandsToStackPointerUpdateAndStore) {
  auto ops = lift_text("push rbx");
  ASSERT_EQ(ops.size(), 1u);
  auto expanded = expand(ops[0], Arch::X86_64);
  ASSERT_EQ(expanded.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<micro::BinOp>(expanded[0]));
  EXPECT_TRUE(std::holds_alternative<micro::Store>(expanded[1]));
}

TEST(Lift, RenderedForms) {
  EXPECT_EQ(rendered(lift_text("add rax, 8")), std::vector<std::string>{"BINOP ADD rax:64 <- rax:64, 0x8:64 !flags"});
}

// Only comparisons and the flag-setting arithmetic write the comparison record.
TEST(LiftProperty, FlagDiscipline) {
  for (Arch arch : {Arch::X86_64, Arch::ARM32})
    for (const auto& text : reftest::equivalence_cases(arch))
      for (const auto& op : lift_text(text, arch)) {
        if (std::holds_alternative<micro::Move>(op) || std::holds_alternative<micro::Load>(op) ||
            std::holds_alternative<micro::Store>(op))
          EXPECT_FALSE(writes_flags(op)) << text;
        if (std::holds_alternative<micro::Compare>(op)) EXPECT_TRUE(writes_flags(op)) << text;
      }
}

TEST(LiftProperty, ArmArithmeticWithoutSuffixLeavesFlags) {
  for (const char* text : {"add r0, r1, r2", "sub r0, r1, #1", "lsl r0, r1, #2", "mov r0, r1", "mul r0, r1, r2"})
    for (const auto& op : lift_text(text, Arch::ARM32)) EXPECT_FALSE(writes_flags(op)) << text;
  for (const char* text : {"adds r0, r1, r2", "subs r0, r1, #1", "lsls r0, r1, #2", "movs r0, r1"}) {
    bool any = false;
    for (const auto& op : lift_text(text, Arch::ARM32)) any = any || writes_flags(op);
    EXPECT_TRUE(any) << text;
  }
}

class Equivalence : public ::testing::TestWithParam<std::pair<Arch, std::string>> {};

TEST_P(Equivalence, MatchesReferenceSemantics) {
  const auto& [arch, text] = GetParam();
  auto r = reftest::check_equivalence(arch, text, 1000, std::hash<std::string>{}(text));
  EXPECT_EQ(r.valuations, 1000u);
  EXPECT_EQ(r.mismatch_count, 0u) << (r.mismatches.empty() ? "" : r.mismatches.front());
}

std::vector<std::pair<Arch, std::string>> all_cases() {
  std::vector<std::pair<Arch, std::string>> out;
  for (Arch arch : {Arch::X86_64, Arch::ARM32})
    for (const auto& text : reftest::equivalence_cases(arch)) out.emplace_back(arch, text);
  return out;
}

INSTANTIATE_TEST_SUITE_P(AllForms, Equivalence, ::testing::ValuesIn(all_cases()),
                         [](const auto& info) { return "case" + std::to_string(info.index); });
