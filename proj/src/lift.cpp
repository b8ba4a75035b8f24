#include "keysim/lift.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace keysim {

namespace {

struct LiftFailure {
  std::string message;
};

[[noreturn]] void unsupported_form(const Instruction& ins) {
  throw LiftFailure{"unsupported operand form for '" + ins.mnemonic + "'"};
}

RegRef full_register(const RegRef& r, Arch arch) { return RegRef{r.name, word_width(arch), 0}; }

AddrTemplate address_of(const MemoryOperand& m, Arch arch) {
  AddrTemplate a;
  a.base = m.base;
  a.index = m.index;
  a.scale = m.scale;
  a.disp = m.disp;
  a.width = word_width(arch);
  return a;
}

AddrTemplate stack_slot(Arch arch) {
  AddrTemplate a;
  a.base = RegRef{std::string{stack_pointer(arch)}, word_width(arch), 0};
  a.width = word_width(arch);
  return a;
}

class Lifter {
 public:
  Lifter(const Instruction& ins, Arch arch) : ins_(ins), arch_(arch) {}

  std::vector<MicroOp> run() {
    if (arch_ == Arch::X86_64) lift_x86();
    else lift_arm();
    return std::move(ops_);
  }

 private:
  const Operand& operand(std::size_t i) const { return ins_.operands.at(i); }
  std::size_t count() const { return ins_.operands.size(); }
  void need(std::size_t n) const {
    if (count() != n) unsupported_form(ins_);
  }

  template <class T>
  const T* as(std::size_t i) const {
    return i < count() ? std::get_if<T>(&operand(i).value) : nullptr;
  }

  Temp temp(unsigned width) { return Temp{next_temp_++, width}; }
  void emit(MicroOp op) { ops_.push_back(std::move(op)); }

  [[noreturn]] void unknown() const { throw LiftFailure{"unsupported mnemonic '" + ins_.mnemonic + "'"}; }

  // ---------------------------------------------------------------- x86-64

  /// Width of an x86 operand: register width, size prefix, or 0 if unknown.
  unsigned x86_width(std::size_t i) const {
    if (auto r = as<RegisterOperand>(i)) return r->reg.width;
    if (auto m = as<MemoryOperand>(i)) return m->width;
    return 0;
  }

  unsigned x86_common_width() const {
    unsigned w = 0;
    for (std::size_t i = 0; i < count(); ++i) {
      unsigned wi = x86_width(i);
      if (wi == 0) continue;
      if (w != 0 && wi != w) unsupported_form(ins_);
      w = wi;
    }
    if (w == 0) unsupported_form(ins_);
    return w;
  }

  /// Reads operand `i` as a value of `width`, loading memory into a temp.
  Value x86_read(std::size_t i, unsigned width) {
    if (auto r = as<RegisterOperand>(i)) {
      if (r->reg.width != width) unsupported_form(ins_);
      return r->reg;
    }
    if (auto imm = as<ImmediateOperand>(i)) return Imm{imm->value & width_mask(width), width};
    if (auto m = as<MemoryOperand>(i)) {
      Temp t = temp(width);
      emit(micro::Load{t, address_of(*m, arch_), width});
      return t;
    }
    unsupported_form(ins_);
  }

  /// Applies `op` to destination operand 0, read-modify-write for memory.
  void x86_update(ArithOp op, const Value& rhs, unsigned width, bool flags) {
    if (auto r = as<RegisterOperand>(0)) {
      emit(micro::BinOp{op, r->reg, r->reg, rhs, flags});
      return;
    }
    if (auto m = as<MemoryOperand>(0)) {
      AddrTemplate addr = address_of(*m, arch_);
      Temp t = temp(width);
      emit(micro::Load{t, addr, width});
      emit(micro::BinOp{op, t, t, rhs, flags});
      emit(micro::Store{addr, t, width});
      return;
    }
    unsupported_form(ins_);
  }

  void x86_arith(ArithOp op) {
    need(2);
    unsigned w = x86_common_width();
    if (as<MemoryOperand>(0) && as<MemoryOperand>(1)) unsupported_form(ins_);
    Value rhs = x86_read(1, w);
    x86_update(op, rhs, w, true);
  }

  void x86_shift(ArithOp op) {
    if (count() != 1 && count() != 2) unsupported_form(ins_);
    unsigned w = x86_width(0);
    if (w == 0) unsupported_form(ins_);
    const std::uint64_t mask = w == 64 ? 63 : 31;
    Value amount = Imm{1, w};
    if (count() == 2) {
      if (auto imm = as<ImmediateOperand>(1)) {
        amount = Imm{imm->value & mask, w};
      } else if (auto r = as<RegisterOperand>(1); r && r->reg.name == "rcx" && r->reg.width == 8 && r->reg.shift == 0) {
        Temp t = temp(w);
        emit(micro::Move{t, r->reg, w > 8 ? Extend::Zero : Extend::None});
        emit(micro::BinOp{ArithOp::And, t, t, Imm{mask, w}});
        amount = t;
      } else {
        unsupported_form(ins_);
      }
    }
    x86_update(op, amount, w, true);
  }

  void x86_extend(Extend ext) {
    need(2);
    auto dst = as<RegisterOperand>(0);
    if (!dst) unsupported_form(ins_);
    unsigned sw = x86_width(1);
    if (sw == 0 || sw >= dst->reg.width) unsupported_form(ins_);
    Value src = x86_read(1, sw);
    emit(micro::Move{dst->reg, src, ext});
  }

  void x86_compare(CmpFlavor flavor) {
    need(2);
    unsigned w = x86_common_width();
    if (as<ImmediateOperand>(0)) unsupported_form(ins_);
    Value lhs = x86_read(0, w);
    Value rhs = x86_read(1, w);
    emit(micro::Compare{lhs, rhs, flavor});
  }

  static std::optional<Cond> x86_condition(std::string_view m) {
    static constexpr std::pair<std::string_view, Cond> table[] = {
        {"je", Cond::Eq},   {"jz", Cond::Eq},    {"jne", Cond::Ne},  {"jnz", Cond::Ne},  {"jl", Cond::Slt},
        {"jnge", Cond::Slt}, {"jle", Cond::Sle}, {"jng", Cond::Sle}, {"jg", Cond::Sgt},  {"jnle", Cond::Sgt},
        {"jge", Cond::Sge}, {"jnl", Cond::Sge},  {"jb", Cond::Ult},  {"jnae", Cond::Ult}, {"jc", Cond::Ult},
        {"jbe", Cond::Ule}, {"jna", Cond::Ule},  {"ja", Cond::Ugt},  {"jnbe", Cond::Ugt}, {"jae", Cond::Uge},
        {"jnb", Cond::Uge}, {"jnc", Cond::Uge},  {"js", Cond::Neg},  {"jns", Cond::Pos}};
    for (auto [name, c] : table)
      if (name == m) return c;
    return std::nullopt;
  }

  std::string call_target(std::size_t i) const {
    if (auto s = as<SymbolOperand>(i)) return s->name;
    if (auto r = as<RegisterOperand>(i)) return r->reg.name;
    if (auto imm = as<ImmediateOperand>(i)) return hex(imm->value);
    return operand(i).text;
  }

  void lift_x86() {
    const std::string& m = ins_.mnemonic;
    if (m == "nop") return;
    if (m == "mov") {
      need(2);
      unsigned w = x86_common_width();
      if (auto m0 = as<MemoryOperand>(0)) {
        if (as<MemoryOperand>(1)) unsupported_form(ins_);
        emit(micro::Store{address_of(*m0, arch_), x86_read(1, w), w});
        return;
      }
      auto dst = as<RegisterOperand>(0);
      if (!dst) unsupported_form(ins_);
      if (auto m1 = as<MemoryOperand>(1)) {
        emit(micro::Load{dst->reg, address_of(*m1, arch_), w});
        return;
      }
      emit(micro::Move{dst->reg, x86_read(1, w)});
      return;
    }
    if (m == "movzx") return x86_extend(Extend::Zero);
    if (m == "movsx" || m == "movsxd") return x86_extend(Extend::Sign);
    if (m == "lea") {
      need(2);
      auto dst = as<RegisterOperand>(0);
      auto src = as<MemoryOperand>(1);
      if (!dst || !src || dst->reg.width < 16) unsupported_form(ins_);
      AddrTemplate a = address_of(*src, arch_);
      a.width = dst->reg.width;
      emit(micro::Move{dst->reg, a});
      return;
    }
    if (m == "add") return x86_arith(ArithOp::Add);
    if (m == "sub") return x86_arith(ArithOp::Sub);
    if (m == "and") return x86_arith(ArithOp::And);
    if (m == "or") return x86_arith(ArithOp::Or);
    if (m == "xor") return x86_arith(ArithOp::Xor);
    if (m == "imul") {
      if (count() == 2) return x86_arith(ArithOp::Mul);
      need(3);
      auto dst = as<RegisterOperand>(0);
      auto imm = as<ImmediateOperand>(2);
      if (!dst || !imm || as<ImmediateOperand>(1)) unsupported_form(ins_);
      unsigned w = dst->reg.width;
      Value src = x86_read(1, w);
      emit(micro::BinOp{ArithOp::Mul, dst->reg, src, Imm{imm->value & width_mask(w), w}, true});
      return;
    }
    if (m == "not" || m == "neg") {
      need(1);
      unsigned w = x86_width(0);
      if (w == 0) unsupported_form(ins_);
      x86_update(m == "not" ? ArithOp::Not : ArithOp::Neg, Imm{0, w}, w, m == "neg");
      return;
    }
    if (m == "inc" || m == "dec") {
      need(1);
      unsigned w = x86_width(0);
      if (w == 0) unsupported_form(ins_);
      x86_update(m == "inc" ? ArithOp::Add : ArithOp::Sub, Imm{1, w}, w, true);
      return;
    }
    if (m == "shl" || m == "sal") return x86_shift(ArithOp::Shl);
    if (m == "shr") return x86_shift(ArithOp::Shr);
    if (m == "sar") return x86_shift(ArithOp::Sar);
    if (m == "cmp") return x86_compare(CmpFlavor::SubCmp);
    if (m == "test") return x86_compare(CmpFlavor::AndTst);
    if (m == "push") {
      need(1);
      if (auto r = as<RegisterOperand>(0)) {
        if (r->reg.width != 64) unsupported_form(ins_);
        emit(micro::Push{r->reg});
      } else if (auto imm = as<ImmediateOperand>(0)) {
        emit(micro::Push{Imm{imm->value, 64}});
      } else {
        if (x86_width(0) != 64) unsupported_form(ins_);
        emit(micro::Push{x86_read(0, 64)});
      }
      return;
    }
    if (m == "pop") {
      need(1);
      if (auto r = as<RegisterOperand>(0)) {
        if (r->reg.width != 64) unsupported_form(ins_);
        emit(micro::Pop{r->reg});
        return;
      }
      unsupported_form(ins_);
    }
    if (m == "call") {
      need(1);
      emit(micro::Call{call_target(0)});
      return;
    }
    if (m == "ret") {
      emit(micro::Ret{});
      return;
    }
    if (m == "jmp") {
      emit(micro::Branch{Cond::None});
      return;
    }
    if (auto c = x86_condition(m)) {
      emit(micro::Branch{*c});
      return;
    }
    unknown();
  }

  // ---------------------------------------------------------------- ARM32

  RegRef arm_reg(std::size_t i) const {
    auto r = as<RegisterOperand>(i);
    if (!r) unsupported_form(ins_);
    return r->reg;
  }

  RegRef arm_dst(std::size_t i) const {
    RegRef r = arm_reg(i);
    if (r.name == "pc") unsupported_form(ins_);
    return r;
  }

  Value arm_op2(std::size_t i) const {
    if (auto r = as<RegisterOperand>(i)) return r->reg;
    if (auto imm = as<ImmediateOperand>(i)) return Imm{imm->value & 0xffffffffu, 32};
    unsupported_form(ins_);
  }

  void arm_binop(ArithOp op, bool flags, bool reverse = false) {
    if (count() == 2) {
      RegRef rd = arm_dst(0);
      Value rhs = arm_op2(1);
      if (reverse) emit(micro::BinOp{op, rd, rhs, rd, flags});
      else emit(micro::BinOp{op, rd, rd, rhs, flags});
      return;
    }
    need(3);
    RegRef rd = arm_dst(0);
    RegRef rn = arm_reg(1);
    Value rhs = arm_op2(2);
    if (reverse) emit(micro::BinOp{op, rd, rhs, rn, flags});
    else emit(micro::BinOp{op, rd, rn, rhs, flags});
  }

  void arm_shift(ArithOp op, bool flags) {
    need(3);
    RegRef rd = arm_dst(0);
    RegRef rm = arm_reg(1);
    if (auto imm = as<ImmediateOperand>(2)) {
      if (imm->value > 32) unsupported_form(ins_);
      emit(micro::BinOp{op, rd, rm, Imm{imm->value, 32}, flags});
      return;
    }
    RegRef rs = arm_reg(2);
    Temp t = temp(32);
    emit(micro::BinOp{ArithOp::And, t, rs, Imm{0xff, 32}});
    emit(micro::BinOp{op, rd, rm, t, flags});
  }

  AddrTemplate arm_address(std::size_t i) const {
    auto m = as<MemoryOperand>(i);
    if (!m) unsupported_form(ins_);
    return address_of(*m, arch_);
  }

  void arm_load(unsigned width, Extend ext) {
    need(2);
    RegRef rd = arm_dst(0);
    AddrTemplate a = arm_address(1);
    if (width == 32) {
      emit(micro::Load{rd, a, 32});
      return;
    }
    Temp t = temp(width);
    emit(micro::Load{t, a, width});
    emit(micro::Move{rd, t, ext});
  }

  void arm_store(unsigned width) {
    need(2);
    RegRef rd = arm_reg(0);
    AddrTemplate a = arm_address(1);
    emit(micro::Store{a, RegRef{rd.name, width, 0}, width});
  }

  static std::optional<Cond> arm_condition(std::string_view c) {
    static constexpr std::pair<std::string_view, Cond> table[] = {
        {"eq", Cond::Eq},  {"ne", Cond::Ne},  {"lt", Cond::Slt}, {"le", Cond::Sle}, {"gt", Cond::Sgt},
        {"ge", Cond::Sge}, {"hi", Cond::Ugt}, {"ls", Cond::Ule}, {"hs", Cond::Uge}, {"cs", Cond::Uge},
        {"lo", Cond::Ult}, {"cc", Cond::Ult}, {"mi", Cond::Neg}, {"pl", Cond::Pos}};
    for (auto [name, cond] : table)
      if (name == c) return cond;
    return std::nullopt;
  }

  void lift_arm() {
    std::string m = ins_.mnemonic;
    if (m == "nop") return;
    if (m == "b") {
      emit(micro::Branch{Cond::None});
      return;
    }
    if (m == "bl") {
      need(1);
      emit(micro::Call{call_target(0)});
      return;
    }
    if (m == "bx") {
      need(1);
      if (arm_reg(0).name != "lr") unsupported_form(ins_);
      emit(micro::Ret{});
      return;
    }
    if (m.size() == 3 && m[0] == 'b') {
      if (auto c = arm_condition(m.substr(1))) {
        emit(micro::Branch{*c});
        return;
      }
    }
    if (m == "cmp" || m == "tst") {
      need(2);
      emit(micro::Compare{arm_reg(0), arm_op2(1), m == "cmp" ? CmpFlavor::SubCmp : CmpFlavor::AndTst});
      return;
    }
    if (m == "ldr") return arm_load(32, Extend::None);
    if (m == "ldrb") return arm_load(8, Extend::Zero);
    if (m == "ldrh") return arm_load(16, Extend::Zero);
    if (m == "ldrsb") return arm_load(8, Extend::Sign);
    if (m == "ldrsh") return arm_load(16, Extend::Sign);
    if (m == "str") return arm_store(32);
    if (m == "strb") return arm_store(8);
    if (m == "strh") return arm_store(16);
    if (m == "push" || m == "pop") {
      need(1);
      auto list = as<RegisterListOperand>(0);
      if (!list) unsupported_form(ins_);
      std::vector<RegRef> regs = list->regs;
      std::sort(regs.begin(), regs.end(), [](const RegRef& a, const RegRef& b) {
        return arm_register_number(a.name) < arm_register_number(b.name);
      });
      if (m == "push") {
        for (auto it = regs.rbegin(); it != regs.rend(); ++it) emit(micro::Push{*it});
        return;
      }
      bool returns = false;
      for (const auto& r : regs) {
        if (r.name == "pc") {
          emit(micro::Pop{temp(32)});
          returns = true;
        } else {
          emit(micro::Pop{r});
        }
      }
      if (returns) emit(micro::Ret{});
      return;
    }

    bool flags = false;
    static constexpr std::string_view flaggable[] = {"mov", "mvn", "add", "sub", "rsb", "mul",
                                                     "and", "orr", "eor", "lsl", "lsr", "asr"};
    auto known = [](std::string_view b) {
      return std::find(std::begin(flaggable), std::end(flaggable), b) != std::end(flaggable);
    };
    if (!known(m) && m.size() == 4 && m.back() == 's' && known(m.substr(0, 3))) {
      flags = true;
      m.pop_back();
    }
    if (m == "mov") {
      need(2);
      RegRef rd = arm_dst(0);
      if (flags) emit(micro::BinOp{ArithOp::Or, rd, arm_op2(1), Imm{0, 32}, true});
      else emit(micro::Move{rd, arm_op2(1)});
      return;
    }
    if (m == "mvn") {
      need(2);
      emit(micro::BinOp{ArithOp::Not, arm_dst(0), arm_op2(1), Imm{0, 32}, flags});
      return;
    }
    if (m == "add") return arm_binop(ArithOp::Add, flags);
    if (m == "sub") return arm_binop(ArithOp::Sub, flags);
    if (m == "rsb") return arm_binop(ArithOp::Sub, flags, true);
    if (m == "mul") return arm_binop(ArithOp::Mul, flags);
    if (m == "and") return arm_binop(ArithOp::And, flags);
    if (m == "orr") return arm_binop(ArithOp::Or, flags);
    if (m == "eor") return arm_binop(ArithOp::Xor, flags);
    if (m == "lsl") return arm_shift(ArithOp::Shl, flags);
    if (m == "lsr") return arm_shift(ArithOp::Shr, flags);
    if (m == "asr") return arm_shift(ArithOp::Sar, flags);
    unknown();
  }

  const Instruction& ins_;
  Arch arch_;
  std::vector<MicroOp> ops_;
  unsigned next_temp_ = 0;
};

std::string value_text(const Value& v);

std::string loc_text(const Loc& l) {
  if (auto r = std::get_if<RegRef>(&l)) {
    std::string s = r->name + ":" + std::to_string(r->width);
    if (r->shift) s += "@" + std::to_string(r->shift);
    return s;
  }
  const auto& t = std::get<Temp>(l);
  return "t" + std::to_string(t.id) + ":" + std::to_string(t.width);
}

std::string addr_text(const AddrTemplate& a) {
  std::string s = "[";
  bool first = true;
  if (a.base) {
    s += a.base->name;
    first = false;
  }
  if (a.index) {
    s += (first ? "" : " + ") + a.index->name + "*" + std::to_string(a.scale);
    first = false;
  }
  if (a.disp != 0 || first) {
    if (first) s += hex(static_cast<std::uint64_t>(a.disp));
    else if (a.disp < 0) s += " - " + hex(static_cast<std::uint64_t>(-a.disp));
    else s += " + " + hex(static_cast<std::uint64_t>(a.disp));
  }
  return s + "]:" + std::to_string(a.width);
}

std::string value_text(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Imm>) return hex(x.value) + ":" + std::to_string(x.width);
        else if constexpr (std::is_same_v<T, AddrTemplate>) return "&" + addr_text(x);
        else return loc_text(Loc{x});
      },
      v);
}

std::string_view op_name(ArithOp op) {
  static constexpr std::string_view names[] = {"ADD", "SUB", "MUL", "AND", "OR", "XOR",
                                               "SHL", "SHR", "SAR", "NOT", "NEG"};
  return names[static_cast<int>(op)];
}

}  // namespace

unsigned width_of(const Value& v) {
  return std::visit([](const auto& x) { return x.width; }, v);
}

unsigned width_of(const Loc& l) {
  return std::visit([](const auto& x) { return x.width; }, l);
}

std::vector<MicroOp> expand(const MicroOp& op, Arch arch) {
  const unsigned w = word_width(arch);
  const RegRef sp{std::string{stack_pointer(arch)}, w, 0};
  if (auto p = std::get_if<micro::Push>(&op)) {
    return {micro::BinOp{ArithOp::Sub, sp, sp, Imm{w / 8, w}},
            micro::Store{stack_slot(arch), p->src, w, true}};
  }
  if (auto p = std::get_if<micro::Pop>(&op)) {
    return {micro::Load{p->dst, stack_slot(arch), w}, micro::BinOp{ArithOp::Add, sp, sp, Imm{w / 8, w}}};
  }
  return {op};
}

bool writes_flags(const MicroOp& op) {
  if (std::holds_alternative<micro::Compare>(op)) return true;
  if (auto b = std::get_if<micro::BinOp>(&op)) return b->sets_flags;
  return false;
}

LiftResult lift_instruction(const Instruction& ins, Arch arch, CallConv) {
  LiftResult result;
  try {
    result.ops = Lifter(ins, arch).run();
  } catch (const LiftFailure& f) {
    std::optional<Loc> dst;
    if (!ins.operands.empty())
      if (auto r = std::get_if<RegisterOperand>(&ins.operands[0].value)) dst = full_register(r->reg, arch);
    result.ops = {micro::Unsupported{ins.mnemonic, dst}};
    result.diagnostic = Diagnostic::warning(f.message, ins.address);
  }
  return result;
}

const std::vector<MicroOp>& LiftedFunction::ops_at(std::uint64_t address) const { return micro.at(address); }

LiftedFunction lift_function(const Function& f) {
  LiftedFunction lf{f, {}, {}};
  for (const auto& b : f.blocks) {
    for (const auto& ins : b.instructions) {
      auto r = lift_instruction(ins, f.arch, f.convention);
      lf.micro[ins.address] = std::move(r.ops);
      if (r.diagnostic) lf.diagnostics.push_back(*r.diagnostic);
    }
  }
  return lf;
}

std::string to_string(Cond c) {
  static constexpr std::string_view names[] = {"NONE", "EQ",  "NE",  "SLT", "SLE", "SGT", "SGE",
                                               "ULT",  "ULE", "UGT", "UGE", "NEG", "POS"};
  return std::string{names[static_cast<int>(c)]};
}

std::string to_string(const MicroOp& op) {
  std::ostringstream s;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, micro::Move>) {
          s << "MOVE " << loc_text(x.dst) << " <- " << value_text(x.src);
          if (x.ext == Extend::Zero) s << " zext";
          if (x.ext == Extend::Sign) s << " sext";
        } else if constexpr (std::is_same_v<T, micro::BinOp>) {
          s << "BINOP " << op_name(x.op) << " " << loc_text(x.dst) << " <- " << value_text(x.lhs);
          if (x.op != ArithOp::Not && x.op != ArithOp::Neg) s << ", " << value_text(x.rhs);
          if (x.sets_flags) s << " !flags";
        } else if constexpr (std::is_same_v<T, micro::Load>) {
          s << "LOAD " << loc_text(x.dst) << " <- " << addr_text(x.addr) << " w" << x.width;
        } else if constexpr (std::is_same_v<T, micro::Store>) {
          s << "STORE " << addr_text(x.addr) << " <- " << value_text(x.src) << " w" << x.width;
          if (x.push_slot) s << " push";
        } else if constexpr (std::is_same_v<T, micro::Compare>) {
          s << "COMPARE " << value_text(x.lhs) << ", " << value_text(x.rhs)
            << (x.flavor == CmpFlavor::SubCmp ? " sub" : " tst");
        } else if constexpr (std::is_same_v<T, micro::Branch>) {
          s << "BRANCH " << to_string(x.cond);
        } else if constexpr (std::is_same_v<T, micro::Call>) {
          s << "CALL " << x.target;
        } else if constexpr (std::is_same_v<T, micro::Ret>) {
          s << "RET";
        } else if constexpr (std::is_same_v<T, micro::Push>) {
          s << "PUSH " << value_text(x.src);
        } else if constexpr (std::is_same_v<T, micro::Pop>) {
          s << "POP " << loc_text(x.dst);
        } else {
          s << "UNSUPPORTED " << x.mnemonic;
          if (x.dst) s << " havoc " << loc_text(*x.dst);
        }
      },
      op);
  return s.str();
}

}  // namespace keysim
