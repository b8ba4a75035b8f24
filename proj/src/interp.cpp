#include "keysim/interp.hpp"

#include <stdexcept>
#include <utility>

#include "keysim/simplify.hpp"

namespace keysim {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool sign_bit(std::uint64_t v, unsigned width) { return (v >> (width - 1)) & 1; }

std::int64_t as_signed(std::uint64_t v, unsigned width) {
  return static_cast<std::int64_t>(sign_extend(v, width, 64));
}

}  // namespace

bool evaluate_condition(Cond cond, const ConcreteCmp& c) {
  const unsigned w = c.width;
  if (c.flavor == CmpFlavor::AndTst) {
    const std::uint64_t r = c.lhs & c.rhs & width_mask(w);
    const bool zf = r == 0;
    const bool sf = sign_bit(r, w);
    switch (cond) {
      case Cond::None: return true;
      case Cond::Eq: return zf;
      case Cond::Ne: return !zf;
      case Cond::Slt: return sf;
      case Cond::Sle: return zf || sf;
      case Cond::Sgt: return !zf && !sf;
      case Cond::Sge: return !sf;
      case Cond::Ult: return false;
      case Cond::Ule: return zf;
      case Cond::Ugt: return !zf;
      case Cond::Uge: return true;
      case Cond::Neg: return sf;
      case Cond::Pos: return !sf;
    }
    return false;
  }
  const std::uint64_t a = c.lhs & width_mask(w);
  const std::uint64_t b = c.rhs & width_mask(w);
  const std::uint64_t diff = (a - b) & width_mask(w);
  switch (cond) {
    case Cond::None: return true;
    case Cond::Eq: return a == b;
    case Cond::Ne: return a != b;
    case Cond::Slt: return as_signed(a, w) < as_signed(b, w);
    case Cond::Sle: return as_signed(a, w) <= as_signed(b, w);
    case Cond::Sgt: return as_signed(a, w) > as_signed(b, w);
    case Cond::Sge: return as_signed(a, w) >= as_signed(b, w);
    case Cond::Ult: return a < b;
    case Cond::Ule: return a <= b;
    case Cond::Ugt: return a > b;
    case Cond::Uge: return a >= b;
    case Cond::Neg: return sign_bit(diff, w);
    case Cond::Pos: return !sign_bit(diff, w);
  }
  return false;
}

ConcreteMachine::ConcreteMachine(Arch arch, std::uint64_t memory_seed)
    : ConcreteMachine(arch, [memory_seed](std::uint64_t a) {
        return static_cast<std::uint8_t>(mix(memory_seed ^ mix(a)) & 0xff);
      }) {}

ConcreteMachine::ConcreteMachine(Arch arch, MemoryImage initial) : arch_(arch), initial_(std::move(initial)) {
  for (auto name : register_file(arch)) regs_.emplace(std::string{name}, 0);
}

std::uint64_t ConcreteMachine::reg(std::string_view name) const {
  auto it = regs_.find(name);
  if (it == regs_.end()) throw std::out_of_range("no register " + std::string{name});
  return it->second;
}

void ConcreteMachine::set_reg(std::string_view name, std::uint64_t value) {
  auto it = regs_.find(name);
  if (it == regs_.end()) throw std::out_of_range("no register " + std::string{name});
  it->second = value & width_mask(word_width(arch_));
}

std::uint64_t ConcreteMachine::read(const RegRef& r) const {
  return (reg(r.name) >> r.shift) & width_mask(r.width);
}

void ConcreteMachine::write(const RegRef& r, std::uint64_t value) {
  value &= width_mask(r.width);
  const unsigned word = word_width(arch_);
  if (r.width == word || (arch_ == Arch::X86_64 && r.width == 32)) {
    set_reg(r.name, value);
    return;
  }
  const std::uint64_t field = width_mask(r.width) << r.shift;
  set_reg(r.name, (reg(r.name) & ~field) | (value << r.shift));
}

std::uint64_t ConcreteMachine::load(std::uint64_t address, unsigned width) const {
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width / 8; ++i) {
    const std::uint64_t a = address + i;
    auto it = memory_.find(a);
    const std::uint64_t byte = it != memory_.end() ? it->second : initial_(a);
    v |= byte << (8 * i);
  }
  return v;
}

void ConcreteMachine::store(std::uint64_t address, std::uint64_t value, unsigned width) {
  for (unsigned i = 0; i < width / 8; ++i) memory_[address + i] = static_cast<std::uint8_t>(value >> (8 * i));
}

std::uint64_t ConcreteMachine::address(const AddrTemplate& a) const {
  std::uint64_t v = static_cast<std::uint64_t>(a.disp);
  if (a.base) v += read(*a.base);
  if (a.index) v += read(*a.index) * a.scale;
  return v & width_mask(a.width);
}

std::uint64_t ConcreteMachine::value(const Value& v, const std::map<unsigned, std::uint64_t>& temps) const {
  if (auto r = std::get_if<RegRef>(&v)) return read(*r);
  if (auto t = std::get_if<Temp>(&v)) {
    auto it = temps.find(t->id);
    if (it == temps.end()) throw std::logic_error("temp read before write");
    return it->second & width_mask(t->width);
  }
  if (auto i = std::get_if<Imm>(&v)) return i->value & width_mask(i->width);
  return address(std::get<AddrTemplate>(v));
}

void ConcreteMachine::assign(const Loc& l, std::uint64_t v, std::map<unsigned, std::uint64_t>& temps) {
  if (auto r = std::get_if<RegRef>(&l)) write(*r, v);
  else {
    const auto& t = std::get<Temp>(l);
    temps[t.id] = v & width_mask(t.width);
  }
}

void ConcreteMachine::step(const MicroOp& op, std::map<unsigned, std::uint64_t>& temps) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, micro::Move>) {
          std::uint64_t v = value(x.src, temps);
          if (x.ext == Extend::Sign) v = sign_extend(v, width_of(x.src), width_of(x.dst));
          assign(x.dst, v, temps);
        } else if constexpr (std::is_same_v<T, micro::BinOp>) {
          const unsigned w = width_of(x.dst);
          const std::uint64_t a = value(x.lhs, temps);
          std::uint64_t r;
          if (x.op == ArithOp::Not) r = apply_unary(UnaryOp::Not, a, w);
          else if (x.op == ArithOp::Neg) r = apply_unary(UnaryOp::Neg, a, w);
          else r = apply_binary(static_cast<BinaryOp>(x.op), a, value(x.rhs, temps), w);
          assign(x.dst, r, temps);
          if (x.sets_flags) lastcmp_ = ConcreteCmp{r, 0, w, CmpFlavor::SubCmp};
        } else if constexpr (std::is_same_v<T, micro::Load>) {
          assign(x.dst, load(address(x.addr), x.width), temps);
        } else if constexpr (std::is_same_v<T, micro::Store>) {
          store(address(x.addr), value(x.src, temps), x.width);
        } else if constexpr (std::is_same_v<T, micro::Compare>) {
          lastcmp_ = ConcreteCmp{value(x.lhs, temps), value(x.rhs, temps), width_of(x.lhs), x.flavor};
        } else if constexpr (std::is_same_v<T, micro::Branch>) {
          if (x.cond == Cond::None) branch_taken_ = true;
          else if (!lastcmp_) throw std::logic_error("conditional branch without a prior comparison");
          else branch_taken_ = evaluate_condition(x.cond, *lastcmp_);
        } else if constexpr (std::is_same_v<T, micro::Call>) {
          calls_.push_back(x.target);
        } else if constexpr (std::is_same_v<T, micro::Ret>) {
          returned_ = true;
        } else if constexpr (std::is_same_v<T, micro::Push> || std::is_same_v<T, micro::Pop>) {
          for (const auto& e : expand(x, arch_)) step(e, temps);
        } else {
          throw std::logic_error("cannot interpret unsupported instruction '" + x.mnemonic + "'");
        }
      },
      op);
}

void ConcreteMachine::execute(const std::vector<MicroOp>& ops) {
  std::map<unsigned, std::uint64_t> temps;
  for (const auto& op : ops) step(op, temps);
}

}  // namespace keysim
