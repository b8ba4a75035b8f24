#include "exprgen.hpp"

#include "keysim/arch.hpp"


namespace reftest {

using keysim::BinaryOp;
using keysim::Expr;
using keysim::ExprKind;
using keysim::UnaryOp;

std::uint64_t ExprGen::constant(unsigned width) {
  std::uint64_t v;
  switch (rng_() % 7) {
    case 0: v = 0; break;
    case 1: v = 1; break;
    case 2: v = ~0ULL; break;
    case 3: v = rng_() % 9; break;
    case 4: v = rng_() % 70; break;
    case 5: v = 1ULL << (width - 1); break;
    default: v = rng_(); break;
  }
  return v & keysim::width_mask(width);
}

Expr ExprGen::leaf(unsigned width) {
  auto wide = [&]() -> Expr {
    switch (rng_() % 6) {
      case 0:
      case 1:
      case 2: return Expr::var(static_cast<unsigned>(rng_() % 4), 64);
      case 3: return Expr::sym(rng_() % 2 ? "rbx" : "sp", 64);
      default: return Expr::mem(Expr::binary(BinaryOp::Add, Expr::var(static_cast<unsigned>(rng_() % 2), 64),
                                             Expr::constant(8 * (rng_() % 4), 64)),
                                64);
    }
  };
  if (rng_() % 3 == 0) return Expr::constant(constant(width), width);
  Expr w = wide();
  return width == 64 ? w : Expr::trunc(w, width);
}

Expr ExprGen::make(unsigned width, unsigned depth) {
  if (depth == 0 || rng_() % 5 == 0) return leaf(width);
  const unsigned d = depth - 1;
  switch (rng_() % 16) {
    case 0: return Expr::unary(rng_() % 2 ? UnaryOp::Not : UnaryOp::Neg, make(width, d));
    case 1: {
      // Width change: extend something narrower or truncate something wider.
      static const unsigned widths[] = {8, 16, 32, 64};
      const unsigned other = widths[rng_() % 4];
      if (other < width) return rng_() % 2 ? Expr::zext(make(other, d), width) : Expr::sext(make(other, d), width);
      if (other > width) return Expr::trunc(make(other, d), width);
      return make(width, d);
    }
    case 2: return Expr::iter(make(width, d));
    case 3: {
      // Shift by a constant amount, sometimes out of range.
      static const BinaryOp shifts[] = {BinaryOp::Shl, BinaryOp::Shr, BinaryOp::Sar};
      return Expr::binary(shifts[rng_() % 3], make(width, d), Expr::constant(rng_() % (width + 4), width));
    }
    default: {
      static const BinaryOp ops[] = {BinaryOp::Add, BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::And,
                                     BinaryOp::Or,  BinaryOp::Xor, BinaryOp::Shl, BinaryOp::Shr, BinaryOp::Sar};
      const BinaryOp op = ops[rng_() % 10];
      Expr lhs = make(width, d);
      // Reuse the left operand now and then so cancellation rules get a chance.
      Expr rhs = rng_() % 6 == 0 ? lhs : make(width, d);
      return Expr::binary(op, lhs, rhs);
    }
  }
}

Valuation::Valuation(std::mt19937_64& rng) {
  for (auto& v : vars_) v = rng();
  for (auto& v : syms_) v = rng();
  memory_salt_ = rng();
}

keysim::LeafResolver Valuation::resolver() const {
  return [this](const Expr& e) -> std::optional<std::uint64_t> {
    switch (e.kind()) {
      case ExprKind::Var: return e.index() < 4 ? std::optional(vars_[e.index()]) : std::nullopt;
      case ExprKind::Sym: return e.name() == "rbx" ? syms_[0] : syms_[1];
      case ExprKind::Mem: {
        std::uint64_t z = (keysim::eval_concrete(e.arg(0), resolver()) ^ memory_salt_) * 0x9e3779b97f4a7c15ULL;
        return z ^ (z >> 29);
      }
      default: return std::nullopt;
    }
  };
}

}  // namespace reftest
