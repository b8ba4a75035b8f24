#include "keysim/simplify.hpp"

#include <algorithm>
#include <unordered_map>

#include "keysim/arch.hpp"

namespace keysim {

std::uint64_t sign_extend(std::uint64_t v, unsigned from_width, unsigned to_width) {
  v &= width_mask(from_width);
  if (from_width < 64 && ((v >> (from_width - 1)) & 1)) v |= ~width_mask(from_width);
  return v & width_mask(to_width);
}

std::uint64_t apply_binary(BinaryOp op, std::uint64_t a, std::uint64_t b, unsigned width) {
  const std::uint64_t m = width_mask(width);
  a &= m;
  b &= m;
  switch (op) {
    case BinaryOp::Add: return (a + b) & m;
    case BinaryOp::Sub: return (a - b) & m;
    case BinaryOp::Mul: return (a * b) & m;
    case BinaryOp::And: return a & b;
    case BinaryOp::Or: return a | b;
    case BinaryOp::Xor: return a ^ b;
    case BinaryOp::Shl: return b >= width ? 0 : (a << b) & m;
    case BinaryOp::Shr: return b >= width ? 0 : a >> b;
    case BinaryOp::Sar: {
      const std::uint64_t s = sign_extend(a, width, 64);
      const unsigned k = b >= width ? width - 1 : static_cast<unsigned>(b);
      return static_cast<std::uint64_t>(static_cast<std::int64_t>(s) >> k) & m;
    }
  }
  return 0;
}

std::uint64_t apply_unary(UnaryOp op, std::uint64_t a, unsigned width) {
  const std::uint64_t m = width_mask(width);
  return op == UnaryOp::Not ? ~a & m : (~a + 1) & m;
}

namespace {

bool top_bit(std::uint64_t v, unsigned width) { return (v >> (width - 1)) & 1; }

Expr rebuild(const Expr& e, std::vector<Expr> args) {
  switch (e.kind()) {
    case ExprKind::Mem: return Expr::mem(std::move(args[0]), e.width());
    case ExprKind::Iter: return Expr::iter(std::move(args[0]));
    case ExprKind::ZExt: return Expr::zext(std::move(args[0]), e.width());
    case ExprKind::SExt: return Expr::sext(std::move(args[0]), e.width());
    case ExprKind::Trunc: return Expr::trunc(std::move(args[0]), e.width());
    case ExprKind::Unary: return Expr::unary(e.unary_op(), std::move(args[0]));
    case ExprKind::Binary: return Expr::binary(e.binary_op(), std::move(args[0]), std::move(args[1]));
    default: return e;
  }
}

std::optional<Expr> changed(const Expr& before, Expr after) {
  if (after == before) return std::nullopt;
  return after;
}

// --- constant folding -------------------------------------------------------

std::optional<Expr> fold_binary(const Expr& e) {
  if (e.kind() != ExprKind::Binary || !e.lhs().is_const() || !e.rhs().is_const()) return std::nullopt;
  return Expr::constant(apply_binary(e.binary_op(), e.lhs().value(), e.rhs().value(), e.width()), e.width());
}

std::optional<Expr> fold_unary(const Expr& e) {
  if (e.kind() != ExprKind::Unary || !e.arg(0).is_const()) return std::nullopt;
  return Expr::constant(apply_unary(e.unary_op(), e.arg(0).value(), e.width()), e.width());
}

std::optional<Expr> fold_convert(const Expr& e) {
  if (e.arity() != 1 || !e.arg(0).is_const()) return std::nullopt;
  const Expr& a = e.arg(0);
  switch (e.kind()) {
    case ExprKind::ZExt:
    case ExprKind::Trunc: return Expr::constant(a.value(), e.width());
    case ExprKind::SExt: return Expr::constant(sign_extend(a.value(), a.width(), e.width()), e.width());
    default: return std::nullopt;
  }
}

// --- linear sums ------------------------------------------------------------

struct LinearSum {
  unsigned width;
  std::uint64_t constant = 0;
  std::vector<std::pair<Expr, std::uint64_t>> terms;  // term, coefficient

  void add_term(const Expr& t, std::uint64_t k) {
    for (auto& [term, coeff] : terms) {
      if (term == t) {
        coeff = (coeff + k) & width_mask(width);
        return;
      }
    }
    terms.emplace_back(t, k & width_mask(width));
  }

  void collect(const Expr& e, std::uint64_t k) {
    const std::uint64_t m = width_mask(width);
    if (e.kind() == ExprKind::Binary && e.binary_op() == BinaryOp::Add) {
      collect(e.lhs(), k);
      collect(e.rhs(), k);
    } else if (e.kind() == ExprKind::Binary && e.binary_op() == BinaryOp::Sub) {
      collect(e.lhs(), k);
      collect(e.rhs(), (~k + 1) & m);
    } else if (e.kind() == ExprKind::Unary && e.unary_op() == UnaryOp::Neg) {
      collect(e.arg(0), (~k + 1) & m);
    } else if (e.is_const()) {
      constant = (constant + k * e.value()) & m;
    } else if (e.kind() == ExprKind::Binary && e.binary_op() == BinaryOp::Mul && e.rhs().is_const()) {
      add_term(e.lhs(), (k * e.rhs().value()) & m);
    } else {
      add_term(e, k);
    }
  }

  Expr build() const {
    const std::uint64_t m = width_mask(width);
    struct Signed {
      Expr term;
      bool negative;
    };
    std::vector<Signed> parts;
    for (const auto& [t, k] : terms) {
      if (k == 0) continue;
      const bool neg = top_bit(k, width);
      const std::uint64_t mag = neg ? (~k + 1) & m : k;
      parts.push_back({mag == 1 ? t : Expr::binary(BinaryOp::Mul, t, Expr::constant(mag, width)), neg});
    }
    std::stable_sort(parts.begin(), parts.end(), [](const Signed& a, const Signed& b) {
      if (a.negative != b.negative) return !a.negative;
      return canonical_less(a.term, b.term);
    });
    if (parts.empty()) return Expr::constant(constant, width);
    Expr acc = parts[0].negative ? Expr::unary(UnaryOp::Neg, parts[0].term) : parts[0].term;
    for (std::size_t i = 1; i < parts.size(); ++i)
      acc = Expr::binary(parts[i].negative ? BinaryOp::Sub : BinaryOp::Add, acc, parts[i].term);
    if (constant != 0) {
      const bool neg = top_bit(constant, width);
      acc = Expr::binary(neg ? BinaryOp::Sub : BinaryOp::Add, acc,
                         Expr::constant(neg ? (~constant + 1) & m : constant, width));
    }
    return acc;
  }
};

std::optional<Expr> normalize_sum(const Expr& e) {
  const bool sum_node = (e.kind() == ExprKind::Binary &&
                         (e.binary_op() == BinaryOp::Add || e.binary_op() == BinaryOp::Sub)) ||
                        (e.kind() == ExprKind::Unary && e.unary_op() == UnaryOp::Neg);
  if (!sum_node) return std::nullopt;
  LinearSum sum{e.width()};
  sum.collect(e, 1);
  return changed(e, sum.build());
}

// --- associative/commutative chains (mul, and, or, xor) ---------------------

void flatten(const Expr& e, BinaryOp op, std::vector<Expr>& out) {
  if (e.kind() == ExprKind::Binary && e.binary_op() == op) {
    flatten(e.lhs(), op, out);
    flatten(e.rhs(), op, out);
  } else {
    out.push_back(e);
  }
}

Expr build_chain(BinaryOp op, std::vector<Expr> factors, std::optional<Expr> constant, unsigned width,
                 std::uint64_t empty_value) {
  std::sort(factors.begin(), factors.end(), canonical_less);
  if (constant) factors.push_back(*constant);
  if (factors.empty()) return Expr::constant(empty_value, width);
  Expr acc = factors[0];
  for (std::size_t i = 1; i < factors.size(); ++i) acc = Expr::binary(op, acc, factors[i]);
  return acc;
}

std::optional<Expr> normalize_chain(const Expr& e, BinaryOp op) {
  if (e.kind() != ExprKind::Binary || e.binary_op() != op) return std::nullopt;
  const unsigned w = e.width();
  const std::uint64_t m = width_mask(w);
  std::vector<Expr> items;
  flatten(e, op, items);

  std::uint64_t identity = op == BinaryOp::Mul ? 1 : op == BinaryOp::And ? m : 0;
  std::uint64_t c = identity;
  std::vector<Expr> rest;
  for (const auto& it : items) {
    if (it.is_const()) c = apply_binary(op, c, it.value(), w);
    else rest.push_back(it);
  }

  if (op == BinaryOp::Mul && c == 0) return changed(e, Expr::constant(0, w));
  if (op == BinaryOp::And && c == 0) return changed(e, Expr::constant(0, w));
  if (op == BinaryOp::Or && c == m) return changed(e, Expr::constant(m, w));

  if (op == BinaryOp::And || op == BinaryOp::Or) {
    std::sort(rest.begin(), rest.end(), canonical_less);
    rest.erase(std::unique(rest.begin(), rest.end()), rest.end());
    for (const auto& x : rest) {
      if (x.kind() != ExprKind::Unary || x.unary_op() != UnaryOp::Not) continue;
      if (std::find(rest.begin(), rest.end(), x.arg(0)) != rest.end())
        return changed(e, Expr::constant(op == BinaryOp::And ? 0 : m, w));
    }
  }
  if (op == BinaryOp::Xor) {
    std::sort(rest.begin(), rest.end(), canonical_less);
    std::vector<Expr> odd;
    for (std::size_t i = 0; i < rest.size();) {
      std::size_t j = i;
      while (j < rest.size() && rest[j] == rest[i]) ++j;
      if ((j - i) % 2) odd.push_back(rest[i]);
      i = j;
    }
    rest = std::move(odd);
  }

  std::optional<Expr> constant;
  if (c != identity) constant = Expr::constant(c, w);
  return changed(e, build_chain(op, std::move(rest), constant, w, identity));
}

// --- shifts -----------------------------------------------------------------

bool is_shift(const Expr& e) {
  return e.kind() == ExprKind::Binary &&
         (e.binary_op() == BinaryOp::Shl || e.binary_op() == BinaryOp::Shr || e.binary_op() == BinaryOp::Sar);
}

std::optional<Expr> shift_by_zero(const Expr& e) {
  if (is_shift(e) && e.rhs().is_const(0)) return e.lhs();
  return std::nullopt;
}

std::optional<Expr> shift_overflow(const Expr& e) {
  if (e.kind() != ExprKind::Binary || !e.rhs().is_const()) return std::nullopt;
  if (e.binary_op() != BinaryOp::Shl && e.binary_op() != BinaryOp::Shr) return std::nullopt;
  if (e.rhs().value() < e.width()) return std::nullopt;
  return Expr::constant(0, e.width());
}

std::optional<Expr> shl_to_mul(const Expr& e) {
  if (e.kind() != ExprKind::Binary || e.binary_op() != BinaryOp::Shl || !e.rhs().is_const()) return std::nullopt;
  const std::uint64_t k = e.rhs().value();
  if (k == 0 || k >= e.width()) return std::nullopt;
  return Expr::binary(BinaryOp::Mul, e.lhs(), Expr::constant(std::uint64_t{1} << k, e.width()));
}

std::optional<Expr> shift_merge(const Expr& e) {
  if (e.kind() != ExprKind::Binary || !e.rhs().is_const()) return std::nullopt;
  const BinaryOp op = e.binary_op();
  if (op != BinaryOp::Shr && op != BinaryOp::Sar) return std::nullopt;
  const Expr& inner = e.lhs();
  if (inner.kind() != ExprKind::Binary || inner.binary_op() != op || !inner.rhs().is_const()) return std::nullopt;
  const unsigned w = e.width();
  const std::uint64_t a = inner.rhs().value(), b = e.rhs().value();
  std::uint64_t total = (a >= w || b >= w) ? w : a + b;
  if (op == BinaryOp::Shr) {
    if (total >= w) return Expr::constant(0, w);
  } else {
    total = std::min<std::uint64_t>(total, w - 1);
  }
  return Expr::binary(op, inner.lhs(), Expr::constant(total, w));
}

std::optional<Expr> double_not(const Expr& e) {
  if (e.kind() == ExprKind::Unary && e.unary_op() == UnaryOp::Not && e.arg(0).kind() == ExprKind::Unary &&
      e.arg(0).unary_op() == UnaryOp::Not)
    return e.arg(0).arg(0);
  return std::nullopt;
}

// --- width conversions ------------------------------------------------------

std::optional<Expr> convert_merge(const Expr& e) {
  if (e.arity() != 1) return std::nullopt;
  const Expr& a = e.arg(0);
  const unsigned w = e.width();
  switch (e.kind()) {
    case ExprKind::ZExt:
      if (a.kind() == ExprKind::ZExt) return Expr::zext(a.arg(0), w);
      break;
    case ExprKind::SExt:
      if (a.kind() == ExprKind::SExt) return Expr::sext(a.arg(0), w);
      if (a.kind() == ExprKind::ZExt) return Expr::zext(a.arg(0), w);
      break;
    case ExprKind::Trunc:
      if (a.kind() == ExprKind::Trunc) return Expr::trunc(a.arg(0), w);
      if (a.kind() == ExprKind::ZExt || a.kind() == ExprKind::SExt) {
        const Expr& x = a.arg(0);
        if (x.width() == w) return x;
        if (x.width() > w) return Expr::trunc(x, w);
        return a.kind() == ExprKind::ZExt ? Expr::zext(x, w) : Expr::sext(x, w);
      }
      break;
    default: break;
  }
  return std::nullopt;
}

std::optional<Expr> trunc_distribute(const Expr& e) {
  if (e.kind() != ExprKind::Trunc) return std::nullopt;
  const Expr& a = e.arg(0);
  const unsigned w = e.width();
  if (a.kind() == ExprKind::Unary) return Expr::unary(a.unary_op(), Expr::trunc(a.arg(0), w));
  if (a.kind() != ExprKind::Binary) return std::nullopt;
  switch (a.binary_op()) {
    case BinaryOp::Add:
    case BinaryOp::Sub:
    case BinaryOp::Mul:
    case BinaryOp::And:
    case BinaryOp::Or:
    case BinaryOp::Xor:
      return Expr::binary(a.binary_op(), Expr::trunc(a.lhs(), w), Expr::trunc(a.rhs(), w));
    default: return std::nullopt;
  }
}

const std::vector<RewriteRule>& rule_table() {
  static const std::vector<RewriteRule> rules = {
      {"fold-binary", "c1 op c2", "c", "both operands constant", fold_binary},
      {"fold-unary", "op c", "c", "operand constant", fold_unary},
      {"fold-convert", "zext/sext/trunc(c)", "c", "operand constant", fold_convert},
      {"sum-normalize", "x + 0, x - x, (x + c1) + c2, -(-x), x + x",
       "sorted sum of coefficient-weighted terms plus one constant", "add/sub/neg chains of one width",
       normalize_sum},
      {"mul-normalize", "x * 1, x * 0, (x * c1) * c2", "sorted product with one trailing constant", "",
       [](const Expr& e) { return normalize_chain(e, BinaryOp::Mul); }},
      {"and-normalize", "x & x, x & 0, x & ~0, x & ~x", "sorted deduplicated conjunction", "",
       [](const Expr& e) { return normalize_chain(e, BinaryOp::And); }},
      {"or-normalize", "x | x, x | 0, x | ~0, x | ~x", "sorted deduplicated disjunction", "",
       [](const Expr& e) { return normalize_chain(e, BinaryOp::Or); }},
      {"xor-normalize", "x ^ x, x ^ 0, (x ^ y) ^ y", "sorted xor of operands occurring an odd number of times", "",
       [](const Expr& e) { return normalize_chain(e, BinaryOp::Xor); }},
      {"double-not", "~~x", "x", "", double_not},
      {"shift-by-zero", "x << 0, x >> 0, x s>> 0", "x", "", shift_by_zero},
      {"shift-overflow", "x << c, x >> c", "0", "c >= width", shift_overflow},
      {"shl-to-mul", "x << c", "x * 2^c", "0 < c < width", shl_to_mul},
      {"shift-merge", "(x >> a) >> b, (x s>> a) s>> b", "x >> (a + b)", "a, b constant; saturates at width",
       shift_merge},
      {"convert-merge", "zext(zext x), sext(sext x), sext(zext x), trunc(trunc x), trunc(zext/sext x)",
       "single conversion or x", "", convert_merge},
      {"trunc-distribute", "trunc(x op y), trunc(op x)", "trunc(x) op trunc(y)",
       "op in add, sub, mul, and, or, xor, not, neg", trunc_distribute},
  };
  return rules;
}

class Simplifier {
 public:
  Simplifier(std::size_t budget, SimplifyStats* stats) : budget_(budget), stats_(stats) {}

  Expr run(const Expr& e) {
    if (auto it = memo_.find(e.key()); it != memo_.end()) return it->second;
    Expr cur = e;
    if (e.arity() > 0) {
      std::vector<Expr> args;
      bool any = false;
      for (std::size_t i = 0; i < e.arity(); ++i) {
        args.push_back(run(e.arg(i)));
        any = any || !(args.back() == e.arg(i));
      }
      if (any) cur = rebuild(e, std::move(args));
    }
    if (!exhausted()) {
      for (const auto& rule : rule_table()) {
        auto out = rule.apply(cur);
        if (!out) continue;
        if (fired_ >= budget_) {
          if (stats_) stats_->budget_exhausted = true;
          break;
        }
        ++fired_;
        if (stats_) {
          ++stats_->firings;
          ++stats_->per_rule[std::string{rule.name}];
        }
        cur = run(*out);
        break;
      }
    }
    memo_.emplace(e.key(), cur);
    return cur;
  }

 private:
  bool exhausted() const { return stats_ && stats_->budget_exhausted; }

  std::size_t budget_;
  SimplifyStats* stats_;
  std::size_t fired_ = 0;
  std::unordered_map<std::string, Expr> memo_;
};

}  // namespace

std::span<const RewriteRule> rewrite_rules() { return rule_table(); }

const RewriteRule* find_rule(std::string_view name) {
  for (const auto& r : rule_table())
    if (r.name == name) return &r;
  return nullptr;
}

Expr simplify(const Expr& e, SimplifyStats* stats, std::size_t budget) {
  SimplifyStats local;
  Simplifier s(budget, stats ? stats : &local);
  return s.run(e);
}

}  // namespace keysim
