#include "keysim/expr.hpp"

#include <functional>
#include <stdexcept>

#include "keysim/arch.hpp"
#include "keysim/diagnostic.hpp"

namespace keysim {

bool is_commutative(BinaryOp op) {
  return op == BinaryOp::Add || op == BinaryOp::Mul || op == BinaryOp::And || op == BinaryOp::Or ||
         op == BinaryOp::Xor;
}

std::string_view symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::And: return "&";
    case BinaryOp::Or: return "|";
    case BinaryOp::Xor: return "^";
    case BinaryOp::Shl: return "<<";
    case BinaryOp::Shr: return ">>";
    case BinaryOp::Sar: return "s>>";
  }
  return "?";
}

std::string_view symbol(UnaryOp op) { return op == UnaryOp::Not ? "~" : "-"; }

int precedence(BinaryOp op) {
  switch (op) {
    case BinaryOp::Mul: return 5;
    case BinaryOp::Add:
    case BinaryOp::Sub: return 4;
    case BinaryOp::Shl:
    case BinaryOp::Shr:
    case BinaryOp::Sar: return 3;
    case BinaryOp::And: return 2;
    case BinaryOp::Xor: return 1;
    case BinaryOp::Or: return 0;
  }
  return 0;
}

namespace {

std::string wrap_if(bool cond, const std::string& s) { return cond ? "(" + s + ")" : s; }

std::string kind_tag(ExprKind k) {
  switch (k) {
    case ExprKind::Var: return "var";
    case ExprKind::Sym: return "sym";
    case ExprKind::Ret: return "ret";
    case ExprKind::Mem: return "mem";
    case ExprKind::Iter: return "iter";
    case ExprKind::ZExt: return "zext";
    case ExprKind::SExt: return "sext";
    case ExprKind::Trunc: return "trunc";
    case ExprKind::Unary: return "un";
    case ExprKind::Binary: return "bin";
    case ExprKind::Const: return "const";
  }
  return "?";
}

void check_width(unsigned w) {
  if (w != 1 && w != 8 && w != 16 && w != 32 && w != 64)
    throw std::invalid_argument("unsupported expression width " + std::to_string(w));
}

/// True when the rendered text of `e` determines its width: it reaches a
/// leaf or a width-annotated node without passing only through constants.
bool width_evident(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Const: return false;
    case ExprKind::Iter:
    case ExprKind::Unary: return width_evident(e.arg(0));
    case ExprKind::Binary: return width_evident(e.lhs()) || width_evident(e.rhs());
    default: return true;
  }
}

}  // namespace

Expr Expr::finish(Node n) {
  const auto w = std::to_string(n.width);
  switch (n.kind) {
    case ExprKind::Var:
      n.text = "var" + std::to_string(n.value);
      break;
    case ExprKind::Sym:
      n.text = n.name;
      break;
    case ExprKind::Ret:
      n.text = "ret(" + n.name + ", " + hex(n.value) + (n.tag.empty() ? "" : ", " + n.tag) + ")";
      break;
    case ExprKind::Mem:
      n.text = "mem" + w + "(" + n.args[0].text() + ")";
      break;
    case ExprKind::Iter:
      n.text = "iter(" + n.args[0].text() + ")";
      break;
    case ExprKind::ZExt:
    case ExprKind::SExt:
    case ExprKind::Trunc:
      // `zext64.32(...)` when the operand text alone does not fix its width.
      n.text = kind_tag(n.kind) + w + (width_evident(n.args[0]) ? "" : "." + std::to_string(n.args[0].width())) +
               "(" + n.args[0].text() + ")";
      break;
    case ExprKind::Const:
      n.text = hex(n.value);
      break;
    case ExprKind::Unary:
      n.text = std::string{symbol(static_cast<UnaryOp>(n.op))} +
               wrap_if(n.args[0].kind() == ExprKind::Binary, n.args[0].text());
      break;
    case ExprKind::Binary: {
      const auto op = static_cast<BinaryOp>(n.op);
      const int p = precedence(op);
      const Expr& l = n.args[0];
      const Expr& r = n.args[1];
      const bool lp = l.kind() == ExprKind::Binary && precedence(l.binary_op()) < p;
      const bool rp = r.kind() == ExprKind::Binary && precedence(r.binary_op()) <= p;
      n.text = wrap_if(lp, l.text()) + " " + std::string{symbol(op)} + " " + wrap_if(rp, r.text());
      break;
    }
  }

  n.key = "(" + kind_tag(n.kind) + ":" + w;
  if (n.kind == ExprKind::Unary) n.key += std::string{" "} + std::string{symbol(static_cast<UnaryOp>(n.op))};
  if (n.kind == ExprKind::Binary) n.key += " " + std::string{symbol(static_cast<BinaryOp>(n.op))};
  if (n.kind == ExprKind::Var || n.kind == ExprKind::Const || n.kind == ExprKind::Ret)
    n.key += " " + std::to_string(n.value);
  if (!n.name.empty()) n.key += " " + n.name;
  if (!n.tag.empty()) n.key += " %" + n.tag;
  for (const auto& a : n.args) {
    n.key += " " + a.key();
    n.size += a.size();
  }
  n.key += ")";
  n.hash = std::hash<std::string>{}(n.key);
  return Expr(std::make_shared<const Node>(std::move(n)));
}

Expr Expr::var(unsigned index, unsigned width) {
  check_width(width);
  return finish({.kind = ExprKind::Var, .width = width, .value = index});
}

Expr Expr::sym(std::string name, unsigned width) {
  check_width(width);
  if (name.empty()) throw std::invalid_argument("symbol needs a name");
  return finish({.kind = ExprKind::Sym, .width = width, .name = std::move(name)});
}

Expr Expr::ret(std::string callee, std::uint64_t site, std::string tag, unsigned width) {
  check_width(width);
  return finish({.kind = ExprKind::Ret, .width = width, .value = site, .name = std::move(callee), .tag = std::move(tag)});
}

Expr Expr::mem(Expr addr, unsigned width) {
  check_width(width);
  return finish({.kind = ExprKind::Mem, .width = width, .args = {std::move(addr)}});
}

Expr Expr::iter(Expr body) {
  if (body.kind() == ExprKind::Iter) return body;
  const unsigned w = body.width();
  return finish({.kind = ExprKind::Iter, .width = w, .args = {std::move(body)}});
}

Expr Expr::zext(Expr arg, unsigned width) {
  check_width(width);
  if (arg.width() == width) return arg;
  if (arg.width() > width) throw std::invalid_argument("zext must widen");
  return finish({.kind = ExprKind::ZExt, .width = width, .args = {std::move(arg)}});
}

Expr Expr::sext(Expr arg, unsigned width) {
  check_width(width);
  if (arg.width() == width) return arg;
  if (arg.width() > width) throw std::invalid_argument("sext must widen");
  return finish({.kind = ExprKind::SExt, .width = width, .args = {std::move(arg)}});
}

Expr Expr::trunc(Expr arg, unsigned width) {
  check_width(width);
  if (arg.width() == width) return arg;
  if (arg.width() < width) throw std::invalid_argument("trunc must narrow");
  return finish({.kind = ExprKind::Trunc, .width = width, .args = {std::move(arg)}});
}

Expr Expr::resize(Expr arg, unsigned width) {
  if (arg.width() < width) return zext(std::move(arg), width);
  if (arg.width() > width) return trunc(std::move(arg), width);
  return arg;
}

Expr Expr::constant(std::uint64_t value, unsigned width) {
  check_width(width);
  return finish({.kind = ExprKind::Const, .width = width, .value = value & width_mask(width)});
}

Expr Expr::unary(UnaryOp op, Expr arg) {
  const unsigned w = arg.width();
  return finish({.kind = ExprKind::Unary, .width = w, .op = static_cast<int>(op), .args = {std::move(arg)}});
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  if (lhs.width() != rhs.width())
    throw std::invalid_argument("operand widths differ: " + lhs.text() + " / " + rhs.text());
  const unsigned w = lhs.width();
  return finish({.kind = ExprKind::Binary, .width = w, .op = static_cast<int>(op),
                 .args = {std::move(lhs), std::move(rhs)}});
}

bool Expr::contains_iter_of_iter() const {
  if (kind() == ExprKind::Iter && arg(0).kind() == ExprKind::Iter) return true;
  for (const auto& a : node_->args)
    if (a.contains_iter_of_iter()) return true;
  return false;
}

bool canonical_less(const Expr& a, const Expr& b) {
  if (a.kind() != b.kind()) return a.kind() < b.kind();
  if (a.text() != b.text()) return a.text() < b.text();
  return a.key() < b.key();
}

}  // namespace keysim
