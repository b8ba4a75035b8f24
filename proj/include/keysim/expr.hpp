// Immutable symbolic bitvector expressions.
//
// Every node carries its width and two precomputed strings: `text()`, the
// canonical rendering used for memory keys, deduplication and similarity, and
// `key()`, a width-annotated prefix form used for structural equality.
#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace keysim {

// Declaration order is the rank used when ordering commutative operands.
enum class ExprKind { Var, Sym, Ret, Mem, Iter, ZExt, SExt, Trunc, Unary, Binary, Const };

enum class UnaryOp { Not, Neg };
enum class BinaryOp { Add, Sub, Mul, And, Or, Xor, Shl, Shr, Sar };

bool is_commutative(BinaryOp op);
std::string_view symbol(BinaryOp op);
std::string_view symbol(UnaryOp op);
/// Binding strength used by the renderer and parser (higher binds tighter).
int precedence(BinaryOp op);

class Expr {
 public:
  /// VAR n: the n-th parameter register at function entry.
  static Expr var(unsigned index, unsigned width);
  /// A named free symbol: an uninitialised register seed (`sp`, `rbx`) or a
  /// havoc value left by an unsupported instruction.
  static Expr sym(std::string name, unsigned width);
  /// Value produced by a call. `tag` is empty for the return register and
  /// names the clobbered register otherwise.
  static Expr ret(std::string callee, std::uint64_t site, std::string tag, unsigned width);
  static Expr mem(Expr addr, unsigned width);
  /// ITER(ITER(x)) collapses to ITER(x).
  static Expr iter(Expr body);
  static Expr zext(Expr arg, unsigned width);
  static Expr sext(Expr arg, unsigned width);
  static Expr trunc(Expr arg, unsigned width);
  /// Resizes to `width`: zero-extends, truncates, or returns `arg` unchanged.
  static Expr resize(Expr arg, unsigned width);
  static Expr constant(std::uint64_t value, unsigned width);
  static Expr unary(UnaryOp op, Expr arg);
  /// Both operands must have the same width; throws std::invalid_argument.
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

  ExprKind kind() const { return node_->kind; }
  unsigned width() const { return node_->width; }
  std::uint64_t value() const { return node_->value; }
  unsigned index() const { return static_cast<unsigned>(node_->value); }
  std::uint64_t site() const { return node_->value; }
  const std::string& name() const { return node_->name; }
  const std::string& tag() const { return node_->tag; }
  UnaryOp unary_op() const { return static_cast<UnaryOp>(node_->op); }
  BinaryOp binary_op() const { return static_cast<BinaryOp>(node_->op); }

  std::size_t arity() const { return node_->args.size(); }
  const Expr& arg(std::size_t i) const { return node_->args.at(i); }
  const Expr& lhs() const { return arg(0); }
  const Expr& rhs() const { return arg(1); }

  const std::string& text() const { return node_->text; }
  const std::string& key() const { return node_->key; }
  std::size_t hash() const { return node_->hash; }
  std::size_t size() const { return node_->size; }

  bool is_const() const { return kind() == ExprKind::Const; }
  bool is_const(std::uint64_t v) const { return is_const() && value() == v; }
  bool contains_iter_of_iter() const;

  friend bool operator==(const Expr& a, const Expr& b) {
    return a.node_ == b.node_ || (a.hash() == b.hash() && a.key() == b.key());
  }
  friend std::strong_ordering operator<=>(const Expr& a, const Expr& b) { return a.key() <=> b.key(); }

 private:
  struct Node {
    ExprKind kind;
    unsigned width;
    int op = 0;
    std::uint64_t value = 0;
    std::string name;
    std::string tag;
    std::vector<Expr> args;
    std::string text;
    std::string key;
    std::size_t hash = 0;
    std::size_t size = 1;
  };

  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  static Expr finish(Node node);

  std::shared_ptr<const Node> node_;
};

/// Order used for commutative operands: node-kind rank, then canonical text.
bool canonical_less(const Expr& a, const Expr& b);

struct ExprHash {
  std::size_t operator()(const Expr& e) const { return e.hash(); }
};

}  // namespace keysim
