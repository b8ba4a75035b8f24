// Rule-based canonicalisation of symbolic expressions, their token rendering,
// and a concrete evaluator used as a test oracle throughout the project.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "keysim/diagnostic.hpp"
#include "keysim/expr.hpp"

namespace keysim {

/// A rewrite rule. `apply` is handed a node whose operands are already
/// simplified and returns the replacement when the rule fires.
struct RewriteRule {
  std::string_view name;
  std::string_view pattern;
  std::string_view replacement;
  std::string_view side_condition;
  std::function<std::optional<Expr>(const Expr&)> apply;
};

std::span<const RewriteRule> rewrite_rules();
const RewriteRule* find_rule(std::string_view name);

inline constexpr std::size_t kDefaultRewriteBudget = 10'000;

struct SimplifyStats {
  std::size_t firings = 0;
  bool budget_exhausted = false;
  std::map<std::string, std::size_t, std::less<>> per_rule;
};

/// Innermost rewriting to a fixpoint. When the budget runs out the best
/// expression so far is returned and `stats->budget_exhausted` is set.
Expr simplify(const Expr& e, SimplifyStats* stats = nullptr, std::size_t budget = kDefaultRewriteBudget);

using TokenString = std::vector<std::string>;

inline const std::string& canonical_text(const Expr& e) { return e.text(); }

/// Splits canonical text into tokens: identifiers, hex literals, operators,
/// parentheses and commas.
TokenString tokenize(std::string_view text);

/// Tokens used for textual similarity. Width annotations are erased
/// (`zext64(x)` becomes `x`, `mem32` becomes `mem`) and call-site addresses
/// inside `ret(...)` are dropped, since neither is comparable across binaries.
TokenString similarity_tokens(const Expr& e);

class ExprSyntaxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses canonical text back to an expression. Width-free leaves (`var0`,
/// symbols, `ret(...)`) take `word_width`; the root has `root_width`, and
/// constants take the width of their context.
Expr parse_expr(std::string_view text, unsigned root_width = 64, unsigned word_width = 64);

class UnboundLeaf : public std::runtime_error {
 public:
  explicit UnboundLeaf(const std::string& leaf) : std::runtime_error("unbound leaf: " + leaf), leaf_(leaf) {}
  const std::string& leaf() const { return leaf_; }

 private:
  std::string leaf_;
};

/// Leaf bindings: `var0`, symbol names and `ret(...)` texts map to their value;
/// MEM leaves are bound by the canonical text of their address.
using Bindings = std::map<std::string, std::uint64_t, std::less<>>;

/// Resolver form: returns the value of a leaf node (VAR, SYM, RET or MEM) or
/// nullopt when unbound.
using LeafResolver = std::function<std::optional<std::uint64_t>(const Expr&)>;

std::uint64_t eval_concrete(const Expr& e, const Bindings& bindings);
std::uint64_t eval_concrete(const Expr& e, const LeafResolver& resolve);

/// Concrete semantics of one operator at `width`; shared by the evaluator and
/// the constant folder. Shift amounts at or beyond the width give 0 (or the
/// sign fill for arithmetic shifts).
std::uint64_t apply_binary(BinaryOp op, std::uint64_t a, std::uint64_t b, unsigned width);
std::uint64_t apply_unary(UnaryOp op, std::uint64_t a, unsigned width);
std::uint64_t sign_extend(std::uint64_t v, unsigned from_width, unsigned to_width);

}  // namespace keysim
