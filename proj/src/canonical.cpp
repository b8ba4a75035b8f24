// Token rendering, the canonical-text parser, and concrete evaluation.
#include <cctype>
#include <charconv>
#include <memory>
#include <utility>

#include "keysim/arch.hpp"
#include "keysim/simplify.hpp"

namespace keysim {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$' || c == '@';
}

bool is_hex_literal(std::string_view t) { return t.size() > 2 && t[0] == '0' && t[1] == 'x'; }

/// `zext64` -> ("zext", 64); nullopt when `t` is not prefix+digits.
std::optional<unsigned> width_suffix(std::string_view t, std::string_view prefix) {
  if (!t.starts_with(prefix) || t.size() == prefix.size()) return std::nullopt;
  unsigned w = 0;
  auto digits = t.substr(prefix.size());
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), w);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;
  return w;
}

/// `zext64` -> (64, 0); `zext64.32` -> (64, 32), the second being the
/// operand width when the operand text does not imply it.
std::optional<std::pair<unsigned, unsigned>> conversion_widths(std::string_view t, std::string_view prefix) {
  const auto dot = t.find('.');
  auto w = width_suffix(t.substr(0, dot), prefix);
  if (!w) return std::nullopt;
  if (dot == std::string_view::npos) return std::pair{*w, 0u};
  auto src = width_suffix(t.substr(dot), ".");
  if (!src) return std::nullopt;
  return std::pair{*w, *src};
}

bool is_conversion(std::string_view t) {
  return conversion_widths(t, "zext") || conversion_widths(t, "sext") || conversion_widths(t, "trunc");
}

// Untyped syntax tree; widths are assigned in a second pass.
struct Ast {
  enum class Kind { Var, Sym, Ret, Mem, Iter, ZExt, SExt, Trunc, Const, Unary, Binary } kind;
  unsigned width = 0;  // explicit width for mem/zext/sext/trunc
  unsigned source_width = 0;  // operand width spelled out on a conversion
  std::uint64_t value = 0;
  std::string name, tag;
  UnaryOp uop = UnaryOp::Not;
  BinaryOp bop = BinaryOp::Add;
  std::vector<std::unique_ptr<Ast>> args;
};

class Parser {
 public:
  Parser(TokenString tokens, unsigned word) : toks_(std::move(tokens)), word_(word) {}

  std::unique_ptr<Ast> parse_all() {
    auto e = parse_binary(0);
    if (pos_ != toks_.size()) fail("unexpected token '" + toks_[pos_] + "'");
    return e;
  }

  Expr build(const Ast& a, unsigned expected) {
    unsigned w = infer(a);
    if (w == 0) w = expected;
    switch (a.kind) {
      case Ast::Kind::Var: return Expr::var(static_cast<unsigned>(a.value), word_);
      case Ast::Kind::Sym: return Expr::sym(a.name, word_);
      case Ast::Kind::Ret: return Expr::ret(a.name, a.value, a.tag, word_);
      case Ast::Kind::Const: return Expr::constant(a.value, w);
      case Ast::Kind::Mem: return Expr::mem(build(*a.args[0], word_), a.width);
      case Ast::Kind::Iter: return Expr::iter(build(*a.args[0], w));
      case Ast::Kind::ZExt:
      case Ast::Kind::SExt:
      case Ast::Kind::Trunc: {
        unsigned cw = infer(*a.args[0]);
        if (cw == 0) cw = a.source_width;
        if (cw == 0) fail("cannot infer the operand width of a conversion");
        Expr inner = build(*a.args[0], cw);
        try {
          if (a.kind == Ast::Kind::ZExt) return Expr::zext(inner, a.width);
          if (a.kind == Ast::Kind::SExt) return Expr::sext(inner, a.width);
          return Expr::trunc(inner, a.width);
        } catch (const std::invalid_argument& e) {
          fail(e.what());
        }
      }
      case Ast::Kind::Unary: return Expr::unary(a.uop, build(*a.args[0], w));
      case Ast::Kind::Binary: {
        Expr l = build(*a.args[0], w);
        Expr r = build(*a.args[1], w);
        if (l.width() != r.width()) fail("operand widths differ");
        return Expr::binary(a.bop, l, r);
      }
    }
    fail("bad node");
  }

  unsigned infer(const Ast& a) const {
    switch (a.kind) {
      case Ast::Kind::Var:
      case Ast::Kind::Sym:
      case Ast::Kind::Ret: return word_;
      case Ast::Kind::Mem:
      case Ast::Kind::ZExt:
      case Ast::Kind::SExt:
      case Ast::Kind::Trunc: return a.width;
      case Ast::Kind::Const: return 0;
      case Ast::Kind::Iter:
      case Ast::Kind::Unary: return infer(*a.args[0]);
      case Ast::Kind::Binary: {
        unsigned l = infer(*a.args[0]);
        return l ? l : infer(*a.args[1]);
      }
    }
    return 0;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ExprSyntaxError(msg); }

  const std::string* peek() const { return pos_ < toks_.size() ? &toks_[pos_] : nullptr; }

  std::string take() {
    if (pos_ >= toks_.size()) fail("unexpected end of expression");
    return toks_[pos_++];
  }

  void expect(std::string_view t) {
    std::string got = take();
    if (got != t) fail("expected '" + std::string{t} + "', got '" + got + "'");
  }

  static std::optional<BinaryOp> binary_of(const std::string& t) {
    static constexpr std::pair<std::string_view, BinaryOp> ops[] = {
        {"+", BinaryOp::Add},  {"-", BinaryOp::Sub},  {"*", BinaryOp::Mul},  {"&", BinaryOp::And},
        {"|", BinaryOp::Or},   {"^", BinaryOp::Xor},  {"<<", BinaryOp::Shl}, {">>", BinaryOp::Shr},
        {"s>>", BinaryOp::Sar}};
    for (auto [s, op] : ops)
      if (t == s) return op;
    return std::nullopt;
  }

  std::unique_ptr<Ast> parse_binary(int min_prec) {
    auto lhs = parse_unary();
    while (const std::string* t = peek()) {
      auto op = binary_of(*t);
      if (!op || precedence(*op) < min_prec) break;
      ++pos_;
      auto rhs = parse_binary(precedence(*op) + 1);
      auto node = std::make_unique<Ast>(Ast{Ast::Kind::Binary});
      node->bop = *op;
      node->args.push_back(std::move(lhs));
      node->args.push_back(std::move(rhs));
      lhs = std::move(node);
    }
    return lhs;
  }

  std::unique_ptr<Ast> parse_unary() {
    if (const std::string* t = peek(); t && (*t == "~" || *t == "-")) {
      ++pos_;
      auto node = std::make_unique<Ast>(Ast{Ast::Kind::Unary});
      node->uop = *t == "~" ? UnaryOp::Not : UnaryOp::Neg;
      node->args.push_back(parse_unary());
      return node;
    }
    return parse_primary();
  }

  std::unique_ptr<Ast> call_arg(Ast::Kind kind, unsigned width) {
    expect("(");
    auto node = std::make_unique<Ast>(Ast{kind});
    node->width = width;
    node->args.push_back(parse_binary(0));
    expect(")");
    return node;
  }

  std::unique_ptr<Ast> parse_primary() {
    std::string t = take();
    if (t == "(") {
      auto e = parse_binary(0);
      expect(")");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(t[0]))) {
      auto node = std::make_unique<Ast>(Ast{Ast::Kind::Const});
      const bool hexa = is_hex_literal(t);
      std::string_view digits = hexa ? std::string_view{t}.substr(2) : std::string_view{t};
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), node->value, hexa ? 16 : 10);
      if (ec != std::errc{} || ptr != digits.data() + digits.size()) fail("bad number '" + t + "'");
      return node;
    }
    if (!ident_start(t[0])) fail("unexpected token '" + t + "'");
    if (auto n = width_suffix(t, "var")) {
      auto node = std::make_unique<Ast>(Ast{Ast::Kind::Var});
      node->value = *n;
      return node;
    }
    if (auto w = width_suffix(t, "mem")) return call_arg(Ast::Kind::Mem, *w);
    static constexpr std::pair<std::string_view, Ast::Kind> conversions[] = {
        {"zext", Ast::Kind::ZExt}, {"sext", Ast::Kind::SExt}, {"trunc", Ast::Kind::Trunc}};
    for (auto [prefix, kind] : conversions)
      if (auto w = conversion_widths(t, prefix)) {
        auto node = call_arg(kind, w->first);
        node->source_width = w->second;
        return node;
      }
    if (t == "iter") return call_arg(Ast::Kind::Iter, 0);
    if (t == "ret" && peek() && *peek() == "(") {
      ++pos_;
      auto node = std::make_unique<Ast>(Ast{Ast::Kind::Ret});
      node->name = take();
      expect(",");
      std::string site = take();
      if (!is_hex_literal(site)) fail("call site must be a hex address");
      std::from_chars(site.data() + 2, site.data() + site.size(), node->value, 16);
      if (peek() && *peek() == ",") {
        ++pos_;
        node->tag = take();
      }
      expect(")");
      return node;
    }
    auto node = std::make_unique<Ast>(Ast{Ast::Kind::Sym});
    node->name = t;
    return node;
  }

  TokenString toks_;
  std::size_t pos_ = 0;
  unsigned word_;
};

}  // namespace

TokenString tokenize(std::string_view s) {
  TokenString out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (s.substr(i).starts_with("s>>")) {
      out.emplace_back("s>>");
      i += 3;
    } else if (s.substr(i).starts_with("<<") || s.substr(i).starts_with(">>")) {
      out.emplace_back(s.substr(i, 2));
      i += 2;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i + 1;
      if (c == '0' && j < s.size() && s[j] == 'x') ++j;
      while (j < s.size() && std::isxdigit(static_cast<unsigned char>(s[j]))) ++j;
      out.emplace_back(s.substr(i, j - i));
      i = j;
    } else if (ident_start(c)) {
      std::size_t j = i + 1;
      while (j < s.size() && ident_char(s[j])) ++j;
      out.emplace_back(s.substr(i, j - i));
      i = j;
    } else if (std::string_view{"+-*&|^~(),"}.find(c) != std::string_view::npos) {
      out.emplace_back(1, c);
      ++i;
    } else {
      throw ExprSyntaxError(std::string{"unexpected character '"} + c + "'");
    }
  }
  return out;
}

TokenString similarity_tokens(const Expr& e) {
  const TokenString toks = tokenize(e.text());
  TokenString out;
  std::vector<bool> drop_close;  // one entry per open paren
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::string& t = toks[i];
    if (is_conversion(t) && i + 1 < toks.size() && toks[i + 1] == "(") {
      drop_close.push_back(true);
      ++i;
      continue;
    }
    if (t == "(") {
      drop_close.push_back(false);
      out.push_back(t);
      continue;
    }
    if (t == ")") {
      bool drop = !drop_close.empty() && drop_close.back();
      if (!drop_close.empty()) drop_close.pop_back();
      if (!drop) out.push_back(t);
      continue;
    }
    if (width_suffix(t, "mem")) {
      out.emplace_back("mem");
      continue;
    }
    if (t == "ret" && i + 3 < toks.size() && toks[i + 1] == "(" && toks[i + 3] == "," && i + 4 < toks.size() &&
        is_hex_literal(toks[i + 4])) {
      out.push_back(t);
      out.push_back(toks[i + 1]);
      out.push_back(toks[i + 2]);
      drop_close.push_back(false);
      i += 4;
      continue;
    }
    out.push_back(t);
  }
  return out;
}

Expr parse_expr(std::string_view text, unsigned root_width, unsigned word_width) {
  Parser p(tokenize(text), word_width);
  auto ast = p.parse_all();
  return p.build(*ast, root_width);
}

std::uint64_t eval_concrete(const Expr& e, const LeafResolver& resolve) {
  const unsigned w = e.width();
  switch (e.kind()) {
    case ExprKind::Const: return e.value();
    case ExprKind::Var:
    case ExprKind::Sym:
    case ExprKind::Ret:
    case ExprKind::Mem: {
      auto v = resolve(e);
      if (!v) throw UnboundLeaf(e.kind() == ExprKind::Mem ? e.arg(0).text() : e.text());
      return *v & width_mask(w);
    }
    case ExprKind::Iter: return eval_concrete(e.arg(0), resolve);
    case ExprKind::ZExt: return eval_concrete(e.arg(0), resolve);
    case ExprKind::SExt: return sign_extend(eval_concrete(e.arg(0), resolve), e.arg(0).width(), w);
    case ExprKind::Trunc: return eval_concrete(e.arg(0), resolve) & width_mask(w);
    case ExprKind::Unary: return apply_unary(e.unary_op(), eval_concrete(e.arg(0), resolve), w);
    case ExprKind::Binary:
      return apply_binary(e.binary_op(), eval_concrete(e.lhs(), resolve), eval_concrete(e.rhs(), resolve), w);
  }
  return 0;
}

std::uint64_t eval_concrete(const Expr& e, const Bindings& bindings) {
  return eval_concrete(e, [&](const Expr& leaf) -> std::optional<std::uint64_t> {
    const std::string& k = leaf.kind() == ExprKind::Mem ? leaf.arg(0).text() : leaf.text();
    if (auto it = bindings.find(k); it != bindings.end()) return it->second;
    return std::nullopt;
  });
}

}  // namespace keysim
