#include "soundness.hpp"

#include <functional>
#include <map>
#include <set>
#include <random>
#include <stdexcept>

#include "keysim/simplify.hpp"
#include "keysim/symexec.hpp"
#include "exprgen.hpp"
#include "oracles.hpp"
#include "reference.hpp"

namespace reftest {

using keysim::Expr;
using keysim::ExprKind;

namespace {

std::uint64_t return_site(const keysim::Function& f) {
  keysim::BlockId at = f.entry;
  while (!f.block(at).successors.empty()) at = f.block(at).successors.front().target;
  return f.block(at).instructions.back().address;
}

}  // namespace

SoundnessResult check_return_soundness(const keysim::Function& f, std::size_t vectors, std::uint64_t seed) {
  SoundnessResult out;
  const auto lf = keysim::lift_function(f);
  const auto vs = keysim::execute(lf, keysim::ExecConfig{1, seed, keysim::kDefaultStepBudget});
  const auto site = vs.values.find(return_site(f));
  if (site == vs.values.end() || site->second.size() != 1) {
    out.notes.push_back("return site has no single observation");
    out.mismatches = vectors;
    return out;
  }
  const Expr* ret = keysim::find_slot(*site->second.begin(), "ret");
  if (!ret) throw std::runtime_error("return observation lacks a ret slot");
  out.return_text = ret->text();

  const unsigned word = keysim::word_width(f.arch);
  const auto args = keysim::argument_registers(f.convention);
  std::mt19937_64 rng(seed);
  for (std::size_t n = 0; n < vectors; ++n) {
    ++out.vectors;
    const std::uint64_t mem_seed = rng();
    Machine m(f.arch);
    m.initial_byte = [mem_seed](std::uint64_t a) { return memory_byte(mem_seed, a); };
    std::map<std::string, std::uint64_t, std::less<>> initial;
    for (auto name : keysim::register_file(f.arch)) {
      const std::uint64_t v = rng() & keysim::width_mask(word);
      m.regs[std::string{name}] = v;
      initial[std::string{name}] = v;
    }

    keysim::LeafResolver resolve = [&](const Expr& e) -> std::optional<std::uint64_t> {
      switch (e.kind()) {
        case ExprKind::Var:
          if (e.index() >= args.size()) return std::nullopt;
          return initial.at(std::string{args[e.index()]});
        case ExprKind::Sym: {
          const std::string name = e.name() == "sp" ? std::string{keysim::stack_pointer(f.arch)} : e.name();
          auto it = initial.find(name);
          if (it == initial.end()) return std::nullopt;
          return it->second;
        }
        case ExprKind::Mem: {
          const std::uint64_t addr = keysim::eval_concrete(e.arg(0), resolve);
          std::uint64_t v = 0;
          for (unsigned i = 0; i < e.width() / 8; ++i)
            v |= static_cast<std::uint64_t>(memory_byte(mem_seed, addr + i)) << (8 * i);
          return v;
        }
        default: return std::nullopt;
      }
    };

    run_function(m, f);
    const std::uint64_t want = m.regs.at(std::string{keysim::return_register(f.arch)}) & keysim::width_mask(ret->width());
    const std::uint64_t got = keysim::eval_concrete(*ret, resolve);
    if (got != want) {
      ++out.mismatches;
      if (out.notes.size() < 4)
        out.notes.push_back(f.name + ": " + ret->text() + " gave " + keysim::hex(got) + ", reference " +
                            keysim::hex(want));
    }
  }
  return out;
}

namespace {

void subterms(const Expr& e, const std::function<void(const Expr&)>& f) {
  f(e);
  for (std::size_t i = 0; i < e.arity(); ++i) subterms(e.arg(i), f);
}

void note(RewriteCheck& r, std::string text) {
  if (r.notes.size() < 4) r.notes.push_back(std::move(text));
}

}  // namespace

RewriteCheck check_rule(const keysim::RewriteRule& rule, unsigned width, std::size_t valuations,
                        std::size_t max_firings) {
  RewriteCheck r;
  ExprGen gen(std::hash<std::string_view>{}(rule.name) ^ width);
  std::set<std::string> seen;
  std::vector<std::pair<Expr, Expr>> firings;
  for (int attempt = 0; attempt < 4000 && firings.size() < max_firings; ++attempt) {
    Expr e = gen.make(width, 3);
    for (const Expr& root : {e, keysim::simplify(e)})
      subterms(root, [&](const Expr& node) {
        if (firings.size() >= max_firings) return;
        auto out = rule.apply(node);
        if (out && seen.insert(node.key()).second) firings.emplace_back(node, *out);
      });
  }
  r.samples = firings.size();
  if (firings.empty()) return r;
  for (std::size_t i = 0; r.valuations < valuations; ++i, ++r.valuations) {
    const auto& [lhs, rhs] = firings[i % firings.size()];
    Valuation val(gen.rng());
    auto res = val.resolver();
    if (keysim::eval_concrete(lhs, res) != keysim::eval_concrete(rhs, res)) {
      ++r.mismatches;
      note(r, std::string{rule.name} + ": " + lhs.text() + " -> " + rhs.text());
    }
  }
  return r;
}

RewriteCheck check_simplify(unsigned width, unsigned depth, std::size_t count, std::size_t valuations_each,
                            std::uint64_t seed) {
  RewriteCheck r;
  ExprGen gen(seed);
  for (; r.samples < count; ++r.samples) {
    const Expr e = gen.make(width, depth);
    keysim::SimplifyStats stats;
    const Expr s = keysim::simplify(e, &stats);
    if (stats.budget_exhausted) ++r.budget_exhausted;
    for (std::size_t k = 0; k < valuations_each; ++k, ++r.valuations) {
      Valuation val(gen.rng());
      auto res = val.resolver();
      if (keysim::eval_concrete(e, res) != keysim::eval_concrete(s, res)) {
        ++r.mismatches;
        note(r, e.text() + "  =>  " + s.text());
        break;
      }
    }
    if (keysim::simplify(s) != s) {
      ++r.not_fixpoint;
      note(r, "not a fixpoint: " + s.text());
    }
    try {
      if (keysim::parse_expr(s.text(), width, 64) != s) {
        ++r.round_trip_failures;
        note(r, "round trip: " + s.text());
      }
    } catch (const keysim::ExprSyntaxError& err) {
      ++r.round_trip_failures;
      note(r, s.text() + ": " + err.what());
    }
  }
  return r;
}

}  // namespace reftest
