#include "keysim/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "keysim/pipeline.hpp"
#include "keysim/report.hpp"
#include "keysim/simplify.hpp"

namespace keysim {

namespace {

constexpr int kUsage = 1;
constexpr int kInput = 2;

struct Failure {
  int code;
  std::string message;
};

void report(std::ostream& err, const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags)
    err << "keysim: " << (d.severity == Severity::Error ? "error: " : "warning: ") << to_string(d) << "\n";
}

Program read_bundle(const std::string& path) {
  try {
    return load_bundle(path);
  } catch (const ParseError& e) {
    throw Failure{kInput, path + ":" + e.what()};
  } catch (const std::exception& e) {
    throw Failure{kInput, e.what()};
  }
}

/// Writes `doc` to `path`, or to `out` when no path was given.
void emit(const Json& doc, const std::string& path, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw Failure{kInput, "cannot write " + path};
}

std::pair<std::string, std::string> split_target(const std::string& spec) {
  auto colon = spec.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size())
    throw Failure{kUsage, "expected <bundle>:<function>, got '" + spec + "'"};
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

void add_exec_options(CLI::App* cmd, ExecConfig& cfg) {
  cmd->add_option("--runs", cfg.runs, "Randomized runs per function")->check(CLI::Range(1u, 1u << 20));
  cmd->add_option("--seed", cfg.seed, "Base seed");
  cmd->add_option("--step-budget", cfg.step_budget, "Micro-op budget per run")->check(CLI::PositiveNumber);
}

void add_compare_options(CLI::App* cmd, CompareParams& p) {
  cmd->add_option("--boundary", p.context_boundary, "Context hop radius");
  cmd->add_option("--node-threshold", p.node_threshold, "Minimum node score for a pairing")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--pair-threshold", p.pair_threshold, "Aggregate score for a similar verdict")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--context-weight", p.context_weight, "Weight of the context score")->check(CLI::Range(0.0, 1.0));
}

int finish(const std::vector<Diagnostic>& diags, std::ostream& err) {
  report(err, diags);
  return has_errors(diags) ? kInput : 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Binary function similarity by key-instruction graphs", "keysim"};
  app.require_subcommand(1);

  std::string bundle, function, output, expr_text;
  std::string target_a, target_b, pairs_path;
  ExecConfig exec;
  CompareParams params;
  unsigned expr_width = 64, expr_word = 64;

  auto* lift = app.add_subcommand("lift", "Print the micro-IR of a function");
  lift->add_option("bundle", bundle, "Bundle file")->required();
  lift->add_option("--func", function, "Function name")->required();
  lift->add_option("--out", output, "Output file (default: stdout)");

  auto* exec_cmd = app.add_subcommand("exec", "Symbolically execute a function and dump its value sets");
  exec_cmd->add_option("bundle", bundle, "Bundle file")->required();
  exec_cmd->add_option("--func", function, "Function name")->required();
  exec_cmd->add_option("--dump", output, "Output file (default: stdout)");
  add_exec_options(exec_cmd, exec);

  auto* keyir = app.add_subcommand("keyir", "Build the key-instruction graph of a function");
  keyir->add_option("bundle", bundle, "Bundle file")->required();
  keyir->add_option("--func", function, "Function name")->required();
  keyir->add_option("--dump", output, "Output file (default: stdout)");
  add_exec_options(keyir, exec);

  auto* simp = app.add_subcommand("simplify", "Simplify an expression and print its canonical text");
  simp->add_option("expr", expr_text, "Expression text")->required();
  simp->add_option("--width", expr_width, "Width of the expression")->check(CLI::IsMember({1u, 8u, 16u, 32u, 64u}));
  simp->add_option("--word-width", expr_word, "Width of variables and symbols")->check(CLI::IsMember({8u, 16u, 32u, 64u}));

  auto* cmp = app.add_subcommand("compare", "Compare two functions");
  cmp->add_option("a", target_a, "First function as <bundle>:<function>")->required();
  cmp->add_option("b", target_b, "Second function as <bundle>:<function>")->required();
  cmp->add_option("--report", output, "Output file (default: stdout)");
  add_exec_options(cmp, exec);
  add_compare_options(cmp, params);

  auto* bench = app.add_subcommand("bench", "Classify labelled function pairs and report accuracy");
  bench->add_option("pairs", pairs_path, "Pairs file: bundleA functionA bundleB functionB label")->required();
  bench->add_option("--report", output, "Output file (default: stdout)");
  add_exec_options(bench, exec);
  add_compare_options(bench, params);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*lift) {
      Program p = read_bundle(bundle);
      const Function& f = require_function(p, function);
      auto cfg = validate_cfg(f);
      if (has_errors(cfg)) return finish(cfg, err);
      LiftedFunction lf = lift_function(f);
      emit(lift_json(lf), output, out);
      cfg.insert(cfg.end(), lf.diagnostics.begin(), lf.diagnostics.end());
      return finish(cfg, err);
    }
    if (*exec_cmd || *keyir) {
      Program p = read_bundle(bundle);
      const Function& f = require_function(p, function);
      Analysis a = analyze(f, exec);
      emit(*exec_cmd ? values_json(f, a.values, exec) : graph_json(f, a.graph), output, out);
      return finish(a.diagnostics, err);
    }
    if (*simp) {
      Expr e = parse_expr(expr_text, expr_width, expr_word);
      SimplifyStats stats;
      Expr s = simplify(e, &stats);
      out << s.text() << "\n";
      if (stats.budget_exhausted) {
        err << "keysim: warning: rewrite budget exhausted after " << stats.firings << " rule firings\n";
      }
      return 0;
    }
    if (*cmp) {
      auto [path_a, fn_a] = split_target(target_a);
      auto [path_b, fn_b] = split_target(target_b);
      Program pa = read_bundle(path_a);
      Program pb = path_b == path_a ? pa : read_bundle(path_b);
      Analysis aa = analyze(require_function(pa, fn_a), exec);
      Analysis ab = analyze(require_function(pb, fn_b), exec);
      MatchReport r = match_graphs(aa.graph, ab.graph, params);
      emit(match_json({path_a, fn_a}, {path_b, fn_b}, r, exec), output, out);
      if (!output.empty())
        out << "aggregate " << r.aggregate << " " << (r.similar ? "similar" : "dissimilar") << "\n";
      std::vector<Diagnostic> diags = aa.diagnostics;
      diags.insert(diags.end(), ab.diagnostics.begin(), ab.diagnostics.end());
      diags.insert(diags.end(), r.diagnostics.begin(), r.diagnostics.end());
      return finish(diags, err);
    }
    if (*bench) {
      auto pairs = load_pairs(pairs_path);
      BenchResult r = run_bench(pairs, exec, params);
      emit(bench_json(r, exec, params), output, out);
      if (!output.empty())
        out << "accuracy " << r.accuracy() << " (" << (r.true_positive + r.true_negative) << "/" << r.total()
            << ")\n";
      return 0;
    }
  } catch (const Failure& f) {
    err << "keysim: " << (f.code == kUsage ? "usage: " : "error: ") << f.message << "\n";
    return f.code;
  } catch (const ExprSyntaxError& e) {
    err << "keysim: error: " << e.what() << "\n";
    return kInput;
  } catch (const ParseError& e) {
    err << "keysim: error: " << e.what() << "\n";
    return kInput;
  } catch (const InputError& e) {
    err << "keysim: error: " << e.what() << "\n";
    return kInput;
  } catch (const std::invalid_argument& e) {
    err << "keysim: error: " << e.what() << "\n";
    return kInput;
  }
  return kUsage;
}

}  // namespace keysim
