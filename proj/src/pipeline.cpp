#include "keysim/pipeline.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace keysim {

Analysis analyze(const Function& f, const ExecConfig& config) {
  auto cfg = validate_cfg(f);
  if (has_errors(cfg)) {
    std::string msg = "function '" + f.name + "' has an invalid CFG";
    for (const auto& d : cfg)
      if (d.severity == Severity::Error) msg += "\n  " + to_string(d);
    throw InputError(msg);
  }
  Analysis a{lift_function(f), {}, {}, cfg};
  a.diagnostics.insert(a.diagnostics.end(), a.lifted.diagnostics.begin(), a.lifted.diagnostics.end());
  a.values = execute(a.lifted, config);
  a.diagnostics.insert(a.diagnostics.end(), a.values.diagnostics.begin(), a.values.diagnostics.end());
  a.graph = build_key_graph(a.lifted, a.values);
  a.diagnostics.insert(a.diagnostics.end(), a.graph.diagnostics.begin(), a.graph.diagnostics.end());
  return a;
}

const Function& require_function(const Program& program, std::string_view name) {
  if (const Function* f = program.find(name)) return *f;
  throw InputError("no function '" + std::string{name} + "' in " + program.source_name);
}

std::vector<BenchPair> load_pairs(const std::filesystem::path& tsv) {
  std::ifstream in(tsv);
  if (!in) throw InputError("cannot read " + tsv.string());
  const auto base = tsv.parent_path();
  std::vector<BenchPair> out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string c; fields >> c;) cols.push_back(c);
    if (cols.empty()) continue;
    if (cols.size() != 5 || (cols[4] != "0" && cols[4] != "1"))
      throw InputError(tsv.string() + ":" + std::to_string(lineno) +
                       ": expected `bundleA functionA bundleB functionB label(1|0)`");
    out.push_back({base / cols[0], cols[1], base / cols[2], cols[3], cols[4] == "1"});
  }
  return out;
}

double BenchResult::accuracy() const {
  if (rows.empty()) return 0.0;
  return static_cast<double>(true_positive + true_negative) / static_cast<double>(rows.size());
}

BenchResult run_bench(const std::vector<BenchPair>& pairs, const ExecConfig& exec, const CompareParams& params) {
  std::map<std::filesystem::path, Program> programs;
  std::map<std::pair<std::filesystem::path, std::string>, KeyGraph> graphs;
  auto graph_of = [&](const std::filesystem::path& bundle, const std::string& fn) -> const KeyGraph& {
    auto key = std::make_pair(bundle, fn);
    if (auto it = graphs.find(key); it != graphs.end()) return it->second;
    auto pit = programs.find(bundle);
    if (pit == programs.end()) pit = programs.emplace(bundle, load_bundle(bundle)).first;
    return graphs.emplace(key, analyze(require_function(pit->second, fn), exec).graph).first->second;
  };

  BenchResult r;
  for (const auto& p : pairs) {
    const KeyGraph& ga = graph_of(p.bundle_a, p.function_a);
    const KeyGraph& gb = graph_of(p.bundle_b, p.function_b);
    MatchReport m = match_graphs(ga, gb, params);
    r.rows.push_back({p, m.aggregate, m.similar});
    if (p.label && m.similar) ++r.true_positive;
    else if (!p.label && !m.similar) ++r.true_negative;
    else if (!p.label) ++r.false_positive;
    else ++r.false_negative;
  }
  return r;
}

}  // namespace keysim
