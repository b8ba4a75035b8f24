#include "keysim/report.hpp"

#include <set>

namespace keysim {

Json diagnostics_json(const std::vector<Diagnostic>& diags) {
  Json out = Json::array();
  for (const auto& d : diags) {
    Json j;
    j["severity"] = d.severity == Severity::Error ? "error" : "warning";
    if (d.address) j["address"] = hex(*d.address);
    j["message"] = d.message;
    out.push_back(std::move(j));
  }
  return out;
}

Json lift_json(const LiftedFunction& lf) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "lift";
  doc["function"] = lf.function.name;
  doc["arch"] = std::string{to_string(lf.arch())};
  doc["convention"] = std::string{to_string(lf.convention())};
  Json blocks = Json::array();
  for (const auto& b : lf.function.blocks) {
    Json jb;
    jb["id"] = b.id;
    jb["address"] = hex(b.address);
    Json ins = Json::array();
    for (const auto& i : b.instructions) {
      Json ji;
      ji["address"] = hex(i.address);
      ji["mnemonic"] = i.mnemonic;
      Json ops = Json::array();
      for (const auto& o : i.operands) ops.push_back(o.text);
      ji["operands"] = std::move(ops);
      Json micro = Json::array();
      for (const auto& op : lf.ops_at(i.address)) micro.push_back(to_string(op));
      ji["micro"] = std::move(micro);
      ins.push_back(std::move(ji));
    }
    jb["instructions"] = std::move(ins);
    blocks.push_back(std::move(jb));
  }
  doc["blocks"] = std::move(blocks);
  doc["diagnostics"] = diagnostics_json(lf.diagnostics);
  return doc;
}

Json values_json(const Function& f, const ValueSets& vs, const ExecConfig& config) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "values";
  doc["function"] = f.name;
  doc["runs"] = vs.run_count;
  doc["seed"] = config.seed;
  Json values = Json::object();
  Json observations = Json::object();
  for (const auto& [address, set] : vs.values) {
    std::set<std::string> texts;
    Json obs = Json::array();
    for (const auto& o : set) {
      Json jo = Json::object();
      for (const auto& [slot, e] : o) {
        texts.insert(e.text());
        jo[slot] = e.text();
      }
      obs.push_back(std::move(jo));
    }
    values[hex(address)] = Json(texts);
    observations[hex(address)] = std::move(obs);
  }
  doc["values"] = std::move(values);
  doc["observations"] = std::move(observations);
  doc["diagnostics"] = diagnostics_json(vs.diagnostics);
  return doc;
}

Json graph_json(const Function& f, const KeyGraph& g) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "keyir";
  doc["function"] = f.name;
  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    Json jn;
    jn["id"] = n.id;
    jn["address"] = hex(n.address);
    jn["kind"] = std::string{to_string(n.kind)};
    jn["mnemonic"] = n.mnemonic;
    jn["control_flow"] = affects_control_flow(n.kind);
    Json payloads = Json::array();
    for (const auto& p : n.payloads) payloads.push_back(to_string(p));
    jn["payloads"] = std::move(payloads);
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  Json edges = Json::array();
  for (auto [a, b] : g.edges) edges.push_back(Json::array({a, b}));
  doc["edges"] = std::move(edges);
  doc["diagnostics"] = diagnostics_json(g.diagnostics);
  return doc;
}

Json params_json(const CompareParams& p) {
  Json j;
  j["node_threshold"] = p.node_threshold;
  j["context_boundary"] = p.context_boundary;
  j["pair_threshold"] = p.pair_threshold;
  j["context_weight"] = p.context_weight;
  return j;
}

Json match_json(const Side& a, const Side& b, const MatchReport& r, const ExecConfig& config) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "match_report";
  doc["a"] = {{"bundle", a.bundle}, {"function", a.function}, {"nodes", r.nodes_a}};
  doc["b"] = {{"bundle", b.bundle}, {"function", b.function}, {"nodes", r.nodes_b}};
  doc["runs"] = config.runs;
  doc["seed"] = config.seed;
  doc["params"] = params_json(r.params);
  Json anchors = Json::array();
  for (const auto& p : r.anchors) {
    Json jp;
    jp["node_a"] = p.node_a;
    jp["address_a"] = hex(p.address_a);
    jp["node_b"] = p.node_b;
    jp["address_b"] = hex(p.address_b);
    jp["node_score"] = p.node_score;
    jp["context_score"] = p.context_score;
    jp["combined"] = p.combined;
    anchors.push_back(std::move(jp));
  }
  doc["anchors"] = std::move(anchors);
  doc["aggregate"] = r.aggregate;
  doc["verdict"] = r.similar ? "similar" : "dissimilar";
  doc["diagnostics"] = diagnostics_json(r.diagnostics);
  return doc;
}

Json bench_json(const BenchResult& r, const ExecConfig& config, const CompareParams& params) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "bench";
  doc["runs"] = config.runs;
  doc["seed"] = config.seed;
  doc["params"] = params_json(params);
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json j;
    j["bundle_a"] = row.pair.bundle_a.generic_string();
    j["function_a"] = row.pair.function_a;
    j["bundle_b"] = row.pair.bundle_b.generic_string();
    j["function_b"] = row.pair.function_b;
    j["label"] = row.pair.label ? 1 : 0;
    j["aggregate"] = row.aggregate;
    j["verdict"] = row.verdict ? 1 : 0;
    j["correct"] = row.verdict == row.pair.label;
    rows.push_back(std::move(j));
  }
  doc["pairs"] = std::move(rows);
  doc["total"] = r.total();
  doc["accuracy"] = r.accuracy();
  doc["confusion"] = {{"true_positive", r.true_positive},
                      {"true_negative", r.true_negative},
                      {"false_positive", r.false_positive},
                      {"false_negative", r.false_negative}};
  return doc;
}

}  // namespace keysim
