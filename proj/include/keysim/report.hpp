// JSON documents written by the command-line tool. Every document carries
// `schema_version` and `kind`.
#pragma once

#include <string>

#include <json.hpp>

#include "keysim/compare.hpp"
#include "keysim/pipeline.hpp"

namespace keysim {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::ordered_json;

Json diagnostics_json(const std::vector<Diagnostic>& diags);
Json lift_json(const LiftedFunction& lf);
Json values_json(const Function& f, const ValueSets& vs, const ExecConfig& config);
Json graph_json(const Function& f, const KeyGraph& g);
Json params_json(const CompareParams& p);

struct Side {
  std::string bundle;
  std::string function;
};
Json match_json(const Side& a, const Side& b, const MatchReport& r, const ExecConfig& config);
Json bench_json(const BenchResult& r, const ExecConfig& config, const CompareParams& params);

}  // namespace keysim
