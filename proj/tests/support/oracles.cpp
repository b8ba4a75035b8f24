#include "oracles.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace reftest {

using keysim::Function;
using keysim::KeyGraph;

std::set<BlockId> reachable(const Function& f, std::optional<BlockId> removed) {
  std::set<BlockId> seen;
  if (removed == f.entry) return seen;
  std::vector<BlockId> todo{f.entry};
  seen.insert(f.entry);
  while (!todo.empty()) {
    BlockId b = todo.back();
    todo.pop_back();
    for (const auto& e : f.block(b).successors)
      if (e.target != removed && seen.insert(e.target).second) todo.push_back(e.target);
  }
  return seen;
}

bool dominates(const Function& f, BlockId d, BlockId n) {
  return d == n || !reachable(f, d).contains(n);
}

std::set<std::pair<BlockId, BlockId>> dominance_back_edges(const Function& f) {
  std::set<std::pair<BlockId, BlockId>> out;
  for (BlockId u : reachable(f))
    for (const auto& e : f.block(u).successors)
      if (dominates(f, e.target, u)) out.insert({u, e.target});
  return out;
}

std::set<BlockId> natural_body(const Function& f, BlockId tail, BlockId header) {
  // Blocks from which `tail` is reachable while avoiding the header.
  std::set<BlockId> body{header};
  for (BlockId start : reachable(f)) {
    if (start == header) continue;
    std::set<BlockId> seen{start};
    std::vector<BlockId> todo{start};
    bool hit = false;
    while (!todo.empty() && !hit) {
      BlockId b = todo.back();
      todo.pop_back();
      if (b == tail) hit = true;
      for (const auto& e : f.block(b).successors)
        if (e.target != header && seen.insert(e.target).second) todo.push_back(e.target);
    }
    if (hit) body.insert(start);
  }
  return body;
}

bool has_irreducible_cycle(const Function& f) {
  const auto back = dominance_back_edges(f);
  const auto live = reachable(f);
  // Kahn's algorithm on the forward graph.
  std::map<BlockId, int> indeg;
  for (BlockId b : live) indeg[b];
  for (BlockId u : live)
    for (const auto& e : f.block(u).successors)
      if (!back.contains({u, e.target})) ++indeg[e.target];
  std::vector<BlockId> ready;
  for (auto [b, d] : indeg)
    if (d == 0) ready.push_back(b);
  std::size_t removed = 0;
  while (!ready.empty()) {
    BlockId u = ready.back();
    ready.pop_back();
    ++removed;
    for (const auto& e : f.block(u).successors)
      if (!back.contains({u, e.target}) && --indeg[e.target] == 0) ready.push_back(e.target);
  }
  return removed != live.size();
}

std::set<std::pair<std::uint64_t, std::uint64_t>> key_edges_by_enumeration(const Function& f,
                                                                            const std::set<std::uint64_t>& keys) {
  std::set<std::pair<std::uint64_t, std::uint64_t>> out;
  std::set<BlockId> on_path;
  std::function<void(std::uint64_t, BlockId, std::size_t)> walk = [&](std::uint64_t from, BlockId b,
                                                                      std::size_t idx) {
    const auto& block = f.block(b);
    for (std::size_t i = idx; i < block.instructions.size(); ++i) {
      if (keys.contains(block.instructions[i].address)) {
        out.insert({from, block.instructions[i].address});
        return;
      }
    }
    for (const auto& e : block.successors) {
      if (on_path.contains(e.target)) continue;
      on_path.insert(e.target);
      walk(from, e.target, 0);
      on_path.erase(e.target);
    }
  };
  for (const auto& block : f.blocks)
    for (std::size_t i = 0; i < block.instructions.size(); ++i)
      if (keys.contains(block.instructions[i].address)) walk(block.instructions[i].address, block.id, i + 1);
  return out;
}

std::size_t max_pairing(const KeyGraph& ga, const std::vector<unsigned>& a, const KeyGraph& gb,
                        const std::vector<unsigned>& b, double threshold) {
  std::vector<bool> used(b.size(), false);
  std::function<std::size_t(std::size_t)> best = [&](std::size_t i) -> std::size_t {
    if (i == a.size()) return 0;
    std::size_t top = best(i + 1);
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (used[j] || keysim::node_similarity(ga.nodes[a[i]], gb.nodes[b[j]]) < threshold) continue;
      used[j] = true;
      top = std::max(top, 1 + best(i + 1));
      used[j] = false;
    }
    return top;
  };
  return best(0);
}

double context_by_exhaustion(const KeyGraph& ga, unsigned a, const KeyGraph& gb, unsigned b,
                             const keysim::CompareParams& params) {
  auto na = ga.neighborhood(a, params.context_boundary);
  auto nb = gb.neighborhood(b, params.context_boundary);
  if (na.empty() && nb.empty()) return 1.0;
  if (na.empty() || nb.empty()) return 0.0;
  return static_cast<double>(max_pairing(ga, na, gb, nb, params.node_threshold)) /
         static_cast<double>(std::max(na.size(), nb.size()));
}

double aggregate_by_exhaustion(const KeyGraph& ga, const KeyGraph& gb, const keysim::CompareParams& params) {
  const std::size_t n = ga.nodes.size(), m = gb.nodes.size();
  if (n == 0 && m == 0) return 1.0;
  if (n == 0 || m == 0) return 0.0;
  std::vector<std::vector<double>> combined(n, std::vector<double>(m, -1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = keysim::node_similarity(ga.nodes[i], gb.nodes[j]);
      if (s < params.node_threshold) continue;
      double c = context_by_exhaustion(ga, static_cast<unsigned>(i), gb, static_cast<unsigned>(j), params);
      combined[i][j] = (1 - params.context_weight) * s + params.context_weight * c;
    }
  std::vector<bool> used(m, false);
  std::function<double(std::size_t)> best = [&](std::size_t i) -> double {
    if (i == n) return 0.0;
    double top = best(i + 1);
    for (std::size_t j = 0; j < m; ++j) {
      if (used[j] || combined[i][j] < 0) continue;
      used[j] = true;
      top = std::max(top, combined[i][j] + best(i + 1));
      used[j] = false;
    }
    return top;
  };
  return std::min(1.0, best(0) / static_cast<double>(std::max(n, m)));
}

void run_function(Machine& m, const Function& f, std::size_t max_steps) {
  BlockId at = f.entry;
  std::size_t steps = 0;
  for (;;) {
    const auto& block = f.block(at);
    m.taken.reset();
    for (const auto& ins : block.instructions) {
      if (++steps > max_steps) throw std::runtime_error("reference run exceeded its step cap");
      step(m, ins);
      if (m.returned) return;
    }
    if (block.successors.empty()) return;
    const keysim::Edge* next = &block.successors.front();
    if (block.successors.size() == 2) {
      const bool taken = m.taken.value_or(false);
      for (const auto& e : block.successors)
        if ((e.kind == keysim::EdgeKind::Taken) == taken) next = &e;
    }
    at = next->target;
  }
}

std::uint8_t memory_byte(std::uint64_t seed, std::uint64_t address) {
  std::uint64_t z = seed ^ (address * 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return static_cast<std::uint8_t>(z ^ (z >> 31));
}

}  // namespace reftest
