#include <algorithm>
#include <functional>

#include "keysim/symexec.hpp"

namespace keysim {

const std::set<BlockId>* LoopInfo::body(BlockId header) const {
  auto it = bodies.find(header);
  return it == bodies.end() ? nullptr : &it->second;
}

LoopInfo detect_loops(const Function& f) {
  LoopInfo info;
  if (!f.find_block(f.entry)) return info;

  auto successors = [&](BlockId id) {
    std::vector<BlockId> out;
    for (const auto& e : f.block(id).successors)
      if (f.find_block(e.target) && std::find(out.begin(), out.end(), e.target) == out.end())
        out.push_back(e.target);
    return out;
  };

  // Iterative DFS: reverse postorder plus retreating edges.
  std::vector<BlockId> postorder;
  std::vector<std::pair<BlockId, BlockId>> retreating;
  {
    std::set<BlockId> on_stack;
    struct Frame {
      BlockId id;
      std::vector<BlockId> succ;
      std::size_t next = 0;
    };
    std::vector<Frame> stack;
    info.reachable.insert(f.entry);
    on_stack.insert(f.entry);
    stack.push_back({f.entry, successors(f.entry)});
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.next < top.succ.size()) {
        BlockId s = top.succ[top.next++];
        if (on_stack.contains(s)) {
          retreating.emplace_back(top.id, s);
        } else if (!info.reachable.contains(s)) {
          info.reachable.insert(s);
          on_stack.insert(s);
          stack.push_back({s, successors(s)});
        }
      } else {
        postorder.push_back(top.id);
        on_stack.erase(top.id);
        stack.pop_back();
      }
    }
  }
  std::vector<BlockId> rpo(postorder.rbegin(), postorder.rend());

  std::map<BlockId, std::vector<BlockId>> preds;
  for (BlockId b : rpo)
    for (BlockId s : successors(b)) preds[s].push_back(b);

  // Dominator sets by the classic dataflow iteration.
  std::map<BlockId, std::set<BlockId>> dom;
  for (BlockId b : rpo) dom[b] = info.reachable;
  dom[f.entry] = {f.entry};
  for (bool changed = true; changed;) {
    changed = false;
    for (BlockId b : rpo) {
      if (b == f.entry) continue;
      std::optional<std::set<BlockId>> acc;
      for (BlockId p : preds[b]) {
        if (!acc) {
          acc = dom[p];
        } else {
          std::set<BlockId> meet;
          std::set_intersection(acc->begin(), acc->end(), dom[p].begin(), dom[p].end(),
                                std::inserter(meet, meet.end()));
          acc = std::move(meet);
        }
      }
      std::set<BlockId> next = acc.value_or(std::set<BlockId>{});
      next.insert(b);
      if (next != dom[b]) {
        dom[b] = std::move(next);
        changed = true;
      }
    }
  }

  for (auto [tail, head] : retreating) {
    if (!dom[tail].contains(head)) {
      info.irreducible_edges.insert({tail, head});
      info.diagnostics.push_back(Diagnostic::warning(
          "irreducible edge from block " + std::to_string(tail) + " to block " + std::to_string(head) +
              "; traversal capped at " + std::to_string(kLoopPasses),
          f.block(tail).address));
      continue;
    }
    info.back_edges.insert({tail, head});
    auto& body = info.bodies[head];
    body.insert(head);
    std::vector<BlockId> work{tail};
    while (!work.empty()) {
      BlockId b = work.back();
      work.pop_back();
      if (!body.insert(b).second) continue;
      for (BlockId p : preds[b]) work.push_back(p);
    }
  }
  return info;
}

}  // namespace keysim
