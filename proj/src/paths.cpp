#include <algorithm>

#include "keysim/symexec.hpp"

namespace keysim {

std::vector<BlockId> Path::blocks() const {
  std::vector<BlockId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.block);
  return out;
}

std::set<BlockId> RunPlan::covered() const {
  std::set<BlockId> out;
  for (const auto& s : main_path.steps) out.insert(s.block);
  for (const auto& p : aux_paths)
    for (const auto& s : p.steps) out.insert(s.block);
  return out;
}

namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

/// Loop-aware random walk. In aux mode (`covered` non-null) it prefers
/// uncovered blocks and stops once nothing uncovered is admissible and no loop
/// is still running.
class Walker {
 public:
  Walker(const Function& f, const LoopInfo& loops, std::mt19937_64& rng, std::set<BlockId>* covered)
      : f_(f), loops_(loops), rng_(rng), covered_(covered) {}

  Path walk(BlockId start) {
    Path path;
    PathStep first{start, {}, false};
    if (loops_.body(start)) enter(start, first.events);
    visit(path, std::move(first));
    BlockId current = start;
    while (path.steps.size() < kMaxPathSteps) {
      auto next = choose(current);
      if (!next) break;
      PathStep step{*next, {}, false};
      transition(current, *next, step.events);
      visit(path, std::move(step));
      current = *next;
    }
    return path;
  }

 private:
  struct Activation {
    BlockId header;
    int pass;  // 1, 2, or 3 once leaving after the second pass
  };

  enum class Tier { Inner, Loop, Exhausted, Exit, Closed };

  void visit(Path& path, PathStep step) {
    step.exit_mode = std::any_of(stack_.begin(), stack_.end(), [](const Activation& a) { return a.pass > kLoopPasses; });
    if (covered_) covered_->insert(step.block);
    path.steps.push_back(std::move(step));
  }

  void enter(BlockId header, std::vector<LoopEvent>& events) {
    stack_.push_back({header, 1});
    events.push_back({LoopEventKind::Enter, header});
  }

  Activation* activation(BlockId header) {
    for (auto it = stack_.rbegin(); it != stack_.rend(); ++it)
      if (it->header == header) return &*it;
    return nullptr;
  }

  bool in_body(const Activation& a, BlockId b) const { return loops_.body(a.header)->contains(b); }

  Tier classify(BlockId from, BlockId to) {
    if (loops_.is_back_edge(from, to)) {
      const Activation* a = activation(to);
      if (!a || a->pass == 1) return Tier::Loop;
      if (a->pass == kLoopPasses) return Tier::Exhausted;
      return Tier::Closed;
    }
    if (loops_.is_irreducible(from, to))
      return irreducible_uses_[{from, to}] < kLoopPasses ? Tier::Inner : Tier::Closed;
    if (stack_.empty() || in_body(stack_.back(), to)) return Tier::Inner;
    return Tier::Exit;
  }

  std::optional<BlockId> choose(BlockId from) {
    std::vector<BlockId> succ;
    for (const auto& e : f_.block(from).successors)
      if (f_.find_block(e.target) && std::find(succ.begin(), succ.end(), e.target) == succ.end())
        succ.push_back(e.target);
    if (succ.empty()) return std::nullopt;

    std::map<Tier, std::vector<BlockId>> tiers;
    for (BlockId s : succ) tiers[classify(from, s)].push_back(s);
    auto tier = [&](Tier t) -> const std::vector<BlockId>& { return tiers[t]; };

    std::vector<BlockId> candidates;
    const bool leaving = !stack_.empty() && stack_.back().pass > kLoopPasses;
    if (stack_.empty()) {
      candidates = tier(Tier::Inner);
      candidates.insert(candidates.end(), tier(Tier::Loop).begin(), tier(Tier::Loop).end());
    } else if (leaving) {
      candidates = !tier(Tier::Exit).empty() ? tier(Tier::Exit) : tier(Tier::Inner);
    } else {
      candidates = tier(Tier::Inner);
      candidates.insert(candidates.end(), tier(Tier::Loop).begin(), tier(Tier::Loop).end());
      if (candidates.empty()) candidates = tier(Tier::Exit);
      if (candidates.empty()) candidates = tier(Tier::Exhausted);
    }
    if (candidates.empty()) return std::nullopt;
    std::sort(candidates.begin(), candidates.end());

    if (covered_) {
      std::vector<BlockId> fresh;
      for (BlockId c : candidates)
        if (!covered_->contains(c)) fresh.push_back(c);
      if (!fresh.empty()) return fresh[pick(rng_, fresh.size())];
      bool any_fresh = false;
      for (BlockId s : succ) {
        Tier t = classify(from, s);
        if (t != Tier::Closed && !covered_->contains(s)) any_fresh = true;
      }
      if (stack_.empty() && !any_fresh) return std::nullopt;
    }
    return candidates[pick(rng_, candidates.size())];
  }

  void transition(BlockId from, BlockId to, std::vector<LoopEvent>& events) {
    if (loops_.is_irreducible(from, to)) ++irreducible_uses_[{from, to}];
    if (loops_.is_back_edge(from, to) && activation(to)) {
      while (stack_.back().header != to) {
        events.push_back({LoopEventKind::Leave, stack_.back().header});
        stack_.pop_back();
      }
      Activation& a = stack_.back();
      ++a.pass;
      events.push_back({a.pass == kLoopPasses ? LoopEventKind::Repeat : LoopEventKind::ExitMode, to});
      return;
    }
    while (!stack_.empty() && !in_body(stack_.back(), to)) {
      events.push_back({LoopEventKind::Leave, stack_.back().header});
      stack_.pop_back();
    }
    if (loops_.body(to)) enter(to, events);
  }

  const Function& f_;
  const LoopInfo& loops_;
  std::mt19937_64& rng_;
  std::set<BlockId>* covered_;
  std::vector<Activation> stack_;
  std::map<std::pair<BlockId, BlockId>, int> irreducible_uses_;
};

}  // namespace

Path sample_main_path(const Function& f, const LoopInfo& loops, std::mt19937_64& rng) {
  if (!f.find_block(f.entry)) return {};
  return Walker(f, loops, rng, nullptr).walk(f.entry);
}

std::vector<Path> cover_residual(const Function& f, const LoopInfo& loops, std::set<BlockId> covered,
                                 std::mt19937_64& rng) {
  std::vector<Path> out;
  for (;;) {
    std::vector<std::pair<BlockId, BlockId>> frontier;
    for (BlockId u : covered) {
      if (!loops.reachable.contains(u)) continue;
      const BasicBlock* b = f.find_block(u);
      if (!b) continue;
      for (const auto& e : b->successors)
        if (loops.reachable.contains(e.target) && !covered.contains(e.target))
          frontier.emplace_back(u, e.target);
    }
    if (frontier.empty()) break;
    std::sort(frontier.begin(), frontier.end());
    frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
    auto [from, start] = frontier[pick(rng, frontier.size())];
    Path p = Walker(f, loops, rng, &covered).walk(start);
    p.fork_from = from;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace keysim
