#include "keysim/compare.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace keysim {

std::string CompareParams::validate() const {
  auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!unit(node_threshold)) return "node threshold must lie in [0, 1]";
  if (!unit(pair_threshold)) return "pair threshold must lie in [0, 1]";
  if (!unit(context_weight)) return "context weight must lie in [0, 1]";
  return {};
}

std::size_t token_edit_distance(const TokenString& a, const TokenString& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

double token_similarity(const TokenString& a, const TokenString& b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(token_edit_distance(a, b)) / static_cast<double>(longest);
}

namespace {

void append(TokenString& out, const Expr& e) {
  auto t = similarity_tokens(e);
  out.insert(out.end(), t.begin(), t.end());
}

TokenString arg_tokens(const CallPayload& c) {
  TokenString out;
  for (std::size_t i = 0; i < c.args.size(); ++i) {
    if (i) out.push_back(",");
    append(out, c.args[i]);
  }
  return out;
}

TokenString compare_tokens(const ComparePayload& c, bool swapped) {
  TokenString out;
  append(out, swapped ? c.rhs : c.lhs);
  out.push_back(c.flavor == CmpFlavor::SubCmp ? "cmp" : "tst");
  append(out, swapped ? c.lhs : c.rhs);
  return out;
}

}  // namespace

TokenString payload_tokens(const KeyPayload& p) {
  return std::visit(
      [](const auto& x) -> TokenString {
        using T = std::decay_t<decltype(x)>;
        TokenString out;
        if constexpr (std::is_same_v<T, CallPayload>) {
          out.push_back(x.callee);
          out.push_back("(");
          auto a = arg_tokens(x);
          out.insert(out.end(), a.begin(), a.end());
          out.push_back(")");
        } else if constexpr (std::is_same_v<T, ComparePayload>) {
          out = compare_tokens(x, false);
        } else if constexpr (std::is_same_v<T, ReturnPayload>) {
          append(out, x.value);
        } else {
          append(out, x.addr);
          out.push_back("=");
          append(out, x.value);
        }
        return out;
      },
      p);
}

double payload_similarity(const KeyPayload& a, const KeyPayload& b) {
  if (a.index() != b.index()) return 0.0;
  if (auto ca = std::get_if<CallPayload>(&a)) {
    const auto& cb = std::get<CallPayload>(b);
    const double callee = ca->callee == cb.callee ? 1.0 : 0.0;
    return 0.5 * callee + 0.5 * token_similarity(arg_tokens(*ca), arg_tokens(cb));
  }
  if (auto ca = std::get_if<ComparePayload>(&a)) {
    const auto& cb = std::get<ComparePayload>(b);
    auto ta = compare_tokens(*ca, false);
    return std::max(token_similarity(ta, compare_tokens(cb, false)), token_similarity(ta, compare_tokens(cb, true)));
  }
  return token_similarity(payload_tokens(a), payload_tokens(b));
}

double node_similarity(const KeyNode& a, const KeyNode& b) {
  if (a.kind != b.kind) return 0.0;
  double best = 0.0;
  for (const auto& pa : a.payloads)
    for (const auto& pb : b.payloads) {
      best = std::max(best, payload_similarity(pa, pb));
      if (best >= 1.0) return 1.0;
    }
  return best;
}

namespace {

struct Candidate {
  unsigned a;
  unsigned b;
  double score;
  double context;
  std::uint64_t lo;
  std::uint64_t hi;
};

/// Greedy one-to-one pairing over candidates already filtered by threshold.
std::vector<Candidate> greedy_pairs(std::vector<Candidate> cands) {
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(y.score, x.lo, x.hi) < std::tie(x.score, y.lo, y.hi);
  });
  std::vector<Candidate> chosen;
  std::set<unsigned> used_a, used_b;
  for (const auto& c : cands) {
    if (used_a.contains(c.a) || used_b.contains(c.b)) continue;
    used_a.insert(c.a);
    used_b.insert(c.b);
    chosen.push_back(c);
  }
  return chosen;
}

Candidate make_candidate(const KeyGraph& ga, unsigned a, const KeyGraph& gb, unsigned b, double score,
                         double context = 0.0) {
  const auto x = ga.nodes[a].address, y = gb.nodes[b].address;
  return {a, b, score, context, std::min(x, y), std::max(x, y)};
}

double combine(double node, double context, const CompareParams& params) {
  return (1.0 - params.context_weight) * node + params.context_weight * context;
}

class SimilarityCache {
 public:
  SimilarityCache(const KeyGraph& ga, const KeyGraph& gb) : ga_(ga), gb_(gb), cache_(ga.nodes.size() * gb.nodes.size(), -1.0) {}

  double operator()(unsigned a, unsigned b) {
    double& slot = cache_[a * gb_.nodes.size() + b];
    if (slot < 0) slot = node_similarity(ga_.nodes[a], gb_.nodes[b]);
    return slot;
  }

 private:
  const KeyGraph& ga_;
  const KeyGraph& gb_;
  std::vector<double> cache_;
};

double context_score(const KeyGraph& ga, unsigned a, const KeyGraph& gb, unsigned b, const CompareParams& params,
                     SimilarityCache& sim) {
  const auto na = ga.neighborhood(a, params.context_boundary);
  const auto nb = gb.neighborhood(b, params.context_boundary);
  if (na.empty() && nb.empty()) return 1.0;
  if (na.empty() || nb.empty()) return 0.0;
  std::vector<Candidate> cands;
  for (unsigned x : na)
    for (unsigned y : nb)
      if (double s = sim(x, y); s >= params.node_threshold) cands.push_back(make_candidate(ga, x, gb, y, s));
  const auto pairs = greedy_pairs(std::move(cands));
  return static_cast<double>(pairs.size()) / static_cast<double>(std::max(na.size(), nb.size()));
}

}  // namespace

double context_similarity(const KeyGraph& ga, unsigned a, const KeyGraph& gb, unsigned b, const CompareParams& params) {
  SimilarityCache sim(ga, gb);
  return context_score(ga, a, gb, b, params, sim);
}

MatchReport match_graphs(const KeyGraph& ga, const KeyGraph& gb, const CompareParams& params) {
  MatchReport r;
  r.params = params;
  r.nodes_a = ga.nodes.size();
  r.nodes_b = gb.nodes.size();
  if (ga.nodes.empty() && gb.nodes.empty()) {
    r.aggregate = 1.0;
    r.diagnostics.push_back(Diagnostic::warning("both key graphs are empty"));
  } else if (ga.nodes.empty() || gb.nodes.empty()) {
    r.aggregate = 0.0;
  } else {
    SimilarityCache sim(ga, gb);
    std::vector<Candidate> cands;
    for (unsigned a = 0; a < ga.nodes.size(); ++a)
      for (unsigned b = 0; b < gb.nodes.size(); ++b)
        if (double s = sim(a, b); s >= params.node_threshold) {
          const double ctx = context_score(ga, a, gb, b, params, sim);
          cands.push_back(make_candidate(ga, a, gb, b, combine(s, ctx, params), ctx));
        }
    double total = 0.0;
    for (const auto& c : greedy_pairs(std::move(cands))) {
      AnchorPair p;
      p.node_a = c.a;
      p.node_b = c.b;
      p.address_a = ga.nodes[c.a].address;
      p.address_b = gb.nodes[c.b].address;
      p.node_score = sim(c.a, c.b);
      p.context_score = c.context;
      p.combined = c.score;
      total += p.combined;
      r.anchors.push_back(p);
    }
    r.aggregate = std::clamp(total / static_cast<double>(std::max(ga.nodes.size(), gb.nodes.size())), 0.0, 1.0);
  }
  r.similar = classify_pair(r, params.pair_threshold);
  return r;
}

bool classify_pair(const MatchReport& report, double tau) { return report.aggregate >= tau; }

}  // namespace keysim
