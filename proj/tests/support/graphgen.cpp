#include "graphgen.hpp"

#include <algorithm>
#include <numeric>

using namespace keysim;

namespace reftest {

KeyGraph normalize(std::vector<KeyNode> nodes, std::vector<std::pair<unsigned, unsigned>> edges) {
  KeyGraph g;
  std::vector<unsigned> order(nodes.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](unsigned a, unsigned b) { return nodes[a].address < nodes[b].address; });
  std::vector<unsigned> id_of(nodes.size());
  for (unsigned i = 0; i < order.size(); ++i) {
    id_of[order[i]] = i;
    g.nodes.push_back(nodes[order[i]]);
    g.nodes.back().id = i;
  }
  for (auto [a, b] : edges) g.edges.emplace_back(id_of[a], id_of[b]);
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  return g;
}

Expr GraphGen::expr() {
  std::uniform_int_distribution<unsigned> depth(0, 2);
  return simplify(exprs_.make(64, depth(rng_)));
}

KeyNode GraphGen::node(std::uint64_t address) {
  static const char* callees[] = {"malloc", "free", "memcpy", "printf", "strlen", "EVP_EncryptInit"};
  KeyNode n;
  n.address = address;
  n.kind = static_cast<KeyKind>(std::uniform_int_distribution<int>(0, 3)(rng_));
  switch (n.kind) {
    case KeyKind::Call: {
      CallPayload p{callees[std::uniform_int_distribution<int>(0, 5)(rng_)], {}};
      for (int i = std::uniform_int_distribution<int>(0, 2)(rng_); i > 0; --i) p.args.push_back(expr());
      n.mnemonic = "call";
      n.payloads.push_back(p);
      break;
    }
    case KeyKind::Compare:
      n.mnemonic = "cmp";
      n.payloads.push_back(ComparePayload{expr(), Expr::constant(exprs_.constant(64) & 0xff, 64), CmpFlavor::SubCmp});
      break;
    case KeyKind::Return:
      n.mnemonic = "ret";
      n.payloads.push_back(ReturnPayload{expr()});
      break;
    case KeyKind::MemWrite:
      n.mnemonic = "mov";
      n.payloads.push_back(MemWritePayload{simplify(Expr::binary(BinaryOp::Add, Expr::var(0, 64),
                                                                 Expr::constant(8 * (rng_() % 8), 64))),
                                           expr()});
      break;
  }
  return n;
}

KeyGraph GraphGen::graph(unsigned n) {
  std::vector<KeyNode> nodes;
  for (unsigned i = 0; i < n; ++i) nodes.push_back(node(0x1000 + 0x10 * i));
  std::vector<std::pair<unsigned, unsigned>> edges;
  for (unsigned i = 1; i < n; ++i) {
    edges.emplace_back(rng_() % i, i);
    if (rng_() % 3 == 0) edges.emplace_back(i, rng_() % (i + 1));
  }
  return normalize(std::move(nodes), std::move(edges));
}

KeyNode GraphGen::mutate(const KeyNode& n) {
  KeyNode m = n;
  const Expr bump = Expr::constant(1 + rng_() % 15, 64);
  auto perturb = [&](const Expr& e) { return simplify(Expr::binary(BinaryOp::Add, e, Expr::resize(bump, e.width()))); };
  for (auto& p : m.payloads)
    std::visit(
        [&](auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, CallPayload>) {
            if (x.args.empty()) x.args.push_back(expr());
            else x.args.back() = perturb(x.args.back());
          } else if constexpr (std::is_same_v<T, ComparePayload>) {
            x.rhs = perturb(x.rhs);
          } else if constexpr (std::is_same_v<T, ReturnPayload>) {
            x.value = perturb(x.value);
          } else {
            x.value = perturb(x.value);
          }
        },
        p);
  return m;
}

KeyGraph GraphGen::variant(const KeyGraph& g, unsigned mutations, unsigned inserts) {
  const unsigned n = static_cast<unsigned>(g.nodes.size());
  std::vector<unsigned> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng_);
  std::vector<KeyNode> nodes(g.nodes);
  for (unsigned i = 0; i < n; ++i) nodes[perm[i]].address = 0x2000 + 0x10 * i;
  std::vector<unsigned> targets(perm);
  std::shuffle(targets.begin(), targets.end(), rng_);
  for (unsigned i = 0; i < mutations && i < n; ++i) nodes[targets[i]] = mutate(nodes[targets[i]]);
  std::vector<std::pair<unsigned, unsigned>> edges(g.edges);
  for (unsigned i = 0; i < inserts; ++i) {
    const auto fresh = static_cast<unsigned>(nodes.size());
    nodes.push_back(node(0x3000 + 0x10 * i));
    if (edges.empty()) continue;
    auto& e = edges[rng_() % edges.size()];
    const unsigned to = e.second;
    e.second = fresh;
    edges.emplace_back(fresh, to);
  }
  return normalize(std::move(nodes), std::move(edges));
}

}  // namespace reftest
