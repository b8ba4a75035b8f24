#include "keysim/keyir.hpp"

#include <algorithm>
#include <deque>
#include <map>

namespace keysim {

std::string_view to_string(KeyKind k) {
  switch (k) {
    case KeyKind::Call: return "CALL";
    case KeyKind::Compare: return "COMPARE";
    case KeyKind::Return: return "RETURN";
    case KeyKind::MemWrite: return "MEMWRITE";
  }
  return "?";
}

std::optional<KeyKind> parse_key_kind(std::string_view text) {
  for (KeyKind k : {KeyKind::Call, KeyKind::Compare, KeyKind::Return, KeyKind::MemWrite})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

KeyKind kind_of(const KeyPayload& p) {
  return std::visit(
      [](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, CallPayload>) return KeyKind::Call;
        else if constexpr (std::is_same_v<T, ComparePayload>) return KeyKind::Compare;
        else if constexpr (std::is_same_v<T, ReturnPayload>) return KeyKind::Return;
        else return KeyKind::MemWrite;
      },
      p);
}

std::string to_string(const KeyPayload& p) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, CallPayload>) {
          std::string s = x.callee + "(";
          for (std::size_t i = 0; i < x.args.size(); ++i) s += (i ? ", " : "") + x.args[i].text();
          return s + ")";
        } else if constexpr (std::is_same_v<T, ComparePayload>) {
          return x.lhs.text() + (x.flavor == CmpFlavor::SubCmp ? " cmp " : " tst ") + x.rhs.text();
        } else if constexpr (std::is_same_v<T, ReturnPayload>) {
          return x.value.text();
        } else {
          return "[" + x.addr.text() + "] = " + x.value.text();
        }
      },
      p);
}

const KeyNode* KeyGraph::find(std::uint64_t address) const {
  for (const auto& n : nodes)
    if (n.address == address) return &n;
  return nullptr;
}

std::vector<unsigned> KeyGraph::neighborhood(unsigned id, unsigned k) const {
  std::map<unsigned, std::vector<unsigned>> adj;
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::map<unsigned, unsigned> dist{{id, 0}};
  std::deque<unsigned> work{id};
  while (!work.empty()) {
    unsigned n = work.front();
    work.pop_front();
    if (dist[n] == k) continue;
    for (unsigned m : adj[n])
      if (dist.emplace(m, dist[n] + 1).second) work.push_back(m);
  }
  std::vector<unsigned> out;
  for (auto [n, d] : dist)
    if (n != id) out.push_back(n);
  return out;
}

std::optional<KeyKind> classify(const Instruction&, const std::vector<MicroOp>& micro, Arch, bool flags_consumed) {
  bool call = false, ret = false, compare = false, write = false;
  for (const auto& op : micro) {
    if (std::holds_alternative<micro::Call>(op)) call = true;
    else if (std::holds_alternative<micro::Ret>(op)) ret = true;
    else if (std::holds_alternative<micro::Compare>(op)) compare = true;
    else if (auto b = std::get_if<micro::BinOp>(&op); b && b->sets_flags && flags_consumed) compare = true;
    else if (auto s = std::get_if<micro::Store>(&op); s && !s->push_slot) write = true;
  }
  if (call) return KeyKind::Call;
  if (ret) return KeyKind::Return;
  if (compare) return KeyKind::Compare;
  if (write) return KeyKind::MemWrite;
  return std::nullopt;
}

std::set<std::uint64_t> flag_consumers(const LiftedFunction& lf) {
  std::set<std::uint64_t> out;
  for (const auto& b : lf.function.blocks) {
    std::optional<std::uint64_t> writer;
    bool writer_is_arith = false;
    for (const auto& ins : b.instructions) {
      for (const auto& op : lf.ops_at(ins.address)) {
        if (auto br = std::get_if<micro::Branch>(&op); br && br->cond != Cond::None) {
          if (writer && writer_is_arith) out.insert(*writer);
        } else if (std::holds_alternative<micro::Call>(op)) {
          writer.reset();
        } else if (writes_flags(op)) {
          writer = ins.address;
          writer_is_arith = std::holds_alternative<micro::BinOp>(op);
        }
      }
    }
  }
  return out;
}

std::vector<Expr> return_value(const LiftedFunction& lf, const ValueSets& vs, std::vector<Diagnostic>* diagnostics) {
  std::set<Expr> seen;
  std::vector<Expr> out;
  bool any_ret = false;
  for (const auto& b : lf.function.blocks)
    for (const auto& ins : b.instructions) {
      const auto& ops = lf.ops_at(ins.address);
      if (std::none_of(ops.begin(), ops.end(), [](const MicroOp& op) { return std::holds_alternative<micro::Ret>(op); }))
        continue;
      any_ret = true;
      auto it = vs.values.find(ins.address);
      if (it == vs.values.end()) continue;
      for (const auto& o : it->second)
        if (const Expr* v = find_slot(o, "ret"); v && seen.insert(*v).second) out.push_back(*v);
    }
  if (!any_ret && diagnostics)
    diagnostics->push_back(Diagnostic::warning("function '" + lf.function.name + "' has no return instruction"));
  return out;
}

namespace {

std::optional<KeyPayload> payload_from(KeyKind kind, const std::vector<MicroOp>& ops, const Observation& o) {
  switch (kind) {
    case KeyKind::Call: {
      CallPayload p;
      for (const auto& op : ops)
        if (auto c = std::get_if<micro::Call>(&op)) p.callee = c->target;
      for (unsigned i = 0;; ++i) {
        const Expr* a = find_slot(o, "arg" + std::to_string(i));
        if (!a) break;
        p.args.push_back(*a);
      }
      return p;
    }
    case KeyKind::Compare: {
      const Expr* l = find_slot(o, "lhs");
      const Expr* r = find_slot(o, "rhs");
      if (!l || !r) return std::nullopt;
      CmpFlavor flavor = CmpFlavor::SubCmp;
      for (const auto& op : ops)
        if (auto c = std::get_if<micro::Compare>(&op)) flavor = c->flavor;
      // `test x, x` sets the same zero and sign flags as `cmp x, 0`.
      if (flavor == CmpFlavor::AndTst && *l == *r) return ComparePayload{*l, Expr::constant(0, l->width()), CmpFlavor::SubCmp};
      return ComparePayload{*l, *r, flavor};
    }
    case KeyKind::Return: {
      const Expr* v = find_slot(o, "ret");
      if (!v) return std::nullopt;
      return ReturnPayload{*v};
    }
    case KeyKind::MemWrite: {
      const Expr* a = find_slot(o, "addr");
      const Expr* v = find_slot(o, "value");
      if (!a || !v) return std::nullopt;
      return MemWritePayload{*a, *v};
    }
  }
  return std::nullopt;
}

}  // namespace

KeyGraph build_key_graph(const LiftedFunction& lf, const ValueSets& vs) {
  KeyGraph g;
  const Function& f = lf.function;
  const auto consumers = flag_consumers(lf);

  std::map<std::uint64_t, unsigned> node_at;
  for (const auto& b : f.blocks) {
    for (const auto& ins : b.instructions) {
      const auto& ops = lf.ops_at(ins.address);
      auto kind = classify(ins, ops, f.arch, consumers.contains(ins.address));
      if (!kind) continue;
      auto it = vs.values.find(ins.address);
      if (it == vs.values.end()) continue;
      std::map<std::string, KeyPayload> distinct;
      for (const auto& o : it->second)
        if (auto p = payload_from(*kind, ops, o)) distinct.emplace(to_string(*p), std::move(*p));
      if (distinct.empty()) continue;
      KeyNode n;
      n.address = ins.address;
      n.kind = *kind;
      n.mnemonic = ins.mnemonic;
      for (auto& [text, p] : distinct) n.payloads.push_back(std::move(p));
      g.nodes.push_back(std::move(n));
    }
  }
  std::sort(g.nodes.begin(), g.nodes.end(), [](const KeyNode& a, const KeyNode& b) { return a.address < b.address; });
  for (unsigned i = 0; i < g.nodes.size(); ++i) {
    g.nodes[i].id = i;
    node_at[g.nodes[i].address] = i;
  }

  // Locate each node's block and position.
  std::map<std::uint64_t, std::pair<const BasicBlock*, std::size_t>> where;
  for (const auto& b : f.blocks)
    for (std::size_t i = 0; i < b.instructions.size(); ++i) where[b.instructions[i].address] = {&b, i};

  std::set<std::pair<unsigned, unsigned>> edges;
  auto first_key = [&](const BasicBlock& b, std::size_t from) -> std::optional<unsigned> {
    for (std::size_t i = from; i < b.instructions.size(); ++i)
      if (auto it = node_at.find(b.instructions[i].address); it != node_at.end()) return it->second;
    return std::nullopt;
  };
  for (const auto& n : g.nodes) {
    auto [block, index] = where.at(n.address);
    if (auto k = first_key(*block, index + 1)) {
      edges.insert({n.id, *k});
      continue;
    }
    std::set<BlockId> visited;
    std::deque<BlockId> work;
    for (const auto& e : block->successors) work.push_back(e.target);
    while (!work.empty()) {
      BlockId id = work.front();
      work.pop_front();
      if (!visited.insert(id).second) continue;
      const BasicBlock* b = f.find_block(id);
      if (!b) continue;
      if (auto k = first_key(*b, 0)) {
        edges.insert({n.id, *k});
        continue;
      }
      for (const auto& e : b->successors) work.push_back(e.target);
    }
  }
  g.edges.assign(edges.begin(), edges.end());
  if (g.nodes.empty())
    g.diagnostics.push_back(Diagnostic::warning("function '" + f.name + "' has no key instructions"));
  return g;
}

}  // namespace keysim
