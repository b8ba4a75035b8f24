#include "keysim/symexec.hpp"

#include <algorithm>
#include <stdexcept>

#include "keysim/simplify.hpp"

namespace keysim {

// ------------------------------------------------------------------ state

SymState SymState::initial(Arch arch, CallConv conv) {
  SymState s;
  s.arch = arch;
  s.convention = conv;
  const unsigned w = word_width(arch);
  for (auto name : register_file(arch)) s.registers.insert_or_assign(std::string{name}, Expr::sym(std::string{name}, w));
  s.registers.insert_or_assign(std::string{stack_pointer(arch)}, Expr::sym("sp", w));
  auto params = argument_registers(conv);
  for (unsigned i = 0; i < params.size(); ++i) s.registers.insert_or_assign(std::string{params[i]}, Expr::var(i, w));
  return s;
}

Expr SymState::read(const RegRef& r) const {
  auto it = registers.find(r.name);
  if (it == registers.end()) throw std::out_of_range("no register " + r.name);
  Expr v = it->second;
  if (r.shift) v = Expr::binary(BinaryOp::Shr, v, Expr::constant(r.shift, v.width()));
  return simplify(Expr::resize(v, r.width));
}

void SymState::write(const RegRef& r, const Expr& value) {
  const unsigned word = word_width(arch);
  Expr v = Expr::resize(value, r.width);
  Expr full = Expr::zext(v, word);
  if (r.width < word && !(arch == Arch::X86_64 && r.width == 32)) {
    const std::uint64_t field = width_mask(r.width) << r.shift;
    Expr old = registers.at(r.name);
    Expr kept = Expr::binary(BinaryOp::And, old, Expr::constant(~field, word));
    Expr placed = r.shift ? Expr::binary(BinaryOp::Shl, full, Expr::constant(r.shift, word)) : full;
    full = Expr::binary(BinaryOp::Or, kept, placed);
  }
  registers.insert_or_assign(r.name, simplify(full));
  auto args = argument_registers(convention);
  if (std::find(args.begin(), args.end(), r.name) != args.end()) arg_writes[r.name] = r.width;
}

Expr SymState::address(const AddrTemplate& a) const {
  const unsigned word = word_width(arch);
  Expr sum = Expr::constant(static_cast<std::uint64_t>(a.disp), word);
  if (a.base) sum = Expr::binary(BinaryOp::Add, Expr::zext(read(*a.base), word), sum);
  if (a.index) {
    Expr scaled = Expr::binary(BinaryOp::Mul, Expr::zext(read(*a.index), word), Expr::constant(a.scale, word));
    sum = Expr::binary(BinaryOp::Add, sum, scaled);
  }
  return simplify(Expr::resize(sum, a.width));
}

Expr SymState::load(const Expr& addr, unsigned width) const {
  auto it = memory.find(addr.text());
  if (it != memory.end()) {
    if (it->second.width() == width) return it->second;
    if (it->second.width() > width) return simplify(Expr::trunc(it->second, width));
  }
  return Expr::mem(addr, width);
}

void SymState::store(const Expr& addr, const Expr& value) { memory.insert_or_assign(addr.text(), value); }

// ------------------------------------------------------------------ stepping

const Expr* find_slot(const Observation& o, std::string_view name) {
  for (const auto& [slot, value] : o)
    if (slot == name) return &value;
  return nullptr;
}

std::string to_string(const Observation& o) {
  std::string s;
  for (const auto& [slot, value] : o) {
    if (!s.empty()) s += "; ";
    s += slot + " = " + value.text();
  }
  return s;
}

std::vector<Expr> call_args(const SymState& s, CallConv conv, unsigned arity) {
  auto regs = argument_registers(conv);
  const std::size_t cap = std::min<std::size_t>(arity, regs.size());
  std::size_t count = 0;
  for (std::size_t i = 0; i < cap; ++i)
    if (s.arg_writes.contains(regs[i])) count = i + 1;
  std::vector<Expr> out;
  const unsigned word = word_width(s.arch);
  for (std::size_t i = 0; i < count; ++i) {
    auto it = s.arg_writes.find(regs[i]);
    const unsigned w = it == s.arg_writes.end() ? word : it->second;
    out.push_back(s.read(RegRef{std::string{regs[i]}, w, 0}));
  }
  return out;
}

namespace {

void set_slot(Observation& o, std::string name, Expr value) {
  for (auto& [slot, v] : o)
    if (slot == name) {
      v = std::move(value);
      return;
    }
  o.emplace_back(std::move(name), std::move(value));
}

class Stepper {
 public:
  Stepper(SymState& s, std::uint64_t site) : s_(s), site_(site) {}

  void run(const MicroOp& op) {
    std::visit([&](const auto& x) { apply(x); }, op);
  }

  Observation take() {
    std::sort(obs_.begin(), obs_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return std::move(obs_);
  }

 private:
  Expr value(const Value& v) const {
    if (auto r = std::get_if<RegRef>(&v)) return s_.read(*r);
    if (auto t = std::get_if<Temp>(&v)) return temps_.at(t->id);
    if (auto i = std::get_if<Imm>(&v)) return Expr::constant(i->value, i->width);
    return s_.address(std::get<AddrTemplate>(v));
  }

  void assign(const Loc& l, const Expr& v) {
    if (auto r = std::get_if<RegRef>(&l)) {
      s_.write(*r, v);
      set_slot(obs_, "dst:" + r->name, simplify(Expr::resize(v, r->width)));
    } else {
      temps_.insert_or_assign(std::get<Temp>(l).id, simplify(Expr::resize(v, std::get<Temp>(l).width)));
    }
  }

  void apply(const micro::Move& m) {
    Expr v = value(m.src);
    const unsigned w = width_of(m.dst);
    if (m.ext == Extend::Zero) v = Expr::zext(v, w);
    else if (m.ext == Extend::Sign) v = Expr::sext(v, w);
    assign(m.dst, simplify(Expr::resize(v, w)));
  }

  void apply(const micro::BinOp& b) {
    Expr lhs = value(b.lhs);
    Expr r = [&] {
      if (b.op == ArithOp::Not) return Expr::unary(UnaryOp::Not, lhs);
      if (b.op == ArithOp::Neg) return Expr::unary(UnaryOp::Neg, lhs);
      return Expr::binary(static_cast<BinaryOp>(b.op), lhs, value(b.rhs));
    }();
    r = simplify(r);
    assign(b.dst, r);
    if (b.sets_flags) {
      Expr zero = Expr::constant(0, r.width());
      s_.lastcmp = SymCompare{r, zero, CmpFlavor::SubCmp};
      set_slot(obs_, "lhs", r);
      set_slot(obs_, "rhs", zero);
    }
  }

  void apply(const micro::Load& l) { assign(l.dst, s_.load(s_.address(l.addr), l.width)); }

  void apply(const micro::Store& st) {
    Expr addr = s_.address(st.addr);
    Expr v = simplify(Expr::resize(value(st.src), st.width));
    s_.store(addr, v);
    if (!st.push_slot) {
      set_slot(obs_, "addr", addr);
      set_slot(obs_, "value", v);
    }
  }

  void apply(const micro::Compare& c) {
    Expr lhs = value(c.lhs);
    Expr rhs = value(c.rhs);
    s_.lastcmp = SymCompare{lhs, rhs, c.flavor};
    set_slot(obs_, "lhs", lhs);
    set_slot(obs_, "rhs", rhs);
  }

  void apply(const micro::Branch&) {}

  void apply(const micro::Call& c) {
    auto args = call_args(s_, s_.convention, default_arity(s_.convention));
    for (std::size_t i = 0; i < args.size(); ++i) set_slot(obs_, "arg" + std::to_string(i), args[i]);
    const unsigned w = word_width(s_.arch);
    const auto ret_reg = return_register(s_.arch);
    for (auto reg : caller_saved_registers(s_.convention)) {
      std::string tag = reg == ret_reg ? "" : std::string{reg};
      s_.registers.insert_or_assign(std::string{reg}, Expr::ret(c.target, site_, std::move(tag), w));
    }
    s_.lastcmp.reset();
    s_.arg_writes.clear();
  }

  void apply(const micro::Ret&) {
    set_slot(obs_, "ret", s_.registers.at(std::string{return_register(s_.arch)}));
  }

  void apply(const micro::Push& p) {
    for (const auto& op : expand(p, s_.arch)) run(op);
  }
  void apply(const micro::Pop& p) {
    for (const auto& op : expand(p, s_.arch)) run(op);
  }

  void apply(const micro::Unsupported& u) {
    if (!u.dst) return;
    std::string name = "havoc_" + hex(site_).substr(2);
    assign(*u.dst, Expr::sym(std::move(name), width_of(*u.dst)));
  }

  SymState& s_;
  std::uint64_t site_;
  std::map<unsigned, Expr> temps_;
  Observation obs_;
};

}  // namespace

Observation step_instruction(SymState& s, const std::vector<MicroOp>& ops, std::uint64_t site) {
  Stepper st(s, site);
  for (const auto& op : ops) st.run(op);
  return st.take();
}

// ------------------------------------------------------------------ runs

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct StepBudgetExceeded {};

Observation merge_passes(const Observation& first, const Observation& second) {
  Observation out;
  for (const auto& [slot, v1] : first) {
    const Expr* v2 = find_slot(second, slot);
    out.emplace_back(slot, v2 && v2->text() != v1.text() ? Expr::iter(v1) : v1);
  }
  return out;
}

Expr wrap_if_changed(const Expr& reference, const Expr& current) {
  return reference.text() == current.text() ? current : Expr::iter(reference);
}

class Executor {
 public:
  Executor(const LiftedFunction& lf, std::size_t budget) : lf_(lf), budget_(budget) {}

  void run_path(const Path& path, SymState state, const std::set<BlockId>* already_covered) {
    acts_.clear();
    BlockId previous = path.steps.empty() ? 0 : path.steps.front().block;
    for (const auto& step : path.steps) {
      for (const auto& ev : step.events) on_event(ev, state, previous);
      const BasicBlock& b = lf_.function.block(step.block);
      const bool record = !step.exit_mode && (!already_covered || !already_covered->contains(step.block));
      bool returned = false;
      for (const auto& ins : b.instructions) {
        const auto& ops = lf_.ops_at(ins.address);
        steps_ += std::max<std::size_t>(1, ops.size());
        if (steps_ > budget_) throw StepBudgetExceeded{};
        Observation o = step_instruction(state, ops, ins.address);
        if (record) observe(ins.address, std::move(o));
        if (std::any_of(ops.begin(), ops.end(), [](const MicroOp& op) { return std::holds_alternative<micro::Ret>(op); })) {
          returned = true;
          break;
        }
      }
      exit_states_.try_emplace(step.block, state);
      if (!acts_.empty() && acts_.back().pass <= kLoopPasses)
        acts_.back().end_state[acts_.back().pass - 1].try_emplace(step.block, state);
      previous = step.block;
      if (returned) break;
    }
    finish();
  }

  /// Drains open loop activations without touching the state.
  void finish() {
    while (!acts_.empty()) pop_activation();
  }

  const SymState* exit_state(BlockId b) const {
    auto it = exit_states_.find(b);
    return it == exit_states_.end() ? nullptr : &it->second;
  }

  ObservationMap take() { return std::move(out_); }

 private:
  struct Activation {
    BlockId header;
    int pass = 1;
    std::map<std::uint64_t, Observation> first[kLoopPasses];
    std::map<BlockId, SymState> end_state[kLoopPasses];
  };

  void observe(std::uint64_t address, Observation o) {
    if (acts_.empty()) {
      out_[address].insert(std::move(o));
      return;
    }
    Activation& a = acts_.back();
    if (a.pass <= kLoopPasses) a.first[a.pass - 1].try_emplace(address, std::move(o));
  }

  void pop_activation() {
    Activation a = std::move(acts_.back());
    acts_.pop_back();
    for (auto& [address, o1] : a.first[0]) {
      auto it = a.first[1].find(address);
      observe(address, it == a.first[1].end() ? o1 : merge_passes(o1, it->second));
    }
    for (auto& [address, o2] : a.first[1])
      if (!a.first[0].contains(address)) observe(address, o2);
  }

  void leave(SymState& s, BlockId exit_block) {
    Activation& a = acts_.back();
    const SymState* ref = nullptr;
    if (auto it = a.end_state[0].find(exit_block); it != a.end_state[0].end()) ref = &it->second;
    else if (auto h = a.end_state[0].find(a.header); h != a.end_state[0].end()) ref = &h->second;
    const bool ran_twice = a.pass > 1;
    if (ref && ran_twice) {
      for (auto& [name, value] : s.registers) value = wrap_if_changed(ref->registers.at(name), value);
      for (auto& [key, value] : s.memory)
        if (auto m = ref->memory.find(key); m != ref->memory.end() && m->second.width() == value.width())
          value = wrap_if_changed(m->second, value);
      if (s.lastcmp && ref->lastcmp && !(*s.lastcmp == *ref->lastcmp))
        s.lastcmp = SymCompare{wrap_if_changed(ref->lastcmp->lhs, s.lastcmp->lhs),
                               wrap_if_changed(ref->lastcmp->rhs, s.lastcmp->rhs), s.lastcmp->flavor};
    }
    pop_activation();
  }

  void on_event(const LoopEvent& ev, SymState& s, BlockId previous) {
    switch (ev.kind) {
      case LoopEventKind::Enter:
        acts_.push_back(Activation{ev.header});
        break;
      case LoopEventKind::Repeat:
      case LoopEventKind::ExitMode:
        if (!acts_.empty() && acts_.back().header == ev.header) ++acts_.back().pass;
        break;
      case LoopEventKind::Leave:
        if (!acts_.empty() && acts_.back().header == ev.header) leave(s, previous);
        break;
    }
  }

  const LiftedFunction& lf_;
  std::size_t budget_;
  std::size_t steps_ = 0;
  std::vector<Activation> acts_;
  std::map<BlockId, SymState> exit_states_;
  ObservationMap out_;
};

}  // namespace

std::uint64_t run_seed(std::uint64_t seed, unsigned run_index) { return splitmix(seed ^ splitmix(run_index + 1)); }

RunResult run_once(const LiftedFunction& lf, const LoopInfo& loops, std::uint64_t seed, std::size_t step_budget) {
  RunResult result;
  result.plan.seed = seed;
  const Function& f = lf.function;
  if (!f.find_block(f.entry)) {
    result.diagnostics.push_back(Diagnostic::error("entry block " + std::to_string(f.entry) + " does not exist"));
    return result;
  }
  std::mt19937_64 rng(seed);
  result.plan.main_path = sample_main_path(f, loops, rng);
  result.plan.aux_paths = cover_residual(f, loops, result.plan.covered(), rng);
  if (result.plan.main_path.steps.size() >= kMaxPathSteps)
    result.diagnostics.push_back(Diagnostic::warning("path length cap reached", f.block(f.entry).address));

  Executor ex(lf, step_budget);
  const SymState init = SymState::initial(f.arch, f.convention);
  try {
    ex.run_path(result.plan.main_path, init, nullptr);
    std::set<BlockId> covered;
    for (const auto& s : result.plan.main_path.steps) covered.insert(s.block);
    for (const auto& aux : result.plan.aux_paths) {
      const SymState* start = aux.fork_from ? ex.exit_state(*aux.fork_from) : nullptr;
      ex.run_path(aux, start ? *start : init, &covered);
      for (const auto& s : aux.steps) covered.insert(s.block);
    }
  } catch (const StepBudgetExceeded&) {
    ex.finish();
    result.diagnostics.push_back(Diagnostic::error("step budget of " + std::to_string(step_budget) +
                                                   " micro-ops exceeded; observations are partial"));
  }
  result.observations = ex.take();
  return result;
}

ValueSets execute(const LiftedFunction& lf, const ExecConfig& config) {
  ValueSets vs;
  const LoopInfo loops = detect_loops(lf.function);
  vs.diagnostics = loops.diagnostics;
  for (unsigned i = 0; i < config.runs; ++i) {
    RunResult r = run_once(lf, loops, run_seed(config.seed, i), config.step_budget);
    for (auto& [address, set] : r.observations) vs.values[address].merge(set);
    for (auto& d : r.diagnostics)
      if (std::none_of(vs.diagnostics.begin(), vs.diagnostics.end(), [&](const Diagnostic& e) {
            return e.message == d.message && e.address == d.address;
          }))
        vs.diagnostics.push_back(std::move(d));
    ++vs.run_count;
  }
  return vs;
}

}  // namespace keysim
