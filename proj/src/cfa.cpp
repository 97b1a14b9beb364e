#include "cpsopt/cfa.hpp"

#include <algorithm>

namespace cpsopt {

int AbstractValue::depth() const {
  if (kind_ != Kind::Tuple) return 0;
  int d = 0;
  for (const AbstractValue& e : elems_) d = std::max(d, e.depth());
  return d + 1;
}

std::string AbstractValue::to_string(const IrContext& ctx) const {
  switch (kind_) {
    case Kind::Bot: return "BOT";
    case Kind::Top: return "TOP";
    case Kind::Bool: return bval_ ? "BOOL(true)" : "BOOL(false)";
    case Kind::Lambdas: {
      std::string s = "LAMBDAS{";
      bool first = true;
      for (VarId f : funs_) {
        if (!first) s += ",";
        s += ctx.name(f);
        first = false;
      }
      return s + "}";
    }
    case Kind::Tuple: {
      std::string s = "TUPLE[";
      for (size_t i = 0; i < elems_.size(); i++) {
        if (i) s += ",";
        s += elems_[i].to_string(ctx);
      }
      return s + "]";
    }
  }
  return "?";
}

namespace {

// Collects every function id inside a value; used to mark functions as
// escaping when the value they sit in is absorbed into TOP.
void funs_within(const AbstractValue& v, std::set<VarId>& out) {
  if (v.kind() == AbstractValue::Kind::Lambdas) {
    out.insert(v.funs().begin(), v.funs().end());
  } else if (v.kind() == AbstractValue::Kind::Tuple) {
    for (const AbstractValue& e : v.elems()) funs_within(e, out);
  }
}

using Sink = std::set<VarId>*;

void sink_funs(const AbstractValue& v, Sink sink) {
  if (sink) funs_within(v, *sink);
}

AbstractValue join_impl(const AbstractValue& a, const AbstractValue& b,
                        int depth, int limit, Sink sink) {
  using K = AbstractValue::Kind;
  if (a.kind() == K::Bot) return b;
  if (b.kind() == K::Bot) return a;
  if (a.kind() == K::Top || b.kind() == K::Top) {
    // Everything folded into TOP loses its identity: any functions in
    // either side can now be called from unknown sites.
    sink_funs(a, sink);
    sink_funs(b, sink);
    return AbstractValue::top();
  }
  if (a.kind() == K::Bool && b.kind() == K::Bool) {
    if (a.bool_value() == b.bool_value()) return a;
    return AbstractValue::top();  // both constants flow here
  }
  if (a.kind() == K::Lambdas && b.kind() == K::Lambdas) {
    std::set<VarId> u = a.funs();
    u.insert(b.funs().begin(), b.funs().end());
    return AbstractValue::lambdas(std::move(u));
  }
  if (a.kind() == K::Tuple && b.kind() == K::Tuple &&
      a.elems().size() == b.elems().size()) {
    if (depth >= limit) {
      sink_funs(a, sink);
      sink_funs(b, sink);
      return AbstractValue::top();
    }
    std::vector<AbstractValue> elems;
    elems.reserve(a.elems().size());
    for (size_t i = 0; i < a.elems().size(); i++)
      elems.push_back(
          join_impl(a.elems()[i], b.elems()[i], depth + 1, limit, sink));
    return AbstractValue::tuple(std::move(elems));
  }
  // Incomparable kinds (or tuples of unequal arity): the safest sound
  // answer is TOP, and any functions involved escape with it.
  sink_funs(a, sink);
  sink_funs(b, sink);
  return AbstractValue::top();
}

// Widen a freshly constructed value so no tuple sits at depth >= limit.
AbstractValue clamp_depth(const AbstractValue& v, int depth, int limit,
                          Sink sink) {
  if (v.kind() != AbstractValue::Kind::Tuple) return v;
  if (depth >= limit) {
    sink_funs(v, sink);
    return AbstractValue::top();
  }
  std::vector<AbstractValue> elems;
  elems.reserve(v.elems().size());
  for (const AbstractValue& e : v.elems())
    elems.push_back(clamp_depth(e, depth + 1, limit, sink));
  return AbstractValue::tuple(std::move(elems));
}

class Analyzer {
 public:
  Analyzer(const Program& p, const CfaOptions& opts)
      : p_(p), opts_(opts), ix_(build_index(p)) {}

  CfaResult run() {
    r_.depth_limit = opts_.depth_limit;
    r_.escaping.insert(p_.entry.f);
    constexpr int kRoundCap = 100000;
    for (;;) {
      changed_ = false;
      r_.iterations++;
      if (r_.iterations > kRoundCap)
        throw InternalError("control-flow analysis failed to stabilize");
      walk_lambda(p_.entry);
      feed_escaping();
      if (opts_.on_round) opts_.on_round(r_.flow);
      if (!changed_) break;
    }
    classify_sites();
    return std::move(r_);
  }

 private:
  const AbstractValue& get(VarId v) const {
    static const AbstractValue bot = AbstractValue::bot();
    auto it = r_.flow.find(v);
    return it == r_.flow.end() ? bot : it->second;
  }

  void upd(VarId v, const AbstractValue& add) {
    if (add.is_bot()) return;
    auto it = r_.flow.find(v);
    if (it == r_.flow.end()) {
      AbstractValue nv =
          join_impl(AbstractValue::bot(), add, 0, opts_.depth_limit, sink());
      r_.flow.emplace(v, std::move(nv));
      changed_ = true;
      return;
    }
    AbstractValue nv = join_impl(it->second, add, 0, opts_.depth_limit, sink());
    if (nv != it->second) {
      it->second = std::move(nv);
      changed_ = true;
    }
  }

  Sink sink() { return &pending_escapes_; }

  void mark_escaping(const AbstractValue& v) { sink_funs(v, sink()); }

  void absorb_pending() {
    for (VarId f : pending_escapes_)
      if (r_.escaping.insert(f).second) changed_ = true;
    pending_escapes_.clear();
  }

  // One top-down pass over the whole program.
  void walk_lambda(const Lambda& l) { walk(*l.body); }

  void walk(const Expr& e) {
    std::visit(
        overloaded{
            [&](const Let& t) {
              upd(t.binders.at(0), transfer(t.rhs));
              walk(*t.body);
            },
            [&](const Fun& t) {
              for (const Lambda& l : t.funs)
                upd(l.f, AbstractValue::lambdas({l.f}));
              for (const Lambda& l : t.funs) walk_lambda(l);
              walk(*t.body);
            },
            [&](const Cont& t) {
              upd(t.k.f, AbstractValue::lambdas({t.k.f}));
              walk_lambda(t.k);
              walk(*t.body);
            },
            [&](const If& t) {
              if (t.cond.kind == Cond::Kind::IsTrue) {
                const AbstractValue& c = get(t.cond.args.at(0));
                if (c.kind() == AbstractValue::Kind::Bool) {
                  walk(c.bool_value() ? *t.then_arm : *t.else_arm);
                  return;
                }
                if (c.is_bot()) return;  // branch not reached yet
              }
              walk(*t.then_arm);
              walk(*t.else_arm);
            },
            [&](const Switch& t) {
              const AbstractValue& s = get(t.scrutinee);
              if (s.is_bot()) return;  // not reached yet
              if (s.kind() == AbstractValue::Kind::Bool) {
                int64_t tag = s.bool_value() ? 1 : 0;
                for (const SwitchArm& a : t.arms) {
                  if (a.tag == tag) {
                    walk(*a.body);
                    return;
                  }
                }
                if (t.default_arm) walk(*t.default_arm);
                return;
              }
              for (const SwitchArm& a : t.arms) walk(*a.body);
              if (t.default_arm) walk(*t.default_arm);
            },
            [&](const Apply& t) { flow_call(t.target, t.args, t.rets); },
            [&](const Throw& t) { flow_call(t.target, t.args, {}); },
        },
        e.term);
    absorb_pending();
  }

  void flow_call(VarId target, const std::vector<VarId>& args,
                 const std::vector<VarId>& rets) {
    const AbstractValue& tv = get(target);
    if (tv.kind() == AbstractValue::Kind::Lambdas) {
      for (VarId f : tv.funs()) {
        auto it = ix_.lambdas.find(f);
        if (it == ix_.lambdas.end())
          throw InternalError("abstract call target is not a function");
        const Lambda* l = it->second;
        if (l->params.size() != args.size() || l->rets.size() != rets.size())
          continue;  // arity mismatch would be a dynamic error, no flow
        for (size_t i = 0; i < args.size(); i++)
          upd(l->params[i], get(args[i]));
        for (size_t i = 0; i < rets.size(); i++)
          upd(l->rets[i], get(rets[i]));
      }
    } else if (tv.is_top()) {
      // Arguments handed to an unknown callee escape.
      for (VarId a : args) mark_escaping(get(a));
      for (VarId r : rets) mark_escaping(get(r));
    }
    // BOT (never reached) and non-function values: no flow.
  }

  AbstractValue transfer(const Rhs& rhs) {
    return std::visit(
        overloaded{
            [&](const ConstInt&) { return AbstractValue::top(); },
            [&](const ConstBool& c) { return AbstractValue::boolean(c.value); },
            [&](const Alloc& c) {
              std::vector<AbstractValue> elems;
              elems.reserve(c.fields.size());
              bool any = false;
              for (VarId v : c.fields) {
                const AbstractValue& e = get(v);
                any = any || !e.is_bot();
                elems.push_back(e);
              }
              // A tuple built from entirely unreached operands is itself
              // unreached.
              if (!any && !c.fields.empty()) return AbstractValue::bot();
              return clamp_depth(AbstractValue::tuple(std::move(elems)), 0,
                                 opts_.depth_limit, sink());
            },
            [&](const Select& c) {
              const AbstractValue& tv = get(c.tuple);
              if (tv.is_top()) return AbstractValue::top();
              if (tv.kind() == AbstractValue::Kind::Tuple) {
                if (c.index < tv.elems().size()) return tv.elems()[c.index];
                return AbstractValue::bot();  // out of tracked range
              }
              return AbstractValue::bot();  // unreached or ill-typed
            },
            [&](const Prim&) {
              // Arithmetic and comparisons are untracked; booleans only
              // arise from constants.
              return AbstractValue::top();
            },
            [&](const VarCopy& c) { return get(c.source); },
        },
        rhs);
  }

  void feed_escaping() {
    // Escaping functions can be called from unknown sites with unknown
    // arguments and continuations.
    std::vector<VarId> snapshot(r_.escaping.begin(), r_.escaping.end());
    for (VarId f : snapshot) {
      auto it = ix_.lambdas.find(f);
      if (it == ix_.lambdas.end()) continue;
      for (VarId v : it->second->params) upd(v, AbstractValue::top());
      for (VarId v : it->second->rets) upd(v, AbstractValue::top());
    }
    absorb_pending();
  }

  void classify_sites() {
    for (auto& [pt, e] : ix_.points) {
      const VarId* target = nullptr;
      if (auto* a = std::get_if<Apply>(&e->term))
        target = &a->target;
      else if (auto* t = std::get_if<Throw>(&e->term))
        target = &t->target;
      if (!target) continue;
      const AbstractValue& tv = get(*target);
      CallTargets ct;
      if (tv.is_top()) {
        ct.kind = CallTargets::Kind::Top;
      } else if (tv.kind() == AbstractValue::Kind::Lambdas) {
        ct.kind = CallTargets::Kind::Known;
        ct.funs = tv.funs();
      } else {
        ct.kind = CallTargets::Kind::Bot;  // unreached or ill-typed
      }
      r_.targets.emplace(pt, std::move(ct));
    }
  }

  const Program& p_;
  const CfaOptions& opts_;
  ProgramIndex ix_;
  CfaResult r_;
  bool changed_ = false;
  std::set<VarId> pending_escapes_;
};

}  // namespace

AbstractValue join(const AbstractValue& a, const AbstractValue& b, int depth,
                   int depth_limit) {
  return join_impl(a, b, depth, depth_limit, nullptr);
}

const AbstractValue& CfaResult::value_of(VarId v) const {
  static const AbstractValue bot = AbstractValue::bot();
  auto it = flow.find(v);
  return it == flow.end() ? bot : it->second;
}

CfaResult analyze(const Program& p, const CfaOptions& opts) {
  return Analyzer(p, opts).run();
}

const CallTargets& call_targets(const CfaResult& r, ProgPoint site) {
  auto it = r.targets.find(site);
  if (it == r.targets.end())
    throw UnknownSite("program point " + std::to_string(site.raw) +
                      " does not label a call site");
  return it->second;
}

}  // namespace cpsopt
