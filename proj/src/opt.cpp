#include "cpsopt/opt.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace cpsopt {

void PassStats::absorb(const PassStats& other) {
  branches_eliminated += other.branches_eliminated;
  copies_propagated += other.copies_propagated;
  functions_inlined += other.functions_inlined;
  params_removed += other.params_removed;
  branch_sites.insert(branch_sites.end(), other.branch_sites.begin(),
                      other.branch_sites.end());
  copy_sites.insert(copy_sites.end(), other.copy_sites.begin(),
                    other.copy_sites.end());
  inline_sites.insert(inline_sites.end(), other.inline_sites.begin(),
                      other.inline_sites.end());
}

const char* pass_kind_name(PassKind k) {
  switch (k) {
    case PassKind::BranchElim: return "branch-elim";
    case PassKind::CopyProp: return "copy-prop";
    case PassKind::Inline: return "inline";
    case PassKind::UselessVarElim: return "uve";
  }
  return "?";
}

std::optional<PassKind> pass_kind_from(std::string_view name) {
  if (name == "branch-elim") return PassKind::BranchElim;
  if (name == "copy-prop") return PassKind::CopyProp;
  if (name == "inline") return PassKind::Inline;
  if (name == "uve") return PassKind::UselessVarElim;
  return std::nullopt;
}

namespace {

// Lexical scope as a stack with O(1) membership.
class Scope {
 public:
  void push(VarId v) {
    vars_.insert(v);
    stack_.push_back(v);
  }
  size_t mark() const { return stack_.size(); }
  void pop_to(size_t m) {
    while (stack_.size() > m) {
      vars_.erase(stack_.back());
      stack_.pop_back();
    }
  }
  bool contains(VarId v) const { return vars_.count(v) > 0; }

 private:
  std::unordered_set<VarId> vars_;
  std::vector<VarId> stack_;
};

// ------------------------------------------------------------------
// Branch elimination.

class BranchEliminator {
 public:
  explicit BranchEliminator(const CfaResult& cfa) : cfa_(cfa) {}

  PassStats run(Program& p) {
    walk(*p.entry.body);
    return std::move(stats_);
  }

 private:
  bool known_bool(VarId x, bool* out) const {
    const AbstractValue& v = cfa_.value_of(x);
    if (v.kind() != AbstractValue::Kind::Bool) return false;
    *out = v.bool_value();
    return true;
  }

  void walk(Expr& e) {
    // A surviving arm can itself be a decided branch, so collapse until
    // this node settles before descending.
    while (try_collapse(e)) {
    }
    std::visit(overloaded{
                   [&](Let& t) { walk(*t.body); },
                   [&](Fun& t) {
                     for (Lambda& l : t.funs) walk(*l.body);
                     walk(*t.body);
                   },
                   [&](Cont& t) {
                     walk(*t.k.body);
                     walk(*t.body);
                   },
                   [&](If& t) {
                     walk(*t.then_arm);
                     walk(*t.else_arm);
                   },
                   [&](Switch& t) {
                     for (SwitchArm& a : t.arms) walk(*a.body);
                     if (t.default_arm) walk(*t.default_arm);
                   },
                   [&](Apply&) {},
                   [&](Throw&) {},
               },
               e.term);
  }

  bool try_collapse(Expr& e) {
    bool b = false;
    int64_t tag = 0;
    ExprPtr kept;
    if (auto* s = std::get_if<Switch>(&e.term)) {
      if (!known_bool(s->scrutinee, &b)) return false;
      tag = b ? 1 : 0;
      for (SwitchArm& a : s->arms)
        if (a.tag == tag) kept = std::move(a.body);
      if (!kept && s->default_arm) kept = std::move(s->default_arm);
    } else if (auto* i = std::get_if<If>(&e.term)) {
      if (i->cond.kind != Cond::Kind::IsTrue) return false;
      if (!known_bool(i->cond.args.at(0), &b)) return false;
      tag = b ? 1 : 0;
      kept = std::move(b ? i->then_arm : i->else_arm);
    } else {
      return false;
    }
    if (!kept) return false;  // no matching arm: leave the stuck site be
    stats_.branches_eliminated++;
    stats_.branch_sites.emplace_back(e.point, tag);
    Expr survivor = std::move(*kept);
    e = std::move(survivor);  // keeps the survivor's own point
    return true;
  }

  const CfaResult& cfa_;
  PassStats stats_;
};

// ------------------------------------------------------------------
// Copy propagation: call sites with exactly one possible callee are
// retargeted to name it directly.

class CopyPropagator {
 public:
  CopyPropagator(const CfaResult& cfa, const FlowGraph& graph,
                 const ReachMap& reach)
      : cfa_(cfa), graph_(graph), reach_(reach) {}

  PassStats run(Program& p) {
    scope_.push(p.entry.f);
    walk_lambda(p.entry);
    return std::move(stats_);
  }

 private:
  void walk_lambda(Lambda& l) {
    size_t m = scope_.mark();
    for (VarId v : l.params) scope_.push(v);
    for (VarId v : l.rets) scope_.push(v);
    walk(*l.body);
    scope_.pop_to(m);
  }

  void walk(Expr& e) {
    std::visit(
        overloaded{
            [&](Let& t) {
              size_t m = scope_.mark();
              for (VarId v : t.binders) scope_.push(v);
              walk(*t.body);
              scope_.pop_to(m);
            },
            [&](Fun& t) {
              size_t m = scope_.mark();
              for (Lambda& l : t.funs) scope_.push(l.f);
              for (Lambda& l : t.funs) walk_lambda(l);
              walk(*t.body);
              scope_.pop_to(m);
            },
            [&](Cont& t) {
              size_t m = scope_.mark();
              scope_.push(t.k.f);
              walk_lambda(t.k);
              walk(*t.body);
              scope_.pop_to(m);
            },
            [&](If& t) {
              walk(*t.then_arm);
              walk(*t.else_arm);
            },
            [&](Switch& t) {
              for (SwitchArm& a : t.arms) walk(*a.body);
              if (t.default_arm) walk(*t.default_arm);
            },
            [&](Apply& t) { retarget(e.point, t.target); },
            [&](Throw& t) { retarget(e.point, t.target); },
        },
        e.term);
  }

  void retarget(ProgPoint site, VarId& target) {
    const CallTargets& ct = call_targets(cfa_, site);
    if (ct.kind != CallTargets::Kind::Known || ct.funs.size() != 1) return;
    VarId f = *ct.funs.begin();
    if (f == target) return;
    if (!scope_.contains(f)) return;
    if (!consonant(reach_, graph_, f, site)) return;
    target = f;
    stats_.copies_propagated++;
    stats_.copy_sites.push_back(site);
  }

  const CfaResult& cfa_;
  const FlowGraph& graph_;
  const ReachMap& reach_;
  Scope scope_;
  PassStats stats_;
};

// ------------------------------------------------------------------
// Inlining.

class Inliner {
 public:
  Inliner(Program& p, const CfaResult& cfa, const FlowGraph& graph,
          const ReachMap& reach, int size_limit)
      : p_(p),
        cfa_(cfa),
        graph_(graph),
        reach_(reach),
        size_limit_(size_limit),
        index_(build_index(p)) {
    find_recursive();
  }

  PassStats run() {
    scope_.push(p_.entry.f);
    walk_lambda(p_.entry);
    return std::move(stats_);
  }

 private:
  // A function is off limits if it sits on a known-call cycle. Call
  // sites count against every enclosing lambda, not just the innermost,
  // so a function whose nested helper calls back into it is covered.
  void find_recursive() {
    std::vector<VarId> ids;
    std::unordered_map<VarId, NodeId> node_of;
    for (const auto& [v, l] : index_.lambdas) {
      node_of[v] = static_cast<NodeId>(ids.size());
      ids.push_back(v);
    }
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<VarId> enclosing{p_.entry.f};
    collect_edges(*p_.entry.body, enclosing, node_of, edges);
    SccResult scc = tarjan_scc(FlowGraph::raw(ids.size(), edges));
    for (size_t i = 0; i < ids.size(); i++)
      if (scc.cyclic[scc.comp[i]]) recursive_.insert(ids[i]);
  }

  void collect_edges(const Expr& e, std::vector<VarId>& enclosing,
                     const std::unordered_map<VarId, NodeId>& node_of,
                     std::vector<std::pair<NodeId, NodeId>>& edges) {
    auto at_site = [&](ProgPoint pt) {
      auto it = cfa_.targets.find(pt);
      if (it == cfa_.targets.end() ||
          it->second.kind != CallTargets::Kind::Known)
        return;
      for (VarId callee : it->second.funs)
        for (VarId from : enclosing)
          edges.emplace_back(node_of.at(from), node_of.at(callee));
    };
    auto in_lambda = [&](const Lambda& l) {
      enclosing.push_back(l.f);
      collect_edges(*l.body, enclosing, node_of, edges);
      enclosing.pop_back();
    };
    std::visit(overloaded{
                   [&](const Let& t) {
                     collect_edges(*t.body, enclosing, node_of, edges);
                   },
                   [&](const Fun& t) {
                     for (const Lambda& l : t.funs) in_lambda(l);
                     collect_edges(*t.body, enclosing, node_of, edges);
                   },
                   [&](const Cont& t) {
                     in_lambda(t.k);
                     collect_edges(*t.body, enclosing, node_of, edges);
                   },
                   [&](const If& t) {
                     collect_edges(*t.then_arm, enclosing, node_of, edges);
                     collect_edges(*t.else_arm, enclosing, node_of, edges);
                   },
                   [&](const Switch& t) {
                     for (const SwitchArm& a : t.arms)
                       collect_edges(*a.body, enclosing, node_of, edges);
                     if (t.default_arm)
                       collect_edges(*t.default_arm, enclosing, node_of,
                                     edges);
                   },
                   [&](const Apply&) { at_site(e.point); },
                   [&](const Throw&) { at_site(e.point); },
               },
               e.term);
  }

  void walk_lambda(Lambda& l) {
    size_t m = scope_.mark();
    for (VarId v : l.params) scope_.push(v);
    for (VarId v : l.rets) scope_.push(v);
    walk(*l.body);
    scope_.pop_to(m);
  }

  void walk(Expr& e) {
    // Call sites are leaves; handle them before visiting so the node can
    // be replaced wholesale without a dangling variant reference.
    if (std::holds_alternative<Apply>(e.term) ||
        std::holds_alternative<Throw>(e.term)) {
      try_inline(e);
      return;
    }
    std::visit(
        overloaded{
            [&](Let& t) {
              size_t m = scope_.mark();
              for (VarId v : t.binders) scope_.push(v);
              walk(*t.body);
              scope_.pop_to(m);
            },
            [&](Fun& t) {
              size_t m = scope_.mark();
              for (Lambda& l : t.funs) scope_.push(l.f);
              for (Lambda& l : t.funs) walk_lambda(l);
              walk(*t.body);
              scope_.pop_to(m);
            },
            [&](Cont& t) {
              size_t m = scope_.mark();
              scope_.push(t.k.f);
              walk_lambda(t.k);
              walk(*t.body);
              scope_.pop_to(m);
            },
            [&](If& t) {
              walk(*t.then_arm);
              walk(*t.else_arm);
            },
            [&](Switch& t) {
              for (SwitchArm& a : t.arms) walk(*a.body);
              if (t.default_arm) walk(*t.default_arm);
            },
            [&](Apply&) {},
            [&](Throw&) {},
        },
        e.term);
  }

  void try_inline(Expr& e) {
    // Sites created by an earlier inline in this pass carry fresh points
    // the analysis has never seen; they are skipped here.
    auto it = cfa_.targets.find(e.point);
    if (it == cfa_.targets.end()) return;
    const CallTargets& ct = it->second;
    if (ct.kind != CallTargets::Kind::Known || ct.funs.size() != 1) return;
    VarId f = *ct.funs.begin();
    if (f == p_.entry.f) return;

    const std::vector<VarId>* args = nullptr;
    const std::vector<VarId>* rets = nullptr;
    static const std::vector<VarId> no_rets;
    if (auto* a = std::get_if<Apply>(&e.term)) {
      args = &a->args;
      rets = &a->rets;
    } else {
      args = &std::get<Throw>(e.term).args;
      rets = &no_rets;
    }

    const Lambda* target = index_.lambdas.at(f);
    if (args->size() != target->params.size() ||
        rets->size() != target->rets.size())
      return;
    if (expr_count(*target->body) > size_limit_) return;
    if (recursive_.count(f)) return;
    for (VarId v : free_vars(*target))
      if (!scope_.contains(v)) return;
    if (!consonant(reach_, graph_, f, e.point)) return;

    std::vector<std::pair<VarId, VarId>> subst;
    for (size_t i = 0; i < args->size(); i++)
      subst.emplace_back(target->params[i], (*args)[i]);
    for (size_t i = 0; i < rets->size(); i++)
      subst.emplace_back(target->rets[i], (*rets)[i]);
    ExprPtr body = instantiate_body(*target->body, *p_.ctx, subst);

    stats_.functions_inlined++;
    stats_.inline_sites.push_back(e.point);
    e = std::move(*body);
  }

  Program& p_;
  const CfaResult& cfa_;
  const FlowGraph& graph_;
  const ReachMap& reach_;
  int size_limit_;
  ProgramIndex index_;
  std::unordered_set<VarId> recursive_;
  Scope scope_;
  PassStats stats_;
};

// ------------------------------------------------------------------
// Useless-variable elimination. One round computes which variables the
// program actually needs and rewrites; rounds repeat because removing a
// dead binding can turn a function's last value use into no use at all,
// unlocking its parameters next time around.

class UveRound {
 public:
  explicit UveRound(Program& p) : p_(p) {}

  // Returns true if the round changed the program.
  bool run(int* params_removed) {
    collect(*p_.entry.body);
    decide_eligible();
    build_dataflow();
    propagate();
    plan_removals();
    *params_removed += planned_param_removals_;
    if (!removable_lets_ && keep_mask_.empty()) return false;
    rewrite(*p_.entry.body);
    return true;
  }

 private:
  struct SiteRef {
    VarId target;
    size_t args = 0;
    size_t rets = 0;  // zero for throws
    bool is_apply = false;
  };

  // Pass 1: find every lambda, every call site, and every use of a
  // variable in value (non-target) position.
  void collect(const Expr& e) {
    std::visit(
        overloaded{
            [&](const Let& t) {
              std::visit(overloaded{
                             [&](const ConstInt&) {},
                             [&](const ConstBool&) {},
                             [&](const Alloc& r) {
                               for (VarId v : r.fields) value_use(v);
                             },
                             [&](const Select& r) { value_use(r.tuple); },
                             [&](const Prim& r) {
                               for (VarId v : r.args) value_use(v);
                             },
                             [&](const VarCopy& r) { value_use(r.source); },
                         },
                         t.rhs);
              collect(*t.body);
            },
            [&](const Fun& t) {
              for (const Lambda& l : t.funs) {
                lambdas_[l.f] = &l;
                collect(*l.body);
              }
              collect(*t.body);
            },
            [&](const Cont& t) {
              lambdas_[t.k.f] = &t.k;
              collect(*t.k.body);
              collect(*t.body);
            },
            [&](const If& t) {
              for (VarId v : t.cond.args) value_use(v);
              collect(*t.then_arm);
              collect(*t.else_arm);
            },
            [&](const Switch& t) {
              value_use(t.scrutinee);
              for (const SwitchArm& a : t.arms) collect(*a.body);
              if (t.default_arm) collect(*t.default_arm);
            },
            [&](const Apply& t) {
              sites_.push_back(
                  {t.target, t.args.size(), t.rets.size(), true});
              for (VarId v : t.args) value_use(v);
              for (VarId v : t.rets) value_use(v);
            },
            [&](const Throw& t) {
              sites_.push_back({t.target, t.args.size(), 0, false});
              for (VarId v : t.args) value_use(v);
            },
        },
        e.term);
  }

  void value_use(VarId v) { value_uses_.insert(v); }

  // A lambda's parameters are up for grabs only when its name never
  // escapes into a value position and every direct call already matches
  // its arity, so sites and parameters stay in lockstep.
  void decide_eligible() {
    for (const auto& [f, l] : lambdas_) {
      if (value_uses_.count(f)) continue;
      bool ok = true;
      for (const SiteRef& s : sites_) {
        if (s.target != f) continue;
        if (s.args != l->params.size() ||
            (s.is_apply ? s.rets != l->rets.size() : !l->rets.empty()))
          ok = false;
      }
      if (ok) eligible_.insert(f);
    }
  }

  void seed(VarId v) {
    if (useful_.insert(v).second) worklist_.push_back(v);
  }
  void edge(VarId if_useful, VarId then_useful) {
    deps_[if_useful].push_back(then_useful);
  }

  // Pass 2: seeds and conditional edges. Call targets, branch inputs,
  // return-continuation arguments, and anything reaching a non-eligible
  // callee are useful outright; a let operand matters only if its binder
  // does, and an argument to an eligible function only if the matching
  // parameter does.
  void build_dataflow() {
    dataflow(*p_.entry.body);
    for (VarId v : p_.entry.params) seed(v);
    for (VarId v : p_.entry.rets) seed(v);
    for (const auto& [f, l] : lambdas_) {
      for (VarId v : l->rets) seed(v);
      if (!eligible_.count(f))
        for (VarId v : l->params) seed(v);
    }
  }

  void dataflow(const Expr& e) {
    std::visit(
        overloaded{
            [&](const Let& t) {
              VarId b = t.binders.at(0);
              std::visit(overloaded{
                             [&](const ConstInt&) {},
                             [&](const ConstBool&) {},
                             [&](const Alloc& r) {
                               for (VarId v : r.fields) edge(b, v);
                             },
                             [&](const Select& r) { edge(b, r.tuple); },
                             [&](const Prim& r) {
                               for (VarId v : r.args) edge(b, v);
                             },
                             [&](const VarCopy& r) { edge(b, r.source); },
                         },
                         t.rhs);
              dataflow(*t.body);
            },
            [&](const Fun& t) {
              for (const Lambda& l : t.funs) dataflow(*l.body);
              dataflow(*t.body);
            },
            [&](const Cont& t) {
              dataflow(*t.k.body);
              dataflow(*t.body);
            },
            [&](const If& t) {
              for (VarId v : t.cond.args) seed(v);
              dataflow(*t.then_arm);
              dataflow(*t.else_arm);
            },
            [&](const Switch& t) {
              seed(t.scrutinee);
              for (const SwitchArm& a : t.arms) dataflow(*a.body);
              if (t.default_arm) dataflow(*t.default_arm);
            },
            [&](const Apply& t) {
              seed(t.target);
              for (VarId v : t.rets) seed(v);
              call_args(t.target, t.args);
            },
            [&](const Throw& t) {
              seed(t.target);
              call_args(t.target, t.args);
            },
        },
        e.term);
  }

  void call_args(VarId target, const std::vector<VarId>& args) {
    auto it = eligible_.count(target) ? lambdas_.find(target)
                                      : lambdas_.end();
    if (it == lambdas_.end()) {
      for (VarId v : args) seed(v);
      return;
    }
    const Lambda* l = it->second;
    for (size_t j = 0; j < args.size(); j++) edge(l->params[j], args[j]);
  }

  void propagate() {
    while (!worklist_.empty()) {
      VarId v = worklist_.back();
      worklist_.pop_back();
      auto it = deps_.find(v);
      if (it == deps_.end()) continue;
      for (VarId w : it->second) seed(w);
    }
  }

  void plan_removals() {
    for (VarId f : eligible_) {
      const Lambda* l = lambdas_.at(f);
      std::vector<bool> keep;
      bool any_removed = false;
      for (VarId pv : l->params) {
        bool k = useful_.count(pv) > 0;
        keep.push_back(k);
        if (!k) {
          any_removed = true;
          planned_param_removals_++;
        }
      }
      if (any_removed) keep_mask_[f] = std::move(keep);
    }
    removable_lets_ = false;
    scan_dead_lets(*p_.entry.body);
  }

  void scan_dead_lets(const Expr& e) {
    if (removable_lets_) return;
    std::visit(overloaded{
                   [&](const Let& t) {
                     if (!useful_.count(t.binders.at(0)))
                       removable_lets_ = true;
                     else
                       scan_dead_lets(*t.body);
                   },
                   [&](const Fun& t) {
                     for (const Lambda& l : t.funs) scan_dead_lets(*l.body);
                     scan_dead_lets(*t.body);
                   },
                   [&](const Cont& t) {
                     scan_dead_lets(*t.k.body);
                     scan_dead_lets(*t.body);
                   },
                   [&](const If& t) {
                     scan_dead_lets(*t.then_arm);
                     scan_dead_lets(*t.else_arm);
                   },
                   [&](const Switch& t) {
                     for (const SwitchArm& a : t.arms) scan_dead_lets(*a.body);
                     if (t.default_arm) scan_dead_lets(*t.default_arm);
                   },
                   [&](const Apply&) {},
                   [&](const Throw&) {},
               },
               e.term);
  }

  void prune_args(VarId target, std::vector<VarId>& args) {
    auto it = keep_mask_.find(target);
    if (it == keep_mask_.end()) return;
    const std::vector<bool>& keep = it->second;
    std::vector<VarId> kept;
    for (size_t j = 0; j < args.size(); j++)
      if (keep[j]) kept.push_back(args[j]);
    args = std::move(kept);
  }

  void prune_params(Lambda& l) {
    auto it = keep_mask_.find(l.f);
    if (it == keep_mask_.end()) return;
    const std::vector<bool>& keep = it->second;
    std::vector<VarId> kept;
    for (size_t j = 0; j < l.params.size(); j++)
      if (keep[j]) kept.push_back(l.params[j]);
    l.params = std::move(kept);
  }

  void rewrite(Expr& e) {
    // Dead bindings peel off the front until something live remains.
    while (true) {
      auto* t = std::get_if<Let>(&e.term);
      if (!t || useful_.count(t->binders.at(0))) break;
      ExprPtr body = std::move(t->body);
      Expr survivor = std::move(*body);
      e = std::move(survivor);
    }
    std::visit(overloaded{
                   [&](Let& t) { rewrite(*t.body); },
                   [&](Fun& t) {
                     for (Lambda& l : t.funs) {
                       prune_params(l);
                       rewrite(*l.body);
                     }
                     rewrite(*t.body);
                   },
                   [&](Cont& t) {
                     prune_params(t.k);
                     rewrite(*t.k.body);
                     rewrite(*t.body);
                   },
                   [&](If& t) {
                     rewrite(*t.then_arm);
                     rewrite(*t.else_arm);
                   },
                   [&](Switch& t) {
                     for (SwitchArm& a : t.arms) rewrite(*a.body);
                     if (t.default_arm) rewrite(*t.default_arm);
                   },
                   [&](Apply& t) { prune_args(t.target, t.args); },
                   [&](Throw& t) { prune_args(t.target, t.args); },
               },
               e.term);
  }

  Program& p_;
  std::unordered_map<VarId, const Lambda*> lambdas_;
  std::vector<SiteRef> sites_;
  std::unordered_set<VarId> value_uses_;
  std::unordered_set<VarId> eligible_;
  std::unordered_set<VarId> useful_;
  std::vector<VarId> worklist_;
  std::unordered_map<VarId, std::vector<VarId>> deps_;
  std::unordered_map<VarId, std::vector<bool>> keep_mask_;
  int planned_param_removals_ = 0;
  bool removable_lets_ = false;
};

}  // namespace

PassStats branch_eliminate(Program& p, const CfaResult& cfa) {
  return BranchEliminator(cfa).run(p);
}

PassStats copy_propagate(Program& p, const CfaResult& cfa,
                         const FlowGraph& graph, const ReachMap& reach) {
  return CopyPropagator(cfa, graph, reach).run(p);
}

PassStats inline_calls(Program& p, const CfaResult& cfa,
                       const FlowGraph& graph, const ReachMap& reach,
                       int size_limit) {
  return Inliner(p, cfa, graph, reach, size_limit).run();
}

PassStats useless_var_elim(Program& p) {
  PassStats stats;
  // Removing a binding can strip the last value use of a function name,
  // so iterate until a round changes nothing.
  for (;;) {
    UveRound round(p);
    if (!round.run(&stats.params_removed)) break;
  }
  return stats;
}

PassStats run_pipeline(Program& p, const std::vector<PassKind>& passes,
                       const PipelineOptions& opts) {
  PassStats total;
  std::optional<CfaResult> cfa;
  std::optional<FlowGraph> graph;
  std::optional<ReachMap> reach;

  auto ensure = [&](bool need_graph) {
    if (!cfa) {
      CfaOptions co;
      co.depth_limit = opts.depth_limit;
      cfa = analyze(p, co);
    }
    if (need_graph && !graph) {
      graph = build_graph(p, *cfa);
      reach = build_reachability(*graph);
    }
  };

  for (PassKind k : passes) {
    PassStats s;
    switch (k) {
      case PassKind::BranchElim:
        ensure(false);
        s = branch_eliminate(p, *cfa);
        break;
      case PassKind::CopyProp:
        ensure(true);
        s = copy_propagate(p, *cfa, *graph, *reach);
        break;
      case PassKind::Inline:
        ensure(true);
        s = inline_calls(p, *cfa, *graph, *reach, opts.inline_size_limit);
        break;
      case PassKind::UselessVarElim:
        s = useless_var_elim(p);
        break;
    }
    // Copy propagation only renames call targets, which changes neither
    // the flow facts nor the graph keyed by program points.
    if (s.changed() && k != PassKind::CopyProp) {
      cfa.reset();
      graph.reset();
      reach.reset();
    }
    std::vector<Violation> bad = check_well_formed(p);
    if (!bad.empty())
      throw InternalError(std::string(pass_kind_name(k)) +
                          " produced an ill-formed program: " +
                          bad.front().message);
    total.absorb(s);
  }
  return total;
}

}  // namespace cpsopt
