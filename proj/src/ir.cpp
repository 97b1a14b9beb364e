#include "cpsopt/ir.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace cpsopt {

const char* prim_op_name(PrimOp op) {
  switch (op) {
    case PrimOp::Add: return "add";
    case PrimOp::Sub: return "sub";
    case PrimOp::Mul: return "mul";
    case PrimOp::Div: return "div";
    case PrimOp::Lt: return "lt";
    case PrimOp::Leq: return "leq";
    case PrimOp::Eq: return "eq";
  }
  return "?";
}

std::optional<PrimOp> prim_op_from(std::string_view name) {
  if (name == "add") return PrimOp::Add;
  if (name == "sub") return PrimOp::Sub;
  if (name == "mul") return PrimOp::Mul;
  if (name == "div") return PrimOp::Div;
  if (name == "lt") return PrimOp::Lt;
  if (name == "leq") return PrimOp::Leq;
  if (name == "eq") return PrimOp::Eq;
  return std::nullopt;
}

int prim_op_arity(PrimOp) { return 2; }

namespace {

// Generic walk calling `fe` on every expression and `fl` on every lambda
// (including the entry lambda when walked via walk_program).
template <typename FE, typename FL>
void walk_expr(const Expr& e, FE&& fe, FL&& fl) {
  fe(e);
  std::visit(overloaded{
                 [&](const Let& t) { walk_expr(*t.body, fe, fl); },
                 [&](const Fun& t) {
                   for (const Lambda& l : t.funs) {
                     fl(l);
                     walk_expr(*l.body, fe, fl);
                   }
                   walk_expr(*t.body, fe, fl);
                 },
                 [&](const Cont& t) {
                   fl(t.k);
                   walk_expr(*t.k.body, fe, fl);
                   walk_expr(*t.body, fe, fl);
                 },
                 [&](const If& t) {
                   walk_expr(*t.then_arm, fe, fl);
                   walk_expr(*t.else_arm, fe, fl);
                 },
                 [&](const Switch& t) {
                   for (const SwitchArm& a : t.arms) walk_expr(*a.body, fe, fl);
                   if (t.default_arm) walk_expr(*t.default_arm, fe, fl);
                 },
                 [&](const Apply&) {},
                 [&](const Throw&) {},
             },
             e.term);
}

template <typename FE, typename FL>
void walk_program(const Program& p, FE&& fe, FL&& fl) {
  fl(p.entry);
  walk_expr(*p.entry.body, fe, fl);
}

}  // namespace

ProgramIndex build_index(const Program& p) {
  ProgramIndex ix;
  walk_program(
      p, [&](const Expr& e) { ix.points[e.point] = &e; },
      [&](const Lambda& l) { ix.lambdas[l.f] = &l; });
  return ix;
}

namespace {

void free_vars_expr(const Expr& e, std::set<VarId>& bound,
                    std::set<VarId>& free);

void use(VarId v, const std::set<VarId>& bound, std::set<VarId>& free) {
  if (!bound.count(v)) free.insert(v);
}

void free_vars_lambda_inner(const Lambda& l, std::set<VarId>& bound,
                            std::set<VarId>& free) {
  std::vector<VarId> added;
  auto bind = [&](VarId v) {
    if (bound.insert(v).second) added.push_back(v);
  };
  for (VarId v : l.params) bind(v);
  for (VarId v : l.rets) bind(v);
  free_vars_expr(*l.body, bound, free);
  for (VarId v : added) bound.erase(v);
}

void free_vars_expr(const Expr& e, std::set<VarId>& bound,
                    std::set<VarId>& free) {
  std::visit(
      overloaded{
          [&](const Let& t) {
            std::visit(overloaded{
                           [&](const ConstInt&) {},
                           [&](const ConstBool&) {},
                           [&](const Alloc& r) {
                             for (VarId v : r.fields) use(v, bound, free);
                           },
                           [&](const Select& r) { use(r.tuple, bound, free); },
                           [&](const Prim& r) {
                             for (VarId v : r.args) use(v, bound, free);
                           },
                           [&](const VarCopy& r) { use(r.source, bound, free); },
                       },
                       t.rhs);
            std::vector<VarId> added;
            for (VarId v : t.binders)
              if (bound.insert(v).second) added.push_back(v);
            free_vars_expr(*t.body, bound, free);
            for (VarId v : added) bound.erase(v);
          },
          [&](const Fun& t) {
            std::vector<VarId> added;
            for (const Lambda& l : t.funs)
              if (bound.insert(l.f).second) added.push_back(l.f);
            for (const Lambda& l : t.funs)
              free_vars_lambda_inner(l, bound, free);
            free_vars_expr(*t.body, bound, free);
            for (VarId v : added) bound.erase(v);
          },
          [&](const Cont& t) {
            std::vector<VarId> added;
            if (bound.insert(t.k.f).second) added.push_back(t.k.f);
            free_vars_lambda_inner(t.k, bound, free);
            free_vars_expr(*t.body, bound, free);
            for (VarId v : added) bound.erase(v);
          },
          [&](const If& t) {
            for (VarId v : t.cond.args) use(v, bound, free);
            free_vars_expr(*t.then_arm, bound, free);
            free_vars_expr(*t.else_arm, bound, free);
          },
          [&](const Switch& t) {
            use(t.scrutinee, bound, free);
            for (const SwitchArm& a : t.arms)
              free_vars_expr(*a.body, bound, free);
            if (t.default_arm) free_vars_expr(*t.default_arm, bound, free);
          },
          [&](const Apply& t) {
            use(t.target, bound, free);
            for (VarId v : t.args) use(v, bound, free);
            for (VarId v : t.rets) use(v, bound, free);
          },
          [&](const Throw& t) {
            use(t.target, bound, free);
            for (VarId v : t.args) use(v, bound, free);
          },
      },
      e.term);
}

}  // namespace

std::set<VarId> free_vars(const Lambda& l) {
  std::set<VarId> bound, free;
  free_vars_lambda_inner(l, bound, free);
  return free;
}

namespace {

class WellFormedChecker {
 public:
  explicit WellFormedChecker(const Program& p) : p_(p) {}

  std::vector<Violation> run() {
    bind(p_.entry.f, entry_point());
    check_lambda(p_.entry);
    return std::move(out_);
  }

 private:
  ProgPoint entry_point() const { return p_.entry.body->point; }

  void report(ProgPoint at, std::string msg) {
    out_.push_back({at, std::move(msg)});
  }

  void bind(VarId v, ProgPoint at) {
    if (!seen_binders_.insert(v.raw).second)
      report(at, "duplicate binder '" + p_.ctx->name(v) + "'");
    scope_.insert(v.raw);
  }
  void unbind(VarId v) { scope_.erase(v.raw); }

  void use(VarId v, ProgPoint at) {
    if (!scope_.count(v.raw))
      report(at, "unbound variable '" + p_.ctx->name(v) + "'");
  }

  void check_lambda(const Lambda& l) {
    ProgPoint at = l.body->point;
    for (VarId v : l.params) bind(v, at);
    for (VarId v : l.rets) bind(v, at);
    check_expr(*l.body);
    for (VarId v : l.params) unbind(v);
    for (VarId v : l.rets) unbind(v);
  }

  void check_expr(const Expr& e) {
    ProgPoint at = e.point;
    std::visit(
        overloaded{
            [&](const Let& t) {
              if (t.binders.size() != 1)
                report(at, "let must bind exactly one variable");
              std::visit(
                  overloaded{
                      [&](const ConstInt&) {},
                      [&](const ConstBool&) {},
                      [&](const Alloc& r) {
                        for (VarId v : r.fields) use(v, at);
                      },
                      [&](const Select& r) { use(r.tuple, at); },
                      [&](const Prim& r) {
                        if (static_cast<int>(r.args.size()) !=
                            prim_op_arity(r.op))
                          report(at, std::string("prim '") +
                                         prim_op_name(r.op) +
                                         "' expects " +
                                         std::to_string(prim_op_arity(r.op)) +
                                         " arguments");
                        for (VarId v : r.args) use(v, at);
                      },
                      [&](const VarCopy& r) { use(r.source, at); },
                  },
                  t.rhs);
              for (VarId v : t.binders) bind(v, at);
              check_expr(*t.body);
              for (VarId v : t.binders) unbind(v);
            },
            [&](const Fun& t) {
              if (t.funs.empty()) report(at, "empty fun group");
              for (const Lambda& l : t.funs) bind(l.f, at);
              for (const Lambda& l : t.funs) check_lambda(l);
              check_expr(*t.body);
              for (const Lambda& l : t.funs) unbind(l.f);
            },
            [&](const Cont& t) {
              if (!t.k.rets.empty())
                report(at, "continuation '" + p_.ctx->name(t.k.f) +
                               "' must not take return continuations");
              bind(t.k.f, at);
              check_lambda(t.k);
              check_expr(*t.body);
              unbind(t.k.f);
            },
            [&](const If& t) {
              size_t want = t.cond.kind == Cond::Kind::IsTrue ? 1 : 2;
              if (t.cond.args.size() != want)
                report(at, "malformed branch condition");
              for (VarId v : t.cond.args) use(v, at);
              check_expr(*t.then_arm);
              check_expr(*t.else_arm);
            },
            [&](const Switch& t) {
              use(t.scrutinee, at);
              std::set<int64_t> tags;
              for (const SwitchArm& a : t.arms) {
                if (!tags.insert(a.tag).second)
                  report(at, "duplicate switch tag " + std::to_string(a.tag));
                check_expr(*a.body);
              }
              if (t.default_arm) check_expr(*t.default_arm);
            },
            [&](const Apply& t) {
              use(t.target, at);
              for (VarId v : t.args) use(v, at);
              for (VarId v : t.rets) use(v, at);
            },
            [&](const Throw& t) {
              use(t.target, at);
              for (VarId v : t.args) use(v, at);
            },
        },
        e.term);
  }

  const Program& p_;
  std::vector<Violation> out_;
  std::unordered_set<uint32_t> scope_;
  std::unordered_set<uint32_t> seen_binders_;
};

}  // namespace

std::vector<Violation> check_well_formed(const Program& p) {
  return WellFormedChecker(p).run();
}

namespace {

// Shared by clone (identity substitution, keep ids/points) and
// alpha_rename (fresh ids for binders, keep points).
class Copier {
 public:
  Copier(IrContext* ctx, bool fresh_ids) : ctx_(ctx), fresh_(fresh_ids) {}

  // Pre-seeded substitutions (used by the inliner).
  void substitute(VarId from, VarId to) { map_[from.raw] = to; }
  void set_fresh_points(bool b) { fresh_points_ = b; }

  Lambda copy_lambda(const Lambda& l) {
    Lambda out;
    out.f = rebind(l.f);
    for (VarId v : l.params) out.params.push_back(rebind(v));
    for (VarId v : l.rets) out.rets.push_back(rebind(v));
    out.body = copy(*l.body);
    return out;
  }

  ExprPtr copy(const Expr& e) {
    auto out = std::make_unique<Expr>();
    out->point = fresh_points_ ? ctx_->fresh_point() : e.point;
    out->term = std::visit(
        overloaded{
            [&](const Let& t) -> Term {
              Let n;
              n.rhs = copy_rhs(t.rhs);
              for (VarId v : t.binders) n.binders.push_back(rebind(v));
              n.body = copy(*t.body);
              return n;
            },
            [&](const Fun& t) -> Term {
              Fun n;
              // bind all group names first so sibling references resolve
              for (const Lambda& l : t.funs) rebind(l.f);
              for (const Lambda& l : t.funs) {
                Lambda nl;
                nl.f = ref(l.f);
                for (VarId v : l.params) nl.params.push_back(rebind(v));
                for (VarId v : l.rets) nl.rets.push_back(rebind(v));
                nl.body = copy(*l.body);
                n.funs.push_back(std::move(nl));
              }
              n.body = copy(*t.body);
              return n;
            },
            [&](const Cont& t) -> Term {
              Cont n;
              rebind(t.k.f);
              n.k.f = ref(t.k.f);
              for (VarId v : t.k.params) n.k.params.push_back(rebind(v));
              for (VarId v : t.k.rets) n.k.rets.push_back(rebind(v));
              n.k.body = copy(*t.k.body);
              n.body = copy(*t.body);
              return n;
            },
            [&](const If& t) -> Term {
              If n;
              n.cond.kind = t.cond.kind;
              for (VarId v : t.cond.args) n.cond.args.push_back(ref(v));
              n.then_arm = copy(*t.then_arm);
              n.else_arm = copy(*t.else_arm);
              return n;
            },
            [&](const Switch& t) -> Term {
              Switch n;
              n.scrutinee = ref(t.scrutinee);
              for (const SwitchArm& a : t.arms) {
                SwitchArm na;
                na.tag = a.tag;
                na.body = copy(*a.body);
                n.arms.push_back(std::move(na));
              }
              if (t.default_arm) n.default_arm = copy(*t.default_arm);
              return n;
            },
            [&](const Apply& t) -> Term {
              Apply n;
              n.target = ref(t.target);
              for (VarId v : t.args) n.args.push_back(ref(v));
              for (VarId v : t.rets) n.rets.push_back(ref(v));
              return n;
            },
            [&](const Throw& t) -> Term {
              Throw n;
              n.target = ref(t.target);
              for (VarId v : t.args) n.args.push_back(ref(v));
              return n;
            },
        },
        e.term);
    return out;
  }

 private:
  Rhs copy_rhs(const Rhs& r) {
    return std::visit(
        overloaded{
            [&](const ConstInt& c) -> Rhs { return c; },
            [&](const ConstBool& c) -> Rhs { return c; },
            [&](const Alloc& c) -> Rhs {
              Alloc n;
              for (VarId v : c.fields) n.fields.push_back(ref(v));
              return n;
            },
            [&](const Select& c) -> Rhs {
              return Select{c.index, ref(c.tuple)};
            },
            [&](const Prim& c) -> Rhs {
              Prim n;
              n.op = c.op;
              for (VarId v : c.args) n.args.push_back(ref(v));
              return n;
            },
            [&](const VarCopy& c) -> Rhs { return VarCopy{ref(c.source)}; },
        },
        r);
  }

  VarId rebind(VarId v) {
    if (!fresh_) return v;
    auto it = map_.find(v.raw);
    if (it != map_.end()) return it->second;
    VarId nv = ctx_->clone_var(v);
    map_[v.raw] = nv;
    return nv;
  }

  VarId ref(VarId v) {
    auto it = map_.find(v.raw);
    return it == map_.end() ? v : it->second;
  }

  IrContext* ctx_;
  bool fresh_;
  bool fresh_points_ = false;
  std::unordered_map<uint32_t, VarId> map_;
};

}  // namespace

ExprPtr clone_expr(const Expr& e) {
  Copier c(nullptr, false);
  return c.copy(e);
}

Lambda clone_lambda(const Lambda& l) {
  Copier c(nullptr, false);
  return c.copy_lambda(l);
}

Program clone_program(const Program& p) {
  Program out;
  out.ctx = p.ctx;
  out.entry = clone_lambda(p.entry);
  return out;
}

Program alpha_rename(const Program& p) {
  Copier c(p.ctx.get(), true);
  Program out;
  out.ctx = p.ctx;
  out.entry = c.copy_lambda(p.entry);
  return out;
}

ExprPtr instantiate_body(const Expr& body, IrContext& ctx,
                         const std::vector<std::pair<VarId, VarId>>& subst) {
  Copier c(&ctx, true);
  c.set_fresh_points(true);
  for (auto& [from, to] : subst) c.substitute(from, to);
  return c.copy(body);
}

int expr_count(const Expr& e) {
  int n = 0;
  walk_expr(
      e, [&](const Expr&) { n++; }, [](const Lambda&) {});
  return n;
}

}  // namespace cpsopt
