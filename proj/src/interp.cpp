#include "cpsopt/interp.hpp"

#include <unordered_map>

namespace cpsopt {

namespace {

int64_t wrap_add(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) +
                              static_cast<uint64_t>(b));
}
int64_t wrap_sub(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) -
                              static_cast<uint64_t>(b));
}
int64_t wrap_mul(int64_t a, int64_t b) {
  return static_cast<int64_t>(static_cast<uint64_t>(a) *
                              static_cast<uint64_t>(b));
}

class Machine {
 public:
  Machine(const Program& p, uint64_t fuel)
      : p_(p), fuel_(fuel), arena_(std::make_shared<EvalArena>()) {
    // Free variables each fun group must capture, keyed by the Fun/Cont
    // term address. Precomputed so closure creation is a cheap copy.
    collect_captures(*p.entry.body);
  }

  EvalResult run() {
    // Entry activation: no params, halt bound to the halt continuation.
    locals_.emplace_back(p_.halt(), arena_->make(Value{HaltK{}}));
    cap_ = nullptr;
    const Expr* pc = p_.entry.body.get();
    for (;;) {
      switch (step(pc)) {
        case StepResult::Continue:
          pc = next_;
          break;
        case StepResult::Halted: {
          EvalResult r;
          r.outcome = EvalResult::Outcome::Halted;
          r.value = halted_;
          r.trace = std::move(trace_);
          r.arena = arena_;
          return r;
        }
        case StepResult::OutOfFuel: {
          EvalResult r;
          r.outcome = EvalResult::Outcome::OutOfFuel;
          r.trace = std::move(trace_);
          r.arena = arena_;
          return r;
        }
      }
    }
  }

 private:
  enum class StepResult { Continue, Halted, OutOfFuel };

  [[noreturn]] void fail(const std::string& msg) const {
    throw EvalError(msg);
  }

  const Value* lookup(VarId v) const {
    for (auto it = locals_.rbegin(); it != locals_.rend(); ++it)
      if (it->first == v) return it->second;
    if (cap_) {
      for (const auto& [cv, val] : cap_->captured)
        if (cv == v) return val;
      for (const Lambda* l : cap_->group)
        if (l->f == v)
          return arena_->make(Value{ClosV{l, cap_}});
    }
    throw EvalError("internal: variable '" + p_.ctx->name(v) +
                    "' missing at runtime");
  }

  int64_t as_int(const Value* v, const char* what) const {
    if (auto* i = std::get_if<IntV>(&v->v)) return i->value;
    fail(std::string("expected an integer in ") + what);
  }
  bool as_bool(const Value* v, const char* what) const {
    if (auto* b = std::get_if<BoolV>(&v->v)) return b->value;
    fail(std::string("expected a boolean in ") + what);
  }

  const Value* eval_rhs(const Rhs& r) {
    return std::visit(
        overloaded{
            [&](const ConstInt& c) { return arena_->make(Value{IntV{c.value}}); },
            [&](const ConstBool& c) {
              return arena_->make(Value{BoolV{c.value}});
            },
            [&](const Alloc& c) {
              TupleV t;
              t.fields.reserve(c.fields.size());
              for (VarId v : c.fields) t.fields.push_back(lookup(v));
              return arena_->make(Value{std::move(t)});
            },
            [&](const Select& c) -> const Value* {
              const Value* tup = lookup(c.tuple);
              auto* t = std::get_if<TupleV>(&tup->v);
              if (!t) fail("select from a non-tuple");
              if (c.index >= t->fields.size())
                fail("select index " + std::to_string(c.index) +
                     " out of range for a " +
                     std::to_string(t->fields.size()) + "-tuple");
              return t->fields[c.index];
            },
            [&](const Prim& c) -> const Value* {
              const Value* a = lookup(c.args.at(0));
              const Value* b = lookup(c.args.at(1));
              switch (c.op) {
                case PrimOp::Add:
                  return arena_->make(Value{IntV{wrap_add(
                      as_int(a, "add"), as_int(b, "add"))}});
                case PrimOp::Sub:
                  return arena_->make(Value{IntV{wrap_sub(
                      as_int(a, "sub"), as_int(b, "sub"))}});
                case PrimOp::Mul:
                  return arena_->make(Value{IntV{wrap_mul(
                      as_int(a, "mul"), as_int(b, "mul"))}});
                case PrimOp::Div: {
                  int64_t x = as_int(a, "div"), y = as_int(b, "div");
                  if (y == 0) fail("division by zero");
                  if (x == INT64_MIN && y == -1)
                    return arena_->make(Value{IntV{INT64_MIN}});
                  return arena_->make(Value{IntV{x / y}});
                }
                case PrimOp::Lt:
                  return arena_->make(Value{
                      BoolV{as_int(a, "lt") < as_int(b, "lt")}});
                case PrimOp::Leq:
                  return arena_->make(Value{
                      BoolV{as_int(a, "leq") <= as_int(b, "leq")}});
                case PrimOp::Eq: {
                  if (auto* ai = std::get_if<IntV>(&a->v)) {
                    return arena_->make(
                        Value{BoolV{ai->value == as_int(b, "eq")}});
                  }
                  if (auto* ab = std::get_if<BoolV>(&a->v)) {
                    return arena_->make(
                        Value{BoolV{ab->value == as_bool(b, "eq")}});
                  }
                  fail("eq expects two integers or two booleans");
                }
              }
              fail("unreachable prim");
            },
            [&](const VarCopy& c) { return lookup(c.source); },
        },
        r);
  }

  // Build the shared environment for a fun group.
  const GroupEnv* close_group(const void* key,
                              const std::vector<const Lambda*>& lams) {
    GroupEnv* env = arena_->make_env();
    env->group = lams;
    for (VarId v : captures_.at(key)) env->captured.emplace_back(v, lookup(v));
    return env;
  }

  StepResult enter_call(ProgPoint site, const Value* target,
                        const std::vector<const Value*>& args,
                        const std::vector<const Value*>& rets) {
    if (std::get_if<HaltK>(&target->v)) {
      if (args.size() != 1) fail("halt expects exactly one argument");
      halted_ = args[0];
      return StepResult::Halted;
    }
    auto* clos = std::get_if<ClosV>(&target->v);
    if (!clos) fail("call of a non-function value");
    if (fuel_ == 0) return StepResult::OutOfFuel;
    fuel_--;
    trace_.calls.push_back({site, clos->lam->f});
    const Lambda* l = clos->lam;
    if (l->params.size() != args.size())
      fail("function '" + p_.ctx->name(l->f) + "' called with " +
           std::to_string(args.size()) + " arguments, expects " +
           std::to_string(l->params.size()));
    if (l->rets.size() != rets.size())
      fail("function '" + p_.ctx->name(l->f) + "' called with " +
           std::to_string(rets.size()) + " return continuations, expects " +
           std::to_string(l->rets.size()));
    locals_.clear();
    for (size_t i = 0; i < args.size(); i++)
      locals_.emplace_back(l->params[i], args[i]);
    for (size_t i = 0; i < rets.size(); i++)
      locals_.emplace_back(l->rets[i], rets[i]);
    cap_ = clos->env;
    next_ = l->body.get();
    return StepResult::Continue;
  }

  StepResult step(const Expr* e) {
    return std::visit(
        overloaded{
            [&](const Let& t) {
              const Value* v = eval_rhs(t.rhs);
              locals_.emplace_back(t.binders.at(0), v);
              next_ = t.body.get();
              return StepResult::Continue;
            },
            [&](const Fun& t) {
              std::vector<const Lambda*> lams;
              for (const Lambda& l : t.funs) lams.push_back(&l);
              const GroupEnv* env = close_group(&t, lams);
              for (const Lambda* l : lams)
                locals_.emplace_back(l->f,
                                     arena_->make(Value{ClosV{l, env}}));
              next_ = t.body.get();
              return StepResult::Continue;
            },
            [&](const Cont& t) {
              const GroupEnv* env = close_group(&t, {&t.k});
              locals_.emplace_back(t.k.f,
                                   arena_->make(Value{ClosV{&t.k, env}}));
              next_ = t.body.get();
              return StepResult::Continue;
            },
            [&](const If& t) {
              bool taken;
              if (t.cond.kind == Cond::Kind::IsTrue) {
                taken = as_bool(lookup(t.cond.args.at(0)), "if");
              } else {
                int64_t a = as_int(lookup(t.cond.args.at(0)), "compare");
                int64_t b = as_int(lookup(t.cond.args.at(1)), "compare");
                taken = t.cond.kind == Cond::Kind::Lt    ? a < b
                        : t.cond.kind == Cond::Kind::Leq ? a <= b
                                                         : a == b;
              }
              next_ = taken ? t.then_arm.get() : t.else_arm.get();
              return StepResult::Continue;
            },
            [&](const Switch& t) {
              const Value* sv = lookup(t.scrutinee);
              int64_t tag;
              if (auto* i = std::get_if<IntV>(&sv->v))
                tag = i->value;
              else if (auto* b = std::get_if<BoolV>(&sv->v))
                tag = b->value ? 1 : 0;
              else
                fail("switch on a non-integer, non-boolean value");
              for (const SwitchArm& a : t.arms) {
                if (a.tag == tag) {
                  trace_.arms.push_back({e->point, tag});
                  next_ = a.body.get();
                  return StepResult::Continue;
                }
              }
              if (t.default_arm) {
                trace_.arms.push_back({e->point, tag});
                next_ = t.default_arm.get();
                return StepResult::Continue;
              }
              fail("switch fell through: no arm for tag " +
                   std::to_string(tag));
            },
            [&](const Apply& t) {
              const Value* target = lookup(t.target);
              std::vector<const Value*> args, rets;
              args.reserve(t.args.size());
              rets.reserve(t.rets.size());
              for (VarId v : t.args) args.push_back(lookup(v));
              for (VarId v : t.rets) rets.push_back(lookup(v));
              return enter_call(e->point, target, args, rets);
            },
            [&](const Throw& t) {
              const Value* target = lookup(t.target);
              std::vector<const Value*> args;
              args.reserve(t.args.size());
              for (VarId v : t.args) args.push_back(lookup(v));
              return enter_call(e->point, target, args, {});
            },
        },
        e->term);
  }

  // Free variables to capture per Fun/Cont term, minus the group's own
  // names (siblings are re-closed from the group on lookup).
  void collect_captures(const Expr& e) {
    std::visit(overloaded{
                   [&](const Let& t) { collect_captures(*t.body); },
                   [&](const Fun& t) {
                     std::set<VarId> fv;
                     for (const Lambda& l : t.funs)
                       for (VarId v : free_vars(l)) fv.insert(v);
                     for (const Lambda& l : t.funs) fv.erase(l.f);
                     captures_[&t] = std::vector<VarId>(fv.begin(), fv.end());
                     for (const Lambda& l : t.funs) collect_captures(*l.body);
                     collect_captures(*t.body);
                   },
                   [&](const Cont& t) {
                     std::set<VarId> fv = free_vars(t.k);
                     fv.erase(t.k.f);
                     captures_[&t] = std::vector<VarId>(fv.begin(), fv.end());
                     collect_captures(*t.k.body);
                     collect_captures(*t.body);
                   },
                   [&](const If& t) {
                     collect_captures(*t.then_arm);
                     collect_captures(*t.else_arm);
                   },
                   [&](const Switch& t) {
                     for (const SwitchArm& a : t.arms)
                       collect_captures(*a.body);
                     if (t.default_arm) collect_captures(*t.default_arm);
                   },
                   [&](const Apply&) {},
                   [&](const Throw&) {},
               },
               e.term);
  }

  const Program& p_;
  uint64_t fuel_;
  std::shared_ptr<EvalArena> arena_;
  std::vector<std::pair<VarId, const Value*>> locals_;
  const GroupEnv* cap_ = nullptr;
  const Expr* next_ = nullptr;
  const Value* halted_ = nullptr;
  Trace trace_;
  std::unordered_map<const void*, std::vector<VarId>> captures_;
};

}  // namespace

EvalResult eval(const Program& p, uint64_t fuel) {
  return Machine(p, fuel).run();
}

bool values_equal(const Value* a, const Value* b) {
  if (a == b) return true;
  if (auto* ai = std::get_if<IntV>(&a->v)) {
    auto* bi = std::get_if<IntV>(&b->v);
    return bi && ai->value == bi->value;
  }
  if (auto* ab = std::get_if<BoolV>(&a->v)) {
    auto* bb = std::get_if<BoolV>(&b->v);
    return bb && ab->value == bb->value;
  }
  if (auto* at = std::get_if<TupleV>(&a->v)) {
    auto* bt = std::get_if<TupleV>(&b->v);
    if (!bt || at->fields.size() != bt->fields.size()) return false;
    for (size_t i = 0; i < at->fields.size(); i++)
      if (!values_equal(at->fields[i], bt->fields[i])) return false;
    return true;
  }
  if (auto* ac = std::get_if<ClosV>(&a->v)) {
    auto* bc = std::get_if<ClosV>(&b->v);
    // Function values compare by which lambda they close over; captured
    // environments are intentionally ignored.
    return bc && ac->lam->f == bc->lam->f;
  }
  if (std::get_if<HaltK>(&a->v)) return std::get_if<HaltK>(&b->v) != nullptr;
  return false;
}

std::string value_to_string(const Value* v, const IrContext& ctx) {
  if (auto* i = std::get_if<IntV>(&v->v)) return std::to_string(i->value);
  if (auto* b = std::get_if<BoolV>(&v->v)) return b->value ? "true" : "false";
  if (auto* t = std::get_if<TupleV>(&v->v)) {
    std::string s = "(";
    for (size_t i = 0; i < t->fields.size(); i++) {
      if (i) s += ", ";
      s += value_to_string(t->fields[i], ctx);
    }
    return s + ")";
  }
  if (auto* c = std::get_if<ClosV>(&v->v))
    return "<fun " + ctx.name(c->lam->f) + ">";
  return "<halt>";
}

}  // namespace cpsopt
