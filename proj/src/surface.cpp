#include "cpsopt/surface.hpp"

#include <cctype>
#include <charconv>
#include <functional>
#include <memory>
#include <unordered_set>

namespace cpsopt {

namespace {

struct STok {
  enum Kind {
    Int, Ident, Keyword, Punct, End,
  } kind = End;
  std::string text;
  int64_t ival = 0;
  int line = 1, col = 1;
};

const std::unordered_set<std::string>& keywords() {
  static const std::unordered_set<std::string> kw = {
      "let", "val", "fun", "and", "in",   "end",
      "fn",  "if",  "then", "else", "true", "false"};
  return kw;
}

class SLexer {
 public:
  explicit SLexer(std::string_view src) : src_(src) { advance(); }
  const STok& peek() const { return tok_; }
  STok take() {
    STok t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    for (;;) {
      if (pos_ >= src_.size()) break;
      char c = src_[pos_];
      if (c == '\n') {
        line_++;
        col_ = 1;
        pos_++;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        pos_++;
        col_++;
        continue;
      }
      // (* ... *) comments, non-nesting
      if (c == '(' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        pos_ += 2;
        col_ += 2;
        while (pos_ + 1 < src_.size() &&
               !(src_[pos_] == '*' && src_[pos_ + 1] == ')')) {
          if (src_[pos_] == '\n') {
            line_++;
            col_ = 0;
          }
          pos_++;
          col_++;
        }
        if (pos_ + 1 >= src_.size())
          throw ParseError(line_, col_, "unterminated comment");
        pos_ += 2;
        col_ += 2;
        continue;
      }
      break;
    }
    tok_ = STok{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = STok::End;
      return;
    }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        pos_++;
        col_++;
      }
      std::string text(src_.substr(start, pos_ - start));
      tok_.kind = STok::Int;
      tok_.text = text;
      std::from_chars(text.data(), text.data() + text.size(), tok_.ival);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_' || src_[pos_] == '\'')) {
        pos_++;
        col_++;
      }
      tok_.text = std::string(src_.substr(start, pos_ - start));
      tok_.kind = keywords().count(tok_.text) ? STok::Keyword : STok::Ident;
      return;
    }
    // punctuation, longest-match for "<=" and "=>"
    auto two = [&](const char* s) {
      return pos_ + 1 < src_.size() && src_[pos_] == s[0] &&
             src_[pos_ + 1] == s[1];
    };
    if (two("<=") || two("=>")) {
      tok_.kind = STok::Punct;
      tok_.text = std::string(src_.substr(pos_, 2));
      pos_ += 2;
      col_ += 2;
      return;
    }
    if (std::string("()+-*<=,#").find(c) != std::string::npos) {
      tok_.kind = STok::Punct;
      tok_.text = std::string(1, c);
      pos_++;
      col_++;
      return;
    }
    throw ParseError(line_, col_, std::string("unexpected character '") + c +
                                      "'");
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  STok tok_;
};

class SurfaceParser {
 public:
  explicit SurfaceParser(std::string_view src) : lex_(src) {}

  SurfacePtr run() {
    SurfacePtr e = parse_exp();
    const STok& t = lex_.peek();
    if (t.kind != STok::End)
      throw ParseError(t.line, t.col, "trailing input after expression");
    return e;
  }

 private:
  [[noreturn]] void fail(const STok& t, const std::string& msg) {
    throw ParseError(t.line, t.col, msg);
  }

  bool at_punct(const char* s) const {
    return lex_.peek().kind == STok::Punct && lex_.peek().text == s;
  }
  bool at_keyword(const char* s) const {
    return lex_.peek().kind == STok::Keyword && lex_.peek().text == s;
  }
  void expect_punct(const char* s) {
    if (!at_punct(s)) fail(lex_.peek(), std::string("expected '") + s + "'");
    lex_.take();
  }
  void expect_keyword(const char* s) {
    if (!at_keyword(s))
      fail(lex_.peek(), std::string("expected '") + s + "'");
    lex_.take();
  }
  std::string expect_ident() {
    const STok& t = lex_.peek();
    if (t.kind != STok::Ident) fail(t, "expected an identifier");
    return lex_.take().text;
  }

  template <typename N>
  SurfacePtr make(const STok& at, N node) {
    auto e = std::make_unique<SurfaceExpr>();
    e->line = at.line;
    e->col = at.col;
    e->node = std::move(node);
    return e;
  }

  std::vector<std::string> parse_params() {
    if (lex_.peek().kind == STok::Ident) return {lex_.take().text};
    const STok& t = lex_.peek();
    if (!at_punct("(")) fail(t, "expected parameters");
    lex_.take();
    std::vector<std::string> ps;
    if (at_punct(")")) {
      lex_.take();
      return ps;
    }
    ps.push_back(expect_ident());
    while (at_punct(",")) {
      lex_.take();
      ps.push_back(expect_ident());
    }
    expect_punct(")");
    return ps;
  }

  SurfacePtr parse_exp() {
    STok t = lex_.peek();
    if (at_keyword("let")) {
      lex_.take();
      SLet l;
      while (at_keyword("val") || at_keyword("fun")) {
        SDecl d;
        STok dt = lex_.peek();
        d.line = dt.line;
        d.col = dt.col;
        if (at_keyword("val")) {
          lex_.take();
          d.val_name = expect_ident();
          expect_punct("=");
          d.val_expr = parse_exp();
        } else {
          lex_.take();
          for (;;) {
            SFunDef f;
            STok ft = lex_.peek();
            f.line = ft.line;
            f.col = ft.col;
            f.name = expect_ident();
            f.params = parse_params();
            expect_punct("=");
            f.body = parse_exp();
            d.funs.push_back(std::move(f));
            if (!at_keyword("and")) break;
            lex_.take();
          }
        }
        l.decls.push_back(std::move(d));
      }
      if (l.decls.empty()) fail(lex_.peek(), "expected 'val' or 'fun'");
      expect_keyword("in");
      l.body = parse_exp();
      expect_keyword("end");
      return make(t, std::move(l));
    }
    if (at_keyword("fn")) {
      lex_.take();
      SFn f;
      f.params = parse_params();
      expect_punct("=>");
      f.body = parse_exp();
      return make(t, std::move(f));
    }
    if (at_keyword("if")) {
      lex_.take();
      SIf i;
      i.cond = parse_exp();
      expect_keyword("then");
      i.then_arm = parse_exp();
      expect_keyword("else");
      i.else_arm = parse_exp();
      return make(t, std::move(i));
    }
    return parse_cmp();
  }

  SurfacePtr parse_cmp() {
    SurfacePtr lhs = parse_add();
    STok t = lex_.peek();
    PrimOp op;
    if (at_punct("<"))
      op = PrimOp::Lt;
    else if (at_punct("<="))
      op = PrimOp::Leq;
    else if (at_punct("="))
      op = PrimOp::Eq;
    else
      return lhs;
    lex_.take();
    SPrim p{op, std::move(lhs), parse_add()};
    return make(t, std::move(p));
  }

  SurfacePtr parse_add() {
    SurfacePtr lhs = parse_mul();
    for (;;) {
      STok t = lex_.peek();
      PrimOp op;
      if (at_punct("+"))
        op = PrimOp::Add;
      else if (at_punct("-"))
        op = PrimOp::Sub;
      else
        return lhs;
      lex_.take();
      SPrim p{op, std::move(lhs), parse_mul()};
      lhs = make(t, std::move(p));
    }
  }

  SurfacePtr parse_mul() {
    SurfacePtr lhs = parse_app();
    while (at_punct("*")) {
      STok t = lex_.take();
      SPrim p{PrimOp::Mul, std::move(lhs), parse_app()};
      lhs = make(t, std::move(p));
    }
    return lhs;
  }

  bool starts_atom() const {
    const STok& t = lex_.peek();
    if (t.kind == STok::Int || t.kind == STok::Ident) return true;
    if (t.kind == STok::Keyword && (t.text == "true" || t.text == "false"))
      return true;
    if (t.kind == STok::Punct && (t.text == "(" || t.text == "#")) return true;
    return false;
  }

  SurfacePtr parse_app() {
    SurfacePtr e = parse_atom();
    for (;;) {
      if (at_punct("(")) {
        // A parenthesized list directly after a callee is an argument list.
        STok t = lex_.take();
        SApp app;
        app.fn = std::move(e);
        if (!at_punct(")")) {
          app.args.push_back(parse_exp());
          while (at_punct(",")) {
            lex_.take();
            app.args.push_back(parse_exp());
          }
        }
        expect_punct(")");
        e = make(t, std::move(app));
      } else if (starts_atom()) {
        STok t = lex_.peek();
        SApp app;
        app.fn = std::move(e);
        app.args.push_back(parse_atom());
        e = make(t, std::move(app));
      } else {
        return e;
      }
    }
  }

  SurfacePtr parse_atom() {
    STok t = lex_.peek();
    if (t.kind == STok::Int) {
      lex_.take();
      return make(t, SInt{t.ival});
    }
    if (at_keyword("true") || at_keyword("false")) {
      lex_.take();
      return make(t, SBool{t.text == "true"});
    }
    if (t.kind == STok::Ident) {
      lex_.take();
      return make(t, SVar{t.text});
    }
    if (at_punct("#")) {
      lex_.take();
      const STok& it = lex_.peek();
      if (it.kind != STok::Int || it.ival < 1)
        fail(it, "expected a positive field index after '#'");
      int idx = static_cast<int>(lex_.take().ival);
      SSelect s{idx, parse_atom()};
      return make(t, std::move(s));
    }
    if (at_punct("(")) {
      lex_.take();
      if (at_punct(")"))
        fail(lex_.peek(), "empty parentheses are only valid as an argument "
                          "or parameter list");
      SurfacePtr first = parse_exp();
      if (at_punct(",")) {
        STuple tup;
        tup.elems.push_back(std::move(first));
        while (at_punct(",")) {
          lex_.take();
          tup.elems.push_back(parse_exp());
        }
        expect_punct(")");
        return make(t, std::move(tup));
      }
      expect_punct(")");
      return first;
    }
    fail(t, "expected an expression");
  }

  SLexer lex_;
};

// Post-parse scope check so unbound names are reported with positions.
void scope_check(const SurfaceExpr& e, std::vector<std::string>& scope) {
  auto bound = [&](const std::string& n) {
    return std::find(scope.rbegin(), scope.rend(), n) != scope.rend();
  };
  std::visit(
      overloaded{
          [&](const SInt&) {}, [&](const SBool&) {},
          [&](const SVar& v) {
            if (!bound(v.name))
              throw ScopeError(e.line, e.col,
                               "unbound variable '" + v.name + "'");
          },
          [&](const SFn& f) {
            size_t mark = scope.size();
            for (const std::string& p : f.params) scope.push_back(p);
            scope_check(*f.body, scope);
            scope.resize(mark);
          },
          [&](const SApp& a) {
            scope_check(*a.fn, scope);
            for (const auto& x : a.args) scope_check(*x, scope);
          },
          [&](const SIf& i) {
            scope_check(*i.cond, scope);
            scope_check(*i.then_arm, scope);
            scope_check(*i.else_arm, scope);
          },
          [&](const STuple& t) {
            for (const auto& x : t.elems) scope_check(*x, scope);
          },
          [&](const SSelect& s) { scope_check(*s.tuple, scope); },
          [&](const SPrim& p) {
            scope_check(*p.lhs, scope);
            scope_check(*p.rhs, scope);
          },
          [&](const SLet& l) {
            size_t mark = scope.size();
            for (const SDecl& d : l.decls) {
              if (d.funs.empty()) {
                // val is non-recursive: rhs sees only earlier bindings
                scope_check(*d.val_expr, scope);
                scope.push_back(d.val_name);
              } else {
                for (const SFunDef& f : d.funs) scope.push_back(f.name);
                for (const SFunDef& f : d.funs) {
                  size_t m2 = scope.size();
                  for (const std::string& p : f.params) scope.push_back(p);
                  scope_check(*f.body, scope);
                  scope.resize(m2);
                }
              }
            }
            scope_check(*l.body, scope);
            scope.resize(mark);
          },
      },
      e.node);
}

// ------------------------------------------------------------------
// CPS conversion driven by a meta-continuation, so variables and
// constants produce no administrative redexes. The environment is an
// immutable cons list: every continuation closure captures the
// environment of its creation site, which keeps surface scoping
// correct even though continuations run interleaved with the
// conversion of sibling subterms.

struct EnvNode {
  std::string name;
  VarId var;
  std::shared_ptr<const EnvNode> next;
};
using Env = std::shared_ptr<const EnvNode>;

Env extend(Env env, std::string name, VarId var) {
  return std::make_shared<const EnvNode>(
      EnvNode{std::move(name), var, std::move(env)});
}

class CpsConverter {
 public:
  CpsConverter() : ctx_(std::make_shared<IrContext>()) {}

  Program run(const SurfaceExpr& se) {
    Program p;
    p.ctx = ctx_;
    p.entry.f = ctx_->fresh_var("entry");
    VarId halt = ctx_->fresh_var("halt");
    p.entry.rets.push_back(halt);
    // The final value is always bound and thrown explicitly, so `halt`
    // is never passed around as a return continuation.
    p.entry.body = convert(se, nullptr, [&](VarId v) {
      Throw t;
      t.target = halt;
      t.args.push_back(v);
      return make(std::move(t));
    });
    return p;
  }

 private:
  using Kappa = std::function<ExprPtr(VarId)>;

  ExprPtr make(Term term) {
    auto e = std::make_unique<Expr>();
    e->point = ctx_->fresh_point();
    e->term = std::move(term);
    return e;
  }

  VarId lookup(const SurfaceExpr& at, const Env& env,
               const std::string& name) {
    for (const EnvNode* n = env.get(); n; n = n->next.get())
      if (n->name == name) return n->var;
    throw ScopeError(at.line, at.col, "unbound variable '" + name + "'");
  }

  ExprPtr let_bind(std::string_view name, Rhs rhs, const Kappa& kappa) {
    VarId v = ctx_->fresh_var(name);
    Let l;
    l.binders.push_back(v);
    l.rhs = std::move(rhs);
    l.body = kappa(v);
    return make(std::move(l));
  }

  Lambda lower_lambda(VarId f, const std::vector<std::string>& params,
                      const SurfaceExpr& body, Env env) {
    Lambda l;
    l.f = f;
    for (const std::string& p : params) {
      VarId pv = ctx_->fresh_var(p);
      l.params.push_back(pv);
      env = extend(env, p, pv);
    }
    VarId k = ctx_->fresh_var("k");
    l.rets.push_back(k);
    l.body = convert_tail(body, env, k);
    return l;
  }

  // Evaluate `e`, handing the variable holding its value to `kappa`.
  ExprPtr convert(const SurfaceExpr& e, Env env, const Kappa& kappa) {
    return std::visit(
        overloaded{
            [&](const SInt& n) {
              return let_bind("n", ConstInt{n.value}, kappa);
            },
            [&](const SBool& b) {
              return let_bind("b", ConstBool{b.value}, kappa);
            },
            [&](const SVar& var) { return kappa(lookup(e, env, var.name)); },
            [&](const SFn& fn) {
              VarId f = ctx_->fresh_var("anon");
              Fun t;
              t.funs.push_back(lower_lambda(f, fn.params, *fn.body, env));
              t.body = kappa(f);
              return make(std::move(t));
            },
            [&](const SApp&) { return convert_call(e, env, kappa); },
            [&](const SIf&) { return convert_branch(e, env, kappa); },
            [&](const STuple& tup) {
              return convert_many(
                  tup.elems, env, [&](std::vector<VarId> vs) {
                    return let_bind("t", Alloc{std::move(vs)}, kappa);
                  });
            },
            [&](const SSelect& sel) {
              return convert(*sel.tuple, env, [&](VarId tv) {
                return let_bind(
                    "s", Select{static_cast<uint32_t>(sel.index - 1), tv},
                    kappa);
              });
            },
            [&](const SPrim& pr) {
              return convert(*pr.lhs, env, [&](VarId a) {
                return convert(*pr.rhs, env, [&](VarId b) {
                  return let_bind("p", Prim{pr.op, {a, b}}, kappa);
                });
              });
            },
            [&](const SLet& l) {
              return convert_decls(l, 0, env, [&](Env env2) {
                return convert(*l.body, env2, kappa);
              });
            },
        },
        e.node);
  }

  // Evaluate `e` in tail position with return continuation `k`.
  ExprPtr convert_tail(const SurfaceExpr& e, Env env, VarId k) {
    return std::visit(
        overloaded{
            [&](const SApp& app) {
              return convert(*app.fn, env, [&](VarId f) {
                return convert_many(
                    app.args, env, [&](std::vector<VarId> vs) {
                      Apply a;
                      a.target = f;
                      a.args = std::move(vs);
                      a.rets.push_back(k);
                      return make(std::move(a));
                    });
              });
            },
            [&](const SIf& i) {
              return convert(*i.cond, env, [&](VarId c) {
                return make(lower_switch(i, env, c, k));
              });
            },
            [&](const SLet& l) {
              return convert_decls(l, 0, env, [&](Env env2) {
                return convert_tail(*l.body, env2, k);
              });
            },
            [&](const auto&) {
              return convert(e, env, [&](VarId v) {
                Throw t;
                t.target = k;
                t.args.push_back(v);
                return make(std::move(t));
              });
            },
        },
        e.node);
  }

  // if-expressions become two-armed switches: false is tag 0, true is
  // tag 1, matching how booleans scrutinize at runtime.
  Switch lower_switch(const SIf& i, const Env& env, VarId scrutinee,
                      VarId k) {
    Switch s;
    s.scrutinee = scrutinee;
    SwitchArm false_arm;
    false_arm.tag = 0;
    false_arm.body = convert_tail(*i.else_arm, env, k);
    SwitchArm true_arm;
    true_arm.tag = 1;
    true_arm.body = convert_tail(*i.then_arm, env, k);
    s.arms.push_back(std::move(false_arm));
    s.arms.push_back(std::move(true_arm));
    return s;
  }

  ExprPtr convert_decls(const SLet& l, size_t i, Env env,
                        const std::function<ExprPtr(Env)>& body) {
    if (i == l.decls.size()) return body(env);
    const SDecl& d = l.decls[i];
    if (d.funs.empty()) {
      // `val x = fn ...` names the lambda after x (still non-recursive).
      if (auto* fn = std::get_if<SFn>(&d.val_expr->node)) {
        VarId f = ctx_->fresh_var(d.val_name);
        Fun t;
        t.funs.push_back(lower_lambda(f, fn->params, *fn->body, env));
        t.body = convert_decls(l, i + 1, extend(env, d.val_name, f), body);
        return make(std::move(t));
      }
      return convert(*d.val_expr, env, [&](VarId v) {
        // A non-alias result variable is freshly minted by the conversion
        // above, so it can safely take the surface binder's display name.
        if (!std::holds_alternative<SVar>(d.val_expr->node))
          ctx_->set_name(v, d.val_name);
        return convert_decls(l, i + 1, extend(env, d.val_name, v), body);
      });
    }
    // fun group: all names are in scope in every member body
    Fun t;
    Env env2 = env;
    std::vector<VarId> ids;
    for (const SFunDef& f : d.funs) {
      VarId fv = ctx_->fresh_var(f.name);
      ids.push_back(fv);
      env2 = extend(env2, f.name, fv);
    }
    for (size_t j = 0; j < d.funs.size(); j++)
      t.funs.push_back(
          lower_lambda(ids[j], d.funs[j].params, *d.funs[j].body, env2));
    t.body = convert_decls(l, i + 1, env2, body);
    return make(std::move(t));
  }

  // Non-tail call: the result flows into a fresh continuation.
  ExprPtr convert_call(const SurfaceExpr& e, Env env, const Kappa& kappa) {
    const SApp& app = std::get<SApp>(e.node);
    return convert(*app.fn, env, [&](VarId f) {
      return convert_many(app.args, env, [&](std::vector<VarId> vs) {
        VarId j = ctx_->fresh_var("j");
        VarId res = ctx_->fresh_var("r");
        Cont c;
        c.k.f = j;
        c.k.params.push_back(res);
        c.k.body = kappa(res);
        Apply a;
        a.target = f;
        a.args = std::move(vs);
        a.rets.push_back(j);
        c.body = make(std::move(a));
        return make(std::move(c));
      });
    });
  }

  // Non-tail branch: both arms throw to a join continuation.
  ExprPtr convert_branch(const SurfaceExpr& e, Env env, const Kappa& kappa) {
    const SIf& i = std::get<SIf>(e.node);
    return convert(*i.cond, env, [&](VarId c) {
      VarId j = ctx_->fresh_var("j");
      VarId res = ctx_->fresh_var("r");
      Cont join;
      join.k.f = j;
      join.k.params.push_back(res);
      join.k.body = kappa(res);
      join.body = make(lower_switch(i, env, c, j));
      return make(std::move(join));
    });
  }

  template <typename K>
  ExprPtr convert_many(const std::vector<SurfacePtr>& es, const Env& env,
                       const K& k, std::vector<VarId> acc = {}) {
    if (acc.size() == es.size()) return k(std::move(acc));
    size_t i = acc.size();
    return convert(*es[i], env, [&](VarId v) {
      std::vector<VarId> next = acc;
      next.push_back(v);
      return convert_many(es, env, k, std::move(next));
    });
  }

  std::shared_ptr<IrContext> ctx_;
};

}  // namespace

SurfacePtr parse_surface(std::string_view source) {
  SurfacePtr e = SurfaceParser(source).run();
  std::vector<std::string> scope;
  scope_check(*e, scope);
  return e;
}

Program cps_convert(const SurfaceExpr& e) { return CpsConverter().run(e); }

}  // namespace cpsopt
