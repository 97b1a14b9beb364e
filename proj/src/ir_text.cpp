// S-expression reader/printer for the CPS IR.
//
//   E    := (let ((x RHS)) E)
//         | (fun ((f (p...) (k...) E) ...) E)
//         | (cont (k (p...) E) E)
//         | (if COND E E)
//         | (switch x ((tag E) ...) [E])
//         | (apply f (a...) (k...))
//         | (throw k (a...))
//   RHS  := (int n) | (bool true|false) | (alloc x...)
//         | (select i x) | (prim op x...) | (var x)
//   COND := x | (lt x y) | (leq x y) | (eq x y)
//
// The program text is the body of the entry lambda; `halt` is bound on
// entry and may not be rebound. Program points are assigned in preorder
// and never printed.

#include <cctype>
#include <charconv>
#include <map>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "cpsopt/ir.hpp"

namespace cpsopt {

namespace {

struct Token {
  enum Kind { LParen, RParen, Symbol, Int, End } kind;
  std::string text;
  int64_t ival = 0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ';') {  // comment to end of line
        while (pos_ < src_.size() && src_[pos_] != '\n') pos_++;
        continue;
      }
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
      break;
    }
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Token::End;
      return;
    }
    char c = src_[pos_];
    if (c == '(') {
      tok_ = {Token::LParen, "(", 0, line_, col_};
      pos_++;
      col_++;
      return;
    }
    if (c == ')') {
      tok_ = {Token::RParen, ")", 0, line_, col_};
      pos_++;
      col_++;
      return;
    }
    size_t start = pos_;
    while (pos_ < src_.size()) {
      char d = src_[pos_];
      if (d == '(' || d == ')' || d == ';' ||
          std::isspace(static_cast<unsigned char>(d)))
        break;
      pos_++;
      col_++;
    }
    std::string text(src_.substr(start, pos_ - start));
    int64_t v;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc() && p == text.data() + text.size()) {
      tok_ = {Token::Int, text, v, line_, static_cast<int>(col_ - text.size())};
    } else {
      tok_ = {Token::Symbol, text, 0, line_,
              static_cast<int>(col_ - text.size())};
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token tok_;
};

class IrParser {
 public:
  explicit IrParser(std::string_view src) : lex_(src) {
    prog_.ctx = std::make_shared<IrContext>();
  }

  Program run() {
    VarId entry = prog_.ctx->fresh_var("entry");
    VarId halt = prog_.ctx->fresh_var("halt");
    push_scope("halt", halt);
    prog_.entry.f = entry;
    prog_.entry.rets.push_back(halt);
    prog_.entry.body = parse_expr();
    Token t = lex_.peek();
    if (t.kind != Token::End)
      throw ParseError(t.line, t.col, "trailing input after program");
    return std::move(prog_);
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& msg) {
    throw ParseError(t.line, t.col, msg);
  }

  Token expect(Token::Kind k, const char* what) {
    Token t = lex_.take();
    if (t.kind != k) fail(t, std::string("expected ") + what);
    return t;
  }

  std::string expect_symbol(const char* what) {
    Token t = lex_.take();
    if (t.kind != Token::Symbol) fail(t, std::string("expected ") + what);
    return t.text;
  }

  void push_scope(const std::string& name, VarId v) {
    scope_[name].push_back(v);
  }
  void pop_scope(const std::string& name) { scope_[name].pop_back(); }

  VarId bind(const Token& t) {
    if (t.kind != Token::Symbol) {
      // const_cast-free re-fail with good message
      throw ParseError(t.line, t.col, "expected variable name");
    }
    if (t.text == "halt")
      throw ParseError(t.line, t.col, "'halt' is reserved and cannot be bound");
    VarId v = prog_.ctx->fresh_var(t.text);
    push_scope(t.text, v);
    return v;
  }

  VarId lookup(const Token& t) {
    if (t.kind != Token::Symbol)
      throw ParseError(t.line, t.col, "expected variable name");
    auto it = scope_.find(t.text);
    if (it == scope_.end() || it->second.empty())
      throw ScopeError(t.line, t.col, "unbound variable '" + t.text + "'");
    return it->second.back();
  }

  VarId lookup_symbol() { return lookup(lex_.take()); }

  std::vector<VarId> parse_var_list() {
    expect(Token::LParen, "'('");
    std::vector<VarId> out;
    while (lex_.peek().kind != Token::RParen) out.push_back(lookup_symbol());
    lex_.take();
    return out;
  }

  // Parse "(x y z)" binding fresh variables; returns names for later pop.
  std::vector<std::pair<std::string, VarId>> parse_binder_list() {
    expect(Token::LParen, "'('");
    std::vector<std::pair<std::string, VarId>> out;
    while (lex_.peek().kind != Token::RParen) {
      Token t = lex_.take();
      VarId v = bind(t);
      out.emplace_back(t.text, v);
    }
    lex_.take();
    return out;
  }

  ExprPtr make(Term term) {
    auto e = std::make_unique<Expr>();
    e->point = prog_.ctx->fresh_point();
    e->term = std::move(term);
    return e;
  }

  Rhs parse_rhs() {
    Token open = expect(Token::LParen, "'(' starting a right-hand side");
    std::string head = expect_symbol("rhs keyword");
    Rhs out;
    if (head == "int") {
      Token t = lex_.take();
      if (t.kind != Token::Int) fail(t, "expected integer literal");
      out = ConstInt{t.ival};
    } else if (head == "bool") {
      std::string b = expect_symbol("'true' or 'false'");
      if (b != "true" && b != "false") fail(open, "expected 'true' or 'false'");
      out = ConstBool{b == "true"};
    } else if (head == "alloc") {
      Alloc a;
      while (lex_.peek().kind != Token::RParen)
        a.fields.push_back(lookup_symbol());
      out = std::move(a);
    } else if (head == "select") {
      Token t = lex_.take();
      if (t.kind != Token::Int || t.ival < 0)
        fail(t, "expected non-negative field index");
      VarId tup = lookup_symbol();
      out = Select{static_cast<uint32_t>(t.ival), tup};
    } else if (head == "prim") {
      std::string opname = expect_symbol("prim operator");
      auto op = prim_op_from(opname);
      if (!op) fail(open, "unknown prim operator '" + opname + "'");
      Prim pr;
      pr.op = *op;
      while (lex_.peek().kind != Token::RParen)
        pr.args.push_back(lookup_symbol());
      out = std::move(pr);
    } else if (head == "var") {
      out = VarCopy{lookup_symbol()};
    } else {
      fail(open, "unknown rhs form '" + head + "'");
    }
    expect(Token::RParen, "')'");
    return out;
  }

  Cond parse_cond() {
    if (lex_.peek().kind == Token::Symbol) {
      Cond c;
      c.kind = Cond::Kind::IsTrue;
      c.args.push_back(lookup_symbol());
      return c;
    }
    Token open = expect(Token::LParen, "branch condition");
    std::string op = expect_symbol("comparison operator");
    Cond c;
    if (op == "lt")
      c.kind = Cond::Kind::Lt;
    else if (op == "leq")
      c.kind = Cond::Kind::Leq;
    else if (op == "eq")
      c.kind = Cond::Kind::Eq;
    else
      fail(open, "unknown comparison '" + op + "'");
    c.args.push_back(lookup_symbol());
    c.args.push_back(lookup_symbol());
    expect(Token::RParen, "')'");
    return c;
  }

  // (f (params...) (rets...) BODY) — rets omitted for continuations.
  Lambda parse_lambda(bool with_rets) {
    expect(Token::LParen, "'(' starting a function");
    Token name = lex_.take();
    VarId f = bind(name);
    auto params = parse_binder_list();
    std::vector<std::pair<std::string, VarId>> rets;
    if (with_rets) rets = parse_binder_list();
    Lambda l;
    l.f = f;
    for (auto& [n, v] : params) l.params.push_back(v);
    for (auto& [n, v] : rets) l.rets.push_back(v);
    l.body = parse_expr();
    expect(Token::RParen, "')'");
    for (auto it = rets.rbegin(); it != rets.rend(); ++it)
      pop_scope(it->first);
    for (auto it = params.rbegin(); it != params.rend(); ++it)
      pop_scope(it->first);
    // the function name stays bound for the caller to pop
    lambda_names_.push_back(name.text);
    return l;
  }

  ExprPtr parse_expr() {
    Token open = expect(Token::LParen, "'(' starting an expression");
    std::string head = expect_symbol("expression keyword");
    ExprPtr result;
    if (head == "let") {
      expect(Token::LParen, "'(' starting binding list");
      expect(Token::LParen, "'(' starting binding");
      Token name = lex_.take();
      Rhs rhs = parse_rhs();
      expect(Token::RParen, "')'");
      expect(Token::RParen, "')'");
      Let t;
      t.rhs = std::move(rhs);
      VarId v = bind(name);
      t.binders.push_back(v);
      t.body = parse_expr();
      pop_scope(name.text);
      result = make(std::move(t));
    } else if (head == "fun") {
      expect(Token::LParen, "'(' starting function group");
      Fun t;
      std::vector<std::string> names;
      // Group members are mutually recursive, so every name must be in
      // scope inside every body. Pre-scan the group (the lexer is a cheap
      // value type) to bind the names, then parse the lambdas for real.
      {
        Lexer save = lex_;
        int depth = 1;  // inside the group list
        // First phase: walk tokens to find the head symbol of each
        // top-level '(' group entry and bind it.
        bool expect_name = true;
        while (depth > 0) {
          Token t = lex_.take();
          if (t.kind == Token::End) fail(t, "unterminated fun group");
          if (t.kind == Token::LParen) {
            if (depth == 1) expect_name = true;
            depth++;
          } else if (t.kind == Token::RParen) {
            depth--;
          } else if (expect_name && depth == 2) {
            bind(t);
            names.push_back(t.text);
            expect_name = false;
          }
        }
        lex_ = save;
      }
      while (lex_.peek().kind != Token::RParen)
        t.funs.push_back(parse_lambda_in_group());
      lex_.take();
      if (t.funs.empty()) fail(open, "empty fun group");
      t.body = parse_expr();
      for (auto it = names.rbegin(); it != names.rend(); ++it) pop_scope(*it);
      result = make(std::move(t));
    } else if (head == "cont") {
      Lambda k = parse_lambda(false);
      std::string kname = lambda_names_.back();
      lambda_names_.pop_back();
      Cont t;
      t.k = std::move(k);
      t.body = parse_expr();
      pop_scope(kname);
      result = make(std::move(t));
    } else if (head == "if") {
      If t;
      t.cond = parse_cond();
      t.then_arm = parse_expr();
      t.else_arm = parse_expr();
      result = make(std::move(t));
    } else if (head == "switch") {
      Switch t;
      t.scrutinee = lookup_symbol();
      expect(Token::LParen, "'(' starting arm list");
      while (lex_.peek().kind != Token::RParen) {
        expect(Token::LParen, "'(' starting arm");
        Token tag = lex_.take();
        if (tag.kind != Token::Int) fail(tag, "expected integer tag");
        SwitchArm arm;
        arm.tag = tag.ival;
        arm.body = parse_expr();
        expect(Token::RParen, "')'");
        t.arms.push_back(std::move(arm));
      }
      lex_.take();
      if (lex_.peek().kind == Token::LParen) t.default_arm = parse_expr();
      result = make(std::move(t));
    } else if (head == "apply") {
      Apply t;
      t.target = lookup_symbol();
      t.args = parse_var_list();
      t.rets = parse_var_list();
      result = make(std::move(t));
    } else if (head == "throw") {
      Throw t;
      t.target = lookup_symbol();
      t.args = parse_var_list();
      result = make(std::move(t));
    } else {
      fail(open, "unknown expression form '" + head + "'");
    }
    expect(Token::RParen, "')'");
    return result;
  }

  // Like parse_lambda(true) but the group pre-scan already bound the name.
  Lambda parse_lambda_in_group() {
    expect(Token::LParen, "'(' starting a function");
    Token name = lex_.take();
    VarId f = lookup(name);
    auto params = parse_binder_list();
    auto rets = parse_binder_list();
    Lambda l;
    l.f = f;
    for (auto& [n, v] : params) l.params.push_back(v);
    for (auto& [n, v] : rets) l.rets.push_back(v);
    l.body = parse_expr();
    expect(Token::RParen, "')'");
    for (auto it = rets.rbegin(); it != rets.rend(); ++it)
      pop_scope(it->first);
    for (auto it = params.rbegin(); it != params.rend(); ++it)
      pop_scope(it->first);
    return l;
  }

  Lexer lex_;
  Program prog_;
  std::unordered_map<std::string, std::vector<VarId>> scope_;
  std::vector<std::string> lambda_names_;
};

// ------------------------------------------------------------------
// Printing. Binders are renamed only when their display name is already
// live in the enclosing scope, so the output is both re-parseable and a
// canonical function of program structure (ids never leak into it).

class IrPrinter {
 public:
  explicit IrPrinter(const Program& p) : p_(p) {
    live_["halt"]++;
    names_[p.halt().raw] = "halt";
  }

  std::string run() {
    print_expr(*p_.entry.body, 0);
    return std::move(out_);
  }

 private:
  std::string pick_name(VarId v) {
    const std::string& base0 = p_.ctx->name(v);
    std::string base = base0.empty() ? "v" : base0;
    std::string cand = base;
    int n = 2;
    while (live_[cand] > 0 || cand == "halt") {
      cand = base + "_" + std::to_string(n++);
    }
    return cand;
  }

  std::string bind(VarId v) {
    std::string n = pick_name(v);
    names_[v.raw] = n;
    live_[n]++;
    stack_.push_back({v.raw, n});
    return n;
  }

  void pop_to(size_t mark) {
    while (stack_.size() > mark) {
      live_[stack_.back().second]--;
      names_.erase(stack_.back().first);
      stack_.pop_back();
    }
  }

  const std::string& ref(VarId v) {
    auto it = names_.find(v.raw);
    if (it == names_.end())
      throw InternalError("print_text: unbound variable '" +
                          p_.ctx->name(v) + "'");
    return it->second;
  }

  void indent(int n) {
    out_ += '\n';
    out_.append(static_cast<size_t>(n) * 2, ' ');
  }

  void print_var_list(const std::vector<VarId>& vs) {
    out_ += '(';
    for (size_t i = 0; i < vs.size(); i++) {
      if (i) out_ += ' ';
      out_ += ref(vs[i]);
    }
    out_ += ')';
  }

  void print_rhs(const Rhs& r) {
    std::visit(overloaded{
                   [&](const ConstInt& c) {
                     out_ += "(int " + std::to_string(c.value) + ")";
                   },
                   [&](const ConstBool& c) {
                     out_ += c.value ? "(bool true)" : "(bool false)";
                   },
                   [&](const Alloc& c) {
                     out_ += "(alloc";
                     for (VarId v : c.fields) out_ += " " + ref(v);
                     out_ += ")";
                   },
                   [&](const Select& c) {
                     out_ += "(select " + std::to_string(c.index) + " " +
                             ref(c.tuple) + ")";
                   },
                   [&](const Prim& c) {
                     out_ += std::string("(prim ") + prim_op_name(c.op);
                     for (VarId v : c.args) out_ += " " + ref(v);
                     out_ += ")";
                   },
                   [&](const VarCopy& c) {
                     out_ += "(var " + ref(c.source) + ")";
                   },
               },
               r);
  }

  void print_lambda(const Lambda& l, int d, bool with_rets) {
    out_ += '(';
    out_ += ref(l.f);
    out_ += ' ';
    size_t mark = stack_.size();
    {
      out_ += '(';
      for (size_t i = 0; i < l.params.size(); i++) {
        if (i) out_ += ' ';
        out_ += bind(l.params[i]);
      }
      out_ += ')';
    }
    if (with_rets) {
      out_ += " (";
      for (size_t i = 0; i < l.rets.size(); i++) {
        if (i) out_ += ' ';
        out_ += bind(l.rets[i]);
      }
      out_ += ')';
    }
    indent(d + 1);
    print_expr(*l.body, d + 1);
    out_ += ')';
    pop_to(mark);
  }

  void print_expr(const Expr& e, int d) {
    std::visit(
        overloaded{
            [&](const Let& t) {
              out_ += "(let ((";
              size_t mark = stack_.size();
              // rhs is printed before the binder enters scope
              std::string rhs_text;
              {
                std::string save = std::move(out_);
                out_.clear();
                print_rhs(t.rhs);
                rhs_text = std::move(out_);
                out_ = std::move(save);
              }
              out_ += bind(t.binders.at(0)) + " " + rhs_text + "))";
              indent(d + 1);
              print_expr(*t.body, d + 1);
              out_ += ')';
              pop_to(mark);
            },
            [&](const Fun& t) {
              size_t mark = stack_.size();
              out_ += "(fun (";
              for (const Lambda& l : t.funs) bind(l.f);
              for (size_t i = 0; i < t.funs.size(); i++) {
                indent(d + 2);
                print_lambda(t.funs[i], d + 2, true);
              }
              out_ += ')';
              indent(d + 1);
              print_expr(*t.body, d + 1);
              out_ += ')';
              pop_to(mark);
            },
            [&](const Cont& t) {
              size_t mark = stack_.size();
              out_ += "(cont ";
              bind(t.k.f);
              print_lambda(t.k, d + 1, false);
              indent(d + 1);
              print_expr(*t.body, d + 1);
              out_ += ')';
              pop_to(mark);
            },
            [&](const If& t) {
              out_ += "(if ";
              if (t.cond.kind == Cond::Kind::IsTrue) {
                out_ += ref(t.cond.args.at(0));
              } else {
                const char* op = t.cond.kind == Cond::Kind::Lt    ? "lt"
                                 : t.cond.kind == Cond::Kind::Leq ? "leq"
                                                                  : "eq";
                out_ += std::string("(") + op + " " + ref(t.cond.args.at(0)) +
                        " " + ref(t.cond.args.at(1)) + ")";
              }
              indent(d + 1);
              print_expr(*t.then_arm, d + 1);
              indent(d + 1);
              print_expr(*t.else_arm, d + 1);
              out_ += ')';
            },
            [&](const Switch& t) {
              out_ += "(switch " + ref(t.scrutinee) + " (";
              for (const SwitchArm& a : t.arms) {
                indent(d + 2);
                out_ += "(" + std::to_string(a.tag) + " ";
                indent(d + 3);
                print_expr(*a.body, d + 3);
                out_ += ')';
              }
              out_ += ')';
              if (t.default_arm) {
                indent(d + 1);
                print_expr(*t.default_arm, d + 1);
              }
              out_ += ')';
            },
            [&](const Apply& t) {
              out_ += "(apply " + ref(t.target) + " ";
              print_var_list(t.args);
              out_ += ' ';
              print_var_list(t.rets);
              out_ += ')';
            },
            [&](const Throw& t) {
              out_ += "(throw " + ref(t.target) + " ";
              print_var_list(t.args);
              out_ += ')';
            },
        },
        e.term);
  }

  const Program& p_;
  std::string out_;
  std::map<std::string, int> live_;
  std::unordered_map<uint32_t, std::string> names_;
  std::vector<std::pair<uint32_t, std::string>> stack_;
};

}  // namespace

Program parse_text(std::string_view source) { return IrParser(source).run(); }

std::string print_text(const Program& p) {
  std::string s = IrPrinter(p).run();
  s += '\n';
  return s;
}

}  // namespace cpsopt
