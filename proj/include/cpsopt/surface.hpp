#pragma once

// A small ML-flavored surface language that lowers to the CPS IR.
//
//   exp   ::= "let" decl+ "in" exp "end"
//           | "fn" params "=>" exp
//           | "if" exp "then" exp "else" exp
//           | cmp
//   decl  ::= "val" id "=" exp
//           | "fun" id params "=" exp ("and" id params "=" exp)*
//   params::= id | "(" ")" | "(" id ("," id)* ")"
//   cmp   ::= add (("<" | "<=" | "=") add)?
//   add   ::= mul (("+" | "-") mul)*
//   mul   ::= app ("*" app)*
//   app   ::= atom (args)*           -- application binds tightest
//   args  ::= "(" [exp ("," exp)*] ")" | atom
//   atom  ::= int | "true" | "false" | id
//           | "#" int atom           -- 1-indexed tuple projection
//           | "(" exp ")"            -- grouping
//           | "(" exp "," exp+ ")"   -- tuple of two or more
//
// A parenthesized list directly after a callee is an argument list, so
// `f (a, b)` is a two-argument call; pass a tuple with `f ((a, b))`.

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "cpsopt/ir.hpp"

namespace cpsopt {

struct SurfaceExpr;
using SurfacePtr = std::unique_ptr<SurfaceExpr>;

struct SInt {
  int64_t value;
};
struct SBool {
  bool value;
};
struct SVar {
  std::string name;
};
struct SFn {
  std::vector<std::string> params;
  SurfacePtr body;
};
struct SApp {
  SurfacePtr fn;
  std::vector<SurfacePtr> args;
};
struct SIf {
  SurfacePtr cond, then_arm, else_arm;
};
struct STuple {
  std::vector<SurfacePtr> elems;
};
struct SSelect {
  int index;  // 1-based, as written
  SurfacePtr tuple;
};
struct SPrim {
  PrimOp op;
  SurfacePtr lhs, rhs;
};
struct SFunDef {
  std::string name;
  std::vector<std::string> params;
  SurfacePtr body;
  int line = 0, col = 0;
};
struct SDecl {
  // Either one val binding or one (possibly mutual) fun group.
  std::string val_name;  // empty for fun groups
  SurfacePtr val_expr;
  std::vector<SFunDef> funs;
  int line = 0, col = 0;
};
struct SLet {
  std::vector<SDecl> decls;
  SurfacePtr body;
};

struct SurfaceExpr {
  int line = 0, col = 0;
  std::variant<SInt, SBool, SVar, SFn, SApp, SIf, STuple, SSelect, SPrim, SLet>
      node;
};

// Throws ParseError for syntax errors, ScopeError for unbound names.
SurfacePtr parse_surface(std::string_view source);

// One-pass CPS conversion. Multi-parameter functions become
// multi-parameter lambdas; `if` becomes a switch on tags 0 (false) and
// 1 (true); tuples become allocs; projections become selects.
Program cps_convert(const SurfaceExpr& e);

}  // namespace cpsopt
