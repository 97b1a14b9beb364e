#pragma once

// Core CPS intermediate representation.
//
// A program is a single entry lambda whose body is a tree of expressions.
// Calls (apply/throw) are leaves: there is no way to sequence code after
// them, so the CPS invariant is enforced by the shape of the types.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cpsopt {

// Variables carry a display name (for printing) and a unique id.
struct VarId {
  uint32_t raw = 0;
  friend bool operator==(VarId a, VarId b) { return a.raw == b.raw; }
  friend bool operator!=(VarId a, VarId b) { return a.raw != b.raw; }
  friend bool operator<(VarId a, VarId b) { return a.raw < b.raw; }
};

// Program points label expressions; transforms mint fresh points for new
// code and keep the points of code they merely copy.
struct ProgPoint {
  uint32_t raw = 0;
  friend bool operator==(ProgPoint a, ProgPoint b) { return a.raw == b.raw; }
  friend bool operator!=(ProgPoint a, ProgPoint b) { return a.raw != b.raw; }
  friend bool operator<(ProgPoint a, ProgPoint b) { return a.raw < b.raw; }
};

// Allocates variable ids and program points. Shared (append-only) between a
// program and everything derived from it, so ids stay globally unique.
class IrContext {
 public:
  VarId fresh_var(std::string_view display) {
    names_.emplace_back(display);
    return VarId{static_cast<uint32_t>(names_.size() - 1)};
  }
  // New id, same display name. Used by alpha renaming and inlining.
  VarId clone_var(VarId v) { return fresh_var(name(v)); }
  const std::string& name(VarId v) const { return names_.at(v.raw); }
  // Retroactive display-name fix, e.g. naming a conversion result after the
  // surface binder it lands in. Ids and semantics are unaffected.
  void set_name(VarId v, std::string_view display) { names_.at(v.raw) = display; }
  ProgPoint fresh_point() { return ProgPoint{next_point_++}; }
  uint32_t var_count() const { return static_cast<uint32_t>(names_.size()); }

 private:
  std::vector<std::string> names_;
  uint32_t next_point_ = 0;
};

enum class PrimOp { Add, Sub, Mul, Div, Lt, Leq, Eq };

const char* prim_op_name(PrimOp op);
std::optional<PrimOp> prim_op_from(std::string_view name);
int prim_op_arity(PrimOp op);

// Right-hand sides of let bindings. All of them are pure and produce
// exactly one value.
struct ConstInt {
  int64_t value = 0;
};
struct ConstBool {
  bool value = false;
};
struct Alloc {
  std::vector<VarId> fields;
};
struct Select {
  uint32_t index = 0;
  VarId tuple;
};
struct Prim {
  PrimOp op = PrimOp::Add;
  std::vector<VarId> args;
};
struct VarCopy {
  VarId source;
};
using Rhs = std::variant<ConstInt, ConstBool, Alloc, Select, Prim, VarCopy>;

// Branch condition: either "is this boolean true" or an integer compare.
struct Cond {
  enum class Kind { IsTrue, Lt, Leq, Eq } kind = Kind::IsTrue;
  std::vector<VarId> args;  // one var for IsTrue, two for compares
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

// A function or continuation. Continuations bound by Cont have empty rets.
struct Lambda {
  VarId f;
  std::vector<VarId> params;
  std::vector<VarId> rets;
  ExprPtr body;
};

struct Let {
  std::vector<VarId> binders;  // exactly one for the rhs forms above
  Rhs rhs;
  ExprPtr body;
};
struct Fun {
  std::vector<Lambda> funs;  // mutually recursive group
  ExprPtr body;
};
struct Cont {
  Lambda k;
  ExprPtr body;
};
struct If {
  Cond cond;
  ExprPtr then_arm;
  ExprPtr else_arm;
};
struct SwitchArm {
  int64_t tag = 0;
  ExprPtr body;
};
struct Switch {
  VarId scrutinee;
  std::vector<SwitchArm> arms;
  ExprPtr default_arm;  // may be null
};
struct Apply {
  VarId target;
  std::vector<VarId> args;
  std::vector<VarId> rets;
};
struct Throw {
  VarId target;
  std::vector<VarId> args;
};

using Term = std::variant<Let, Fun, Cont, If, Switch, Apply, Throw>;

struct Expr {
  ProgPoint point;
  Term term;
};

// Whole program: the entry lambda takes no parameters and has a single
// return continuation, the distinguished `halt`. Throwing to halt ends
// the program with the thrown value.
struct Program {
  std::shared_ptr<IrContext> ctx;
  Lambda entry;

  VarId halt() const { return entry.rets.at(0); }
};

struct Violation {
  ProgPoint point;
  std::string message;
};

struct ParseError : std::runtime_error {
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) +
                           ": " + msg),
        line(line),
        col(col) {}
  int line, col;
};

struct ScopeError : std::runtime_error {
  ScopeError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) +
                           ": " + msg),
        line(line),
        col(col) {}
  int line, col;
};

struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

// Lookup tables from one walk over the program.
struct ProgramIndex {
  std::map<ProgPoint, const Expr*> points;
  std::map<VarId, const Lambda*> lambdas;  // includes the entry lambda
};
ProgramIndex build_index(const Program& p);

// Variables used under `l.body` that are bound neither by l's own
// params/rets nor by any binder inside the body. A lambda's own name and
// its group siblings count as free (they are restored from the closure).
std::set<VarId> free_vars(const Lambda& l);

// Static sanity checks: scoping, duplicate binders (alpha uniqueness),
// primitive arities, switch tag duplicates, continuation shapes.
std::vector<Violation> check_well_formed(const Program& p);

// Fresh unique ids for every binder; display names and points preserved.
Program alpha_rename(const Program& p);

// Deep copies that preserve ids and points.
ExprPtr clone_expr(const Expr& e);
Lambda clone_lambda(const Lambda& l);
Program clone_program(const Program& p);

// Number of expressions in a lambda body (used by the inliner's size cap).
int expr_count(const Expr& e);

// Copy `body` substituting `subst` (outer vars mapped to replacement vars),
// giving every inner binder a fresh id and every expression a fresh point.
// This is the beta step used by the inliner.
ExprPtr instantiate_body(const Expr& body, IrContext& ctx,
                         const std::vector<std::pair<VarId, VarId>>& subst);

// Textual round-trip. parse_text throws ParseError/ScopeError; the printed
// form does not include program points and renames binders just enough to
// stay unambiguous, so structurally equal programs print identically.
Program parse_text(std::string_view source);
std::string print_text(const Program& p);

// helper for std::visit
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace cpsopt

template <>
struct std::hash<cpsopt::VarId> {
  size_t operator()(cpsopt::VarId v) const noexcept {
    return std::hash<uint32_t>()(v.raw);
  }
};
template <>
struct std::hash<cpsopt::ProgPoint> {
  size_t operator()(cpsopt::ProgPoint p) const noexcept {
    return std::hash<uint32_t>()(p.raw);
  }
};
