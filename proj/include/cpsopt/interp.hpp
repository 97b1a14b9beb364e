#pragma once

// Reference interpreter for the CPS IR: the semantic oracle the optimizer
// is tested against. Written for clarity and worst-case robustness, not
// speed: all runtime values live in an arena owned by the result, so deep
// continuation chains never recurse on destruction, and evaluation itself
// is a loop (CPS has no returns).

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "cpsopt/ir.hpp"

namespace cpsopt {

struct Value;

// Closure environment shared by a whole fun group: captured free values
// plus the group's lambdas (sibling references are re-closed on lookup).
struct GroupEnv {
  std::vector<const Lambda*> group;
  std::vector<std::pair<VarId, const Value*>> captured;
};

struct IntV {
  int64_t value;
};
struct BoolV {
  bool value;
};
struct TupleV {
  std::vector<const Value*> fields;
};
struct ClosV {
  const Lambda* lam;
  const GroupEnv* env;
};
struct HaltK {};  // the distinguished top-level continuation

struct Value {
  std::variant<IntV, BoolV, TupleV, ClosV, HaltK> v;
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CallEvent {
  ProgPoint site;
  VarId callee;
};
struct ArmEvent {
  ProgPoint site;
  int64_t tag;
};
struct Trace {
  std::vector<CallEvent> calls;
  std::vector<ArmEvent> arms;
};

class EvalArena {
 public:
  const Value* make(Value v) {
    values_.push_back(std::move(v));
    return &values_.back();
  }
  GroupEnv* make_env() {
    envs_.emplace_back();
    return &envs_.back();
  }

 private:
  std::deque<Value> values_;
  std::deque<GroupEnv> envs_;
};

struct EvalResult {
  enum class Outcome { Halted, OutOfFuel } outcome;
  const Value* value = nullptr;  // set iff Halted
  Trace trace;
  std::shared_ptr<EvalArena> arena;  // keeps `value` alive
};

// Runs the program until it throws to halt or has executed `fuel` calls.
// Throws EvalError on dynamic type errors (bad arity, calling a non-
// function, selecting from a non-tuple, division by zero, ...).
EvalResult eval(const Program& p, uint64_t fuel);

// Structural equality; closures compare by identity of their lambda.
bool values_equal(const Value* a, const Value* b);

std::string value_to_string(const Value* v, const IrContext& ctx);

}  // namespace cpsopt
