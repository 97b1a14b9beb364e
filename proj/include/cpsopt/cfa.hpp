#pragma once

// Monovariant (0CFA) control-flow analysis over the CPS IR.
//
// The abstract domain tracks, per variable, which functions and which
// boolean constants can reach it, plus tuple structure to a bounded
// nesting depth. Integers and comparison results are not tracked (TOP).
// Functions whose call sites cannot all be enumerated are "escaping" and
// have TOP joined into their parameters and returns every round.

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpsopt/ir.hpp"

namespace cpsopt {

inline constexpr int kDefaultDepthLimit = 5;

class AbstractValue {
 public:
  enum class Kind { Bot, Top, Bool, Lambdas, Tuple };

  static AbstractValue bot() { return AbstractValue(Kind::Bot); }
  static AbstractValue top() { return AbstractValue(Kind::Top); }
  static AbstractValue boolean(bool b) {
    AbstractValue v(Kind::Bool);
    v.bval_ = b;
    return v;
  }
  static AbstractValue lambdas(std::set<VarId> funs) {
    AbstractValue v(Kind::Lambdas);
    v.funs_ = std::move(funs);
    return v;
  }
  static AbstractValue tuple(std::vector<AbstractValue> elems) {
    AbstractValue v(Kind::Tuple);
    v.elems_ = std::move(elems);
    return v;
  }

  Kind kind() const { return kind_; }
  bool is_bot() const { return kind_ == Kind::Bot; }
  bool is_top() const { return kind_ == Kind::Top; }
  bool bool_value() const { return bval_; }
  const std::set<VarId>& funs() const { return funs_; }
  const std::vector<AbstractValue>& elems() const { return elems_; }

  bool operator==(const AbstractValue& o) const {
    return kind_ == o.kind_ && bval_ == o.bval_ && funs_ == o.funs_ &&
           elems_ == o.elems_;
  }
  bool operator!=(const AbstractValue& o) const { return !(*this == o); }

  // Deepest TUPLE nesting (0 for non-tuples).
  int depth() const;

  std::string to_string(const IrContext& ctx) const;

 private:
  explicit AbstractValue(Kind k) : kind_(k) {}
  Kind kind_;
  bool bval_ = false;
  std::set<VarId> funs_;
  std::vector<AbstractValue> elems_;
};

// Least upper bound of two values sitting at tuple nesting `depth`.
// Any join at depth >= depth_limit whose result would be a TUPLE widens
// to TOP, so no value ever nests deeper than the limit. Incomparable
// kinds (e.g. TUPLE vs LAMBDAS) and disagreeing booleans widen to TOP.
AbstractValue join(const AbstractValue& a, const AbstractValue& b, int depth,
                   int depth_limit = kDefaultDepthLimit);

struct CallTargets {
  enum class Kind { Bot, Top, Known } kind = Kind::Bot;
  std::set<VarId> funs;  // populated iff Known
};

struct UnknownSite : std::logic_error {
  using std::logic_error::logic_error;
};

struct CfaResult {
  std::unordered_map<VarId, AbstractValue> flow;  // absent means BOT
  std::map<ProgPoint, CallTargets> targets;       // one entry per call site
  std::set<VarId> escaping;
  int iterations = 0;
  int depth_limit = kDefaultDepthLimit;

  const AbstractValue& value_of(VarId v) const;
};

struct CfaOptions {
  int depth_limit = kDefaultDepthLimit;
  // Called after every fixpoint round with the flow map so far; used by
  // tests to check monotonicity.
  std::function<void(const std::unordered_map<VarId, AbstractValue>&)>
      on_round;
};

CfaResult analyze(const Program& p, const CfaOptions& opts = {});

// Target classification for one call site. Throws UnknownSite if `site`
// does not label an Apply or Throw in the analyzed program.
const CallTargets& call_targets(const CfaResult& r, ProgPoint site);

}  // namespace cpsopt
