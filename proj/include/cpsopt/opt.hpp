#pragma once

// The optimization passes. Each pass edits the program in place and
// reports what it changed. Passes that need analysis results take them
// as arguments; run_pipeline owns the recompute-when-invalidated logic.

#include <optional>
#include <string>
#include <vector>

#include "cpsopt/cfa.hpp"
#include "cpsopt/ir.hpp"
#include "cpsopt/reflow.hpp"

namespace cpsopt {

inline constexpr int kDefaultInlineSizeLimit = 40;

struct PassStats {
  int branches_eliminated = 0;
  int copies_propagated = 0;
  int functions_inlined = 0;
  int params_removed = 0;

  // (branch point, tag of the arm that was kept)
  std::vector<std::pair<ProgPoint, int64_t>> branch_sites;
  std::vector<ProgPoint> copy_sites;
  std::vector<ProgPoint> inline_sites;

  bool changed() const {
    return branches_eliminated || copies_propagated || functions_inlined ||
           params_removed;
  }
  void absorb(const PassStats& other);
};

// Replaces if/switch expressions whose scrutinee the analysis pins to a
// single boolean with the surviving arm.
PassStats branch_eliminate(Program& p, const CfaResult& cfa);

// Rewrites the callee variable of a call that can only reach one known
// function to name that function directly, when the function is in
// scope at the site and its free variables provably cannot have been
// rebound in between.
PassStats copy_propagate(Program& p, const CfaResult& cfa,
                         const FlowGraph& graph, const ReachMap& reach);

// Replaces a call that can only reach one known function with a copy of
// its body. Functions with free variables are fair game as long as the
// rebinding check passes; recursive functions and bodies over the size
// limit are not.
PassStats inline_calls(Program& p, const CfaResult& cfa,
                       const FlowGraph& graph, const ReachMap& reach,
                       int size_limit = kDefaultInlineSizeLimit);

// Purely syntactic cleanup: drops let bindings nobody needs and removes
// parameters (with the matching arguments) of functions whose every use
// is a direct call. Never deletes functions or return continuations.
PassStats useless_var_elim(Program& p);

enum class PassKind { BranchElim, CopyProp, Inline, UselessVarElim };

const char* pass_kind_name(PassKind k);
std::optional<PassKind> pass_kind_from(std::string_view name);

struct PipelineOptions {
  int depth_limit = kDefaultDepthLimit;
  int inline_size_limit = kDefaultInlineSizeLimit;
};

// Runs the passes in order, recomputing the analyses lazily: a pass that
// changed the program invalidates them, except copy propagation, which
// only renames call targets and keeps every cached result valid. The
// program is re-checked for well-formedness after every pass.
PassStats run_pipeline(Program& p, const std::vector<PassKind>& passes,
                       const PipelineOptions& opts = {});

}  // namespace cpsopt
