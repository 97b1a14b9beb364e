#pragma once

// Reflow analysis: decides whether a function's free variables could be
// rebound between the closure's capture and a call site that the
// optimizer wants to rewrite. Instead of re-running the control-flow
// analysis on transformed programs, we build a static flow graph once,
// collapse it to a DAG of strongly connected components, precompute
// which components reach which, and answer queries from that map.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpsopt/cfa.hpp"
#include "cpsopt/ir.hpp"

namespace cpsopt {

using NodeId = uint32_t;

enum class NodeKind {
  FreeVarBind,  // closure's free variables restored on entry
  ParamBind,    // parameters and return continuations bound
  LetBind,      // a let binding, or a fun/cont definition executing
  CallSite,     // apply or throw
  Branch,       // if or switch
  Plain,        // structural node with no binding effect
  EscapeHub,    // stand-in callee for calls through unknown values
};

const char* node_kind_name(NodeKind k);

struct FlowNode {
  NodeId id = 0;
  NodeKind kind = NodeKind::Plain;
  std::optional<ProgPoint> point;
  std::vector<VarId> binds;
};

struct FlowEdge {
  NodeId from = 0;
  NodeId to = 0;
  bool call = false;  // true for call-site -> function-entry edges
};

struct FlowGraph {
  std::vector<FlowNode> nodes;
  std::vector<FlowEdge> edges;
  // Successor lists in compressed form, filled by finalize(): node n's
  // successors are succ_flat[succ_off[n] .. succ_off[n + 1]). One flat
  // array keeps traversal contiguous on graphs with tens of thousands
  // of nodes.
  std::vector<uint32_t> succ_off;
  std::vector<NodeId> succ_flat;

  std::unordered_map<VarId, NodeId> fun_entry;     // FreeVarBind node
  std::unordered_map<VarId, NodeId> param_entry;   // ParamBind node
  std::unordered_map<VarId, NodeId> capture_node;  // where the def executes
  std::map<ProgPoint, NodeId> site_node;
  std::unordered_map<VarId, std::vector<NodeId>> bind_sites;
  NodeId escape_hub = 0;

  NodeId add_node(NodeKind kind, std::optional<ProgPoint> point = {},
                  std::vector<VarId> binds = {});
  void add_edge(NodeId from, NodeId to, bool call = false);
  void finalize();  // builds the successor lists and bind_sites

  // Bare digraph with `n` Plain nodes; used by tests and benchmarks.
  static FlowGraph raw(size_t n,
                       const std::vector<std::pair<NodeId, NodeId>>& edges);
};

// Builds the whole-program flow graph. Each lambda contributes
// FreeVarBind -> ParamBind -> body; the entry lambda doubles as the
// top-level pseudo-function. Call sites get one edge per known callee,
// or an edge to the EscapeHub when the callee is unknown — except throws
// to the program's halt continuation, which terminate and get none.
FlowGraph build_graph(const Program& p, const CfaResult& cfa);

struct SccResult {
  std::vector<uint32_t> comp;               // node -> component
  uint32_t count = 0;                       // number of components
  std::vector<std::set<uint32_t>> dag;      // condensation edges
  std::vector<bool> cyclic;                 // >= 2 nodes, or a self-loop
};

SccResult tarjan_scc(const FlowGraph& g);

// Transitive reachability over the condensation. R(c) holds every
// component reachable from c by a nonempty path; a cyclic component
// contains itself. Components are processed leaves-upward so each R set
// is built exactly once.
struct ReachMap {
  std::vector<uint32_t> comp;
  std::vector<std::set<uint32_t>> r;
  std::vector<bool> cyclic;
};

ReachMap dag_reachability(const SccResult& scc);

inline ReachMap build_reachability(const FlowGraph& g) {
  return dag_reachability(tarjan_scc(g));
}

// Nonempty-path reachability between graph nodes.
bool reaches(const ReachMap& m, NodeId from, NodeId to);

struct NotACallSite : std::logic_error {
  using std::logic_error::logic_error;
};
struct UnknownFunction : std::logic_error {
  using std::logic_error::logic_error;
};

// True iff no free variable of `target_fn` can be rebound on some path
// from the function's definition to `site`. The function's own entry
// nodes (FreeVarBind/ParamBind) do not count: they re-bind the captured
// environment, which is exactly what the rewrite preserves.
bool consonant(const ReachMap& m, const FlowGraph& g, VarId target_fn,
               ProgPoint site);

// Graphviz rendering; binding nodes are annotated with what they bind,
// call edges are dashed, the escape hub is a diamond.
std::string to_dot(const FlowGraph& g, const IrContext& ctx);

}  // namespace cpsopt
