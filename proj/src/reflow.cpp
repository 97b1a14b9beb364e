#include "cpsopt/reflow.hpp"

#include <algorithm>

namespace cpsopt {

const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::FreeVarBind: return "FreeVarBind";
    case NodeKind::ParamBind: return "ParamBind";
    case NodeKind::LetBind: return "LetBind";
    case NodeKind::CallSite: return "CallSite";
    case NodeKind::Branch: return "Branch";
    case NodeKind::Plain: return "Plain";
    case NodeKind::EscapeHub: return "EscapeHub";
  }
  return "?";
}

NodeId FlowGraph::add_node(NodeKind kind, std::optional<ProgPoint> point,
                           std::vector<VarId> binds) {
  NodeId id = static_cast<NodeId>(nodes.size());
  nodes.push_back({id, kind, point, std::move(binds)});
  return id;
}

void FlowGraph::add_edge(NodeId from, NodeId to, bool call) {
  edges.push_back({from, to, call});
}

void FlowGraph::finalize() {
  // counting sort of the edges by source node
  succ_off.assign(nodes.size() + 1, 0);
  for (const FlowEdge& e : edges) succ_off[e.from + 1]++;
  for (size_t i = 1; i < succ_off.size(); i++) succ_off[i] += succ_off[i - 1];
  succ_flat.resize(edges.size());
  std::vector<uint32_t> cursor(succ_off.begin(), succ_off.end() - 1);
  for (const FlowEdge& e : edges) succ_flat[cursor[e.from]++] = e.to;
  bind_sites.clear();
  for (const FlowNode& n : nodes)
    for (VarId v : n.binds) bind_sites[v].push_back(n.id);
}

FlowGraph FlowGraph::raw(size_t n,
                         const std::vector<std::pair<NodeId, NodeId>>& es) {
  FlowGraph g;
  g.nodes.reserve(n);
  g.edges.reserve(es.size());
  for (size_t i = 0; i < n; i++) g.add_node(NodeKind::Plain);
  for (auto [a, b] : es) g.add_edge(a, b);
  g.finalize();
  return g;
}

namespace {

class GraphBuilder {
 public:
  GraphBuilder(const Program& p, const CfaResult& cfa) : p_(p), cfa_(cfa) {}

  FlowGraph run() {
    g_.escape_hub = g_.add_node(NodeKind::EscapeHub);
    add_lambda(p_.entry);
    // Call edges: one per known callee; unknown callees go through the
    // hub, which fans out to every escaping function. Throws to halt end
    // the program, so they get no successors at all.
    for (auto& [pt, site] : g_.site_node) {
      if (halt_sites_.count(site)) continue;
      const CallTargets& t = call_targets(cfa_, pt);
      if (t.kind == CallTargets::Kind::Known) {
        for (VarId f : t.funs) {
          auto it = g_.fun_entry.find(f);
          if (it != g_.fun_entry.end()) g_.add_edge(site, it->second, true);
        }
      } else if (t.kind == CallTargets::Kind::Top) {
        g_.add_edge(site, g_.escape_hub, true);
      }
    }
    for (VarId f : cfa_.escaping) {
      auto it = g_.fun_entry.find(f);
      if (it != g_.fun_entry.end())
        g_.add_edge(g_.escape_hub, it->second, true);
    }
    g_.finalize();
    return std::move(g_);
  }

 private:
  void add_lambda(const Lambda& l) {
    std::set<VarId> fv = free_vars(l);
    NodeId entry = g_.add_node(NodeKind::FreeVarBind, {},
                               {fv.begin(), fv.end()});
    std::vector<VarId> pb(l.params);
    pb.insert(pb.end(), l.rets.begin(), l.rets.end());
    NodeId params = g_.add_node(NodeKind::ParamBind, {}, std::move(pb));
    g_.add_edge(entry, params);
    g_.fun_entry[l.f] = entry;
    g_.param_entry[l.f] = params;
    NodeId body = add_expr(*l.body);
    g_.add_edge(params, body);
  }

  NodeId add_expr(const Expr& e) {
    return std::visit(
        overloaded{
            [&](const Let& t) {
              NodeId n = g_.add_node(NodeKind::LetBind, e.point, t.binders);
              g_.add_edge(n, add_expr(*t.body));
              return n;
            },
            [&](const Fun& t) {
              // The definition node binds the group names; it is the
              // point where the closures capture their environment.
              std::vector<VarId> names;
              for (const Lambda& l : t.funs) names.push_back(l.f);
              NodeId n = g_.add_node(NodeKind::LetBind, e.point, names);
              for (const Lambda& l : t.funs) {
                g_.capture_node[l.f] = n;
                add_lambda(l);
              }
              g_.add_edge(n, add_expr(*t.body));
              return n;
            },
            [&](const Cont& t) {
              NodeId n = g_.add_node(NodeKind::LetBind, e.point, {t.k.f});
              g_.capture_node[t.k.f] = n;
              add_lambda(t.k);
              g_.add_edge(n, add_expr(*t.body));
              return n;
            },
            [&](const If& t) {
              NodeId n = g_.add_node(NodeKind::Branch, e.point);
              g_.add_edge(n, add_expr(*t.then_arm));
              g_.add_edge(n, add_expr(*t.else_arm));
              return n;
            },
            [&](const Switch& t) {
              NodeId n = g_.add_node(NodeKind::Branch, e.point);
              for (const SwitchArm& a : t.arms)
                g_.add_edge(n, add_expr(*a.body));
              if (t.default_arm) g_.add_edge(n, add_expr(*t.default_arm));
              return n;
            },
            [&](const Apply& t) {
              NodeId n = g_.add_node(NodeKind::CallSite, e.point);
              g_.site_node[e.point] = n;
              if (t.target == p_.halt()) halt_sites_.insert(n);
              return n;
            },
            [&](const Throw& t) {
              NodeId n = g_.add_node(NodeKind::CallSite, e.point);
              g_.site_node[e.point] = n;
              if (t.target == p_.halt()) halt_sites_.insert(n);
              return n;
            },
        },
        e.term);
  }

  const Program& p_;
  const CfaResult& cfa_;
  FlowGraph g_;
  std::set<NodeId> halt_sites_;
};

}  // namespace

FlowGraph build_graph(const Program& p, const CfaResult& cfa) {
  return GraphBuilder(p, cfa).run();
}

SccResult tarjan_scc(const FlowGraph& g) {
  const size_t n = g.nodes.size();
  SccResult out;
  out.comp.assign(n, UINT32_MAX);

  std::vector<uint32_t> index(n, UINT32_MAX), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<uint32_t> stack;
  uint32_t next_index = 0;
  std::vector<uint32_t> comp_size;

  // Iterative Tarjan: each frame remembers how many successors it has
  // already expanded.
  struct Frame {
    uint32_t v;
    size_t child;
  };
  std::vector<Frame> frames;

  for (uint32_t root = 0; root < n; root++) {
    if (index[root] != UINT32_MAX) continue;
    frames.push_back({root, 0});
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      size_t end = g.succ_off[f.v + 1];
      if (g.succ_off[f.v] + f.child < end) {
        uint32_t w = g.succ_flat[g.succ_off[f.v] + f.child++];
        if (index[w] == UINT32_MAX) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
      } else {
        uint32_t v = f.v;
        frames.pop_back();
        if (!frames.empty())
          low[frames.back().v] = std::min(low[frames.back().v], low[v]);
        if (low[v] == index[v]) {
          uint32_t c = out.count++;
          uint32_t size = 0;
          for (;;) {
            uint32_t w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            out.comp[w] = c;
            size++;
            if (w == v) break;
          }
          comp_size.push_back(size);
        }
      }
    }
  }

  out.cyclic.assign(out.count, false);
  for (uint32_t c = 0; c < out.count; c++)
    if (comp_size[c] >= 2) out.cyclic[c] = true;
  out.dag.assign(out.count, {});
  for (const FlowEdge& e : g.edges) {
    uint32_t a = out.comp[e.from], b = out.comp[e.to];
    if (a == b) {
      // A one-node component is cyclic only via a self-loop; multi-node
      // components are cyclic by construction.
      if (e.from == e.to) out.cyclic[a] = true;
    } else {
      out.dag[a].insert(b);
    }
  }
  return out;
}

ReachMap dag_reachability(const SccResult& scc) {
  ReachMap m;
  m.comp = scc.comp;
  m.cyclic = scc.cyclic;
  m.r.assign(scc.count, {});

  // Cyclic components reach themselves by a nonempty path.
  for (uint32_t c = 0; c < scc.count; c++)
    if (scc.cyclic[c]) m.r[c].insert(c);

  // Process components leaves-upward: a component is ready once all of
  // its successors are done; then R(parent) ∪= R(child) ∪ {child}.
  std::vector<uint32_t> pending(scc.count, 0);
  std::vector<std::vector<uint32_t>> parents(scc.count);
  for (uint32_t c = 0; c < scc.count; c++) {
    pending[c] = static_cast<uint32_t>(scc.dag[c].size());
    for (uint32_t d : scc.dag[c]) parents[d].push_back(c);
  }
  std::vector<uint32_t> ready;
  for (uint32_t c = 0; c < scc.count; c++)
    if (pending[c] == 0) ready.push_back(c);
  size_t processed = 0;
  while (!ready.empty()) {
    uint32_t c = ready.back();
    ready.pop_back();
    processed++;
    for (uint32_t p : parents[c]) {
      m.r[p].insert(m.r[c].begin(), m.r[c].end());
      m.r[p].insert(c);
      if (--pending[p] == 0) ready.push_back(p);
    }
  }
  if (processed != scc.count)
    throw InternalError("condensation is not acyclic");
  return m;
}

bool reaches(const ReachMap& m, NodeId from, NodeId to) {
  uint32_t a = m.comp.at(from), b = m.comp.at(to);
  if (a == b) return m.cyclic[a];
  return m.r[a].count(b) > 0;
}

bool consonant(const ReachMap& m, const FlowGraph& g, VarId target_fn,
               ProgPoint site) {
  auto fe = g.fun_entry.find(target_fn);
  if (fe == g.fun_entry.end())
    throw UnknownFunction("consonant: not a known function");
  auto sn = g.site_node.find(site);
  if (sn == g.site_node.end())
    throw NotACallSite("consonant: program point is not a call site");

  const std::vector<VarId>& free = g.nodes[fe->second].binds;
  if (free.empty()) return true;

  auto cn = g.capture_node.find(target_fn);
  NodeId capture =
      cn != g.capture_node.end() ? cn->second : fe->second;
  NodeId own_params = g.param_entry.at(target_fn);

  for (VarId v : free) {
    auto bs = g.bind_sites.find(v);
    if (bs == g.bind_sites.end()) continue;
    for (NodeId b : bs->second) {
      // The function's own entry re-binds its free variables from the
      // captured closure; that is not interference.
      if (b == fe->second || b == own_params) continue;
      if (reaches(m, capture, b) && reaches(m, b, sn->second)) return false;
    }
  }
  return true;
}

std::string to_dot(const FlowGraph& g, const IrContext& ctx) {
  std::string s = "digraph reflow {\n  node [fontname=\"monospace\"];\n";
  for (const FlowNode& n : g.nodes) {
    std::string label = node_kind_name(n.kind);
    if (n.point) label += " @" + std::to_string(n.point->raw);
    if (!n.binds.empty()) {
      label += " {";
      for (size_t i = 0; i < n.binds.size(); i++) {
        if (i) label += ",";
        label += ctx.name(n.binds[i]);
      }
      label += "}";
    }
    std::string shape = n.kind == NodeKind::EscapeHub ? "diamond"
                        : n.binds.empty()             ? "ellipse"
                                                      : "box";
    s += "  n" + std::to_string(n.id) + " [label=\"" + std::to_string(n.id) +
         ": " + label + "\" shape=" + shape + "];\n";
  }
  for (const FlowEdge& e : g.edges) {
    s += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to);
    if (e.call) s += " [style=dashed]";
    s += ";\n";
  }
  s += "}\n";
  return s;
}

}  // namespace cpsopt
