#include <doctest.h>

#include <random>
#include <set>
#include <vector>

#include "cpsopt/cfa.hpp"
#include "cpsopt/reflow.hpp"
#include "helpers.hpp"

using namespace cpsopt;
using namespace cpsopt::testing;

TEST_CASE("strongly connected components: a three-cycle collapses") {
  FlowGraph g = FlowGraph::raw(3, {{0, 1}, {1, 2}, {2, 0}});
  SccResult scc = tarjan_scc(g);
  CHECK(scc.count == 1);
  CHECK(scc.comp[0] == scc.comp[1]);
  CHECK(scc.comp[1] == scc.comp[2]);
  CHECK(scc.cyclic[scc.comp[0]]);
}

TEST_CASE("strongly connected components: a chain stays apart") {
  FlowGraph g = FlowGraph::raw(3, {{0, 1}, {1, 2}});
  SccResult scc = tarjan_scc(g);
  CHECK(scc.count == 3);
  CHECK(!scc.cyclic[scc.comp[0]]);
  CHECK(!scc.cyclic[scc.comp[2]]);
  CHECK(scc.dag[scc.comp[0]].count(scc.comp[1]) == 1);
  CHECK(scc.dag[scc.comp[1]].count(scc.comp[2]) == 1);
  CHECK(scc.dag[scc.comp[0]].count(scc.comp[2]) == 0);  // only direct edges
}

TEST_CASE("strongly connected components: self-loops make a node cyclic") {
  FlowGraph g = FlowGraph::raw(2, {{0, 0}});
  SccResult scc = tarjan_scc(g);
  CHECK(scc.count == 2);
  CHECK(scc.cyclic[scc.comp[0]]);
  CHECK(!scc.cyclic[scc.comp[1]]);
}

TEST_CASE("reachability asks for a nonempty path") {
  // isolated node: not reachable from itself
  FlowGraph lone = FlowGraph::raw(1, {});
  ReachMap m = build_reachability(lone);
  CHECK(!reaches(m, 0, 0));

  // self-loop: reachable from itself
  FlowGraph loop = FlowGraph::raw(1, {{0, 0}});
  ReachMap ml = build_reachability(loop);
  CHECK(reaches(ml, 0, 0));

  // chain: forwards only
  FlowGraph chain = FlowGraph::raw(3, {{0, 1}, {1, 2}});
  ReachMap mc = build_reachability(chain);
  CHECK(reaches(mc, 0, 2));
  CHECK(!reaches(mc, 2, 0));
  CHECK(!reaches(mc, 0, 0));

  // two-node cycle: everything reaches everything
  FlowGraph cyc = FlowGraph::raw(2, {{0, 1}, {1, 0}});
  ReachMap my = build_reachability(cyc);
  for (NodeId i : {0u, 1u})
    for (NodeId j : {0u, 1u}) CHECK(reaches(my, i, j));
}

TEST_CASE("reachability agrees with a closure oracle on random graphs") {
  std::mt19937 rng(4242);
  for (int trial = 0; trial < 40; trial++) {
    RandomGraph rg = random_digraph(rng, 60);
    CAPTURE(trial);
    CAPTURE(rg.n);
    CAPTURE(rg.edges.size());
    FlowGraph g = FlowGraph::raw(rg.n, rg.edges);
    ReachMap m = build_reachability(g);
    auto oracle = transitive_closure(rg.n, rg.edges);
    for (uint32_t i = 0; i < rg.n; i++)
      for (uint32_t j = 0; j < rg.n; j++)
        CHECK(reaches(m, i, j) == static_cast<bool>(oracle[i][j]));
  }
}

TEST_CASE("condensations are sound: acyclic, complete, honestly cyclic") {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 30; trial++) {
    RandomGraph rg = random_digraph(rng, 50);
    CAPTURE(trial);
    FlowGraph g = FlowGraph::raw(rg.n, rg.edges);
    SccResult scc = tarjan_scc(g);

    CHECK(!has_cycle(scc.count, scc.dag));

    for (auto [u, v] : rg.edges) {
      if (scc.comp[u] == scc.comp[v]) continue;
      CHECK(scc.dag[scc.comp[u]].count(scc.comp[v]) == 1);
    }
    for (uint32_t c = 0; c < scc.count; c++)
      CHECK(scc.dag[c].count(c) == 0);

    // a component is cyclic iff it has two members or a self-loop
    std::vector<int> size(scc.count, 0);
    for (uint32_t v = 0; v < rg.n; v++) size[scc.comp[v]]++;
    std::vector<bool> self_loop(scc.count, false);
    for (auto [u, v] : rg.edges)
      if (u == v) self_loop[scc.comp[u]] = true;
    for (uint32_t c = 0; c < scc.count; c++)
      CHECK(scc.cyclic[c] == (size[c] >= 2 || self_loop[c]));
  }
}

TEST_CASE("adding edges never removes reachability") {
  std::mt19937 rng(1331);
  for (int trial = 0; trial < 20; trial++) {
    RandomGraph rg = random_digraph(rng, 40);
    FlowGraph base = FlowGraph::raw(rg.n, rg.edges);
    ReachMap mb = build_reachability(base);

    std::uniform_int_distribution<uint32_t> node(
        0, static_cast<uint32_t>(rg.n - 1));
    EdgeList more = rg.edges;
    more.emplace_back(node(rng), node(rng));
    FlowGraph aug = FlowGraph::raw(rg.n, more);
    ReachMap ma = build_reachability(aug);

    for (uint32_t i = 0; i < rg.n; i++)
      for (uint32_t j = 0; j < rg.n; j++)
        if (reaches(mb, i, j)) CHECK(reaches(ma, i, j));
  }
}

namespace {

struct Built {
  Program p;
  CfaResult cfa;
  FlowGraph graph;
  ReachMap reach;
};

Built build(const std::string& file) {
  Built b{load_corpus(file), {}, {}, {}};
  b.cfa = analyze(b.p);
  b.graph = build_graph(b.p, b.cfa);
  b.reach = build_reachability(b.graph);
  return b;
}

}  // namespace

TEST_CASE("binding nodes carry exactly what they bind") {
  for (const std::string& file : corpus_files()) {
    CAPTURE(file);
    Built b = build(file);
    ProgramIndex ix = build_index(b.p);

    for (const auto& [f, l] : ix.lambdas) {
      NodeId entry = b.graph.fun_entry.at(f);
      std::set<VarId> carried(b.graph.nodes[entry].binds.begin(),
                              b.graph.nodes[entry].binds.end());
      CHECK(carried == free_vars(*l));

      NodeId params = b.graph.param_entry.at(f);
      std::set<VarId> carried_params(b.graph.nodes[params].binds.begin(),
                                     b.graph.nodes[params].binds.end());
      std::set<VarId> expected(l->params.begin(), l->params.end());
      expected.insert(l->rets.begin(), l->rets.end());
      CHECK(carried_params == expected);
    }

    // bind_sites is exactly the inverse of the binds lists
    std::set<std::pair<VarId, NodeId>> forward, backward;
    for (const FlowNode& n : b.graph.nodes)
      for (VarId v : n.binds) forward.insert({v, n.id});
    for (const auto& [v, sites] : b.graph.bind_sites)
      for (NodeId n : sites) backward.insert({v, n});
    CHECK(forward == backward);
  }
}

TEST_CASE("the escape hub fans out to each escaping function once") {
  for (const std::string& file : corpus_files()) {
    CAPTURE(file);
    Built b = build(file);
    std::set<NodeId> fanout;
    size_t hub_edges = 0;
    for (const FlowEdge& e : b.graph.edges)
      if (e.from == b.graph.escape_hub) {
        fanout.insert(e.to);
        hub_edges++;
        CHECK(e.call);
      }
    CHECK(hub_edges == b.cfa.escaping.size());
    CHECK(fanout.size() == hub_edges);
    for (VarId f : b.cfa.escaping)
      CHECK(fanout.count(b.graph.fun_entry.at(f)) == 1);
  }
}

TEST_CASE("consonance holds when no rebinding sits on a capture-to-site path") {
  Built b = build("example2.mml");
  VarId f = *lambda_named(b.p, "f");
  ProgPoint site = sole_apply_to(b.p, "f");
  CHECK(consonant(b.reach, b.graph, f, site));
}

TEST_CASE("consonance fails when the captured variable is rebound en route") {
  Built b = build("example3.mml");
  VarId leak = *lambda_with_free_var(b.p, "b");
  ProgPoint site = sole_apply_to(b.p, "kf");
  CHECK(!consonant(b.reach, b.graph, leak, site));
}

TEST_CASE("a closed function is consonant anywhere") {
  Built b = build("example3.mml");
  VarId t = *lambda_named(b.p, "t");
  ProgPoint site = sole_apply_to(b.p, "kf");
  CHECK(consonant(b.reach, b.graph, t, site));
}

TEST_CASE("consonance validates its inputs") {
  Built b = build("example3.mml");
  VarId t = *lambda_named(b.p, "t");
  ProgPoint site = sole_apply_to(b.p, "kf");
  CHECK_THROWS_AS(consonant(b.reach, b.graph, t, ProgPoint{1000000}),
                  NotACallSite);
  VarId plain = *var_named(b.p, "b");  // a parameter, not a function
  CHECK_THROWS_AS(consonant(b.reach, b.graph, plain, site), UnknownFunction);
}

TEST_CASE("rendering the graph labels kinds and dashes call edges") {
  Built b = build("basic1.mml");
  std::string dot = to_dot(b.graph, *b.p.ctx);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("CallSite") != std::string::npos);
  CHECK(dot.find("EscapeHub") != std::string::npos);
  CHECK(dot.find("dashed") != std::string::npos);
}
