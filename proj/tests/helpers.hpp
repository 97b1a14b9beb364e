#pragma once

// Shared test utilities: corpus loading, structural finders over the IR,
// and small independent oracles (transitive closure, cycle detection,
// random digraphs) that the graph code is checked against.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpsopt/ir.hpp"
#include "cpsopt/surface.hpp"

namespace cpsopt::testing {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Loads a corpus program by file name; .mml goes through the frontend,
// .cps straight into the IR parser.
inline Program load_corpus(const std::string& filename) {
  std::string src = read_file(std::string(CORPUS_DIR) + "/" + filename);
  if (ends_with(filename, ".mml")) {
    SurfacePtr e = parse_surface(src);
    return cps_convert(*e);
  }
  return parse_text(src);
}

// Every corpus file name, sorted for deterministic iteration.
inline const std::vector<std::string>& corpus_files() {
  static const std::vector<std::string> files = [] {
    std::vector<std::string> fs;
    for (const auto& entry :
         std::filesystem::directory_iterator(CORPUS_DIR)) {
      std::string name = entry.path().filename().string();
      if (ends_with(name, ".mml") || ends_with(name, ".cps"))
        fs.push_back(name);
    }
    std::sort(fs.begin(), fs.end());
    return fs;
  }();
  return files;
}

// Preorder walk over every expression, including lambda bodies.
template <typename F>
void for_each_expr(const Expr& e, F&& f) {
  f(e);
  std::visit(overloaded{
                 [&](const Let& t) { for_each_expr(*t.body, f); },
                 [&](const Fun& t) {
                   for (const Lambda& l : t.funs) for_each_expr(*l.body, f);
                   for_each_expr(*t.body, f);
                 },
                 [&](const Cont& t) {
                   for_each_expr(*t.k.body, f);
                   for_each_expr(*t.body, f);
                 },
                 [&](const If& t) {
                   for_each_expr(*t.then_arm, f);
                   for_each_expr(*t.else_arm, f);
                 },
                 [&](const Switch& t) {
                   for (const SwitchArm& a : t.arms) for_each_expr(*a.body, f);
                   if (t.default_arm) for_each_expr(*t.default_arm, f);
                 },
                 [&](const Apply&) {},
                 [&](const Throw&) {},
             },
             e.term);
}

template <typename F>
void for_each_expr(const Program& p, F&& f) {
  for_each_expr(*p.entry.body, f);
}

// Apply sites whose callee variable carries the given display name.
inline std::vector<ProgPoint> apply_points_to(const Program& p,
                                              const std::string& callee) {
  std::vector<ProgPoint> points;
  for_each_expr(p, [&](const Expr& e) {
    if (auto* a = std::get_if<Apply>(&e.term))
      if (p.ctx->name(a->target) == callee) points.push_back(e.point);
  });
  return points;
}

inline ProgPoint sole_apply_to(const Program& p, const std::string& callee) {
  auto points = apply_points_to(p, callee);
  if (points.size() != 1)
    throw std::runtime_error("expected exactly one apply to '" + callee +
                             "', found " + std::to_string(points.size()));
  return points[0];
}

// The lambda bound to the given display name (including the entry).
inline std::optional<VarId> lambda_named(const Program& p,
                                         const std::string& name) {
  ProgramIndex ix = build_index(p);
  for (const auto& [v, l] : ix.lambdas)
    if (p.ctx->name(v) == name) return v;
  return std::nullopt;
}

// The first lambda (by preorder) whose free variables include one with
// the given display name; finds anonymous closures by what they capture.
inline std::optional<VarId> lambda_with_free_var(const Program& p,
                                                 const std::string& name) {
  std::optional<VarId> found;
  std::function<void(const Lambda&)> visit_lambda = [&](const Lambda& l) {
    if (!found)
      for (VarId v : free_vars(l))
        if (p.ctx->name(v) == name) {
          found = l.f;
          return;
        }
  };
  for_each_expr(p, [&](const Expr& e) {
    if (found) return;
    if (auto* t = std::get_if<Fun>(&e.term))
      for (const Lambda& l : t->funs) visit_lambda(l);
  });
  return found;
}

// The first binder (let binder or parameter) with the given display name.
inline std::optional<VarId> var_named(const Program& p,
                                      const std::string& name) {
  std::optional<VarId> found;
  auto check = [&](VarId v) {
    if (!found && p.ctx->name(v) == name) found = v;
  };
  for (VarId v : p.entry.params) check(v);
  for_each_expr(p, [&](const Expr& e) {
    std::visit(overloaded{
                   [&](const Let& t) {
                     for (VarId v : t.binders) check(v);
                   },
                   [&](const Fun& t) {
                     for (const Lambda& l : t.funs) {
                       check(l.f);
                       for (VarId v : l.params) check(v);
                       for (VarId v : l.rets) check(v);
                     }
                   },
                   [&](const Cont& t) {
                     check(t.k.f);
                     for (VarId v : t.k.params) check(v);
                   },
                   [&](const auto&) {},
               },
               e.term);
  });
  return found;
}

// ------------------------------------------------------------------
// Graph oracles.

using EdgeList = std::vector<std::pair<uint32_t, uint32_t>>;

// Floyd–Warshall style transitive closure: closure[i][j] says a path of
// one or more edges leads from i to j. Deliberately the dumbest possible
// implementation, to double-check the SCC-based one.
inline std::vector<std::vector<char>> transitive_closure(
    size_t n, const EdgeList& edges) {
  std::vector<std::vector<char>> r(n, std::vector<char>(n, 0));
  for (auto [a, b] : edges) r[a][b] = 1;
  for (size_t k = 0; k < n; k++)
    for (size_t i = 0; i < n; i++) {
      if (!r[i][k]) continue;
      for (size_t j = 0; j < n; j++)
        if (r[k][j]) r[i][j] = 1;
    }
  return r;
}

// DFS three-color cycle check, for validating condensations.
inline bool has_cycle(size_t n, const std::vector<std::set<uint32_t>>& adj) {
  std::vector<int> color(n, 0);  // 0 white, 1 on stack, 2 done
  std::function<bool(uint32_t)> visit = [&](uint32_t u) -> bool {
    color[u] = 1;
    for (uint32_t v : adj[u]) {
      if (color[v] == 1) return true;
      if (color[v] == 0 && visit(v)) return true;
    }
    color[u] = 2;
    return false;
  };
  for (uint32_t u = 0; u < n; u++)
    if (color[u] == 0 && visit(u)) return true;
  return false;
}

struct RandomGraph {
  size_t n = 0;
  EdgeList edges;
};

// Random digraph with up to max_nodes nodes and at most 3n edges
// (self-loops and parallel edges allowed; both are legal inputs).
inline RandomGraph random_digraph(std::mt19937& rng, size_t max_nodes) {
  RandomGraph g;
  g.n = std::uniform_int_distribution<size_t>(1, max_nodes)(rng);
  size_t max_edges = 3 * g.n;
  size_t m = std::uniform_int_distribution<size_t>(0, max_edges)(rng);
  std::uniform_int_distribution<uint32_t> node(
      0, static_cast<uint32_t>(g.n - 1));
  for (size_t i = 0; i < m; i++) g.edges.emplace_back(node(rng), node(rng));
  return g;
}

}  // namespace cpsopt::testing
