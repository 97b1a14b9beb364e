#include <doctest.h>

#include <string>
#include <vector>

#include "cpsopt/cfa.hpp"
#include "cpsopt/interp.hpp"
#include "cpsopt/opt.hpp"
#include "cpsopt/reflow.hpp"
#include "helpers.hpp"

using namespace cpsopt;
using namespace cpsopt::testing;

namespace {

struct Analyses {
  CfaResult cfa;
  FlowGraph graph;
  ReachMap reach;
};

Analyses analyses_for(const Program& p) {
  Analyses a;
  a.cfa = analyze(p);
  a.graph = build_graph(p, a.cfa);
  a.reach = build_reachability(a.graph);
  return a;
}

Program convert_source(const std::string& src) {
  SurfacePtr e = parse_surface(src);
  return cps_convert(*e);
}

}  // namespace

TEST_CASE("branch elimination reduces the always-true dispatcher") {
  Program p = load_corpus("branch.mml");
  PassStats s = run_pipeline(
      p, {PassKind::BranchElim, PassKind::UselessVarElim});
  CHECK(s.branches_eliminated == 1);
  CHECK(s.params_removed == 1);
  REQUIRE(s.branch_sites.size() == 1);
  CHECK(s.branch_sites[0].second == 1);  // the then arm survived
  CHECK(print_text(p) ==
        read_file(std::string(GOLDEN_DIR) + "/branch_after.cps"));
}

TEST_CASE("branch elimination leaves mixed-feed branches alone") {
  Program p = convert_source(
      "let fun f (b) = if b then 1 else 2 "
      "    val x = f true"
      "    val y = f false "
      "in x + y end");
  std::string before = print_text(p);
  CfaResult cfa = analyze(p);
  PassStats s = branch_eliminate(p, cfa);
  CHECK(s.branches_eliminated == 0);
  CHECK(print_text(p) == before);
}

TEST_CASE("branch elimination ignores unreachable branches") {
  Program p = parse_text(
      "(fun ((dead (b) (k)"
      "        (if b (throw k (b)) (throw k (b)))))"
      "  (let ((x (int 1)))"
      "    (throw halt (x))))");
  std::string before = print_text(p);
  CfaResult cfa = analyze(p);
  PassStats s = branch_eliminate(p, cfa);
  CHECK(s.branches_eliminated == 0);
  CHECK(print_text(p) == before);
}

TEST_CASE("branch elimination collapses a decided arm inside a decided arm") {
  Program p = convert_source(
      "let val a = true "
      "in if a then (if a then 11 else 12) else 13 end");
  CfaResult cfa = analyze(p);
  PassStats s = branch_eliminate(p, cfa);
  CHECK(s.branches_eliminated == 2);
  EvalResult r = eval(p, 10000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  CHECK(std::get<IntV>(r.value->v).value == 11);
}

TEST_CASE("copy propagation names the one possible callee") {
  Program p = load_corpus("basic1.mml");
  ProgPoint site = sole_apply_to(p, "h");
  Analyses a = analyses_for(p);
  PassStats s = copy_propagate(p, a.cfa, a.graph, a.reach);

  CHECK(s.copies_propagated >= 1);
  bool rewrote_site = false;
  for (ProgPoint pt : s.copy_sites) rewrote_site |= (pt == site);
  CHECK(rewrote_site);

  VarId f = *lambda_named(p, "f");
  bool target_is_f = false;
  for_each_expr(p, [&](const Expr& e) {
    if (e.point == site)
      target_is_f = std::get<Apply>(e.term).target == f;
  });
  CHECK(target_is_f);

  EvalResult r = eval(p, 10000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  CHECK(std::get<IntV>(r.value->v).value == 3);
}

TEST_CASE("copy propagation skips sites with several callees") {
  Program p = load_corpus("example3.mml");
  ProgPoint site = sole_apply_to(p, "kf");
  Analyses a = analyses_for(p);
  PassStats s = copy_propagate(p, a.cfa, a.graph, a.reach);
  for (ProgPoint pt : s.copy_sites) CHECK(pt != site);
}

TEST_CASE("copy propagation is already done on the reduced program") {
  Program p = load_corpus("copy_reduced.mml");
  Analyses a = analyses_for(p);
  std::string before = print_text(p);
  PassStats s = copy_propagate(p, a.cfa, a.graph, a.reach);
  CHECK(s.copies_propagated == 0);
  CHECK(print_text(p) == before);
}

TEST_CASE("copy propagation converges after one pass") {
  Program p = load_corpus("copy_twice.mml");
  Analyses a = analyses_for(p);
  copy_propagate(p, a.cfa, a.graph, a.reach);
  // targets changed but points did not, so the analyses stay valid
  PassStats again = copy_propagate(p, a.cfa, a.graph, a.reach);
  CHECK(again.copies_propagated == 0);
}

TEST_CASE("inlining replaces the single-target call in the mirrored-capture program") {
  Program p = load_corpus("example2.mml");
  ProgPoint site = sole_apply_to(p, "f");
  EvalResult before = eval(p, 100000);

  Analyses a = analyses_for(p);
  PassStats s = inline_calls(p, a.cfa, a.graph, a.reach);
  CHECK(s.functions_inlined >= 1);
  bool inlined_site = false;
  for (ProgPoint pt : s.inline_sites) inlined_site |= (pt == site);
  CHECK(inlined_site);
  CHECK(check_well_formed(p).empty());

  EvalResult after = eval(p, 100000);
  REQUIRE(before.outcome == EvalResult::Outcome::Halted);
  REQUIRE(after.outcome == EvalResult::Outcome::Halted);
  CHECK(values_equal(before.value, after.value));
  CHECK(std::get<IntV>(after.value->v).value == 10);
}

TEST_CASE("inlining never touches a function on a call cycle") {
  // Join continuations with a single caller may still be inlined; the
  // recursive functions themselves must survive with their call sites.
  struct Case {
    const char* file;
    std::vector<const char*> loops;
  };
  for (const Case& c : {Case{"counter_loop.mml", {"loop"}},
                        Case{"even_odd.mml", {"even", "odd"}}}) {
    CAPTURE(c.file);
    Program p = load_corpus(c.file);
    EvalResult before = eval(p, 100000);
    std::vector<size_t> site_counts;
    for (const char* fn : c.loops)
      site_counts.push_back(apply_points_to(p, fn).size());

    Analyses a = analyses_for(p);
    PassStats s = inline_calls(p, a.cfa, a.graph, a.reach);

    for (ProgPoint pt : s.inline_sites) {
      const CallTargets& ct = call_targets(a.cfa, pt);
      REQUIRE(ct.kind == CallTargets::Kind::Known);
      REQUIRE(ct.funs.size() == 1);
      for (const char* fn : c.loops)
        CHECK(*ct.funs.begin() != *lambda_named(p, fn));
    }
    for (size_t i = 0; i < c.loops.size(); i++)
      CHECK(apply_points_to(p, c.loops[i]).size() == site_counts[i]);

    CHECK(check_well_formed(p).empty());
    EvalResult after = eval(p, 100000);
    REQUIRE(before.outcome == EvalResult::Outcome::Halted);
    REQUIRE(after.outcome == EvalResult::Outcome::Halted);
    CHECK(values_equal(before.value, after.value));
  }
}

TEST_CASE("the size limit vetoes inlining") {
  Program p = load_corpus("example2.mml");
  std::string before = print_text(p);
  Analyses a = analyses_for(p);
  PassStats s = inline_calls(p, a.cfa, a.graph, a.reach, 0);
  CHECK(s.functions_inlined == 0);
  CHECK(print_text(p) == before);
}

TEST_CASE("useless-variable elimination drops dead bindings") {
  Program p = parse_text(
      "(let ((x (int 1)))"
      "(let ((y (int 2)))"
      "  (throw halt (y))))");
  useless_var_elim(p);
  auto* let = std::get_if<Let>(&p.entry.body->term);
  REQUIRE(let != nullptr);
  CHECK(p.ctx->name(let->binders.at(0)) == "y");
  CHECK(std::holds_alternative<Throw>(let->body->term));
}

TEST_CASE("useless-variable elimination keeps ret continuation params") {
  Program p = convert_source(
      "let fun f (x) = 1 "
      "    val unused = f 2 "
      "in 3 end");
  useless_var_elim(p);
  CHECK(check_well_formed(p).empty());
  // the call's return continuation still takes its one argument
  bool found_apply = false, found_cont = false;
  for_each_expr(p, [&](const Expr& e) {
    if (auto* a = std::get_if<Apply>(&e.term)) {
      found_apply = true;
      REQUIRE(a->rets.size() == 1);
    }
    if (auto* c = std::get_if<Cont>(&e.term)) {
      found_cont = true;
      REQUIRE(c->k.params.size() == 1);
    }
  });
  CHECK(found_apply);
  CHECK(found_cont);
  EvalResult r = eval(p, 10000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  CHECK(std::get<IntV>(r.value->v).value == 3);
}

TEST_CASE("useless-variable elimination keeps params of escaping functions") {
  Program p = convert_source(
      "let fun weird (a, b) = a "
      "    val t = (weird, 1) "
      "    val g = #1 t "
      "in g (7, 8) end");
  useless_var_elim(p);
  ProgramIndex ix = build_index(p);
  const Lambda* weird = ix.lambdas.at(*lambda_named(p, "weird"));
  CHECK(weird->params.size() == 2);
  EvalResult r = eval(p, 10000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  CHECK(std::get<IntV>(r.value->v).value == 7);
}

TEST_CASE("useless-variable elimination prunes unused params at direct calls") {
  Program p = convert_source(
      "let fun pick (a, b) = a "
      "in pick (1, 2) end");
  PassStats s = useless_var_elim(p);
  CHECK(s.params_removed == 1);
  CHECK(check_well_formed(p).empty());
  ProgramIndex ix = build_index(p);
  const Lambda* pick = ix.lambdas.at(*lambda_named(p, "pick"));
  CHECK(pick->params.size() == 1);
  EvalResult r = eval(p, 10000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  CHECK(std::get<IntV>(r.value->v).value == 1);
}

TEST_CASE("useless-variable elimination is idempotent across the corpus") {
  for (const std::string& file : corpus_files()) {
    CAPTURE(file);
    Program p = load_corpus(file);
    useless_var_elim(p);
    std::string once = print_text(p);
    PassStats again = useless_var_elim(p);
    CHECK(!again.changed());
    CHECK(print_text(p) == once);
  }
}

TEST_CASE("an empty pipeline is the identity") {
  Program p = load_corpus("example1_map.mml");
  std::string before = print_text(p);
  PassStats s = run_pipeline(p, {});
  CHECK(!s.changed());
  CHECK(print_text(p) == before);
}

TEST_CASE("pass names round-trip") {
  for (PassKind k : {PassKind::BranchElim, PassKind::CopyProp,
                     PassKind::Inline, PassKind::UselessVarElim}) {
    auto back = pass_kind_from(pass_kind_name(k));
    REQUIRE(back.has_value());
    CHECK(*back == k);
  }
  CHECK(!pass_kind_from("constant-folding").has_value());
}

TEST_CASE("stats absorb sums counters and concatenates sites") {
  PassStats a;
  a.branches_eliminated = 1;
  a.branch_sites.emplace_back(ProgPoint{1}, 1);
  PassStats b;
  b.copies_propagated = 2;
  b.copy_sites = {ProgPoint{2}, ProgPoint{3}};
  b.params_removed = 4;
  CHECK(!PassStats{}.changed());
  CHECK(a.changed());
  a.absorb(b);
  CHECK(a.branches_eliminated == 1);
  CHECK(a.copies_propagated == 2);
  CHECK(a.params_removed == 4);
  CHECK(a.branch_sites.size() == 1);
  CHECK(a.copy_sites.size() == 2);
}

TEST_CASE("the default pipeline preserves observable behaviour corpus-wide") {
  constexpr uint64_t kFuel = 1'000'000;
  const std::vector<PassKind> kDefault = {
      PassKind::BranchElim, PassKind::CopyProp, PassKind::Inline,
      PassKind::UselessVarElim};
  for (const std::string& file : corpus_files()) {
    CAPTURE(file);
    Program p = load_corpus(file);
    EvalResult before = eval(p, kFuel);
    run_pipeline(p, kDefault);
    CHECK(check_well_formed(p).empty());
    EvalResult after = eval(p, kFuel);
    REQUIRE(before.outcome == after.outcome);
    if (before.outcome == EvalResult::Outcome::Halted)
      CHECK(values_equal(before.value, after.value));
  }
}
