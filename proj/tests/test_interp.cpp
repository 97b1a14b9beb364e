#include <doctest.h>

#include <cstdint>
#include <string>
#include <vector>

#include "cpsopt/interp.hpp"
#include "cpsopt/ir.hpp"
#include "helpers.hpp"

using namespace cpsopt;
using namespace cpsopt::testing;

namespace {

int64_t run_int(const std::string& source) {
  Program p = parse_text(source);
  EvalResult r = eval(p, 100000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  auto* i = std::get_if<IntV>(&r.value->v);
  REQUIRE(i != nullptr);
  return i->value;
}

}  // namespace

TEST_CASE("lets, tuples, selects and prims evaluate") {
  CHECK(run_int("(let ((a (int 20)))"
                "(let ((b (int 5)))"
                "(let ((q (prim div a b)))"
                "(let ((t (alloc a b q)))"
                "(let ((x (select 2 t)))"
                "(let ((s (prim add x b)))"
                "  (throw halt (s))))))))") == 9);
}

TEST_CASE("var copies are transparent") {
  CHECK(run_int("(let ((a (int 7)))"
                "(let ((b (var a)))"
                "(let ((c (var b)))"
                "  (throw halt (c)))))") == 7);
}

TEST_CASE("integer arithmetic wraps around") {
  CHECK(run_int("(let ((mx (int 9223372036854775807)))"
                "(let ((s (prim add mx mx)))"
                "  (throw halt (s))))") == -2);
}

TEST_CASE("smallest integer divided by minus one stays put") {
  CHECK(run_int("(let ((mx (int 9223372036854775807)))"
                "(let ((one (int 1)))"
                "(let ((mn (prim add mx one)))"
                "(let ((m1 (int -1)))"
                "(let ((q (prim div mn m1)))"
                "  (throw halt (q)))))))") == INT64_MIN);
}

TEST_CASE("division by zero raises") {
  Program p = parse_text(
      "(let ((a (int 1)))"
      "(let ((z (int 0)))"
      "(let ((q (prim div a z)))"
      "  (throw halt (q)))))");
  CHECK_THROWS_AS(eval(p, 1000), EvalError);
}

TEST_CASE("calling a non-function raises") {
  Program p = parse_text("(let ((x (int 1))) (apply x (x) (halt)))");
  CHECK_THROWS_AS(eval(p, 1000), EvalError);
}

TEST_CASE("comparing an integer with a boolean raises") {
  Program p = parse_text(
      "(let ((i (int 1)))"
      "(let ((b (bool true)))"
      "(let ((e (prim eq i b)))"
      "  (throw halt (e)))))");
  CHECK_THROWS_AS(eval(p, 1000), EvalError);
}

TEST_CASE("switch takes the default and records the arm") {
  Program p = parse_text(
      "(let ((x (int 5)))"
      "(let ((a (int 10)))"
      "(let ((b (int 20)))"
      "  (switch x ((0 (throw halt (a)))) (throw halt (b))))))");
  EvalResult r = eval(p, 1000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  CHECK(std::get<IntV>(r.value->v).value == 20);
  REQUIRE(r.trace.arms.size() == 1);
  CHECK(r.trace.arms[0].tag == 5);
}

TEST_CASE("switch with no matching arm and no default raises") {
  Program p = parse_text(
      "(let ((x (int 5)))"
      "(let ((a (int 10)))"
      "  (switch x ((0 (throw halt (a)))))))");
  CHECK_THROWS_AS(eval(p, 1000), EvalError);
}

TEST_CASE("evaluation is deterministic") {
  Program p = load_corpus("basic1.mml");
  EvalResult a = eval(p, 100000);
  EvalResult b = eval(p, 100000);
  REQUIRE(a.outcome == EvalResult::Outcome::Halted);
  REQUIRE(b.outcome == EvalResult::Outcome::Halted);
  CHECK(values_equal(a.value, b.value));
  REQUIRE(a.trace.calls.size() == b.trace.calls.size());
  for (size_t i = 0; i < a.trace.calls.size(); i++) {
    CHECK(a.trace.calls[i].site == b.trace.calls[i].site);
    CHECK(a.trace.calls[i].callee == b.trace.calls[i].callee);
  }
}

TEST_CASE("more fuel never changes a halted result") {
  Program p = load_corpus("counter_loop.mml");
  EvalResult full = eval(p, 1'000'000);
  REQUIRE(full.outcome == EvalResult::Outcome::Halted);

  bool halted_before = false;
  for (uint64_t fuel : {5u, 50u, 500u, 5000u}) {
    EvalResult r = eval(p, fuel);
    if (halted_before) REQUIRE(r.outcome == EvalResult::Outcome::Halted);
    if (r.outcome == EvalResult::Outcome::Halted) {
      halted_before = true;
      CHECK(values_equal(r.value, full.value));
    }
  }
}

TEST_CASE("a diverging program runs out of fuel") {
  Program p = load_corpus("cons_build.mml");
  EvalResult r = eval(p, 50000);
  CHECK(r.outcome == EvalResult::Outcome::OutOfFuel);
  CHECK(r.value == nullptr);
}

TEST_CASE("structural equality treats closures by their lambda") {
  Program p = load_corpus("basic1.mml");
  EvalResult a = eval(p, 100000);
  EvalResult b = eval(p, 100000);
  CHECK(values_equal(a.value, b.value));

  Program two = parse_text(
      "(fun ((f (x) (k) (throw k (x)))"
      "      (g (y) (j) (throw j (y))))"
      "(let ((t (alloc f g)))"
      "  (throw halt (t))))");
  EvalResult r = eval(two, 1000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  auto* tup = std::get_if<TupleV>(&r.value->v);
  REQUIRE(tup != nullptr);
  REQUIRE(tup->fields.size() == 2);
  CHECK(values_equal(tup->fields[0], tup->fields[0]));
  CHECK(!values_equal(tup->fields[0], tup->fields[1]));
  CHECK(!values_equal(r.value, tup->fields[0]));  // tuple vs closure
}

TEST_CASE("the trace names each dynamic callee") {
  Program p = load_corpus("basic1.mml");
  EvalResult r = eval(p, 100000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  CHECK(std::get<IntV>(r.value->v).value == 3);

  VarId f = *lambda_named(p, "f");
  VarId g = *lambda_named(p, "g");
  bool saw_g_then_f = false;
  for (size_t i = 0; i + 1 < r.trace.calls.size(); i++)
    if (r.trace.calls[i].callee == g && r.trace.calls[i + 1].callee == f)
      saw_g_then_f = true;
  CHECK(saw_g_then_f);
  // throws to halt are not calls and never show up
  for (const CallEvent& c : r.trace.calls)
    CHECK(c.callee != p.halt());
}

TEST_CASE("rendering values for humans") {
  Program p = parse_text(
      "(let ((a (int 1)))"
      "(let ((b (bool true)))"
      "(let ((t (alloc a b)))"
      "  (throw halt (t)))))");
  EvalResult r = eval(p, 1000);
  REQUIRE(r.outcome == EvalResult::Outcome::Halted);
  std::string s = value_to_string(r.value, *p.ctx);
  CHECK(s.find("1") != std::string::npos);
  CHECK(s.find("true") != std::string::npos);
}
