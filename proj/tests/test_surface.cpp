#include <doctest.h>

#include <string>
#include <variant>
#include <vector>

#include "cpsopt/interp.hpp"
#include "cpsopt/surface.hpp"
#include "direct_eval.hpp"
#include "helpers.hpp"

using namespace cpsopt;
using namespace cpsopt::testing;

namespace {

const SurfaceExpr& let_body(const SurfaceExpr& e) {
  return *std::get<SLet>(e.node).body;
}

}  // namespace

TEST_CASE("arithmetic precedence: comparison over addition over product") {
  SurfacePtr e = parse_surface("1 + 2 * 3 < 10");
  auto& lt = std::get<SPrim>(e->node);
  CHECK(lt.op == PrimOp::Lt);
  auto& add = std::get<SPrim>(lt.lhs->node);
  CHECK(add.op == PrimOp::Add);
  CHECK(std::get<SInt>(add.lhs->node).value == 1);
  auto& mul = std::get<SPrim>(add.rhs->node);
  CHECK(mul.op == PrimOp::Mul);
  CHECK(std::get<SInt>(lt.rhs->node).value == 10);
}

TEST_CASE("application binds tighter than operators") {
  SurfacePtr e = parse_surface("let fun f (x) = x in f 1 + 2 end");
  auto& add = std::get<SPrim>(let_body(*e).node);
  CHECK(add.op == PrimOp::Add);
  auto& call = std::get<SApp>(add.lhs->node);
  CHECK(std::get<SVar>(call.fn->node).name == "f");
  CHECK(std::get<SInt>(add.rhs->node).value == 2);
}

TEST_CASE("argument lists versus tuple arguments") {
  SurfacePtr two = parse_surface(
      "let fun f (a, b) = a in f (1, 2) end");
  CHECK(std::get<SApp>(let_body(*two).node).args.size() == 2);

  SurfacePtr one = parse_surface(
      "let fun f (t) = #1 t in f ((1, 2)) end");
  auto& call = std::get<SApp>(let_body(*one).node);
  REQUIRE(call.args.size() == 1);
  CHECK(std::get<STuple>(call.args[0]->node).elems.size() == 2);
}

TEST_CASE("projection is one-indexed as written") {
  SurfacePtr e = parse_surface("#2 (10, 20, 30)");
  auto& sel = std::get<SSelect>(e->node);
  CHECK(sel.index == 2);
}

TEST_CASE("comments and primed identifiers parse") {
  SurfacePtr e = parse_surface(
      "let (* a binding *) val x' = 1 (* trailing *) in x' end");
  CHECK(std::get<SLet>(e->node).decls.at(0).val_name == "x'");
}

TEST_CASE("parse and scope errors") {
  CHECK_THROWS_AS(parse_surface("let val x = (* runs off"), ParseError);
  CHECK_THROWS_AS(parse_surface("x + 1"), ScopeError);
  CHECK_THROWS_AS(parse_surface("(1 + 2))"), ParseError);
  CHECK_THROWS_AS(parse_surface("()"), ParseError);
  CHECK_THROWS_AS(parse_surface("let val x = 1 in y end"), ScopeError);
}

TEST_CASE("if lowers to a switch whose tag 1 arm is the then branch") {
  SurfacePtr e =
      parse_surface("let val b = true in if b then 10 else 20 end");
  Program p = cps_convert(*e);

  const Switch* sw = nullptr;
  for_each_expr(p, [&](const Expr& ex) {
    if (auto* s = std::get_if<Switch>(&ex.term)) sw = s;
  });
  REQUIRE(sw != nullptr);
  REQUIRE(sw->arms.size() == 2);

  auto arm_constant = [&](int64_t tag) -> int64_t {
    for (const SwitchArm& a : sw->arms) {
      if (a.tag != tag) continue;
      int64_t found = -1;
      for_each_expr(*a.body, [&](const Expr& ex) {
        if (auto* l = std::get_if<Let>(&ex.term))
          if (auto* c = std::get_if<ConstInt>(&l->rhs)) found = c->value;
      });
      return found;
    }
    return -1;
  };
  CHECK(arm_constant(1) == 10);
  CHECK(arm_constant(0) == 20);
}

TEST_CASE("val bindings keep their surface names through conversion") {
  SurfacePtr e = parse_surface("let val y = 1 + 2 in y end");
  Program p = cps_convert(*e);
  bool found = false;
  for_each_expr(p, [&](const Expr& ex) {
    if (auto* l = std::get_if<Let>(&ex.term))
      if (std::holds_alternative<Prim>(l->rhs)) {
        CHECK(p.ctx->name(l->binders.at(0)) == "y");
        found = true;
      }
  });
  CHECK(found);
}

TEST_CASE("conversion of every corpus program is well-formed and alpha-unique") {
  for (const std::string& file : corpus_files()) {
    if (!ends_with(file, ".mml")) continue;
    CAPTURE(file);
    Program p = load_corpus(file);
    CHECK(check_well_formed(p).empty());
  }
}

TEST_CASE("converted programs agree with a direct-style evaluator") {
  constexpr uint64_t kFuel = 1'000'000;
  for (const std::string& file : corpus_files()) {
    if (!ends_with(file, ".mml")) continue;
    CAPTURE(file);
    std::string src = read_file(std::string(CORPUS_DIR) + "/" + file);
    SurfacePtr e = parse_surface(src);

    bool direct_out_of_fuel = false;
    DValuePtr direct;
    try {
      direct = DirectEval(kFuel).run(*e);
    } catch (const DirectOutOfFuel&) {
      direct_out_of_fuel = true;
    }

    Program p = cps_convert(*e);
    EvalResult cps = eval(p, kFuel);

    if (direct_out_of_fuel) {
      CHECK(cps.outcome == EvalResult::Outcome::OutOfFuel);
    } else {
      REQUIRE(cps.outcome == EvalResult::Outcome::Halted);
      CHECK(first_order_equal(direct, cps.value));
    }
  }
}
