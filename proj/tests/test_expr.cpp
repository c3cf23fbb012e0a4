#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "jacobivar/expr.hpp"
#include "jacobivar/symbol_table.hpp"

using namespace jacobivar;
using Catch::Matchers::ContainsSubstring;

TEST_CASE("parse produces the grammar-forced tree shapes") {
  auto expected = sub(div(pow(symbol("qd1"), constant(2.0)), constant(2.0)),
                      div(pow(symbol("q1"), constant(2.0)), constant(2.0)));
  REQUIRE(equal(parse("qd1^2/2 - q1^2/2"), expected));

  REQUIRE(equal(parse("sin(q1)*t"), mul(call("sin", symbol("q1")), symbol("t"))));

  // power is right-associative, unary minus binds below it
  REQUIRE(evaluate(parse("2^3^2"), {}) == 512.0);
  REQUIRE(evaluate(parse("-2^2"), {}) == -4.0);
  REQUIRE(evaluate(parse("2^-1"), {}) == 0.5);
}

TEST_CASE("parse reports syntax errors with byte offsets") {
  try {
    parse("q1 + * 2");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.offset() == 5);
    REQUIRE_THAT(e.what(), ContainsSubstring("expected"));
  }

  REQUIRE_THROWS_AS(parse("(q1 + qd1"), ParseError);
  REQUIRE_THROWS_AS(parse("q1 qd1"), ParseError);
  REQUIRE_THROWS_WITH(parse("foo(q1)"), ContainsSubstring("unknown function 'foo'"));
}

TEST_CASE("render round-trips over the expression corpus") {
  for (const auto& src : testutil::expression_corpus()) {
    auto tree = parse(src);
    auto reparsed = parse(render(tree));
    INFO("source: " << src << "  rendered: " << render(tree));
    REQUIRE(equal(tree, reparsed));
  }
}

TEST_CASE("rendered simplified trees also re-parse identically") {
  for (const auto& src : testutil::expression_corpus()) {
    auto tree = simplify(parse(src));
    INFO("source: " << src << "  rendered: " << render(tree));
    REQUIRE(equal(tree, parse(render(tree))));
  }
}

TEST_CASE("differentiate matches the hand results") {
  REQUIRE(equal(differentiate(parse("q1^2/2"), "q1"), parse("q1")));
  REQUIRE(equal(differentiate(parse("qd1^2/2 + q1*qd1"), "qd1"), parse("qd1 + q1")));
  REQUIRE(equal(differentiate(parse("sin(q1^2)"), "q1"), parse("2*q1*cos(q1^2)")));
}

TEST_CASE("derivatives agree with central differences over the corpus") {
  std::mt19937 rng(7321);
  for (const auto& src : testutil::expression_corpus()) {
    auto tree = parse(src);
    auto syms = symbols_of(tree);
    for (const auto& x : syms) {
      auto deriv = differentiate(tree, x);
      for (int rep = 0; rep < 200; ++rep) {
        auto b = testutil::random_bindings(syms, rng);
        double exact = evaluate(deriv, b);
        double x0 = b.at(x);
        double h = 1e-5 * (1.0 + std::abs(x0));
        double fd = testutil::central_difference(
            [&](double v) {
              auto bb = b;
              bb[x] = v;
              return evaluate(tree, bb);
            },
            x0, h);
        INFO("expr: " << src << "  wrt: " << x);
        REQUIRE(std::abs(exact - fd) <= 1e-6 * (1.0 + std::abs(exact)));
      }
    }
  }
}

TEST_CASE("evaluate computes values and reports binding problems") {
  REQUIRE(evaluate(parse("q1^2"), {{"q1", 3.0}}) == 9.0);
  REQUIRE(evaluate(parse("w^2*q1"), {{"w", 2.0}, {"q1", 1.0}}) == 4.0);
  REQUIRE_THROWS_WITH(evaluate(parse("q2"), {{"q1", 3.0}}),
                      ContainsSubstring("unbound symbol 'q2'"));
  REQUIRE_THROWS_WITH(evaluate(parse("log(q1 - 2)"), {{"q1", 1.0}}),
                      ContainsSubstring("log(q1 - 2)"));
  REQUIRE_THROWS_WITH(evaluate(parse("1/(q1 - 1)"), {{"q1", 1.0}}),
                      ContainsSubstring("division by zero"));
  REQUIRE_THROWS_AS(evaluate(parse("sqrt(-q1)"), {{"q1", 2.0}}), EvalError);
}

TEST_CASE("simplify applies the safe rule set") {
  REQUIRE(equal(simplify(parse("0*qd1 + q1")), parse("q1")));
  REQUIRE(equal(simplify(parse("q1^1")), parse("q1")));
  REQUIRE(equal(simplify(parse("q1 + q1")), parse("2*q1")));
  REQUIRE(equal(simplify(parse("q1 - q1")), constant(0.0)));
  REQUIRE(equal(simplify(parse("q1*1 + 0/qd1")), parse("q1")));
  REQUIRE(equal(simplify(parse("2*q1 + 3*q1")), parse("5*q1")));
  REQUIRE(equal(simplify(parse("3 + q1 + 4")), parse("q1 + 7")));
}

TEST_CASE("simplify is semantics-preserving at random bindings") {
  std::mt19937 rng(9177);
  for (const auto& src : testutil::expression_corpus()) {
    auto tree = parse(src);
    auto simple = simplify(tree);
    auto syms = symbols_of(tree);
    for (int rep = 0; rep < 200; ++rep) {
      auto b = testutil::random_bindings(syms, rng);
      double a = evaluate(tree, b);
      double s = evaluate(simple, b);
      INFO("expr: " << src << "  simplified: " << render(simple));
      REQUIRE(std::abs(a - s) <= 1e-12 * (1.0 + std::abs(a)));
    }
  }
}

TEST_CASE("substitute replaces symbols by subtrees") {
  auto tree = substitute(parse("-k/R"), "R", parse("r + z"));
  REQUIRE(evaluate(tree, {{"k", 2.0}, {"r", 1.0}, {"z", 1.0}}) == -1.0);
}

TEST_CASE("symbol table derives velocity and deviation names") {
  auto st = SymbolTable::make({"q1", "z"}, {{"k", 1.0}});
  REQUIRE(st.velocities() == std::vector<std::string>{"qd1", "dz"});
  REQUIRE(st.deviations() == std::vector<std::string>{"e1", "e_z"});
  REQUIRE(st.deviation_velocities() == std::vector<std::string>{"ed1", "ed_z"});
  REQUIRE(st.time() == "t");
  REQUIRE(st.parameter("k") == 1.0);
}

TEST_CASE("symbol table rejects name collisions") {
  REQUIRE_THROWS_AS(SymbolTable::make({"q1"}, {{"qd1", 1.0}}), ValidationError);
  REQUIRE_THROWS_AS(SymbolTable::make({"q1"}, {{"e1", 1.0}}), ValidationError);
  REQUIRE_THROWS_AS(SymbolTable::make({"q1"}, {{"t", 1.0}}), ValidationError);
  REQUIRE_THROWS_AS(SymbolTable::make({"q1", "q1"}, {}), ValidationError);
  REQUIRE_THROWS_AS(SymbolTable::make({"sin"}, {}), ValidationError);
  REQUIRE_THROWS_AS(SymbolTable::make({"2bad"}, {}), ValidationError);
  REQUIRE_THROWS_AS(SymbolTable::make({}, {}), ValidationError);
}

TEST_CASE("checked differentiate rejects undeclared symbols") {
  auto st = SymbolTable::make({"q1"}, {});
  REQUIRE(equal(differentiate(parse("q1^2"), "q1", st), parse("2*q1")));
  REQUIRE_THROWS_AS(differentiate(parse("q1^2"), "nope", st), UndeclaredSymbolError);
}
