#include <doctest.h>

#include <random>
#include <stdexcept>

#include "dpl/parser.hpp"
#include "dpl/term.hpp"

using namespace dpl;

namespace {

Term var(const char* name, VarId id) { return Term::variable(id, intern(name)); }

/// Random terms of depth <= 2 over constants a, b, functors f/1, g/2 and
/// variables X=0, Y=1, Z=2.
Term random_term(std::mt19937_64& rng, int depth) {
  const std::size_t pick = rng() % (depth > 0 ? 7 : 5);
  switch (pick) {
    case 0: return Term::atom("a");
    case 1: return Term::atom("b");
    case 2: return var("X", 0);
    case 3: return var("Y", 1);
    case 4: return var("Z", 2);
    case 5: return Term::compound("f", {random_term(rng, depth - 1)});
    default: return Term::compound("g", {random_term(rng, depth - 1), random_term(rng, depth - 1)});
  }
}

/// Every ground term of depth <= 1 over the same signature.
std::vector<Term> small_universe() {
  std::vector<Term> base = {Term::atom("a"), Term::atom("b")};
  std::vector<Term> out = base;
  for (const Term& t : base) out.push_back(Term::compound("f", {t}));
  for (const Term& s : base)
    for (const Term& t : base) out.push_back(Term::compound("g", {s, t}));
  return out;
}

}  // namespace

TEST_SUITE("logic") {
  TEST_CASE("apply substitution") {
    Term x = var("X", 0), y = var("Y", 1), t = var("T", 2);
    Term fxy = Term::compound("f", {x, Term::atom("y")});
    Substitution s{{0, Term::atom("a")}};
    CHECK(to_string(apply(fxy, s)) == "f(a,y)");
    Term fXY = Term::compound("f", {x, y});
    CHECK(apply(fXY, Substitution{}) == fXY);
    Term list = Term::cons(x, t);
    Term three = apply(list, Substitution{{0, Term::integer(3)}, {2, Term::nil()}});
    CHECK(to_string(three) == "[3]");
    CHECK(three == Term::compound(".", {Term::integer(3), Term::atom("[]")}));
  }

  TEST_CASE("unify examples") {
    auto u = unify(parse_atom("digit(X,0)"), parse_atom("digit(img1,0)"));
    REQUIRE(u);
    CHECK(to_string(u->resolve(var("X", 0))) == "img1");

    CHECK_FALSE(unify(parse_atom("f(X)"), parse_atom("f(g(X))")));

    Atom a = parse_atom("add(X,Y)");
    Atom b = Atom("add", {var("Y", 1), Term::integer(3)});
    auto m = unify(a, b);
    REQUIRE(m);
    CHECK(apply(a, *m) == apply(b, *m));
    CHECK(to_string(apply(a, *m)) == "add(3,3)");
  }

  TEST_CASE("groundness") {
    CHECK(is_ground(parse_term("f(a,1)")));
    CHECK_FALSE(is_ground(parse_term("f(X)")));
    CHECK_FALSE(is_ground(parse_term("[a,B]")));
  }

  TEST_CASE("integers are distinct from same-looking atoms") {
    CHECK(Term::integer(3) != Term::atom("3"));
    CHECK(parse_term("1+2") != parse_term("3"));
  }

  TEST_CASE("composition law") {
    std::mt19937_64 rng(11);
    int composed = 0;
    for (int trial = 0; trial < 500; ++trial) {
      Term e = random_term(rng, 2);
      // Binding X only to terms over later variables keeps chains acyclic.
      auto binding = [&](VarId v) {
        Term t = random_term(rng, 1);
        while (!t.ground() && variable_bound(t) > 0 && [&] {
          for (VarId w = 0; w <= v; ++w)
            if (apply(t, Substitution{{w, Term::atom("marker")}}) != t) return true;
          return false;
        }())
          t = random_term(rng, 1);
        return t;
      };
      Substitution s1, s2;
      for (VarId v = 0; v < 3; ++v) {
        if (rng() % 2) s1.bind(v, binding(v));
        if (rng() % 2) s2.bind(v, binding(v));
      }
      Substitution s1r = s1.resolved();
      Substitution s2r = s2.resolved();
      bool clash = false;
      for (const auto& [v, t] : s2r.bindings())
        for (const auto& [w, u] : s1r.bindings())
          clash = clash || apply(t, Substitution{{w, Term::atom("marker")}}) != t;
      if (clash) {
        CHECK_THROWS_AS(compose(s1r, s2r), std::invalid_argument);
        continue;
      }
      ++composed;
      CHECK(apply(apply(e, s1r), s2r) == apply(e, compose(s1r, s2r)));
    }
    CHECK(composed > 200);
  }

  TEST_CASE("unifiers are most general and complete on a small universe") {
    std::mt19937_64 rng(5);
    const std::vector<Term> universe = small_universe();
    int unified = 0;
    for (int trial = 0; trial < 300; ++trial) {
      Atom a = Atom("p", {random_term(rng, 2), random_term(rng, 1)});
      Atom b = Atom("p", {random_term(rng, 1), random_term(rng, 2)});
      auto mgu = unify(a, b);
      if (mgu) {
        ++unified;
        CHECK(apply(a, *mgu) == apply(b, *mgu));
      }
      // Every ground unifier drawn from the universe factors through the mgu.
      for (const Term& x : universe)
        for (const Term& y : universe)
          for (const Term& z : universe) {
            Substitution sigma{{0, x}, {1, y}, {2, z}};
            if (apply(a, sigma) != apply(b, sigma)) continue;
            REQUIRE(mgu);
            for (VarId v = 0; v < 3; ++v) {
              Term tv = Term::variable(v, intern("V"));
              CHECK(apply(apply(tv, *mgu), sigma) == apply(tv, sigma));
            }
          }
    }
    CHECK(unified > 20);
  }

  TEST_CASE("failed unification leaves the substitution untouched") {
    Substitution s{{5, Term::atom("k")}};
    CHECK_FALSE(unify(parse_term("f(X,b)"), parse_term("f(a,a)"), s));
    CHECK(s.size() == 1);
  }

  TEST_CASE("list printing") {
    CHECK(to_string(parse_term("[1,2|T]")) == "[1,2|T]");
    CHECK(to_string(parse_term("[]")) == "[]");
  }
}
