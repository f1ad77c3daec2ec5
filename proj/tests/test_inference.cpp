#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "dpl/errors.hpp"
#include "dpl/transform.hpp"
#include "support/helpers.hpp"

using namespace dpl;

namespace {

GroundProgram ground_text(const std::string& text, const std::string& query, DistributionProvider* models = nullptr) {
  return ground(parse_program(text), parse_atom(query), models);
}

std::size_t fact_index(const GroundProgram& gp, const std::string& atom) {
  auto id = gp.find_atom(parse_atom(atom));
  REQUIRE(id);
  for (std::size_t f = 0; f < gp.facts.size(); ++f)
    if (gp.facts[f].atom == *id) return f;
  FAIL("no fact " << atom);
  return 0;
}

/// Checks that `f` evaluates like `expected` on every assignment of `n` facts.
template <class Fn>
void check_truth_table(const Formula& f, std::size_t n, Fn expected) {
  for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
    std::vector<bool> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = (bits >> k) & 1;
    CAPTURE(bits);
    CHECK(f.evaluate(v) == expected(v));
  }
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("transform") {
  TEST_CASE("two-head chain") {
    GroundProgram gp = rewrite_ads(ground_text("0.5::red;0.5::blue.\nq :- red.\nq :- blue.", "q"));
    ParameterStore store;
    for (const GroundItem& item : gp.order) CHECK(item.kind != GroundItem::Kind::kAd);
    std::size_t chains = 0;
    for (std::size_t f = 0; f < gp.facts.size(); ++f)
      if (gp.facts[f].source == LabelSource::kChoice) {
        ++chains;
        CHECK(fact_probability(gp, f, store) == 0.5);
      }
    CHECK(chains == 1);
  }

  TEST_CASE("three-head chain probabilities") {
    GroundAd ad;
    ad.heads = {{ProbSpec::fixed(0.4), 0}, {ProbSpec::fixed(0.4), 1}, {ProbSpec::fixed(0.2), 2}};
    CHECK(choice_label(ad, 0, {}).value == 0.4);
    CHECK(choice_label(ad, 1, {}).value == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    std::string text = "0.4::none;0.4::mild;0.2::severe.\n";
    for (const char* h : {"none", "mild", "severe"}) {
      Program p = parse_program(text);
      GroundProgram gp = ground(p, parse_atom(h), nullptr);
      CHECK(enumerate_probability(gp, ParameterStore(p)) ==
            doctest::Approx(std::string(h) == "severe" ? 0.2 : 0.4).epsilon(1e-14));
      CHECK(enumerate_probability(rewrite_ads(gp), ParameterStore(p)) ==
            doctest::Approx(enumerate_probability(gp, ParameterStore(p))).epsilon(1e-14));
    }
  }

  TEST_CASE("single-head AD is a plain fact") {
    Program p = parse_program("1.0::h.\n");
    CHECK(test::query_probability(p, "h") == 1.0);
    Program q = parse_program("1.0::h; 0.0::g.\n");
    CHECK(test::query_probability(q, "h") == 1.0);
    CHECK(test::query_probability(q, "g") == 0.0);
  }

  TEST_CASE("degenerate AD is reported") {
    GroundAd ad;
    ad.heads = {{ProbSpec::learnable(1.0, 0), 0}, {ProbSpec::learnable(0.0, 1), 1}};
    const std::vector<double> params = {1.0, 0.0};
    CHECK_THROWS_AS(choice_label(ad, 1, params), DegenerateDisjunctionError);
    // A fixed zero head after exhausted mass is simply impossible.
    GroundAd fixed;
    fixed.heads = {{ProbSpec::fixed(1.0), 0}, {ProbSpec::fixed(0.0), 1}, {ProbSpec::fixed(0.0), 2}};
    CHECK(choice_label(fixed, 2, {}).value == 0.0);
  }

  TEST_CASE("burglary formula") {
    Program p = test::load_program("programs/burglary.dpl");
    GroundProgram gp = rewrite_ads(ground(p, parse_atom("calls(mary)"), nullptr));
    Formula f = build_formula(gp);
    std::size_t eq = fact_index(gp, "earthquake"), bu = fact_index(gp, "burglary"),
                he = fact_index(gp, "hears_alarm(mary)");
    check_truth_table(f, gp.facts.size(), [&](const std::vector<bool>& v) { return v[he] && (v[bu] || v[eq]); });
  }

  TEST_CASE("coin formula") {
    Program p = test::load_program("programs/coin.dpl");
    auto rt = test::table_runtime(test::read_file(test::source_path("programs/coin.models")));
    GroundProgram gp = rewrite_ads(ground(p, parse_atom("win"), rt.get()));
    Formula f = build_formula(gp);
    std::size_t h1 = fact_index(gp, "side(coin1,heads)"), h2 = fact_index(gp, "side(coin2,heads)");
    CAPTURE(f.to_string(gp));
    // Only `red` has a chain fact of its own; blue is its complement.
    std::size_t red = gp.facts.size();
    for (std::size_t k = 0; k < gp.facts.size(); ++k)
      if (gp.facts[k].source == LabelSource::kChoice) red = k;
    REQUIRE(red < gp.facts.size());
    check_truth_table(f, gp.facts.size(), [&](const std::vector<bool>& v) {
      bool heads = v[h1] || v[h2];
      return heads || (!heads && v[red]);
    });
  }

  TEST_CASE("no proofs gives FALSE") {
    GroundProgram gp = ground_text("0.5::a.\nq :- a, b.\nb :- 1 > 2.", "q");
    CHECK(build_formula(gp).root() == Formula::kFalseNode);
  }

  TEST_CASE("formulas agree with world closure on random programs") {
    std::mt19937_64 rng(99);
    test::RandomProgramOptions o;
    o.max_facts = 8;
    for (int trial = 0; trial < 200; ++trial) {
      std::string q;
      std::string text = test::random_program(rng, o, &q);
      CAPTURE(text);
      GroundProgram gp = ground_text(text, q);
      if (!gp.query_atom) continue;
      Formula f = build_formula(gp);
      for (std::size_t bits = 0; bits < (std::size_t{1} << gp.facts.size()); ++bits) {
        World w;
        std::vector<bool> v(gp.facts.size());
        for (std::size_t k = 0; k < gp.facts.size(); ++k) {
          v[k] = (bits >> k) & 1;
          w.facts.push_back(v[k]);
        }
        CHECK(f.evaluate(v) == static_cast<bool>(world_closure(gp, w)[*gp.query_atom]));
      }
      for (std::size_t n = 0; n < f.size(); ++n)
        if (f.node(static_cast<Formula::NodeId>(n)).op == Formula::Op::kVar)
          CHECK(f.node(static_cast<Formula::NodeId>(n)).var < gp.facts.size());
    }
  }

  TEST_CASE("shared subformulas are stored once") {
    Formula f;
    auto a = f.var(0);
    auto b = f.var(1);
    auto x = f.conj({a, b});
    auto y = f.conj({a, b});
    CHECK(x == y);
    CHECK(f.negate(f.negate(a)) == a);
  }
}

TEST_SUITE("circuit") {
  TEST_CASE("burglary diagram") {
    Program p = test::load_program("programs/burglary.dpl");
    CompiledQuery q = compile_query(p, parse_atom("calls(mary)"), nullptr);
    CHECK(q.circuit.decision_nodes() == 3);
    ParameterStore store(p);
    CHECK(probability(q, store) == doctest::Approx(0.14).epsilon(1e-15));
    std::string dot = export_dot(q.circuit, q.program);
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(count(dot, "shape=") == 5);
    CHECK(count(dot, "->") == 6);
  }

  TEST_CASE("terminal circuits") {
    GroundProgram gp;
    gp.add_fact(GroundFact{gp.atom_id(Atom("x")), LabelSource::kFixed, 0.5});
    Formula t;
    t.set_root(Formula::kTrueNode);
    Circuit ct = compile(t, gp);
    CHECK(ct.root() == Circuit::kTrue);
    CHECK(ct.decision_nodes() == 0);
    std::string dot = export_dot(ct, gp);
    CHECK(count(dot, "shape=") == 1);
    CHECK(count(dot, "->") == 0);

    Formula c;
    auto x = c.var(0);
    c.set_root(c.conj({x, c.negate(x)}));
    CHECK(compile(c, gp).root() == Circuit::kFalse);
  }

  TEST_CASE("reduced and ordered") {
    std::mt19937_64 rng(3);
    test::RandomProgramOptions o;
    for (int trial = 0; trial < 100; ++trial) {
      std::string q;
      Program p = parse_program(test::random_program(rng, o, &q));
      CompiledQuery cq = compile_query(p, parse_atom(q), nullptr);
      const Circuit& c = cq.circuit;
      std::set<std::pair<std::uint32_t, std::vector<Circuit::NodeId>>> seen;
      for (Circuit::NodeId id = 2; id < c.size(); ++id) {
        const auto& n = c.node(id);
        CHECK(std::adjacent_find(n.kids.begin(), n.kids.end(), std::not_equal_to<>()) != n.kids.end());
        for (Circuit::NodeId k : n.kids) {
          CHECK(k < id);
          CHECK(c.node(k).level > n.level);
        }
        CHECK(seen.insert({n.level, n.kids}).second);
      }
    }
  }

  TEST_CASE("node budget") {
    std::string text;
    for (int i = 0; i < 12; ++i) text += "0.5::a" + std::to_string(i) + ".\n0.5::b" + std::to_string(i) + ".\n";
    text += "q :- a0, b0.\n";
    for (int i = 1; i < 12; ++i) text += "q :- a" + std::to_string(i) + ", b" + std::to_string(i) + ".\n";
    Program p = parse_program(text);
    QueryOptions tight;
    tight.node_budget = 10;
    CHECK_THROWS_AS(compile_query(p, parse_atom("q"), nullptr, tight), CompilationBudgetError);
    QueryOptions bad;
    bad.order.clear();
    for (int i = 0; i < 12; ++i) bad.order.push_back("a" + std::to_string(i));
    CompiledQuery good = compile_query(p, parse_atom("q"), nullptr);
    CompiledQuery poor = compile_query(p, parse_atom("q"), nullptr, bad);
    CHECK(poor.circuit.decision_nodes() > good.circuit.decision_nodes());
    CHECK(probability(poor, ParameterStore(p)) == doctest::Approx(probability(good, ParameterStore(p))).epsilon(1e-13));
  }

  TEST_CASE("unknown order names are rejected") {
    Program p = test::load_program("programs/burglary.dpl");
    QueryOptions o;
    o.order = {"nope"};
    CHECK_THROWS_AS(compile_query(p, parse_atom("calls(mary)"), nullptr, o), ConfigError);
  }

  TEST_CASE("annotated coin diagram shows the root value") {
    Program p = test::load_program("programs/coin.dpl");
    auto rt = test::table_runtime(test::read_file(test::source_path("programs/coin.models")));
    CompiledQuery q = compile_query(p, parse_atom("win"), rt.get());
    ParameterStore store(p);
    std::vector<std::string> notes(q.circuit.size());
    notes[q.circuit.root()] = format_probability(probability(q, store));
    CHECK(export_dot(q.circuit, q.program, &notes).find("0.96") != std::string::npos);
  }

  TEST_CASE("neural groups are single multi-valued variables") {
    Program p = test::load_program("programs/t1.dpl");
    auto rt = test::table_runtime(
        "m_digit(x) 0.1 0.1 0.1 0.1 0.1 0.1 0.1 0.1 0.1 0.1\n"
        "m_digit(y) 0.05 0.15 0.1 0.1 0.1 0.1 0.1 0.1 0.1 0.1\n");
    ParameterStore store(p);
    double total = 0.0;
    for (int z = 0; z <= 18; ++z) {
      CompiledQuery q = compile_query(p, parse_atom("addition(x,y," + std::to_string(z) + ")"), rt.get());
      for (const DecisionVar& v : q.circuit.variables()) CHECK(v.kind == DecisionVar::Kind::kGroup);
      auto labels = probability_labels(q.circuit, q.program, store);
      for (const auto& row : labels) {
        double s = 0.0;
        for (double x : row) s += x;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
      total += probability(q, store);
    }
    // The sums partition the worlds: exactly one outcome per group.
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_SUITE("semiring") {
  TEST_CASE("oplus and otimes examples") {
    GradientValue a{0.2, {1, 0}}, b{0.1, {0, 1}};
    GradientValue s = oplus(a, b);
    CHECK(s.p == doctest::Approx(0.3));
    CHECK(s.g == std::vector<double>{1, 1});
    GradientSemiring sr(2);
    CHECK(oplus(a, sr.zero()).g == a.g);
    CHECK(oplus(a, sr.zero()).p == a.p);
    CHECK(ProbabilitySemiring{}.plus(0.2, 0.1) == doctest::Approx(0.3));

    GradientValue m = otimes(GradientValue{0.5, {0, 0}}, GradientValue{0.28, {0.9, 0.8}});
    CHECK(m.p == doctest::Approx(0.14).epsilon(1e-15));
    CHECK(m.g[0] == doctest::Approx(0.45).epsilon(1e-15));
    CHECK(m.g[1] == doctest::Approx(0.4).epsilon(1e-15));
    GradientValue one = otimes(a, sr.one());
    CHECK(one.p == a.p);
    CHECK(one.g == a.g);
    GradientValue z = otimes(a, sr.zero());
    CHECK(z.p == 0.0);
    CHECK(z.g == std::vector<double>{0, 0});
    CHECK_THROWS_AS(oplus(a, GradientValue{0.1, {1}}), SemiringError);
  }

  TEST_CASE("semiring axioms on random values") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto rnd = [&] {
      GradientValue v{u(rng), {}};
      for (int k = 0; k < 4; ++k) v.g.push_back(u(rng));
      return v;
    };
    auto close = [](const GradientValue& x, const GradientValue& y) {
      if (std::abs(x.p - y.p) > 1e-12) return false;
      for (std::size_t k = 0; k < x.g.size(); ++k)
        if (std::abs(x.g[k] - y.g[k]) > 1e-12) return false;
      return true;
    };
    GradientSemiring sr(4);
    for (int trial = 0; trial < 500; ++trial) {
      GradientValue a = rnd(), b = rnd(), c = rnd();
      CHECK(close(oplus(a, b), oplus(b, a)));
      CHECK(close(otimes(a, b), otimes(b, a)));
      CHECK(close(oplus(oplus(a, b), c), oplus(a, oplus(b, c))));
      CHECK(close(otimes(otimes(a, b), c), otimes(a, otimes(b, c))));
      CHECK(close(otimes(a, oplus(b, c)), oplus(otimes(a, b), otimes(a, c))));
      CHECK(close(oplus(a, sr.zero()), a));
      CHECK(close(otimes(a, sr.one()), a));
      CHECK(close(otimes(a, sr.zero()), sr.zero()));
    }
  }

  TEST_CASE("labels") {
    Program p = parse_program("0.5::hears_alarm(mary).\nt(0.2)::a.\nt(0.3)::b.\nt(0.5)::is_heads.\n"
                              "q :- hears_alarm(mary), a, b, is_heads.\n");
    GroundProgram gp = ground(p, parse_atom("q"), nullptr);
    SlotLayout layout = SlotLayout::of(gp);
    ParameterStore store(p);
    REQUIRE(layout.size == 3);
    GradientValue fixed = label(gp, fact_index(gp, "hears_alarm(mary)"), true, store, layout);
    CHECK(fixed.p == 0.5);
    CHECK(fixed.g == std::vector<double>{0, 0, 0});
    GradientValue pos = label(gp, fact_index(gp, "is_heads"), true, store, layout);
    CHECK(pos.p == 0.5);
    CHECK(pos.g == std::vector<double>{0, 0, 1});
    GradientValue neg = label(gp, fact_index(gp, "is_heads"), false, store, layout);
    CHECK(neg.p == 0.5);
    CHECK(neg.g == std::vector<double>{0, 0, -1});
    for (const char* f : {"a", "b", "hears_alarm(mary)"}) {
      GradientValue x = label(gp, fact_index(gp, f), true, store, layout);
      GradientValue y = label(gp, fact_index(gp, f), false, store, layout);
      CHECK(x.p + y.p == doctest::Approx(1.0).epsilon(1e-15));
      for (std::size_t k = 0; k < x.g.size(); ++k) CHECK(x.g[k] == -y.g[k]);
    }
  }

  TEST_CASE("projection keeps groups normalized and inside the box") {
    Program p = parse_program("t(0.3)::a;t(0.7)::b.\nt(0.5)::c.\nt(0.2)::x;t(0.3)::y;t(0.5)::z.\n");
    ParameterStore store(p);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    for (int trial = 0; trial < 200; ++trial) {
      for (double& v : store.values()) v = u(rng);
      store.project();
      for (double v : store.values()) {
        CHECK(v >= 1e-6);
        CHECK(v <= 1.0 - 1e-6);
      }
      for (const ParameterGroup& g : store.groups()) {
        if (!g.normalized) continue;
        double s = 0.0;
        for (std::size_t i : g.parameters) s += store[i];
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("parameters file round-trip") {
    Program p = parse_program("t(0.3)::a;t(0.7)::b.\nt(0.5)::c.\n");
    ParameterStore store(p);
    store.values() = {0.25, 0.75, 0.125};
    ParameterStore back(p);
    back.load_text(store.to_text());
    CHECK(back.values() == store.values());
    CHECK_THROWS_AS(back.load_text("group 0 0.5\n"), ConfigError);
  }
}

TEST_SUITE("oracle") {
  TEST_CASE("burglary world weight and probability") {
    Program p = test::load_program("programs/burglary.dpl");
    GroundProgram gp = ground_exhaustive(p, parse_atom("calls(mary)"));
    ParameterStore store(p);
    REQUIRE(gp.facts.size() == 4);
    World w;
    for (const GroundFact& f : gp.facts) {
      std::string name = to_string(gp.atoms[f.atom]);
      w.facts.push_back(name == "burglary" || name == "hears_alarm(mary)");
    }
    CHECK(world_weight(gp, w, store) == doctest::Approx(0.024).epsilon(1e-15));
    CHECK(enumerate_probability(gp, store) == doctest::Approx(0.14).epsilon(1e-15));
    CHECK(enumerate_probability(gp, store, gp.find_atom(parse_atom("calls(john)"))) ==
          doctest::Approx(0.4 * 0.28).epsilon(1e-15));
    GroundProgram none = ground_exhaustive(p, parse_atom("calls(bob)"));
    CHECK(enumerate_probability(none, store) == 0.0);
  }

  TEST_CASE("finite differences") {
    auto prod = [](const std::vector<double>& x) { return x[0] * x[1]; };
    auto g = finite_difference_gradient(prod, {0.3, 0.5});
    CHECK(g[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(g[1] == doctest::Approx(0.3).epsilon(1e-9));
    auto c = finite_difference_gradient([](const std::vector<double>&) { return 2.0; }, {0.1, 0.2});
    CHECK(c == std::vector<double>{0.0, 0.0});
    Program p = test::load_program("programs/burglary_learn.dpl");
    GroundProgram gp = ground(p, parse_atom("calls(mary)"), nullptr);
    ParameterStore store(p);
    auto fd = finite_difference_gradient(
        [&](const std::vector<double>& theta) {
          ParameterStore s = store;
          s.values() = theta;
          return enumerate_probability(gp, s);
        },
        store.values());
    CHECK(fd[0] == doctest::Approx(0.45).epsilon(1e-8));
    CHECK(fd[1] == doctest::Approx(0.4).epsilon(1e-8));
  }

  TEST_CASE("fact order does not change the answer") {
    std::mt19937_64 rng(17);
    test::RandomProgramOptions o;
    for (int trial = 0; trial < 50; ++trial) {
      std::string q;
      std::string text = test::random_program(rng, o, &q);
      std::vector<std::string> lines;
      std::istringstream in(text);
      for (std::string line; std::getline(in, line);) lines.push_back(line);
      auto split = std::find_if(lines.begin(), lines.end(), [](const std::string& l) { return l[0] == 'd'; });
      std::vector<std::string> facts(lines.begin(), split);
      std::shuffle(facts.begin(), facts.end(), rng);
      std::string shuffled;
      for (const auto& l : facts) shuffled += l + "\n";
      for (auto it = split; it != lines.end(); ++it) shuffled += *it + "\n";
      Program a = parse_program(text), b = parse_program(shuffled);
      double pa = enumerate_probability(ground(a, parse_atom(q), nullptr), ParameterStore(a));
      double pb = enumerate_probability(ground(b, parse_atom(q), nullptr), ParameterStore(b));
      CHECK(std::abs(pa - pb) < 1e-12);
    }
  }

  TEST_CASE("unstratified worlds are rejected") {
    GroundProgram gp;
    AtomId p = gp.atom_id(Atom("p")), q = gp.atom_id(Atom("q"));
    gp.add_rule(GroundRule{p, {{q, true}}});
    gp.add_rule(GroundRule{q, {{p, true}}});
    CHECK_THROWS_AS(world_closure(gp, World{}), OracleError);
  }

  TEST_CASE("too many worlds") {
    std::string text;
    for (int i = 0; i < 26; ++i) text += "0.5::f" + std::to_string(i) + ".\n";
    text += "q :- f0";
    for (int i = 1; i < 26; ++i) text += ", f" + std::to_string(i);
    text += ".\n";
    Program p = parse_program(text);
    CHECK_THROWS_AS(enumerate_probability(ground(p, parse_atom("q"), nullptr), ParameterStore(p)), OracleError);
  }
}

TEST_SUITE("evaluation") {
  TEST_CASE("burglary probability and gradient") {
    Program p = test::load_program("programs/burglary_learn.dpl");
    CompiledQuery q = compile_query(p, parse_atom("calls(mary)"), nullptr);
    ParameterStore store(p);
    GradientValue g = gradient(q, store);
    CHECK(g.p == doctest::Approx(0.14).epsilon(1e-15));
    REQUIRE(g.g.size() == 2);
    CHECK(g.g[0] == doctest::Approx(0.45).epsilon(1e-15));
    CHECK(g.g[1] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(slot_name(p, q.program, q.layout, 0) == "earthquake");
  }

  TEST_CASE("coin probability and gradient") {
    Program p = test::load_program("programs/coin.dpl");
    auto rt = test::table_runtime(test::read_file(test::source_path("programs/coin.models")));
    CompiledQuery q = compile_query(p, parse_atom("win"), rt.get());
    ParameterStore store(p);
    GradientValue g = gradient(q, store);
    CHECK(g.p == doctest::Approx(0.96).epsilon(1e-15));
    CHECK(probability(q, store) == doctest::Approx(0.96).epsilon(1e-15));
    REQUIRE(q.program.groups.size() == 2);
    std::size_t c1 = to_string(q.program.groups[0].inputs[0]) == "coin1" ? 0 : 1;
    CHECK(g.g[q.layout.slot(c1, 0)] == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(g.g[q.layout.slot(1 - c1, 0)] == doctest::Approx(0.05).epsilon(1e-14));
    // Red is the first AD head; blue is its complement and gets no slot weight.
    CHECK(g.g[0] == doctest::Approx(0.08).epsilon(1e-14));
    CHECK(g.g[1] == 0.0);
  }

  TEST_CASE("variable order does not change values") {
    std::mt19937_64 rng(31);
    test::RandomProgramOptions o;
    o.learnable = true;
    o.max_ads = 2;
    for (int trial = 0; trial < 100; ++trial) {
      std::string q;
      Program p = parse_program(test::random_program(rng, o, &q));
      ParameterStore store(p);
      CompiledQuery a = compile_query(p, parse_atom(q), nullptr);
      VariableOrder reversed = a.circuit.variables();
      std::reverse(reversed.begin(), reversed.end());
      Circuit c = compile(a.formula, a.program, reversed);
      double pa = probability(a, store);
      double pc = evaluate(c, probability_labels(c, a.program, store), ProbabilitySemiring{});
      GradientValue ga = gradient(a, store);
      GradientValue gc = evaluate(c, gradient_labels(c, a.program, store, a.layout), GradientSemiring(a.layout.size));
      CHECK(std::abs(pa - pc) < 1e-12);
      CHECK(std::abs(ga.p - pa) < 1e-12);
      for (std::size_t k = 0; k < ga.g.size(); ++k) CHECK(std::abs(ga.g[k] - gc.g[k]) < 1e-12);
    }
  }

  TEST_CASE("label count mismatches are reported") {
    Program p = test::load_program("programs/burglary.dpl");
    CompiledQuery q = compile_query(p, parse_atom("calls(mary)"), nullptr);
    Labels<ProbabilitySemiring> labels = probability_labels(q.circuit, q.program, ParameterStore(p));
    labels.pop_back();
    CHECK_THROWS_AS(evaluate(q.circuit, labels, ProbabilitySemiring{}), LabelError);
  }
}
