#include "dpl/oracle.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_set>

#include "dpl/errors.hpp"
#include "dpl/grounder.hpp"
#include "dpl/transform.hpp"

namespace dpl {

namespace {

struct ClosureRule {
  AtomId head;
  const std::vector<GroundLiteral>* body;
  /// Active AD index and head that must be chosen, or npos.
  std::size_t ad = static_cast<std::size_t>(-1);
  std::size_t choice = 0;
};

std::vector<std::size_t> active_ads(const GroundProgram& gp) {
  std::vector<std::size_t> out;
  for (const GroundItem& item : gp.order)
    if (item.kind == GroundItem::Kind::kAd) out.push_back(item.index);
  return out;
}

/// Rules grouped by stratum, computed once per program.
class Closure {
 public:
  explicit Closure(const GroundProgram& gp) : gp_(gp), ads_(active_ads(gp)) {
    for (const GroundItem& item : gp.order)
      if (item.kind == GroundItem::Kind::kRule) rules_.push_back({gp.rules[item.index].head, &gp.rules[item.index].body});
    for (std::size_t a = 0; a < ads_.size(); ++a) {
      const GroundAd& ad = gp.ads[ads_[a]];
      for (std::size_t h = 0; h < ad.heads.size(); ++h) rules_.push_back({ad.heads[h].atom, &ad.body, a, h});
    }
    std::vector<std::size_t> stratum(gp.atoms.size(), 0);
    const std::size_t limit = gp.atoms.size() + 1;
    for (bool changed = true; changed;) {
      changed = false;
      for (const ClosureRule& r : rules_) {
        for (const GroundLiteral& l : *r.body) {
          std::size_t need = stratum[l.atom] + (l.negated ? 1 : 0);
          if (stratum[r.head] < need) {
            stratum[r.head] = need;
            changed = true;
            if (need > limit) throw OracleError("negation is not stratified");
          }
        }
      }
    }
    std::size_t top = 0;
    for (const ClosureRule& r : rules_) top = std::max(top, stratum[r.head]);
    strata_.assign(top + 1, {});
    for (std::size_t k = 0; k < rules_.size(); ++k) strata_[stratum[rules_[k].head]].push_back(k);
  }

  std::vector<char> run(const World& w) const {
    std::vector<char> truth(gp_.atoms.size(), 0);
    for (std::size_t f = 0; f < gp_.facts.size(); ++f)
      if (gp_.facts[f].source != LabelSource::kNeural && w.facts.at(f)) truth[gp_.facts[f].atom] = 1;
    for (std::size_t g = 0; g < gp_.groups.size(); ++g)
      truth[gp_.facts[gp_.groups[g].facts.at(w.groups.at(g))].atom] = 1;
    for (const std::vector<std::size_t>& layer : strata_) {
      for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t k : layer) {
          const ClosureRule& r = rules_[k];
          if (truth[r.head]) continue;
          if (r.ad != static_cast<std::size_t>(-1) && w.ads.at(r.ad) != r.choice) continue;
          bool ok = true;
          for (const GroundLiteral& l : *r.body)
            if (static_cast<bool>(truth[l.atom]) == l.negated) {
              ok = false;
              break;
            }
          if (ok) {
            truth[r.head] = 1;
            changed = true;
          }
        }
      }
    }
    return truth;
  }

 private:
  const GroundProgram& gp_;
  std::vector<std::size_t> ads_;
  std::vector<ClosureRule> rules_;
  std::vector<std::vector<std::size_t>> strata_;
};

double head_probability(const GroundAdHead& h, const ParameterStore& store) {
  return h.probability.is_learnable() ? store[h.probability.parameter] : h.probability.value;
}

}  // namespace

double world_weight(const GroundProgram& gp, const World& w, const ParameterStore& store) {
  double weight = 1.0;
  for (std::size_t f = 0; f < gp.facts.size(); ++f) {
    if (gp.facts[f].source == LabelSource::kNeural) continue;
    double p = fact_probability(gp, f, store);
    weight *= w.facts.at(f) ? p : 1.0 - p;
  }
  for (std::size_t g = 0; g < gp.groups.size(); ++g) weight *= gp.groups[g].distribution.at(w.groups.at(g));
  std::vector<std::size_t> ads = active_ads(gp);
  for (std::size_t a = 0; a < ads.size(); ++a) {
    const GroundAd& ad = gp.ads[ads[a]];
    std::size_t c = w.ads.at(a);
    if (c < ad.heads.size()) {
      weight *= head_probability(ad.heads[c], store);
    } else {
      double rest = 1.0;
      for (const GroundAdHead& h : ad.heads) rest -= head_probability(h, store);
      weight *= std::max(rest, 0.0);
    }
  }
  return weight;
}

std::vector<char> world_closure(const GroundProgram& gp, const World& w) { return Closure(gp).run(w); }

void for_each_world(const GroundProgram& gp, const ParameterStore& store,
                    const std::function<void(const World&, double)>& fn) {
  // Each choice point with its nonzero alternatives; fixed facts with p of
  // exactly 0 or 1 have a single alternative.
  struct Choice {
    enum { kFact, kGroup, kAd } kind;
    std::size_t index;
    std::vector<std::size_t> values;
  };
  std::vector<Choice> choices;
  World w;
  w.facts.assign(gp.facts.size(), 0);
  w.groups.assign(gp.groups.size(), 0);
  std::vector<std::size_t> ads = active_ads(gp);
  w.ads.assign(ads.size(), 0);
  double worlds = 1.0;
  for (std::size_t f = 0; f < gp.facts.size(); ++f) {
    if (gp.facts[f].source == LabelSource::kNeural) continue;
    double p = fact_probability(gp, f, store);
    Choice c{Choice::kFact, f, {}};
    if (p < 1.0) c.values.push_back(0);
    if (p > 0.0) c.values.push_back(1);
    worlds *= static_cast<double>(c.values.size());
    choices.push_back(std::move(c));
  }
  for (std::size_t g = 0; g < gp.groups.size(); ++g) {
    Choice c{Choice::kGroup, g, {}};
    for (std::size_t v = 0; v < gp.groups[g].distribution.size(); ++v)
      if (gp.groups[g].distribution[v] > 0.0) c.values.push_back(v);
    worlds *= static_cast<double>(c.values.size());
    choices.push_back(std::move(c));
  }
  for (std::size_t a = 0; a < ads.size(); ++a) {
    const GroundAd& ad = gp.ads[ads[a]];
    Choice c{Choice::kAd, a, {}};
    double rest = 1.0;
    for (std::size_t h = 0; h < ad.heads.size(); ++h) {
      double p = head_probability(ad.heads[h], store);
      rest -= p;
      if (p > 0.0) c.values.push_back(h);
    }
    if (rest > 1e-15) c.values.push_back(ad.heads.size());
    worlds *= static_cast<double>(c.values.size());
    choices.push_back(std::move(c));
  }
  if (worlds > static_cast<double>(1u << 25))
    throw OracleError("too many possible worlds to enumerate (" + std::to_string(worlds) + ")");
  for (const Choice& c : choices)
    if (c.values.empty()) return;

  std::vector<std::size_t> pos(choices.size(), 0);
  auto assign = [&](std::size_t k) {
    const Choice& c = choices[k];
    std::size_t v = c.values[pos[k]];
    if (c.kind == Choice::kFact) w.facts[c.index] = static_cast<char>(v);
    else if (c.kind == Choice::kGroup) w.groups[c.index] = v;
    else w.ads[c.index] = v;
  };
  for (std::size_t k = 0; k < choices.size(); ++k) assign(k);
  for (;;) {
    fn(w, world_weight(gp, w, store));
    std::size_t k = 0;
    while (k < choices.size() && ++pos[k] == choices[k].values.size()) {
      pos[k] = 0;
      assign(k);
      ++k;
    }
    if (k == choices.size()) return;
    assign(k);
  }
}

double enumerate_probability(const GroundProgram& gp, const ParameterStore& store, std::optional<AtomId> atom) {
  if (!atom) atom = gp.query_atom;
  if (!atom) return 0.0;
  Closure closure(gp);
  double total = 0.0;
  for_each_world(gp, store, [&](const World& w, double weight) {
    if (closure.run(w)[*atom]) total += weight;
  });
  return total;
}

// ---------------------------------------------------------------------------
// Exhaustive grounding

namespace {

class Saturator {
 public:
  explicit Saturator(const Program& p) : program_(p) {}

  GroundProgram run(const Atom& query) {
    if (!program_.nads.empty()) throw OracleError("exhaustive grounding does not support neural ADs");
    gp_.parameter_count = program_.parameter_count();
    gp_.query = query;
    for (const ProbabilisticFact& f : program_.facts) {
      require_ground(f.atom);
      possible(f.atom);
    }
    for (bool grew = true; grew;) {
      grew = false;
      for (const AnnotatedDisjunction& ad : program_.ads)
        match(ad.body, [&](const Substitution& s, const std::vector<Literal>&) {
          for (const AdHead& h : ad.heads) grew = possible(head_of(h.atom, s)) || grew;
        });
      for (const Rule& r : program_.rules)
        match(r.clause.body, [&](const Substitution& s, const std::vector<Literal>&) {
          grew = possible(head_of(r.clause.head, s)) || grew;
        });
    }
    // Emit every instance over the saturated atom set in source order.
    std::set<std::vector<std::uint64_t>> seen;
    for (const ClauseRef& ref : program_.order) {
      switch (ref.kind) {
        case ClauseRef::Kind::kFact: {
          const ProbabilisticFact& f = program_.facts[ref.index];
          GroundFact gf;
          gf.atom = gp_.atom_id(f.atom);
          gf.source = f.probability.is_learnable() ? LabelSource::kLearnable : LabelSource::kFixed;
          gf.probability = f.probability.value;
          gf.parameter = f.probability.parameter;
          std::size_t k = gp_.add_fact(gf);
          gp_.order.push_back({GroundItem::Kind::kFact, k});
          break;
        }
        case ClauseRef::Kind::kAd: {
          const AnnotatedDisjunction& ad = program_.ads[ref.index];
          match(ad.body, [&](const Substitution& s, const std::vector<Literal>& body) {
            GroundAd g;
            g.source = ref.index;
            std::vector<std::uint64_t> sig{1, ref.index};
            for (const AdHead& h : ad.heads) {
              g.heads.push_back({h.probability, gp_.atom_id(head_of(h.atom, s))});
              sig.push_back(g.heads.back().atom);
            }
            g.body = literals(body, sig);
            if (!seen.insert(sig).second) return;
            gp_.ads.push_back(std::move(g));
            gp_.order.push_back({GroundItem::Kind::kAd, gp_.ads.size() - 1});
          });
          break;
        }
        case ClauseRef::Kind::kRule: {
          const Rule& r = program_.rules[ref.index];
          match(r.clause.body, [&](const Substitution& s, const std::vector<Literal>& body) {
            GroundRule g;
            g.head = gp_.atom_id(head_of(r.clause.head, s));
            std::vector<std::uint64_t> sig{2, g.head};
            g.body = literals(body, sig);
            if (!seen.insert(sig).second) return;
            gp_.add_rule(std::move(g));
          });
          break;
        }
        case ClauseRef::Kind::kNad:
          break;
      }
    }
    if (auto id = gp_.find_atom(query)) {
      gp_.query_atom = *id;
      gp_.answers.push_back(*id);
    }
    return std::move(gp_);
  }

 private:
  using Done = std::function<void(const Substitution&, const std::vector<Literal>&)>;

  static void require_ground(const Atom& a) {
    if (!a.ground()) throw OracleError("exhaustive grounding needs ground facts: " + to_string(a));
  }

  static Atom head_of(const Atom& head, const Substitution& s) {
    Atom out = apply(head, s);
    if (!out.ground()) throw OracleError("head " + to_string(out) + " is not range restricted");
    return out;
  }

  bool possible(const Atom& a) {
    if (!known_.insert(a).second) return false;
    by_key_[key_of(a)].push_back(a);
    return true;
  }

  /// Ground body literals of an instance, builtins dropped; appended to sig.
  std::vector<GroundLiteral> literals(const std::vector<Literal>& body, std::vector<std::uint64_t>& sig) {
    std::vector<GroundLiteral> out;
    sig.push_back(~std::uint64_t{0});
    for (const Literal& l : body) {
      GroundLiteral g{gp_.atom_id(l.atom), l.negated};
      out.push_back(g);
      sig.push_back((std::uint64_t{g.atom} << 1) | g.negated);
    }
    return out;
  }

  void match(const std::vector<Literal>& body, const Done& done) {
    Substitution s;
    std::vector<Literal> acc;
    solve(body, 0, s, acc, done);
  }

  void solve(const std::vector<Literal>& body, std::size_t k, Substitution& s, std::vector<Literal>& acc,
             const Done& done) {
    if (k == body.size()) {
      done(s, acc);
      return;
    }
    const Literal& lit = body[k];
    Atom goal = apply(lit.atom, s);
    if (is_builtin(goal)) {
      if (!goal.ground()) throw OracleError("builtin " + to_string(goal) + " is not ground when reached");
      std::optional<Substitution> r = eval_builtin(goal);
      if (lit.negated ? r.has_value() : !r.has_value()) return;
      solve(body, k + 1, s, acc, done);
      return;
    }
    if (lit.negated) {
      if (!goal.ground()) throw OracleError("negated literal " + to_string(goal) + " is not ground");
      acc.push_back({goal, true});
      solve(body, k + 1, s, acc, done);
      acc.pop_back();
      return;
    }
    auto it = by_key_.find(key_of(goal));
    if (it == by_key_.end()) return;
    // Index loop: saturation may append to this list during the callback.
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      Atom cand = it->second[i];
      std::size_t mark = s.mark();
      if (unify(goal.as_term(), cand.as_term(), s)) {
        acc.push_back({cand, false});
        solve(body, k + 1, s, acc, done);
        acc.pop_back();
      }
      s.undo(mark);
      it = by_key_.find(key_of(goal));
    }
  }

  const Program& program_;
  GroundProgram gp_;
  std::unordered_set<Atom, AtomHash> known_;
  std::map<PredicateKey, std::vector<Atom>> by_key_;
};

}  // namespace

GroundProgram ground_exhaustive(const Program& program, const Atom& query) { return Saturator(program).run(query); }

std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& fn,
                                               const std::vector<double>& params, double h) {
  std::vector<double> out(params.size());
  std::vector<double> x = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    x[i] = params[i] + h;
    double up = fn(x);
    x[i] = params[i] - h;
    double down = fn(x);
    x[i] = params[i];
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

}  // namespace dpl
