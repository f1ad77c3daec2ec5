#include "dpl/grounder.hpp"

#include <pthread.h>

#include <deque>
#include <exception>
#include <functional>
#include <unordered_map>
#include <unordered_set>

#include "dpl/errors.hpp"

namespace dpl {

// ---------------------------------------------------------------------------
// Builtins

namespace {

void check_overflow(bool overflow) {
  if (overflow) throw TypeError("integer overflow in arithmetic");
}

}  // namespace

std::int64_t eval_arithmetic(const Term& e) {
  switch (e.kind()) {
    case Term::Kind::kInteger:
      return e.integer_value();
    case Term::Kind::kVariable:
      throw InstantiationError("arithmetic on unbound variable " + to_string(e));
    case Term::Kind::kAtom:
      throw TypeError("arithmetic on non-number " + to_string(e));
    case Term::Kind::kCompound:
      break;
  }
  const std::string& f = symbol_name(e.symbol());
  auto args = e.args();
  if (args.size() == 1 && f == "-") {
    std::int64_t r = 0;
    check_overflow(__builtin_sub_overflow(std::int64_t{0}, eval_arithmetic(args[0]), &r));
    return r;
  }
  if (args.size() == 1 && f == "+") return eval_arithmetic(args[0]);
  if (args.size() != 2) throw TypeError("unknown arithmetic function " + to_string(e));
  std::int64_t a = eval_arithmetic(args[0]);
  std::int64_t b = eval_arithmetic(args[1]);
  std::int64_t r = 0;
  if (f == "+") {
    check_overflow(__builtin_add_overflow(a, b, &r));
    return r;
  }
  if (f == "-") {
    check_overflow(__builtin_sub_overflow(a, b, &r));
    return r;
  }
  if (f == "*") {
    check_overflow(__builtin_mul_overflow(a, b, &r));
    return r;
  }
  if (f == "//" || f == "mod") {
    if (b == 0) throw ZeroDivisorError("division by zero in " + to_string(e));
    if (a == INT64_MIN && b == -1) throw TypeError("integer overflow in arithmetic");
    if (f == "//") return a / b;
    std::int64_t m = a % b;
    if (m != 0 && ((m < 0) != (b < 0))) m += b;
    return m;
  }
  throw TypeError("unknown arithmetic function " + to_string(e));
}

bool is_builtin(const Atom& a) {
  static const std::unordered_set<std::string> names2 = {"is", "=:=", "=\\=", "<", ">",
                                                         "=<", ">=", "=",   "\\="};
  const std::string& n = symbol_name(a.predicate());
  if (a.arity() == 2) return names2.count(n) > 0;
  if (a.arity() == 0) return n == "true" || n == "fail" || n == "false";
  return false;
}

std::optional<Substitution> eval_builtin(const Atom& goal) {
  const std::string& n = symbol_name(goal.predicate());
  if (goal.arity() == 0) {
    if (n == "true") return Substitution{};
    return std::nullopt;
  }
  const Term& l = goal.args()[0];
  const Term& r = goal.args()[1];
  if (n == "=") {
    Substitution s;
    if (unify(l, r, s)) return s;
    return std::nullopt;
  }
  if (n == "\\=") {
    Substitution s;
    if (unify(l, r, s)) return std::nullopt;
    return Substitution{};
  }
  if (n == "is") {
    if (!r.ground()) throw InstantiationError("right-hand side of is/2 not ground: " + to_string(goal));
    Substitution s;
    if (unify(l, Term::integer(eval_arithmetic(r)), s)) return s;
    return std::nullopt;
  }
  if (!l.ground() || !r.ground())
    throw InstantiationError("comparison needs ground arguments: " + to_string(goal));
  std::int64_t a = eval_arithmetic(l);
  std::int64_t b = eval_arithmetic(r);
  bool ok = false;
  if (n == "=:=") ok = a == b;
  else if (n == "=\\=") ok = a != b;
  else if (n == "<") ok = a < b;
  else if (n == ">") ok = a > b;
  else if (n == "=<") ok = a <= b;
  else if (n == ">=") ok = a >= b;
  if (ok) return Substitution{};
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Grounder

namespace {

/// Renames variables to 0..k-1 in order of first occurrence.
Term canonical(const Term& t, std::unordered_map<VarId, VarId>& names) {
  switch (t.kind()) {
    case Term::Kind::kVariable: {
      auto [it, inserted] = names.try_emplace(t.var_id(), static_cast<VarId>(names.size()));
      return Term::variable(it->second, t.symbol());
    }
    case Term::Kind::kCompound: {
      if (t.ground()) return t;
      std::vector<Term> args;
      args.reserve(t.arity());
      for (const Term& a : t.args()) args.push_back(canonical(a, names));
      return Term::compound(t.symbol(), std::move(args));
    }
    default:
      return t;
  }
}

struct CallKey {
  Term term;
  bool neural_only;
  friend bool operator==(const CallKey&, const CallKey&) = default;
};

struct CallKeyHash {
  std::size_t operator()(const CallKey& k) const noexcept { return k.term.hash() * 2 + k.neural_only; }
};

struct IdsHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const noexcept {
    std::size_t h = 0xcbf29ce484222325ull;
    for (std::uint64_t x : v) h = (h ^ x) * 0x100000001b3ull;
    return h;
  }
};

struct InputsKey {
  Symbol model;
  std::vector<Term> inputs;
  friend bool operator==(const InputsKey&, const InputsKey&) = default;
};

struct InputsKeyHash {
  std::size_t operator()(const InputsKey& k) const noexcept {
    std::size_t h = k.model;
    for (const Term& t : k.inputs) h = h * 1000003u ^ t.hash();
    return h;
  }
};

struct Answer {
  AtomId id;
  /// The atom the caller unifies with (the untagged form for neural facts).
  Atom atom;
};

struct CallState {
  bool done = false;
  std::vector<Answer> answers;
  std::unordered_set<AtomId> seen;
  /// Rule instances found by this call, emitted once it completes.
  std::vector<std::size_t> rules;
};

std::uint64_t encode(const GroundLiteral& l) { return (std::uint64_t{l.atom} << 1) | l.negated; }

constexpr VarId kFirstClauseVar = 1u << 24;

class Grounder {
 public:
  Grounder(const Program& p, DistributionProvider* models, const GroundOptions& o)
      : program_(p), models_(models), options_(o) {
    auto add = [&](const Atom& head, ClauseRef ref) { index_[key_of(head)].push_back(ref); };
    for (const ClauseRef& ref : p.order) {
      switch (ref.kind) {
        case ClauseRef::Kind::kFact:
          add(p.facts[ref.index].atom, ref);
          break;
        case ClauseRef::Kind::kAd: {
          std::unordered_set<PredicateKey, PredicateKeyHash> keys;
          for (const auto& h : p.ads[ref.index].heads)
            if (keys.insert(key_of(h.atom)).second) add(h.atom, ref);
          break;
        }
        case ClauseRef::Kind::kNad:
          add(p.nads[ref.index].heads.front(), ref);
          neural_.insert(key_of(p.nads[ref.index].heads.front()));
          break;
        case ClauseRef::Kind::kRule:
          add(p.rules[ref.index].clause.head, ref);
          break;
      }
    }
    for (const auto& [key, refs] : index_) {
      if (!neural_.count(key)) continue;
      for (const ClauseRef& r : refs)
        if (r.kind != ClauseRef::Kind::kNad) shadowed_.insert(key);
    }
    gp_.parameter_count = p.parameter_count();
  }

  GroundProgram run(const Atom& query) {
    gp_.query = query;
    for (const Answer& a : call(query, false, false)) {
      gp_.answers.push_back(a.id);
      if (a.atom == query) gp_.query_atom = a.id;
    }
    return std::move(gp_);
  }

 private:
  VarId fresh(VarId count) {
    VarId base = next_var_;
    next_var_ += count + 1;
    return base;
  }

  std::vector<Answer> call(const Atom& goal, bool neural_only, bool negated) {
    std::unordered_map<VarId, VarId> names;
    CallKey key{canonical(goal.as_term(), names), neural_only};
    auto found = calls_.find(key);
    if (found != calls_.end()) {
      CallState& st = states_[found->second];
      if (!st.done) {
        bool through_negation = negated;
        for (auto it = stack_.rbegin(); it != stack_.rend() && it->first != found->second; ++it)
          through_negation = through_negation || it->second;
        if (through_negation)
          throw UnstratifiedNegationError("negation cycle through " + to_string(goal));
        throw CyclicProgramError("positive cycle through " + to_string(goal) +
                                 "; only acyclic ground programs are supported");
      }
      return st.answers;
    }
    if (stack_.size() >= options_.max_depth)
      throw RecursionLimitError("recursion depth limit " + std::to_string(options_.max_depth) +
                                " exceeded at " + to_string(goal));
    std::size_t index = states_.size();
    states_.emplace_back();
    calls_.emplace(key, index);
    stack_.emplace_back(index, negated);

    auto it = index_.find(key_of(goal));
    if (it != index_.end()) {
      bool shadowed = shadowed_.count(key_of(goal)) > 0;
      for (const ClauseRef& ref : it->second) {
        bool is_nad = ref.kind == ClauseRef::Kind::kNad;
        if (shadowed && is_nad != neural_only) continue;
        resolve_with(goal, ref, shadowed, index);
      }
    }
    stack_.pop_back();
    states_[index].done = true;
    for (std::size_t r : states_[index].rules) gp_.order.push_back({GroundItem::Kind::kRule, r});
    return states_[index].answers;
  }

  void defer_rule(std::size_t state, GroundRule r) {
    gp_.rules.push_back(std::move(r));
    states_[state].rules.push_back(gp_.rules.size() - 1);
  }

  void add_answer(std::size_t state, AtomId id, const Atom& atom) {
    CallState& st = states_[state];
    if (st.seen.insert(id).second) st.answers.push_back({id, atom});
  }

  Atom ground_head(const Atom& a, const Substitution& s) {
    Atom out = apply(a, s);
    if (!out.ground())
      throw InstantiationError("clause head " + to_string(out) +
                               " is not ground after solving its body");
    return out;
  }

  void resolve_with(const Atom& goal, const ClauseRef& ref, bool shadowed, std::size_t state) {
    switch (ref.kind) {
      case ClauseRef::Kind::kFact: {
        const ProbabilisticFact& f = program_.facts[ref.index];
        Atom head = rename(f.atom, fresh(f.variable_count));
        Substitution s;
        if (!unify(goal.as_term(), head.as_term(), s)) return;
        Atom inst = ground_head(head, s);
        AtomId id = gp_.atom_id(inst);
        auto [pos, inserted] = fact_instances_.try_emplace({ref.index, id}, 0);
        if (inserted) {
          GroundFact gf;
          gf.atom = id;
          gf.source = f.probability.is_learnable() ? LabelSource::kLearnable : LabelSource::kFixed;
          gf.probability = f.probability.value;
          gf.parameter = f.probability.parameter;
          pos->second = gp_.add_fact(gf);
          gp_.order.push_back({GroundItem::Kind::kFact, pos->second});
        }
        add_answer(state, id, inst);
        return;
      }
      case ClauseRef::Kind::kRule: {
        const Rule& r = program_.rules[ref.index];
        VarId off = fresh(r.variable_count);
        Atom head = rename(r.clause.head, off);
        Substitution s;
        if (!unify(goal.as_term(), head.as_term(), s)) return;
        std::vector<Literal> body;
        body.reserve(r.clause.body.size());
        for (const Literal& l : r.clause.body) body.push_back({rename(l.atom, off), l.negated});
        std::vector<GroundLiteral> acc;
        PredicateKey head_key = key_of(head);
        solve(body, 0, s, acc, head_key, [&] {
          Atom inst = ground_head(head, s);
          AtomId id = gp_.atom_id(inst);
          std::vector<std::uint64_t> sig{id};
          for (const GroundLiteral& l : acc) sig.push_back(encode(l));
          if (rule_instances_.insert(std::move(sig)).second) defer_rule(state, {id, acc});
          add_answer(state, id, inst);
        });
        return;
      }
      case ClauseRef::Kind::kAd: {
        const AnnotatedDisjunction& ad = program_.ads[ref.index];
        for (std::size_t j = 0; j < ad.heads.size(); ++j) {
          if (key_of(ad.heads[j].atom) != key_of(goal)) continue;
          VarId off = fresh(ad.variable_count);
          Atom head = rename(ad.heads[j].atom, off);
          Substitution s;
          if (!unify(goal.as_term(), head.as_term(), s)) continue;
          std::vector<Literal> body;
          for (const Literal& l : ad.body) body.push_back({rename(l.atom, off), l.negated});
          std::vector<GroundLiteral> acc;
          solve(body, 0, s, acc, key_of(head), [&] {
            GroundAd g;
            g.source = ref.index;
            std::vector<std::uint64_t> sig{ref.index};
            for (const AdHead& h : ad.heads) {
              AtomId id = gp_.atom_id(ground_head(rename(h.atom, off), s));
              g.heads.push_back({h.probability, id});
              sig.push_back(id);
            }
            sig.push_back(~std::uint64_t{0});
            for (const GroundLiteral& l : acc) sig.push_back(encode(l));
            g.body = acc;
            AtomId answer = g.heads[j].atom;
            if (ad_instances_.insert(std::move(sig)).second) {
              gp_.ads.push_back(std::move(g));
              gp_.order.push_back({GroundItem::Kind::kAd, gp_.ads.size() - 1});
            }
            add_answer(state, answer, apply(head, s));
          });
        }
        return;
      }
      case ClauseRef::Kind::kNad: {
        const NeuralAD& nad = program_.nads[ref.index];
        for (std::size_t j = 0; j < nad.heads.size(); ++j) {
          VarId off = fresh(nad.variable_count);
          Atom head = rename(nad.heads[j], off);
          Substitution s;
          if (!unify(goal.as_term(), head.as_term(), s)) continue;
          std::vector<Literal> body;
          for (const Literal& l : nad.body) body.push_back({rename(l.atom, off), l.negated});
          std::vector<GroundLiteral> acc;
          solve(body, 0, s, acc, key_of(head), [&] {
            // Without a body the neural facts are the head atoms themselves
            // (tagged when shadowed by rules); with a body each head gets a
            // rule `h :- body, fact` over a tagged fact atom.
            std::vector<Atom> plain;
            std::vector<Atom> derived;
            std::vector<AtomId> facts;
            for (const Atom& h : nad.heads) {
              plain.push_back(ground_head(rename(h, off), s));
              derived.push_back(shadowed ? Atom("nn", {plain.back().as_term()}) : plain.back());
              facts.push_back(gp_.atom_id(acc.empty() ? derived.back()
                                                      : Atom("nn", {derived.back().as_term()})));
            }
            std::vector<Term> inputs;
            for (const Term& t : nad.inputs) {
              Term v = apply(rename(t, off), s);
              if (!v.ground())
                throw InstantiationError("neural input " + to_string(v) + " of " +
                                         to_string(plain[j]) + " is not ground");
              inputs.push_back(v);
            }
            const NeuralGroup& g = group(ref.index, nad, facts, std::move(inputs));
            if (options_.neural_prune_below > 0.0 &&
                g.distribution[j] < options_.neural_prune_below)
              return;
            AtomId answer = facts[j];
            if (!acc.empty()) {
              answer = gp_.atom_id(derived[j]);
              std::vector<GroundLiteral> rule_body = acc;
              rule_body.push_back({facts[j], false});
              std::vector<std::uint64_t> sig{answer};
              for (const GroundLiteral& l : rule_body) sig.push_back(encode(l));
              if (rule_instances_.insert(std::move(sig)).second)
                defer_rule(state, {answer, std::move(rule_body)});
            }
            add_answer(state, answer, plain[j]);
          });
        }
        return;
      }
    }
  }

  const NeuralGroup& group(std::size_t nad_index, const NeuralAD& nad, const std::vector<AtomId>& ids,
                           std::vector<Term> inputs) {
    std::vector<std::uint64_t> sig{nad_index};
    sig.insert(sig.end(), ids.begin(), ids.end());
    auto [pos, inserted] = group_instances_.try_emplace(std::move(sig), 0);
    if (!inserted) return gp_.groups[pos->second];
    NeuralGroup g;
    g.model = nad.model;
    g.nad = nad_index;
    InputsKey key{nad.model, inputs};
    auto memo = forwards_.find(key);
    if (memo == forwards_.end()) {
      if (!models_)
        throw NeuralError("no neural runtime available for model " + symbol_name(nad.model));
      std::vector<double> dist = models_->distribution(nad.model, inputs, nad.domain.size());
      if (dist.size() != nad.domain.size())
        throw NeuralError("model " + symbol_name(nad.model) + " returned " +
                          std::to_string(dist.size()) + " outputs for a domain of " +
                          std::to_string(nad.domain.size()));
      memo = forwards_.emplace(std::move(key), std::move(dist)).first;
    }
    g.distribution = memo->second;
    g.inputs = std::move(inputs);
    std::size_t gi = gp_.groups.size();
    for (std::size_t k = 0; k < ids.size(); ++k) {
      GroundFact f;
      f.atom = ids[k];
      f.source = LabelSource::kNeural;
      f.probability = g.distribution[k];
      f.group = gi;
      f.output = k;
      g.facts.push_back(gp_.add_fact(f));
    }
    gp_.groups.push_back(std::move(g));
    gp_.order.push_back({GroundItem::Kind::kGroup, gi});
    pos->second = gi;
    return gp_.groups[gi];
  }

  void solve(const std::vector<Literal>& body, std::size_t i, Substitution& s,
             std::vector<GroundLiteral>& acc, const PredicateKey& head_key,
             const std::function<void()>& done) {
    if (i == body.size()) {
      done();
      return;
    }
    const Literal& lit = body[i];
    Atom a = apply(lit.atom, s);
    if (is_builtin(a)) {
      std::optional<Substitution> r = eval_builtin(a);
      if (lit.negated) {
        if (!a.ground())
          throw InstantiationError("negated builtin needs ground arguments: " + to_string(a));
        if (!r) solve(body, i + 1, s, acc, head_key, done);
        return;
      }
      if (!r) return;
      std::size_t mark = s.mark();
      for (const auto& [v, t] : r->bindings()) s.bind(v, t);
      solve(body, i + 1, s, acc, head_key, done);
      s.undo(mark);
      return;
    }
    PredicateKey key = key_of(a);
    bool neural_only = key == head_key && shadowed_.count(key) > 0;
    if (lit.negated) {
      if (!a.ground())
        throw InstantiationError("negated literal \\+" + to_string(a) + " is not ground");
      std::vector<Answer> answers = call(a, neural_only, true);
      if (answers.empty()) {
        solve(body, i + 1, s, acc, head_key, done);
        return;
      }
      acc.push_back({answers.front().id, true});
      solve(body, i + 1, s, acc, head_key, done);
      acc.pop_back();
      return;
    }
    std::vector<Answer> answers = call(a, neural_only, false);
    for (const Answer& ans : answers) {
      std::size_t mark = s.mark();
      if (unify(a.as_term(), ans.atom.as_term(), s)) {
        acc.push_back({ans.id, false});
        solve(body, i + 1, s, acc, head_key, done);
        acc.pop_back();
      }
      s.undo(mark);
    }
  }

  struct PairHash {
    std::size_t operator()(const std::pair<std::size_t, AtomId>& p) const noexcept {
      return p.first * 0x9e3779b97f4a7c15ull ^ p.second;
    }
  };

  const Program& program_;
  DistributionProvider* models_;
  GroundOptions options_;
  GroundProgram gp_;
  std::unordered_map<PredicateKey, std::vector<ClauseRef>, PredicateKeyHash> index_;
  std::unordered_set<PredicateKey, PredicateKeyHash> neural_;
  std::unordered_set<PredicateKey, PredicateKeyHash> shadowed_;
  std::unordered_map<CallKey, std::size_t, CallKeyHash> calls_;
  std::deque<CallState> states_;
  std::vector<std::pair<std::size_t, bool>> stack_;
  std::unordered_map<std::pair<std::size_t, AtomId>, std::size_t, PairHash> fact_instances_;
  std::unordered_set<std::vector<std::uint64_t>, IdsHash> rule_instances_;
  std::unordered_set<std::vector<std::uint64_t>, IdsHash> ad_instances_;
  std::unordered_map<std::vector<std::uint64_t>, std::size_t, IdsHash> group_instances_;
  std::unordered_map<InputsKey, std::vector<double>, InputsKeyHash> forwards_;
  VarId next_var_ = kFirstClauseVar;
};

/// Runs `fn` on a thread with a large stack; deep SLD recursion needs it.
template <class F>
void with_large_stack(F&& fn) {
  struct Job {
    F* fn;
    std::exception_ptr error;
  } job{&fn, nullptr};
  pthread_attr_t attr;
  pthread_attr_init(&attr);
  pthread_attr_setstacksize(&attr, std::size_t{1} << 30);
  pthread_t thread;
  auto entry = [](void* arg) -> void* {
    Job* j = static_cast<Job*>(arg);
    try {
      (*j->fn)();
    } catch (...) {
      j->error = std::current_exception();
    }
    return nullptr;
  };
  if (pthread_create(&thread, &attr, entry, &job) != 0) {
    pthread_attr_destroy(&attr);
    fn();
    return;
  }
  pthread_join(thread, nullptr);
  pthread_attr_destroy(&attr);
  if (job.error) std::rethrow_exception(job.error);
}

}  // namespace

GroundProgram ground(const Program& program, const Atom& query, DistributionProvider* models,
                     const GroundOptions& options) {
  GroundProgram out;
  with_large_stack([&] { out = Grounder(program, models, options).run(query); });
  return out;
}

}  // namespace dpl
