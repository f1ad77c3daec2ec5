#include "dpl/transform.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_set>

#include "dpl/errors.hpp"

namespace dpl {

ChoiceLabel choice_label(const GroundAd& ad, std::size_t head, std::span<const double> parameters) {
  auto value = [&](const ProbSpec& p) {
    if (!p.is_learnable()) return p.value;
    if (p.parameter >= parameters.size())
      throw LabelError("unknown parameter index " + std::to_string(p.parameter));
    return parameters[p.parameter];
  };
  double before = 0.0;
  for (std::size_t j = 0; j < head; ++j) before += value(ad.heads[j].probability);
  double denom = 1.0 - before;
  double p = value(ad.heads[head].probability);
  ChoiceLabel out;
  if (denom <= 0.0) {
    if (p == 0.0 && !ad.heads[head].probability.is_learnable()) return out;
    throw DegenerateDisjunctionError("annotated disjunction mass is exhausted before head " +
                                     std::to_string(head + 1));
  }
  out.value = p / denom;
  if (ad.heads[head].probability.is_learnable())
    out.gradient.emplace_back(ad.heads[head].probability.parameter, 1.0 / denom);
  for (std::size_t j = 0; j < head; ++j)
    if (ad.heads[j].probability.is_learnable())
      out.gradient.emplace_back(ad.heads[j].probability.parameter, p / (denom * denom));
  return out;
}

namespace {

bool full_mass(const GroundAd& ad) {
  bool learnable = false;
  double sum = 0.0;
  for (const auto& h : ad.heads) {
    learnable = learnable || h.probability.is_learnable();
    sum += h.probability.value;
  }
  return learnable || std::fabs(sum - 1.0) <= 1e-9;
}

std::string describe(const GroundProgram& gp, const GroundAd& ad) {
  std::string out;
  for (std::size_t k = 0; k < ad.heads.size(); ++k) {
    if (k) out += "; ";
    out += format_probability(ad.heads[k].probability.value) +
           "::" + to_string(gp.atoms[ad.heads[k].atom]);
  }
  return out;
}

}  // namespace

GroundProgram rewrite_ads(const GroundProgram& gp) {
  GroundProgram out = gp;
  out.order.clear();
  std::vector<double> initial(gp.parameter_count, 0.0);
  for (const GroundAd& ad : gp.ads)
    for (const auto& h : ad.heads)
      if (h.probability.is_learnable() && h.probability.parameter < initial.size())
        initial[h.probability.parameter] = h.probability.value;
  for (const GroundItem& item : gp.order) {
    if (item.kind == GroundItem::Kind::kRule) {
      out.order.push_back(item);
      continue;
    }
    if (item.kind != GroundItem::Kind::kAd) {
      out.order.push_back(item);
      continue;
    }
    const GroundAd& ad = gp.ads[item.index];
    bool full = full_mass(ad);
    std::vector<GroundLiteral> prefix = ad.body;
    for (std::size_t i = 0; i < ad.heads.size(); ++i) {
      bool last = i + 1 == ad.heads.size();
      GroundRule rule{ad.heads[i].atom, prefix};
      if (!(last && full)) {
        ChoiceLabel label;
        try {
          label = choice_label(ad, i, initial);
        } catch (const DegenerateDisjunctionError& e) {
          throw DegenerateDisjunctionError(std::string(e.what()) + " in " + describe(gp, ad));
        }
        GroundFact f;
        f.atom = out.atom_id(Atom("$choice", {Term::integer(static_cast<std::int64_t>(item.index)),
                                              Term::integer(static_cast<std::int64_t>(i + 1))}));
        f.source = LabelSource::kChoice;
        f.probability = label.value;
        f.ad = item.index;
        f.head = i;
        std::size_t fid = out.add_fact(f);
        out.order.push_back({GroundItem::Kind::kFact, fid});
        rule.body.push_back({f.atom, false});
        prefix.push_back({f.atom, true});
      }
      out.rules.push_back(std::move(rule));
      out.order.push_back({GroundItem::Kind::kRule, out.rules.size() - 1});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Formula

std::size_t Formula::KeyHash::operator()(const Node& n) const noexcept {
  std::size_t h = static_cast<std::size_t>(n.op) * 0x9e3779b97f4a7c15ull ^ n.var;
  for (NodeId k : n.kids) h = (h ^ k) * 0x100000001b3ull;
  return h;
}

Formula::Formula() {
  nodes_.push_back({Op::kFalse, 0, {}});
  nodes_.push_back({Op::kTrue, 0, {}});
}

Formula::NodeId Formula::make(Op op, std::uint32_t var, std::vector<NodeId> kids) {
  Node n{op, var, std::move(kids)};
  auto it = unique_.find(n);
  if (it != unique_.end()) return it->second;
  NodeId id = static_cast<NodeId>(nodes_.size());
  unique_.emplace(n, id);
  nodes_.push_back(std::move(n));
  return id;
}

Formula::NodeId Formula::var(std::uint32_t fact) { return make(Op::kVar, fact, {}); }

Formula::NodeId Formula::combine(Op op, std::vector<NodeId> kids) {
  NodeId absorbing = op == Op::kAnd ? kFalseNode : kTrueNode;
  NodeId neutral = op == Op::kAnd ? kTrueNode : kFalseNode;
  std::vector<NodeId> flat;
  std::unordered_set<NodeId> seen;
  std::function<bool(NodeId)> push = [&](NodeId k) {
    if (k == absorbing) return false;
    if (k == neutral) return true;
    if (nodes_[k].op == op) {
      for (NodeId g : std::vector<NodeId>(nodes_[k].kids))
        if (!push(g)) return false;
      return true;
    }
    if (seen.insert(k).second) flat.push_back(k);
    return true;
  };
  for (NodeId k : kids)
    if (!push(k)) return absorbing;
  if (flat.empty()) return neutral;
  if (flat.size() == 1) return flat.front();
  return make(op, 0, std::move(flat));
}

Formula::NodeId Formula::conj(std::vector<NodeId> kids) { return combine(Op::kAnd, std::move(kids)); }
Formula::NodeId Formula::disj(std::vector<NodeId> kids) { return combine(Op::kOr, std::move(kids)); }

Formula::NodeId Formula::negate(NodeId n) {
  auto it = negated_.find(n);
  if (it != negated_.end()) return it->second;
  NodeId out = 0;
  switch (nodes_[n].op) {
    case Op::kFalse:
      out = kTrueNode;
      break;
    case Op::kTrue:
      out = kFalseNode;
      break;
    case Op::kVar:
      out = make(Op::kNot, nodes_[n].var, {n});
      break;
    case Op::kNot:
      out = nodes_[n].kids.front();
      break;
    case Op::kAnd:
    case Op::kOr: {
      std::vector<NodeId> kids;
      for (NodeId k : std::vector<NodeId>(nodes_[n].kids)) kids.push_back(negate(k));
      out = nodes_[n].op == Op::kAnd ? disj(std::move(kids)) : conj(std::move(kids));
      break;
    }
  }
  negated_.emplace(n, out);
  negated_.emplace(out, n);
  return out;
}

bool Formula::evaluate(const std::vector<bool>& facts) const {
  // Nodes are created after their children, so index order is topological.
  std::vector<char> value(nodes_.size(), 0);
  for (std::size_t i = 0; i <= root_ && i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::kFalse:
        value[i] = 0;
        break;
      case Op::kTrue:
        value[i] = 1;
        break;
      case Op::kVar:
        if (n.var >= facts.size()) throw LabelError("formula variable without a truth value");
        value[i] = facts[n.var];
        break;
      case Op::kNot:
        value[i] = !value[n.kids.front()];
        break;
      case Op::kAnd:
        value[i] = 1;
        for (NodeId k : n.kids) value[i] = value[i] && value[k];
        break;
      case Op::kOr:
        value[i] = 0;
        for (NodeId k : n.kids) value[i] = value[i] || value[k];
        break;
    }
  }
  return value[root_];
}

std::vector<std::uint32_t> Formula::facts_in_order() const {
  std::vector<std::uint32_t> out;
  std::unordered_set<std::uint32_t> facts;
  std::vector<char> visited(nodes_.size(), 0);
  std::vector<std::pair<NodeId, std::size_t>> stack{{root_, 0}};
  visited[root_] = 1;
  while (!stack.empty()) {
    auto& [id, next] = stack.back();
    const Node& n = nodes_[id];
    if (next == 0 && (n.op == Op::kVar || n.op == Op::kNot)) {
      if (facts.insert(n.var).second) out.push_back(n.var);
      stack.pop_back();
      continue;
    }
    if (next < n.kids.size()) {
      NodeId k = n.kids[next++];
      if (!visited[k]) {
        visited[k] = 1;
        stack.emplace_back(k, 0);
      }
      continue;
    }
    stack.pop_back();
  }
  return out;
}

std::string Formula::to_string(const GroundProgram& gp) const {
  std::function<std::string(NodeId, bool)> show = [&](NodeId id, bool nested) -> std::string {
    const Node& n = nodes_[id];
    switch (n.op) {
      case Op::kFalse:
        return "false";
      case Op::kTrue:
        return "true";
      case Op::kVar:
        return dpl::to_string(gp.atoms[gp.facts[n.var].atom]);
      case Op::kNot:
        return "~" + show(n.kids.front(), true);
      case Op::kAnd:
      case Op::kOr: {
        std::string out = nested ? "(" : "";
        for (std::size_t k = 0; k < n.kids.size(); ++k) {
          if (k) out += n.op == Op::kAnd ? " & " : " | ";
          out += show(n.kids[k], true);
        }
        return nested ? out + ")" : out;
      }
    }
    return {};
  };
  return show(root_, false);
}

Formula build_formula(const GroundProgram& gp) {
  if (!gp.query_atom) {
    Formula f;
    f.set_root(Formula::kFalseNode);
    return f;
  }
  return build_formula(gp, *gp.query_atom);
}

Formula build_formula(const GroundProgram& gp, AtomId root) {
  for (const GroundItem& item : gp.order)
    if (item.kind == GroundItem::Kind::kAd)
      throw ProgramError("annotated disjunctions must be rewritten before building the formula");
  Formula f;
  std::vector<std::vector<std::uint32_t>> fact_defs(gp.atoms.size());
  std::vector<std::vector<std::size_t>> rule_defs(gp.atoms.size());
  for (std::size_t k = 0; k < gp.facts.size(); ++k)
    fact_defs[gp.facts[k].atom].push_back(static_cast<std::uint32_t>(k));
  for (std::size_t k = 0; k < gp.rules.size(); ++k) rule_defs[gp.rules[k].head].push_back(k);

  enum : char { kUnvisited, kActive, kDone };
  std::vector<char> state(gp.atoms.size(), kUnvisited);
  std::vector<Formula::NodeId> def(gp.atoms.size(), Formula::kFalseNode);
  std::function<Formula::NodeId(AtomId)> define = [&](AtomId a) -> Formula::NodeId {
    if (state[a] == kDone) return def[a];
    if (state[a] == kActive)
      throw CyclicProgramError("positive cycle through " + to_string(gp.atoms[a]));
    state[a] = kActive;
    std::vector<Formula::NodeId> alternatives;
    for (std::uint32_t fact : fact_defs[a]) alternatives.push_back(f.var(fact));
    for (std::size_t r : rule_defs[a]) {
      std::vector<Formula::NodeId> lits;
      for (const GroundLiteral& l : gp.rules[r].body) {
        Formula::NodeId d = define(l.atom);
        lits.push_back(l.negated ? f.negate(d) : d);
      }
      alternatives.push_back(f.conj(std::move(lits)));
    }
    def[a] = f.disj(std::move(alternatives));
    state[a] = kDone;
    return def[a];
  };
  f.set_root(define(root));
  return f;
}

}  // namespace dpl
