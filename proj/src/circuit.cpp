#include "dpl/circuit.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_set>

namespace dpl {

namespace {

DecisionVar var_of_fact(const GroundProgram& gp, std::size_t fact) {
  const GroundFact& f = gp.facts[fact];
  if (f.source == LabelSource::kNeural)
    return {DecisionVar::Kind::kGroup, f.group, gp.groups[f.group].facts.size()};
  return {DecisionVar::Kind::kFact, fact, 2};
}

struct VarHash {
  std::size_t operator()(const DecisionVar& v) const noexcept {
    return v.index * 2 + static_cast<std::size_t>(v.kind);
  }
};

class Builder {
 public:
  Builder(VariableOrder vars, std::size_t budget) : vars_(std::move(vars)), budget_(budget) {
    std::uint32_t term = static_cast<std::uint32_t>(vars_.size());
    nodes_.push_back({term, {}});
    nodes_.push_back({term, {}});
    for (std::size_t l = 0; l < vars_.size(); ++l) level_of_.emplace(vars_[l], l);
  }

  std::uint32_t level(const DecisionVar& v) const { return static_cast<std::uint32_t>(level_of_.at(v)); }

  Circuit::NodeId make(std::uint32_t level, std::vector<Circuit::NodeId> kids) {
    bool same = true;
    for (Circuit::NodeId k : kids) same = same && k == kids.front();
    if (same) return kids.front();
    Circuit::Node n{level, std::move(kids)};
    auto it = unique_.find(n);
    if (it != unique_.end()) return it->second;
    if (nodes_.size() >= budget_)
      throw CompilationBudgetError("decision diagram exceeds the node budget of " +
                                   std::to_string(budget_));
    auto id = static_cast<Circuit::NodeId>(nodes_.size());
    unique_.emplace(n, id);
    nodes_.push_back(std::move(n));
    return id;
  }

  Circuit::NodeId literal(const DecisionVar& v, std::size_t value) {
    std::vector<Circuit::NodeId> kids(v.arity, Circuit::kFalse);
    kids[value] = Circuit::kTrue;
    return make(level(v), std::move(kids));
  }

  Circuit::NodeId negate(Circuit::NodeId u) {
    if (u == Circuit::kFalse) return Circuit::kTrue;
    if (u == Circuit::kTrue) return Circuit::kFalse;
    auto it = not_cache_.find(u);
    if (it != not_cache_.end()) return it->second;
    std::vector<Circuit::NodeId> kids = nodes_[u].kids;
    for (auto& k : kids) k = negate(k);
    Circuit::NodeId r = make(nodes_[u].level, std::move(kids));
    not_cache_.emplace(u, r);
    return r;
  }

  Circuit::NodeId apply(bool conj, Circuit::NodeId u, Circuit::NodeId v) {
    const Circuit::NodeId absorbing = conj ? Circuit::kFalse : Circuit::kTrue;
    const Circuit::NodeId neutral = conj ? Circuit::kTrue : Circuit::kFalse;
    if (u == absorbing || v == absorbing) return absorbing;
    if (u == neutral) return v;
    if (v == neutral || u == v) return u;
    if (u > v) std::swap(u, v);
    std::uint64_t key = (std::uint64_t{conj} << 63) | (std::uint64_t{u} << 32) | v;
    auto it = apply_cache_.find(key);
    if (it != apply_cache_.end()) return it->second;
    std::uint32_t lu = nodes_[u].level;
    std::uint32_t lv = nodes_[v].level;
    std::uint32_t l = std::min(lu, lv);
    std::size_t arity = vars_[l].arity;
    std::vector<Circuit::NodeId> kids(arity);
    for (std::size_t k = 0; k < arity; ++k) {
      Circuit::NodeId a = lu == l ? nodes_[u].kids[k] : u;
      Circuit::NodeId b = lv == l ? nodes_[v].kids[k] : v;
      kids[k] = apply(conj, a, b);
    }
    Circuit::NodeId r = make(l, std::move(kids));
    apply_cache_.emplace(key, r);
    return r;
  }

  Circuit::NodeId reduce(bool conj, std::vector<Circuit::NodeId> items) {
    if (items.empty()) return conj ? Circuit::kTrue : Circuit::kFalse;
    // Balanced pairwise combination keeps intermediate diagrams small.
    while (items.size() > 1) {
      std::vector<Circuit::NodeId> next;
      next.reserve((items.size() + 1) / 2);
      for (std::size_t i = 0; i + 1 < items.size(); i += 2) next.push_back(apply(conj, items[i], items[i + 1]));
      if (items.size() % 2) next.push_back(items.back());
      items = std::move(next);
    }
    return items.front();
  }

  const std::vector<Circuit::Node>& nodes() const { return nodes_; }

 private:
  struct NodeHash {
    std::size_t operator()(const Circuit::Node& n) const noexcept {
      std::size_t h = n.level * 0x9e3779b97f4a7c15ull;
      for (auto k : n.kids) h = (h ^ k) * 0x100000001b3ull;
      return h;
    }
  };
  struct NodeEq {
    bool operator()(const Circuit::Node& a, const Circuit::Node& b) const noexcept {
      return a.level == b.level && a.kids == b.kids;
    }
  };

  VariableOrder vars_;
  std::size_t budget_;
  std::vector<Circuit::Node> nodes_;
  std::unordered_map<Circuit::Node, Circuit::NodeId, NodeHash, NodeEq> unique_;
  std::unordered_map<DecisionVar, std::size_t, VarHash> level_of_;
  std::unordered_map<Circuit::NodeId, Circuit::NodeId> not_cache_;
  std::unordered_map<std::uint64_t, Circuit::NodeId> apply_cache_;
};

}  // namespace

VariableOrder default_order(const Formula& f, const GroundProgram& gp) {
  VariableOrder out;
  std::unordered_set<DecisionVar, VarHash> seen;
  for (std::uint32_t fact : f.facts_in_order()) {
    DecisionVar v = var_of_fact(gp, fact);
    if (seen.insert(v).second) out.push_back(v);
  }
  return out;
}

Circuit compile(const Formula& f, const GroundProgram& gp, const VariableOrder& order,
                std::size_t node_budget) {
  VariableOrder vars;
  std::unordered_set<DecisionVar, VarHash> seen;
  for (const DecisionVar& v : order)
    if (seen.insert(v).second) vars.push_back(v);
  for (const DecisionVar& v : default_order(f, gp))
    if (seen.insert(v).second) vars.push_back(v);

  Builder b(vars, node_budget + 2);
  // Translate reachable formula nodes bottom-up (formula ids are topological).
  std::vector<char> reachable(f.size(), 0);
  reachable[f.root()] = 1;
  for (std::size_t i = f.size(); i-- > 0;) {
    if (!reachable[i]) continue;
    for (auto k : f.node(static_cast<Formula::NodeId>(i)).kids) reachable[k] = 1;
  }
  std::vector<Circuit::NodeId> image(f.size(), Circuit::kFalse);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!reachable[i]) continue;
    const Formula::Node& n = f.node(static_cast<Formula::NodeId>(i));
    switch (n.op) {
      case Formula::Op::kFalse:
        image[i] = Circuit::kFalse;
        break;
      case Formula::Op::kTrue:
        image[i] = Circuit::kTrue;
        break;
      case Formula::Op::kVar: {
        const GroundFact& fact = gp.facts.at(n.var);
        DecisionVar v = var_of_fact(gp, n.var);
        image[i] = b.literal(v, fact.source == LabelSource::kNeural ? fact.output : 1);
        break;
      }
      case Formula::Op::kNot:
        image[i] = b.negate(image[n.kids.front()]);
        break;
      case Formula::Op::kAnd:
      case Formula::Op::kOr: {
        std::vector<Circuit::NodeId> items;
        items.reserve(n.kids.size());
        for (auto k : n.kids) items.push_back(image[k]);
        image[i] = b.reduce(n.op == Formula::Op::kAnd, std::move(items));
        break;
      }
    }
  }

  // Keep only nodes reachable from the root, renumbered bottom-up.
  Circuit c;
  c.vars_ = vars;
  const auto& nodes = b.nodes();
  Circuit::NodeId root = image[f.root()];
  std::vector<Circuit::NodeId> remap(nodes.size(), ~Circuit::NodeId{0});
  std::vector<char> live(nodes.size(), 0);
  live[root] = 1;
  for (std::size_t i = nodes.size(); i-- > 2;)
    if (live[i])
      for (auto k : nodes[i].kids) live[k] = 1;
  c.nodes_.push_back(nodes[0]);
  c.nodes_.push_back(nodes[1]);
  remap[0] = 0;
  remap[1] = 1;
  for (std::size_t i = 2; i < nodes.size(); ++i) {
    if (!live[i]) continue;
    Circuit::Node n = nodes[i];
    for (auto& k : n.kids) k = remap[k];
    remap[i] = static_cast<Circuit::NodeId>(c.nodes_.size());
    c.nodes_.push_back(std::move(n));
  }
  c.root_ = remap[root];
  return c;
}

Labels<ProbabilitySemiring> probability_labels(const Circuit& c, const GroundProgram& gp,
                                               const ParameterStore& store) {
  Labels<ProbabilitySemiring> out;
  for (const DecisionVar& v : c.variables()) {
    if (v.kind == DecisionVar::Kind::kFact) {
      double p = fact_probability(gp, v.index, store);
      out.push_back({1.0 - p, p});
    } else {
      out.push_back(gp.groups.at(v.index).distribution);
    }
  }
  return out;
}

Labels<GradientSemiring> gradient_labels(const Circuit& c, const GroundProgram& gp,
                                         const ParameterStore& store, const SlotLayout& layout) {
  Labels<GradientSemiring> out;
  for (const DecisionVar& v : c.variables()) {
    std::vector<GradientValue> row;
    if (v.kind == DecisionVar::Kind::kFact) {
      row.push_back(label(gp, v.index, false, store, layout));
      row.push_back(label(gp, v.index, true, store, layout));
    } else {
      for (std::size_t fact : gp.groups.at(v.index).facts) row.push_back(label(gp, fact, true, store, layout));
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string variable_name(const DecisionVar& v, const GroundProgram& gp) {
  if (v.kind == DecisionVar::Kind::kFact) return to_string(gp.atoms[gp.facts[v.index].atom]);
  const NeuralGroup& g = gp.groups[v.index];
  std::string out = symbol_name(g.model) + "(";
  for (std::size_t k = 0; k < g.inputs.size(); ++k) {
    if (k) out += ",";
    out += to_string(g.inputs[k]);
  }
  return out + ")";
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  return out;
}

std::string branch_label(const DecisionVar& v, const GroundProgram& gp, std::size_t k) {
  if (v.kind == DecisionVar::Kind::kFact) return k ? "1" : "0";
  const GroundFact& f = gp.facts[gp.groups[v.index].facts[k]];
  const Atom& a = gp.atoms[f.atom];
  Term t = a.as_term();
  // Shadowed neural atoms are wrapped as nn(atom); label with the value.
  if (symbol_name(a.predicate()) == "nn" && a.arity() == 1) t = a.args()[0];
  if (t.arity() == 0) return to_string(t);
  return to_string(t.args().back());
}

}  // namespace

std::string export_dot(const Circuit& c, const GroundProgram& gp,
                       const std::vector<std::string>* annotations) {
  std::ostringstream os;
  os << "digraph circuit {\n";
  auto note = [&](Circuit::NodeId id) {
    if (!annotations || id >= annotations->size() || (*annotations)[id].empty()) return std::string();
    return "\\n" + escape((*annotations)[id]);
  };
  std::vector<char> used(c.size(), 0);
  used[c.root()] = 1;
  for (std::size_t i = c.size(); i-- > 2;)
    if (used[i])
      for (auto k : c.node(static_cast<Circuit::NodeId>(i)).kids) used[k] = 1;
  for (Circuit::NodeId t : {Circuit::kFalse, Circuit::kTrue})
    if (used[t])
      os << "  n" << t << " [shape=box,label=\"" << (t ? "true" : "false") << note(t) << "\"];\n";
  for (std::size_t i = c.size(); i-- > 2;) {
    if (!used[i]) continue;
    const auto& n = c.node(static_cast<Circuit::NodeId>(i));
    const DecisionVar& v = c.variables()[n.level];
    os << "  n" << i << " [shape=ellipse,label=\"" << escape(variable_name(v, gp))
       << note(static_cast<Circuit::NodeId>(i)) << "\"];\n";
    for (std::size_t k = 0; k < n.kids.size(); ++k) {
      if (n.kids[k] == Circuit::kFalse && v.kind == DecisionVar::Kind::kGroup) continue;
      os << "  n" << i << " -> n" << n.kids[k] << " [label=\"" << escape(branch_label(v, gp, k)) << "\"";
      if (v.kind == DecisionVar::Kind::kFact && k == 0) os << ",style=dashed";
      os << "];\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace dpl
