#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dpl/errors.hpp"
#include "dpl/semiring.hpp"
#include "dpl/transform.hpp"

namespace dpl {

/// A decision variable: one binary fact, or one neural group as a single
/// multi-valued variable.
struct DecisionVar {
  enum class Kind : std::uint8_t { kFact, kGroup };
  Kind kind = Kind::kFact;
  std::size_t index = 0;
  /// Number of branches (2 for facts: false, true).
  std::size_t arity = 2;
  friend bool operator==(const DecisionVar&, const DecisionVar&) = default;
};

using VariableOrder = std::vector<DecisionVar>;

/// First-appearance order of the formula's variables.
VariableOrder default_order(const Formula& f, const GroundProgram& gp);

/// Reduced ordered multi-valued decision diagram.
///
/// Node 0 is FALSE and node 1 is TRUE; terminals sit at level
/// `variables().size()`. Every other node's children have smaller ids and
/// deeper levels, so ascending id order is a valid bottom-up schedule.
class Circuit {
 public:
  using NodeId = std::uint32_t;
  static constexpr NodeId kFalse = 0;
  static constexpr NodeId kTrue = 1;

  struct Node {
    std::uint32_t level = 0;
    std::vector<NodeId> kids;
  };

  const VariableOrder& variables() const { return vars_; }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t decision_nodes() const { return nodes_.size() - 2; }
  NodeId root() const { return root_; }
  std::uint32_t terminal_level() const { return static_cast<std::uint32_t>(vars_.size()); }

 private:
  friend Circuit compile(const Formula&, const GroundProgram&, const VariableOrder&, std::size_t);
  VariableOrder vars_;
  std::vector<Node> nodes_;
  NodeId root_ = kFalse;
};

/// Compiles `f`; variables missing from `order` follow in default order.
/// Throws CompilationBudgetError once more than `node_budget` nodes exist.
Circuit compile(const Formula& f, const GroundProgram& gp, const VariableOrder& order = {},
                std::size_t node_budget = 10'000'000);

/// Semiring labels indexed [level][branch].
template <class S>
using Labels = std::vector<std::vector<typename S::Value>>;

/// Value of every node, each smoothed down to its own level.
template <class S>
std::vector<typename S::Value> evaluate_nodes(const Circuit& c, const Labels<S>& labels, const S& s) {
  const std::size_t levels = c.variables().size();
  if (labels.size() != levels) throw LabelError("labels do not cover every circuit variable");
  for (std::size_t l = 0; l < levels; ++l)
    if (labels[l].size() != c.variables()[l].arity)
      throw LabelError("label count does not match variable arity at level " + std::to_string(l));
  // sum[l] is the oplus of level l's labels: the factor for a skipped level.
  std::vector<typename S::Value> sum;
  sum.reserve(levels);
  for (const auto& row : labels) {
    typename S::Value acc = s.zero();
    for (const auto& v : row) acc = s.plus(acc, v);
    sum.push_back(std::move(acc));
  }
  // skip(a, b) = otimes of sum[a..b-1], cached.
  std::unordered_map<std::uint64_t, typename S::Value> cache;
  auto skip = [&](std::uint32_t a, std::uint32_t b) -> typename S::Value {
    if (a >= b) return s.one();
    std::uint64_t key = (std::uint64_t{a} << 32) | b;
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    typename S::Value acc = sum[a];
    for (std::uint32_t l = a + 1; l < b; ++l) acc = s.times(acc, sum[l]);
    cache.emplace(key, acc);
    return acc;
  };
  std::vector<typename S::Value> value(c.size(), s.zero());
  value[Circuit::kTrue] = s.one();
  for (std::size_t id = 2; id < c.size(); ++id) {
    const auto& n = c.node(static_cast<Circuit::NodeId>(id));
    typename S::Value acc = s.zero();
    for (std::size_t k = 0; k < n.kids.size(); ++k) {
      Circuit::NodeId kid = n.kids[k];
      if (kid == Circuit::kFalse) continue;
      typename S::Value term = s.times(labels[n.level][k], value[kid]);
      std::uint32_t kid_level = c.node(kid).level;
      if (kid_level > n.level + 1) term = s.times(term, skip(n.level + 1, kid_level));
      acc = s.plus(acc, std::move(term));
    }
    value[id] = std::move(acc);
  }
  return value;
}

/// Semiring value of the circuit: oplus over models of otimes of labels.
template <class S>
typename S::Value evaluate(const Circuit& c, const Labels<S>& labels, const S& s) {
  std::vector<typename S::Value> value = evaluate_nodes(c, labels, s);
  Circuit::NodeId root = c.root();
  if (root == Circuit::kFalse) return s.zero();
  typename S::Value out = std::move(value[root]);
  std::uint32_t root_level = c.node(root).level;
  for (std::uint32_t l = 0; l < root_level; ++l) {
    typename S::Value row = s.zero();
    for (const auto& v : labels[l]) row = s.plus(row, v);
    out = s.times(row, out);
  }
  return out;
}

Labels<ProbabilitySemiring> probability_labels(const Circuit& c, const GroundProgram& gp,
                                               const ParameterStore& store);
Labels<GradientSemiring> gradient_labels(const Circuit& c, const GroundProgram& gp,
                                         const ParameterStore& store, const SlotLayout& layout);

/// Display name of a decision variable.
std::string variable_name(const DecisionVar& v, const GroundProgram& gp);

/// DOT digraph of the circuit; `annotations`, when given, is one extra
/// label line per node id.
std::string export_dot(const Circuit& c, const GroundProgram& gp,
                       const std::vector<std::string>* annotations = nullptr);

}  // namespace dpl
