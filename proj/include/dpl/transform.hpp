#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dpl/ground_program.hpp"

namespace dpl {

/// Replaces every ground AD by independent chain facts and deterministic
/// rules. Head i holds iff chain facts 1..i-1 are false and fact i is true;
/// when the heads' mass is 1 the last head needs no fact of its own.
GroundProgram rewrite_ads(const GroundProgram& gp);

/// Chain probability pi_i = p_i / (1 - sum_{j<i} p_j) and its sparse
/// gradient with respect to the learnable parameters of the AD.
struct ChoiceLabel {
  double value = 0.0;
  std::vector<std::pair<std::size_t, double>> gradient;
};
ChoiceLabel choice_label(const GroundAd& ad, std::size_t head, std::span<const double> parameters);

/// Hash-consed propositional formula in negation normal form.
///
/// A VAR refers to a fact index of the ground program; for neural facts it
/// reads "the group takes this value".
class Formula {
 public:
  enum class Op : std::uint8_t { kFalse, kTrue, kVar, kNot, kAnd, kOr };
  using NodeId = std::uint32_t;
  static constexpr NodeId kFalseNode = 0;
  static constexpr NodeId kTrueNode = 1;

  struct Node {
    Op op;
    std::uint32_t var = 0;
    std::vector<NodeId> kids;
  };

  Formula();

  NodeId var(std::uint32_t fact);
  NodeId negate(NodeId n);
  NodeId conj(std::vector<NodeId> kids);
  NodeId disj(std::vector<NodeId> kids);

  const Node& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  NodeId root() const { return root_; }
  void set_root(NodeId r) { root_ = r; }

  /// Truth value under an assignment indexed by fact.
  bool evaluate(const std::vector<bool>& facts) const;
  /// Facts in order of first appearance (depth-first, children in order).
  std::vector<std::uint32_t> facts_in_order() const;
  std::string to_string(const GroundProgram& gp) const;

 private:
  NodeId make(Op op, std::uint32_t var, std::vector<NodeId> kids);
  NodeId combine(Op op, std::vector<NodeId> kids);

  struct KeyHash {
    std::size_t operator()(const Node& n) const noexcept;
  };
  struct KeyEq {
    bool operator()(const Node& a, const Node& b) const noexcept {
      return a.op == b.op && a.var == b.var && a.kids == b.kids;
    }
  };

  std::vector<Node> nodes_;
  std::unordered_map<Node, NodeId, KeyHash, KeyEq> unique_;
  std::unordered_map<NodeId, NodeId> negated_;
  NodeId root_ = kFalseNode;
};

/// Clark completion of gp's query, unfolded down to fact variables.
/// Requires a program without ADs (see rewrite_ads) and no positive cycles.
Formula build_formula(const GroundProgram& gp);
/// Same, defining atom `root` instead of the query.
Formula build_formula(const GroundProgram& gp, AtomId root);

}  // namespace dpl
