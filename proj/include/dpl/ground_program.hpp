#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpl/program.hpp"

namespace dpl {

using AtomId = std::uint32_t;

/// Body literal of a ground rule, referring into GroundProgram::atoms.
struct GroundLiteral {
  AtomId atom = 0;
  bool negated = false;
  friend bool operator==(const GroundLiteral&, const GroundLiteral&) = default;
};

struct GroundRule {
  AtomId head = 0;
  std::vector<GroundLiteral> body;
};

/// Where a probabilistic fact's label comes from.
enum class LabelSource : std::uint8_t {
  kFixed,
  kLearnable,
  /// Output `output` of neural group `group`.
  kNeural,
  /// Chain fact `head` of ground AD `ad`, introduced by rewrite_ads.
  kChoice,
};

struct GroundFact {
  AtomId atom = 0;
  LabelSource source = LabelSource::kFixed;
  /// Fixed probability, or the initial value of a learnable parameter.
  double probability = 0.0;
  std::size_t parameter = 0;
  std::size_t group = 0;
  std::size_t output = 0;
  std::size_t ad = 0;
  std::size_t head = 0;
};

/// One ground nAD instance: n mutually exclusive neural facts.
struct NeuralGroup {
  Symbol model = 0;
  std::vector<Term> inputs;
  std::size_t nad = 0;
  /// Fact indices, one per domain value in domain order.
  std::vector<std::size_t> facts;
  /// Model output at grounding time.
  std::vector<double> distribution;
};

struct GroundAdHead {
  ProbSpec probability;
  AtomId atom = 0;
};

/// Ground instance of an annotated disjunction, before chain rewriting.
struct GroundAd {
  std::size_t source = 0;
  std::vector<GroundAdHead> heads;
  std::vector<GroundLiteral> body;
};

struct GroundItem {
  enum class Kind : std::uint8_t { kFact, kGroup, kAd, kRule };
  Kind kind;
  std::size_t index;
};

/// Query-relevant ground instantiation of a program.
struct GroundProgram {
  std::vector<Atom> atoms;
  std::vector<GroundFact> facts;
  std::vector<NeuralGroup> groups;
  std::vector<GroundAd> ads;
  std::vector<GroundRule> rules;
  /// Emission order of facts, groups, ADs and rules.
  std::vector<GroundItem> order;
  /// Learnable parameter count of the source program.
  std::size_t parameter_count = 0;
  Atom query;
  /// Set when the query has at least one derivation.
  std::optional<AtomId> query_atom;
  /// Every derivable instance of the query, in answer order.
  std::vector<AtomId> answers;

  /// Interns `a`, returning its id.
  AtomId atom_id(const Atom& a);
  std::optional<AtomId> find_atom(const Atom& a) const;

  std::size_t add_fact(GroundFact f);
  std::size_t add_rule(GroundRule r);

 private:
  std::unordered_map<Atom, AtomId, AtomHash> index_;
};

/// Ground program in the one-clause-per-line textual format.
std::string format_ground_program(const GroundProgram& gp);

/// Supplies neural output distributions while grounding.
class DistributionProvider {
 public:
  virtual ~DistributionProvider() = default;
  /// Distribution of length `domain_size` for `model` applied to `inputs`.
  virtual std::vector<double> distribution(Symbol model, std::span<const Term> inputs,
                                           std::size_t domain_size) = 0;
};

}  // namespace dpl
