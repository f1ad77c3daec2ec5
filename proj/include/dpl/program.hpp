#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dpl/term.hpp"

namespace dpl {

/// A probability annotation: fixed `p::` or learnable `t(p)::`.
struct ProbSpec {
  enum class Kind : std::uint8_t { kFixed, kLearnable };
  Kind kind = Kind::kFixed;
  /// Fixed probability, or the initial value of a learnable parameter.
  double value = 0.0;
  /// Parameter index; meaningful only for learnable specs.
  std::size_t parameter = 0;

  static ProbSpec fixed(double p) { return {Kind::kFixed, p, 0}; }
  static ProbSpec learnable(double init, std::size_t index) { return {Kind::kLearnable, init, index}; }
  bool is_learnable() const { return kind == Kind::kLearnable; }
  friend bool operator==(const ProbSpec&, const ProbSpec&) = default;
};

struct ProbabilisticFact {
  ProbSpec probability;
  Atom atom;
  /// Number of distinct variable ids used by `atom`.
  VarId variable_count = 0;
};

struct AdHead {
  ProbSpec probability;
  Atom atom;
};

/// `p1::h1; ...; pn::hn :- body.`
struct AnnotatedDisjunction {
  std::vector<AdHead> heads;
  std::vector<Literal> body;
  VarId variable_count = 0;
};

/// `nn(model, t1, ..., tk, [u1, ..., un]) :: q(t, u1); ...; q(t, un) :- body.`
struct NeuralAD {
  Symbol model = 0;
  std::vector<Term> inputs;
  std::vector<Term> domain;
  std::vector<Atom> heads;
  std::vector<Literal> body;
  VarId variable_count = 0;
};

/// Ordinary clause with its variable count (ids 0 .. count-1).
struct Rule {
  Clause clause;
  VarId variable_count = 0;
};

/// Learnable parameters that are renormalized together.
///
/// A group of size one is a single `t(p)::f` fact; it is only clipped.
struct ParameterGroup {
  std::vector<std::size_t> parameters;
  bool normalized = false;
  /// Display names of the annotated atoms, one per parameter.
  std::vector<std::string> labels;
};

/// Where a clause of the program came from, in source order.
struct ClauseRef {
  enum class Kind : std::uint8_t { kFact, kAd, kNad, kRule };
  Kind kind;
  std::size_t index;
};

/// Parsed DeepProbLog program.
struct Program {
  std::vector<ProbabilisticFact> facts;
  std::vector<AnnotatedDisjunction> ads;
  std::vector<NeuralAD> nads;
  std::vector<Rule> rules;
  std::vector<Atom> queries;

  /// Initial value of every learnable parameter, by index.
  std::vector<double> initial_parameters;
  std::vector<ParameterGroup> parameter_groups;
  /// Interleaved source order of facts, ADs, nADs and rules.
  std::vector<ClauseRef> order;

  std::size_t parameter_count() const { return initial_parameters.size(); }
  /// Index of the parameter group containing parameter `p`.
  std::size_t group_of(std::size_t p) const;
};

/// Prints `p` in the surface syntax accepted by `parse_program`.
std::string pretty_print(const Program& p);

/// `%.12g` rendering used for probabilities everywhere in the tool.
std::string format_probability(double p);

/// Structural identity; probabilities compared within `tolerance`.
bool structurally_equal(const Program& a, const Program& b, double tolerance = 1e-12);

}  // namespace dpl
