#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dpl/circuit.hpp"
#include "dpl/grounder.hpp"
#include "dpl/semiring.hpp"
#include "dpl/transform.hpp"

namespace dpl {

struct QueryOptions {
  GroundOptions ground;
  std::size_t node_budget = 10'000'000;
  /// Variables named by atom (or `model(inputs)` for neural groups) that
  /// come first in the decision order.
  std::vector<std::string> order;
};

/// The pipeline up to a compiled circuit for one query.
struct CompiledQuery {
  /// Ground program after AD rewriting.
  GroundProgram program;
  Formula formula;
  Circuit circuit;
  SlotLayout layout;
};

CompiledQuery compile_query(const Program& program, const Atom& query, DistributionProvider* models,
                            const QueryOptions& options = {});

double probability(const CompiledQuery& q, const ParameterStore& store);
GradientValue gradient(const CompiledQuery& q, const ParameterStore& store);

struct AnswerProbability {
  Atom atom;
  double probability = 0.0;
};

/// Grounds a possibly non-ground query once and returns the probability of
/// each derivable instance, in answer order.
std::vector<AnswerProbability> answer_probabilities(const Program& program, const Atom& query,
                                                    DistributionProvider* models,
                                                    const ParameterStore& store,
                                                    const QueryOptions& options = {});

/// Maps variable names to decision variables of `gp`; throws ConfigError
/// for names that match no variable.
VariableOrder resolve_order(const std::vector<std::string>& names, const GroundProgram& gp);

/// Human-readable name of gradient coordinate `i` of `layout`.
std::string slot_name(const Program& program, const GroundProgram& gp, const SlotLayout& layout,
                      std::size_t i);

}  // namespace dpl
