#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "dpl/ground_program.hpp"
#include "dpl/semiring.hpp"

namespace dpl {

/// One assignment of every random choice of a ground program.
struct World {
  /// Truth of every fact, indexed like GroundProgram::facts. Neural facts
  /// are ignored here; their truth follows `groups`.
  std::vector<char> facts;
  /// Chosen output per neural group.
  std::vector<std::size_t> groups;
  /// Chosen head per ground AD still present in the order; heads.size()
  /// means no head was chosen.
  std::vector<std::size_t> ads;
};

/// Weight of a world: product of the probabilities of its choices.
double world_weight(const GroundProgram& gp, const World& w, const ParameterStore& store);

/// Truth of every atom in the least model of the world, negation evaluated
/// stratum by stratum. Throws OracleError when negation is not stratified.
std::vector<char> world_closure(const GroundProgram& gp, const World& w);

/// Calls `fn` on every world of nonzero weight. Throws OracleError when
/// there are more than 2^25 worlds.
void for_each_world(const GroundProgram& gp, const ParameterStore& store,
                    const std::function<void(const World&, double weight)>& fn);

/// Summed weight of the worlds whose least model contains `atom` (the
/// query atom by default; 0 when the query has no derivation).
double enumerate_probability(const GroundProgram& gp, const ParameterStore& store,
                             std::optional<AtomId> atom = std::nullopt);

/// Every ground instance of every clause by bottom-up saturation over
/// derivable atoms. Only for function-free programs without nADs whose
/// clause variables are bound by positive body literals.
GroundProgram ground_exhaustive(const Program& program, const Atom& query);

/// Central differences of `fn` at `params`.
std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& fn,
                                               const std::vector<double>& params, double h = 1e-6);

}  // namespace dpl
