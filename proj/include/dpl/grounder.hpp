#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "dpl/ground_program.hpp"

namespace dpl {

struct GroundOptions {
  /// Maximum nesting of calls before RecursionLimitError.
  std::size_t max_depth = 10000;
  /// Neural outcomes with probability below this are dropped. Zero keeps
  /// everything and grounding is exact; a positive value yields a lower
  /// bound on the query probability for negation-free programs.
  double neural_prune_below = 0.0;
};

/// Query-directed grounding by memoized SLD resolution.
///
/// The query may contain variables; `answers` then lists every derivable
/// instance and `query_atom` stays unset. `models` may be null when the program has no neural ADs reachable from
/// the query. Builtins are evaluated away; each distinct nAD input tuple
/// costs one `distribution` request.
GroundProgram ground(const Program& program, const Atom& query, DistributionProvider* models,
                     const GroundOptions& options = {});

bool is_builtin(const Atom& a);

/// Evaluates a builtin goal. Returns the bindings on success, nullopt on
/// failure. Throws InstantiationError, ZeroDivisorError or TypeError.
std::optional<Substitution> eval_builtin(const Atom& goal);

/// Integer value of an arithmetic expression over `+ - * // mod`.
std::int64_t eval_arithmetic(const Term& expr);

}  // namespace dpl
