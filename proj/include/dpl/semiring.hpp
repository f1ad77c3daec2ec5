#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dpl/ground_program.hpp"

namespace dpl {

struct ProbabilitySemiring {
  using Value = double;
  Value zero() const { return 0.0; }
  Value one() const { return 1.0; }
  Value plus(Value a, Value b) const { return a + b; }
  Value times(Value a, Value b) const { return a * b; }
};

/// (p, dp/dx) pair of the gradient semiring.
struct GradientValue {
  double p = 0.0;
  std::vector<double> g;
};

/// Componentwise sum. Throws SemiringError on a length mismatch.
GradientValue oplus(const GradientValue& a, const GradientValue& b);
/// Product rule: (a1 b1, b1 a2 + a1 b2).
GradientValue otimes(const GradientValue& a, const GradientValue& b);

class GradientSemiring {
 public:
  using Value = GradientValue;
  explicit GradientSemiring(std::size_t dimension) : n_(dimension) {}
  Value zero() const { return {0.0, std::vector<double>(n_, 0.0)}; }
  Value one() const { return {1.0, std::vector<double>(n_, 0.0)}; }
  Value plus(const Value& a, const Value& b) const { return oplus(a, b); }
  Value times(const Value& a, const Value& b) const { return otimes(a, b); }
  std::size_t dimension() const { return n_; }

 private:
  std::size_t n_;
};

/// Current values of the learnable logic parameters.
class ParameterStore {
 public:
  ParameterStore() = default;
  explicit ParameterStore(const Program& program);

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_.at(i); }
  std::size_t size() const { return values_.size(); }
  const std::vector<ParameterGroup>& groups() const { return groups_; }

  /// Clips every value to [eps, 1-eps]; normalized groups are then
  /// rescaled to sum to 1 while staying inside the box.
  void project(double eps = 1e-6);

  /// One line per group: `group <k> <v1> ... <vn>  % labels`.
  std::string to_text() const;
  /// Reads the format of to_text; the group structure must match.
  void load_text(std::string_view text);

 private:
  std::vector<double> values_;
  std::vector<ParameterGroup> groups_;
};

/// Gradient coordinates of one grounding: logic parameters first, then one
/// slot per output of every neural group.
struct SlotLayout {
  std::size_t logic = 0;
  std::vector<std::size_t> group_offset;
  std::size_t size = 0;

  static SlotLayout of(const GroundProgram& gp);
  std::size_t slot(std::size_t group, std::size_t output) const { return group_offset[group] + output; }
};

/// Probability that fact `fact` is true under `store`.
double fact_probability(const GroundProgram& gp, std::size_t fact, const ParameterStore& store);

/// Gradient-semiring label of a fact literal.
///
/// Fixed p: (p, 0). Learnable p_i: (p_i, e_i). Chain facts carry the
/// quotient-rule gradient of their chain probability. Neural value j < n of
/// a group: (m_j, e_j); the last value n is labeled (m_n, -sum_{j<n} e_j) so
/// the group's labels sum to the neutral element. A negative literal is
/// (1 - p, -grad p).
GradientValue label(const GroundProgram& gp, std::size_t fact, bool positive,
                    const ParameterStore& store, const SlotLayout& layout);

}  // namespace dpl
