#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dpl/parser.hpp"

namespace dpl {

/// Deterministic sampling helpers over the raw engine output, so datasets
/// do not depend on the standard library's distribution implementations.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  /// Index drawn from unnormalized weights.
  std::size_t categorical(const std::vector<double>& weights);

 private:
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Generated dataset of one task.
struct TaskData {
  std::string name;
  std::vector<QueryExample> train;
  std::vector<QueryExample> test;
  /// Feature vectors of the input constants, in `vector_order`.
  VectorTable vectors;
  std::vector<Symbol> vector_order;
  /// True class of every input constant (digit value, coin side, colour).
  std::map<std::string, std::string> latent;
  /// Generator statistics such as empirical urn frequencies.
  std::map<std::string, double> truth;
};

/// Ten 16-dimensional class prototypes drawn from N(0, 1).
std::vector<std::vector<double>> digit_prototypes(std::uint64_t seed);

struct DigitOptions {
  double noise = 0.1;
  std::uint64_t prototype_seed = 7;
};

/// addition(X,Y,Z) over fresh synthetic digit images.
TaskData gen_t1(std::size_t n_train, std::size_t n_test, std::uint64_t seed, const DigitOptions& digits = {});

/// multi_addition over numbers of `train_digits` and `test_digits` digits.
TaskData gen_t2(std::size_t n_train, std::size_t n_test, std::size_t train_digits, std::size_t test_digits,
                std::uint64_t seed, const DigitOptions& digits = {});

/// addition(L1,L2,[Carry|Digits]) over symbolic digit lists; test examples
/// of each length in `test_lengths`.
TaskData gen_t3(std::size_t n_train, std::size_t n_test, std::size_t train_length,
                const std::vector<std::size_t>& test_lengths, std::uint64_t seed);

/// sort(L,Sorted) over symbolic digit lists; training lengths are drawn
/// uniformly from [min_length, max_length].
TaskData gen_t4(std::size_t n_train, std::size_t n_test, std::size_t min_length, std::size_t max_length,
                const std::vector<std::size_t>& test_lengths, std::uint64_t seed);

struct CoinBallOptions {
  double heads = 0.4;
  std::vector<double> urn1 = {0.7, 0.3};       // red, blue
  std::vector<double> urn2 = {0.2, 0.5, 0.3};  // red, green, blue
  double colour_noise = 0.03;
  DigitOptions digits;
};

/// game(Coin,Ball1,Ball2,Outcome). Training lines carry the observed
/// outcome only; test lines list both outcomes with targets 1 and 0.
TaskData gen_t6(std::size_t n_train, std::size_t n_test, std::uint64_t seed, const CoinBallOptions& options = {});

/// Outcome of the coin-ball game for a coin side and two ball colours.
std::string coin_ball_outcome(const std::string& side, const std::string& c1, const std::string& c2);

/// `.queries` text: `atom target` per line.
std::string format_dataset(const std::vector<QueryExample>& data);

/// Writes <dir>/<name>.train.queries, .test.queries, .vectors (when the
/// task has vectors), .latent and .truth (when nonempty). Returns paths.
std::vector<std::string> write_task(const TaskData& data, const std::string& dir);

}  // namespace dpl
