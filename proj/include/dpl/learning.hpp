#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpl/inference.hpp"
#include "dpl/neural.hpp"
#include "dpl/parser.hpp"

namespace dpl {

struct LossValue {
  double value = 0.0;
  /// dLoss/dP at the clamped P.
  double derivative = 0.0;
};

/// Cross-entropy between predicted P (clamped to [1e-12, 1-1e-12]) and target p.
LossValue cross_entropy(double predicted, double target);

struct TrainConfig {
  std::size_t epochs = 1;
  /// Examples per optimizer step; gradients are averaged over the window.
  std::size_t accumulation = 16;
  double logic_lr = 0.01;
  /// Linear warm-up of the logic learning rate from `logic_warmup_start`
  /// to `logic_lr` over this many epochs, advanced every step. 0 disables.
  double logic_warmup_epochs = 0.0;
  double logic_warmup_start = 0.0;
  std::uint64_t seed = 0;
  bool shuffle = true;
  /// Worker threads for grounding and evaluation within one window.
  std::size_t jobs = 1;
  QueryOptions query;
  /// Neural pruning threshold used only when evaluating.
  double eval_prune_below = 0.0;
};

/// Description of one neural model as read from a run config.
struct ModelSpec {
  std::string type = "mlp";
  std::vector<std::size_t> hidden;
  std::vector<InputField> inputs;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool seed_set = false;
  /// Table file for `table` models; server model name for `bridge` models.
  std::string source;
};

struct RunConfig {
  TrainConfig train;
  std::map<std::string, ModelSpec> models;
};

/// Reads `key = value` lines (`#` or `%` comments). Run keys: epochs,
/// accumulation, logic_lr, logic_warmup_start, logic_warmup_epochs, seed,
/// shuffle, jobs, eval_prune. Model keys: model.<name>.{type, hidden,
/// inputs, optimizer, lr, seed, source}.
RunConfig parse_run_config(std::string_view text);

/// Registers a model for every nAD model name of `program`. Output sizes
/// come from the nAD domains; input widths from the specs. `bridge` may be
/// null when no spec has type `bridge`. Models without a spec are an error.
void build_models(const Program& program, const RunConfig& config,
                  std::shared_ptr<const VectorTable> vectors, std::shared_ptr<BridgeProcess> bridge,
                  NeuralRuntime& runtime);

/// Per-example result of the gradient pipeline.
struct ExampleGradient {
  double probability = 0.0;
  LossValue loss;
  /// dLoss/dtheta for the logic parameters.
  std::vector<double> logic;
  struct Neural {
    Symbol model = 0;
    std::vector<Term> inputs;
    /// dLoss/d(model output).
    std::vector<double> grad;
  };
  std::vector<Neural> neural;
};

/// Grounds, compiles and differentiates one example.
ExampleGradient example_gradient(const Program& program, const QueryExample& example,
                                 const ParameterStore& store, NeuralRuntime& runtime,
                                 const QueryOptions& options = {});

struct Evaluation {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
};

/// Accuracy over groups of examples that agree on everything but the last
/// argument of the query. A group's labeled answer is its highest-target
/// example. Groups of several examples predict the candidate with the
/// highest probability. A single example is answered by an open query over
/// its last argument when `open` is set, else judged by P > 0.5 against
/// target > 0.5. With neural pruning, probabilities of negation-free
/// programs are lower bounds: a single example or open-query winner then
/// only counts when its bound exceeds 0.5, which makes it the exact winner.
Evaluation evaluate_accuracy(const Program& program, const std::vector<QueryExample>& dataset,
                             const ParameterStore& store, NeuralRuntime& runtime,
                             const TrainConfig& config, bool open);

struct EpochReport {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<Evaluation> eval;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochReport> epochs;
  /// `epoch,loss,accuracy,macro_f1` rows; `seconds` appended when timing.
  std::string to_csv(bool timing) const;
};

/// Called after every epoch; returning false stops training.
using EpochCallback = std::function<bool(const EpochReport&)>;

/// Learning from entailment by gradient descent. `test`, when given, is
/// evaluated after every epoch.
TrainReport train(const Program& program, const std::vector<QueryExample>& data,
                  const std::vector<QueryExample>* test, bool open_eval, const TrainConfig& config,
                  ParameterStore& store, NeuralRuntime& runtime, const EpochCallback& on_epoch = {});

}  // namespace dpl
