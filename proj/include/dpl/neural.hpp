#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpl/ground_program.hpp"
#include "dpl/parser.hpp"

namespace dpl {

/// A neural predicate's network, seen from the logic side.
class NeuralModel {
 public:
  virtual ~NeuralModel() = default;
  virtual std::size_t output_size() const = 0;
  /// Normalized distribution over the model's outputs.
  virtual std::vector<double> forward(std::span<const Term> inputs) = 0;
  /// Accumulates parameter gradients given dLoss/dOutput. Requires a
  /// forward pass on the same inputs since the last step.
  virtual void backward(std::span<const Term> inputs, std::span<const double> grad) = 0;
  /// Applies and clears accumulated gradients.
  virtual void step() = 0;
  virtual bool trainable() const { return true; }
  /// Drops activations kept for backward.
  virtual void clear_cache() {}
};

/// How ground input terms become numbers.
struct InputField {
  enum class Kind : std::uint8_t {
    /// Constant looked up in the vectors table.
    kVector,
    /// Integer 0..width-1 as a one-hot vector.
    kOneHot,
    /// Sent to a bridge as its printed text.
    kSymbol,
    /// Vector when the constant has one, text otherwise (bridge only).
    kAuto,
  };
  Kind kind = Kind::kVector;
  std::size_t width = 0;
};

/// Parses `vector:16`, `onehot:10`, `symbol` or `auto`.
InputField parse_input_field(const std::string& text);

class InputEncoder {
 public:
  InputEncoder() = default;
  InputEncoder(std::vector<InputField> fields, std::shared_ptr<const VectorTable> vectors);
  /// Total numeric width; only meaningful without symbol/auto fields.
  std::size_t width() const;
  std::vector<double> encode(std::span<const Term> inputs) const;
  /// Encoding of input `k` alone.
  std::vector<double> encode_field(std::size_t k, const Term& t) const;
  const std::vector<InputField>& fields() const { return fields_; }
  const VectorTable* vectors() const { return vectors_.get(); }

 private:
  std::vector<InputField> fields_;
  std::shared_ptr<const VectorTable> vectors_;
};

enum class OptimizerKind : std::uint8_t { kAdam, kSgd };

struct MlpConfig {
  /// Layer widths: input, hidden..., output.
  std::vector<std::size_t> layers;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// All weights zero (uniform output); for tests.
  bool zero_init = false;
};

/// Fully connected ReLU network with a softmax output.
class MlpModel : public NeuralModel {
 public:
  MlpModel(InputEncoder encoder, MlpConfig config);

  std::size_t output_size() const override { return config_.layers.back(); }
  std::vector<double> forward(std::span<const Term> inputs) override;
  void backward(std::span<const Term> inputs, std::span<const double> grad) override;
  void step() override;
  void clear_cache() override;

  /// Uncached forward pass on a raw input vector.
  std::vector<double> forward_vector(std::span<const double> x) const;
  /// Gradient of sum_k grad_k * out_k with respect to every parameter.
  std::vector<double> parameter_gradient(std::span<const double> x, std::span<const double> grad) const;

  std::size_t parameter_count() const { return params_.size(); }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  const std::vector<double>& accumulated_gradient() const { return grads_; }
  const MlpConfig& config() const { return config_; }
  const InputEncoder& encoder() const { return encoder_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  /// Offsets of layer `l`'s weight matrix (out x in, row-major) and bias.
  std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
  std::size_t bias_offset(std::size_t l) const {
    return offsets_[l] + config_.layers[l] * config_.layers[l + 1];
  }

 private:
  struct Activations {
    std::vector<std::vector<double>> layer;
  };
  Activations run(std::span<const double> x) const;
  void accumulate(const Activations& act, std::span<const double> grad, std::vector<double>& into) const;

  InputEncoder encoder_;
  MlpConfig config_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  std::vector<double> grads_;
  std::vector<double> adam_m_;
  std::vector<double> adam_v_;
  std::uint64_t steps_ = 0;
  std::unordered_map<std::string, Activations> cache_;
};

/// Fixed distributions keyed by printed input tuple; not trainable.
class TableModel : public NeuralModel {
 public:
  explicit TableModel(std::size_t outputs) : outputs_(outputs) {}
  void set(const std::string& inputs, std::vector<double> distribution);
  std::size_t output_size() const override { return outputs_; }
  std::vector<double> forward(std::span<const Term> inputs) override;
  void backward(std::span<const Term>, std::span<const double>) override {}
  void step() override {}
  bool trainable() const override { return false; }

 private:
  std::size_t outputs_;
  std::map<std::string, std::vector<double>> table_;
};

/// `a,b,c` rendering of an input tuple, used as a cache and table key.
std::string inputs_key(std::span<const Term> inputs);

/// Parses a models file: `model(in1,...,ink) p1 ... pn` per line, `%`
/// comments. Returns one TableModel per model name.
std::map<Symbol, std::shared_ptr<TableModel>> parse_model_tables(std::string_view text);

/// Registry of models; the grounder's distribution provider.
///
/// Thread-safe: every call takes the runtime lock, so forward passes from
/// parallel groundings are serialized.
class NeuralRuntime : public DistributionProvider {
 public:
  void add(Symbol model, std::shared_ptr<NeuralModel> m);
  bool has(Symbol model) const;
  std::shared_ptr<NeuralModel> get(Symbol model) const;
  std::vector<Symbol> models() const;

  std::vector<double> distribution(Symbol model, std::span<const Term> inputs,
                                   std::size_t domain_size) override;
  void backward(Symbol model, std::span<const Term> inputs, std::span<const double> grad);
  /// Steps every trainable model and drops cached outputs.
  void step();
  /// Drops cached outputs and model activations without stepping.
  void clear_cache();
  /// Forward passes actually issued to models (cache misses).
  std::size_t forward_calls() const;

 private:
  mutable std::mutex mutex_;
  std::map<Symbol, std::shared_ptr<NeuralModel>> models_;
  std::unordered_map<std::string, std::vector<double>> cache_;
  std::size_t forward_calls_ = 0;
};

/// External model server speaking newline-delimited JSON on stdio.
class BridgeProcess {
 public:
  /// Spawns `/bin/sh -c command` and performs the version handshake.
  explicit BridgeProcess(const std::string& command, int timeout_ms = 60000);
  ~BridgeProcess();
  BridgeProcess(const BridgeProcess&) = delete;
  BridgeProcess& operator=(const BridgeProcess&) = delete;

  /// Sends one JSON line and returns the parsed reply line. Throws
  /// BridgeError on transport failure, malformed JSON or an error reply.
  std::string call(const std::string& request_line);

 private:
  std::string read_line();
  /// Closes the pipes and reaps the child, killing it after two seconds.
  void shutdown();

  std::mutex mutex_;
  int to_child_ = -1;
  int from_child_ = -1;
  int pid_ = -1;
  int timeout_ms_;
  std::string buffer_;
};

/// A model served over the bridge.
class BridgeModel : public NeuralModel {
 public:
  BridgeModel(std::shared_ptr<BridgeProcess> process, std::string name, std::size_t outputs,
              InputEncoder encoder, double learning_rate);
  std::size_t output_size() const override { return outputs_; }
  std::vector<double> forward(std::span<const Term> inputs) override;
  void backward(std::span<const Term> inputs, std::span<const double> grad) override;
  void step() override;

 private:
  std::string inputs_json(std::span<const Term> inputs) const;

  std::shared_ptr<BridgeProcess> process_;
  std::string name_;
  std::size_t outputs_;
  InputEncoder encoder_;
  double learning_rate_;
};

}  // namespace dpl
