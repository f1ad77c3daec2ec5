#include "dpl/neural.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <random>
#include <sstream>
#include <thread>

#include "dpl/errors.hpp"

namespace dpl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Input encoding

InputField parse_input_field(const std::string& text) {
  auto colon = text.find(':');
  std::string kind = text.substr(0, colon);
  std::size_t width = 0;
  if (colon != std::string::npos) {
    try {
      width = std::stoul(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad input width in '" + text + "'");
    }
  }
  if (kind == "vector" && width > 0) return {InputField::Kind::kVector, width};
  if (kind == "onehot" && width > 0) return {InputField::Kind::kOneHot, width};
  if (kind == "symbol" && colon == std::string::npos) return {InputField::Kind::kSymbol, 0};
  if (kind == "auto" && colon == std::string::npos) return {InputField::Kind::kAuto, 0};
  throw ConfigError("unknown input encoding '" + text +
                    "' (expected vector:N, onehot:N, symbol or auto)");
}

InputEncoder::InputEncoder(std::vector<InputField> fields, std::shared_ptr<const VectorTable> vectors)
    : fields_(std::move(fields)), vectors_(std::move(vectors)) {}

std::size_t InputEncoder::width() const {
  std::size_t w = 0;
  for (const InputField& f : fields_) w += f.width;
  return w;
}

std::vector<double> InputEncoder::encode_field(std::size_t k, const Term& t) const {
  const InputField& f = fields_.at(k);
  switch (f.kind) {
    case InputField::Kind::kOneHot: {
      if (!t.is_integer() || t.integer_value() < 0 ||
          static_cast<std::size_t>(t.integer_value()) >= f.width)
        throw NeuralError("cannot one-hot encode " + to_string(t) + " in width " +
                          std::to_string(f.width));
      std::vector<double> out(f.width, 0.0);
      out[static_cast<std::size_t>(t.integer_value())] = 1.0;
      return out;
    }
    case InputField::Kind::kVector:
    case InputField::Kind::kAuto: {
      const std::vector<double>* v = nullptr;
      if (t.is_atom() && vectors_) {
        auto it = vectors_->find(t.symbol());
        if (it != vectors_->end()) v = &it->second;
      }
      if (!v) throw NeuralError("no feature vector for input " + to_string(t));
      if (f.kind == InputField::Kind::kVector && v->size() != f.width)
        throw NeuralError("feature vector of " + to_string(t) + " has " + std::to_string(v->size()) +
                          " entries, expected " + std::to_string(f.width));
      return *v;
    }
    case InputField::Kind::kSymbol:
      break;
  }
  throw NeuralError("input " + to_string(t) + " has a symbolic encoding");
}

std::vector<double> InputEncoder::encode(std::span<const Term> inputs) const {
  if (inputs.size() != fields_.size())
    throw NeuralError("model expects " + std::to_string(fields_.size()) + " inputs, got " +
                      std::to_string(inputs.size()));
  std::vector<double> out;
  out.reserve(width());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> part = encode_field(k, inputs[k]);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::string inputs_key(std::span<const Term> inputs) {
  std::string out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (k) out += ',';
    out += to_string(inputs[k]);
  }
  return out;
}

namespace {

void check_distribution(const std::vector<double>& d, const std::string& who) {
  double sum = 0.0;
  for (double p : d) {
    if (!(p >= 0.0 && p <= 1.0)) throw NeuralError(who + " produced a value outside [0,1]");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-6)
    throw NeuralError(who + " produced a distribution summing to " + std::to_string(sum));
}

/// Uniform double in [lo, hi) from the raw 64-bit engine output, so the
/// sequence does not depend on the standard library's distributions.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace

// ---------------------------------------------------------------------------
// MLP

MlpModel::MlpModel(InputEncoder encoder, MlpConfig config)
    : encoder_(std::move(encoder)), config_(std::move(config)) {
  if (config_.layers.size() < 2) throw ConfigError("an MLP needs at least input and output layers");
  for (std::size_t w : config_.layers)
    if (w == 0) throw ConfigError("MLP layer widths must be positive");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < config_.layers.size(); ++l) {
    offsets_.push_back(total);
    total += config_.layers[l] * config_.layers[l + 1] + config_.layers[l + 1];
  }
  params_.assign(total, 0.0);
  grads_.assign(total, 0.0);
  adam_m_.assign(total, 0.0);
  adam_v_.assign(total, 0.0);
  if (!config_.zero_init) {
    std::mt19937_64 rng(config_.seed);
    for (std::size_t l = 0; l + 1 < config_.layers.size(); ++l) {
      double bound = 1.0 / std::sqrt(static_cast<double>(config_.layers[l]));
      std::size_t n = config_.layers[l] * config_.layers[l + 1] + config_.layers[l + 1];
      for (std::size_t i = 0; i < n; ++i) params_[offsets_[l] + i] = uniform(rng, -bound, bound);
    }
  }
}

MlpModel::Activations MlpModel::run(std::span<const double> x) const {
  if (x.size() != config_.layers.front())
    throw NeuralError("MLP input has width " + std::to_string(x.size()) + ", expected " +
                      std::to_string(config_.layers.front()));
  Activations act;
  act.layer.emplace_back(x.begin(), x.end());
  const std::size_t last = config_.layers.size() - 2;
  for (std::size_t l = 0; l <= last; ++l) {
    const std::size_t in = config_.layers[l];
    const std::size_t out = config_.layers[l + 1];
    const double* w = &params_[weight_offset(l)];
    const double* b = &params_[bias_offset(l)];
    const std::vector<double>& a = act.layer.back();
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = s;
    }
    if (l < last) {
      for (double& v : z) v = std::max(v, 0.0);
    } else {
      double m = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double& v : z) {
        v = std::exp(v - m);
        sum += v;
      }
      for (double& v : z) v /= sum;
    }
    act.layer.push_back(std::move(z));
  }
  return act;
}

void MlpModel::accumulate(const Activations& act, std::span<const double> grad,
                          std::vector<double>& into) const {
  const std::vector<double>& p = act.layer.back();
  if (grad.size() != p.size())
    throw NeuralError("gradient has " + std::to_string(grad.size()) + " entries, model has " +
                      std::to_string(p.size()) + " outputs");
  // Softmax Jacobian: dL/dz_i = p_i (g_i - sum_j p_j g_j).
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * grad[i];
  std::vector<double> delta(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) delta[i] = p[i] * (grad[i] - dot);
  for (std::size_t l = config_.layers.size() - 1; l-- > 0;) {
    const std::size_t in = config_.layers[l];
    const std::size_t out = config_.layers[l + 1];
    const std::vector<double>& a = act.layer[l];
    double* gw = &into[weight_offset(l)];
    double* gb = &into[bias_offset(l)];
    for (std::size_t o = 0; o < out; ++o) {
      if (delta[o] == 0.0) continue;
      gb[o] += delta[o];
      double* row = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) row[i] += delta[o] * a[i];
    }
    if (l == 0) break;
    const double* w = &params_[weight_offset(l)];
    std::vector<double> prev(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      if (delta[o] == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
    }
    for (std::size_t i = 0; i < in; ++i)
      if (a[i] <= 0.0) prev[i] = 0.0;
    delta = std::move(prev);
  }
}

std::vector<double> MlpModel::forward(std::span<const Term> inputs) {
  std::string key = inputs_key(inputs);
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, run(encoder_.encode(inputs))).first;
  return it->second.layer.back();
}

void MlpModel::backward(std::span<const Term> inputs, std::span<const double> grad) {
  auto it = cache_.find(inputs_key(inputs));
  if (it == cache_.end())
    throw NeuralError("backward on " + inputs_key(inputs) + " without a cached forward pass");
  accumulate(it->second, grad, grads_);
}

std::vector<double> MlpModel::forward_vector(std::span<const double> x) const { return run(x).layer.back(); }

std::vector<double> MlpModel::parameter_gradient(std::span<const double> x,
                                                 std::span<const double> grad) const {
  std::vector<double> out(params_.size(), 0.0);
  accumulate(run(x), grad, out);
  return out;
}

void MlpModel::step() {
  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i] -= lr * grads_[i];
  } else {
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      double g = grads_[i];
      adam_m_[i] = config_.beta1 * adam_m_[i] + (1.0 - config_.beta1) * g;
      adam_v_[i] = config_.beta2 * adam_v_[i] + (1.0 - config_.beta2) * g * g;
      double mhat = adam_m_[i] / c1;
      double vhat = adam_v_[i] / c2;
      params_[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
  std::fill(grads_.begin(), grads_.end(), 0.0);
  cache_.clear();
}

void MlpModel::clear_cache() { cache_.clear(); }

// ---------------------------------------------------------------------------
// Tables

void TableModel::set(const std::string& inputs, std::vector<double> distribution) {
  if (distribution.size() != outputs_)
    throw ConfigError("table entry for " + inputs + " has " + std::to_string(distribution.size()) +
                      " values, expected " + std::to_string(outputs_));
  check_distribution(distribution, "table entry " + inputs);
  table_[inputs] = std::move(distribution);
}

std::vector<double> TableModel::forward(std::span<const Term> inputs) {
  auto it = table_.find(inputs_key(inputs));
  if (it == table_.end()) throw NeuralError("no table entry for inputs " + inputs_key(inputs));
  return it->second;
}

std::map<Symbol, std::shared_ptr<TableModel>> parse_model_tables(std::string_view text) {
  std::map<Symbol, std::shared_ptr<TableModel>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto pct = line.find('%');
    if (pct != std::string::npos) line.resize(pct);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto close = line.rfind(')');
    if (close == std::string::npos)
      throw ConfigError("models line " + std::to_string(line_no) + ": expected model(inputs)",
                        {line_no, 1});
    Term head;
    try {
      head = parse_term(line.substr(0, close + 1));
    } catch (const SyntaxError& e) {
      throw ConfigError("models line " + std::to_string(line_no) + ": " + e.what(), {line_no, 1});
    }
    if (!head.is_compound() || !head.ground())
      throw ConfigError("models line " + std::to_string(line_no) + ": expected ground model(inputs)",
                        {line_no, 1});
    std::istringstream rest(line.substr(close + 1));
    std::vector<double> dist;
    double v = 0.0;
    while (rest >> v) dist.push_back(v);
    if (dist.empty())
      throw ConfigError("models line " + std::to_string(line_no) + ": no probabilities", {line_no, 1});
    auto& model = out[head.symbol()];
    if (!model) model = std::make_shared<TableModel>(dist.size());
    model->set(inputs_key(head.args()), std::move(dist));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runtime

void NeuralRuntime::add(Symbol model, std::shared_ptr<NeuralModel> m) {
  std::lock_guard lock(mutex_);
  models_[model] = std::move(m);
  cache_.clear();
}

bool NeuralRuntime::has(Symbol model) const {
  std::lock_guard lock(mutex_);
  return models_.count(model) > 0;
}

std::shared_ptr<NeuralModel> NeuralRuntime::get(Symbol model) const {
  std::lock_guard lock(mutex_);
  auto it = models_.find(model);
  if (it == models_.end()) throw NeuralError("unknown neural model " + symbol_name(model));
  return it->second;
}

std::vector<Symbol> NeuralRuntime::models() const {
  std::lock_guard lock(mutex_);
  std::vector<Symbol> out;
  for (const auto& [k, v] : models_) out.push_back(k);
  return out;
}

std::vector<double> NeuralRuntime::distribution(Symbol model, std::span<const Term> inputs,
                                                std::size_t domain_size) {
  std::lock_guard lock(mutex_);
  auto it = models_.find(model);
  if (it == models_.end()) throw NeuralError("unknown neural model " + symbol_name(model));
  if (it->second->output_size() != domain_size)
    throw NeuralError("model " + symbol_name(model) + " has " +
                      std::to_string(it->second->output_size()) + " outputs, domain has " +
                      std::to_string(domain_size));
  std::string key = symbol_name(model) + "(" + inputs_key(inputs) + ")";
  auto hit = cache_.find(key);
  if (hit != cache_.end()) return hit->second;
  ++forward_calls_;
  std::vector<double> d = it->second->forward(inputs);
  if (d.size() != domain_size)
    throw NeuralError("model " + symbol_name(model) + " returned " + std::to_string(d.size()) +
                      " values for a domain of " + std::to_string(domain_size));
  check_distribution(d, "model " + symbol_name(model));
  cache_.emplace(std::move(key), d);
  return d;
}

void NeuralRuntime::backward(Symbol model, std::span<const Term> inputs, std::span<const double> grad) {
  std::lock_guard lock(mutex_);
  auto it = models_.find(model);
  if (it == models_.end()) throw NeuralError("unknown neural model " + symbol_name(model));
  it->second->backward(inputs, grad);
}

void NeuralRuntime::step() {
  std::lock_guard lock(mutex_);
  for (auto& [k, m] : models_)
    if (m->trainable()) m->step();
  cache_.clear();
}

void NeuralRuntime::clear_cache() {
  std::lock_guard lock(mutex_);
  for (auto& [k, m] : models_) m->clear_cache();
  cache_.clear();
}

std::size_t NeuralRuntime::forward_calls() const {
  std::lock_guard lock(mutex_);
  return forward_calls_;
}

// ---------------------------------------------------------------------------
// Bridge

BridgeProcess::BridgeProcess(const std::string& command, int timeout_ms) : timeout_ms_(timeout_ms) {
  // A dead server must surface as a BridgeError, not kill us on write.
  ::signal(SIGPIPE, SIG_IGN);
  int down[2];
  int up[2];
  if (::pipe(down) != 0) throw BridgeError(std::string("pipe: ") + std::strerror(errno));
  if (::pipe(up) != 0) {
    ::close(down[0]);
    ::close(down[1]);
    throw BridgeError(std::string("pipe: ") + std::strerror(errno));
  }
  pid_t pid = ::fork();
  if (pid < 0) throw BridgeError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(down[0], STDIN_FILENO);
    ::dup2(up[1], STDOUT_FILENO);
    ::close(down[0]);
    ::close(down[1]);
    ::close(up[0]);
    ::close(up[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(down[0]);
  ::close(up[1]);
  to_child_ = down[1];
  from_child_ = up[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  json reply;
  try {
    reply = json::parse(call(json{{"op", "hello"}, {"version", 1}}.dump()));
  } catch (...) {
    shutdown();
    throw;
  }
  if (!reply.contains("version") || reply["version"] != 1) {
    shutdown();
    throw BridgeError("protocol version mismatch: server replied " + reply.dump());
  }
}

BridgeProcess::~BridgeProcess() { shutdown(); }

void BridgeProcess::shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 200; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string BridgeProcess::read_line() {
  for (;;) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    pollfd p{from_child_, POLLIN, 0};
    int r = ::poll(&p, 1, timeout_ms_);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) throw BridgeError(r == 0 ? "bridge server timed out" : "poll failed on bridge");
    char buf[65536];
    ssize_t n = ::read(from_child_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw BridgeError("bridge server closed its output");
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

std::string BridgeProcess::call(const std::string& request_line) {
  std::lock_guard lock(mutex_);
  if (to_child_ < 0) throw BridgeError("bridge server is not running");
  std::string out = request_line + "\n";
  std::size_t done = 0;
  while (done < out.size()) {
    ssize_t n = ::write(to_child_, out.data() + done, out.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw BridgeError(std::string("cannot write to bridge server: ") + std::strerror(errno));
    done += static_cast<std::size_t>(n);
  }
  std::string line = read_line();
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::parse_error&) {
    throw BridgeError("malformed reply from bridge server: " + line.substr(0, 200));
  }
  if (!reply.is_object()) throw BridgeError("malformed reply from bridge server: " + line.substr(0, 200));
  if (reply.contains("error")) throw BridgeError("bridge server error: " + reply["error"].dump());
  return line;
}

BridgeModel::BridgeModel(std::shared_ptr<BridgeProcess> process, std::string name, std::size_t outputs,
                         InputEncoder encoder, double learning_rate)
    : process_(std::move(process)),
      name_(std::move(name)),
      outputs_(outputs),
      encoder_(std::move(encoder)),
      learning_rate_(learning_rate) {}

std::string BridgeModel::inputs_json(std::span<const Term> inputs) const {
  json arr = json::array();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    InputField::Kind kind =
        k < encoder_.fields().size() ? encoder_.fields()[k].kind : InputField::Kind::kAuto;
    bool numeric = kind == InputField::Kind::kVector || kind == InputField::Kind::kOneHot;
    if (kind == InputField::Kind::kAuto && inputs[k].is_atom() && encoder_.vectors())
      numeric = encoder_.vectors()->count(inputs[k].symbol()) > 0;
    if (numeric && k < encoder_.fields().size()) {
      arr.push_back(encoder_.encode_field(k, inputs[k]));
    } else if (numeric) {
      arr.push_back(encoder_.vectors()->at(inputs[k].symbol()));
    } else {
      arr.push_back(to_string(inputs[k]));
    }
  }
  return arr.dump();
}

std::vector<double> BridgeModel::forward(std::span<const Term> inputs) {
  std::string req = R"({"op":"forward","model":)" + json(name_).dump() + R"(,"inputs":)" +
                    inputs_json(inputs) + "}";
  json reply = json::parse(process_->call(req));
  if (!reply.contains("dist") || !reply["dist"].is_array())
    throw BridgeError("forward reply lacks a dist array: " + reply.dump());
  std::vector<double> d;
  for (const auto& x : reply["dist"]) {
    if (!x.is_number()) throw BridgeError("non-numeric entry in dist: " + reply.dump());
    d.push_back(x.get<double>());
  }
  if (d.size() != outputs_)
    throw BridgeError("model " + name_ + " returned " + std::to_string(d.size()) + " values, expected " +
                      std::to_string(outputs_));
  return d;
}

void BridgeModel::backward(std::span<const Term> inputs, std::span<const double> grad) {
  json g(std::vector<double>(grad.begin(), grad.end()));
  std::string req = R"({"op":"backward","model":)" + json(name_).dump() + R"(,"inputs":)" +
                    inputs_json(inputs) + R"(,"grad":)" + g.dump() + "}";
  json reply = json::parse(process_->call(req));
  if (!reply.contains("ok")) throw BridgeError("backward reply lacks ok: " + reply.dump());
}

void BridgeModel::step() {
  json req{{"op", "step"}, {"model", name_}, {"lr", learning_rate_}};
  json reply = json::parse(process_->call(req.dump()));
  if (!reply.contains("ok")) throw BridgeError("step reply lacks ok: " + reply.dump());
}

}  // namespace dpl
