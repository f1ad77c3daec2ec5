#include "dpl/learning.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "dpl/errors.hpp"

namespace dpl {

LossValue cross_entropy(double predicted, double target) {
  constexpr double kEps = 1e-12;
  double p = std::clamp(predicted, kEps, 1.0 - kEps);
  return {-(target * std::log(p) + (1.0 - target) * std::log(1.0 - p)),
          -target / p + (1.0 - target) / (1.0 - p)};
}

// ---------------------------------------------------------------------------
// Config

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v, int line) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'", {line, 1});
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v, int line) {
  try {
    std::size_t used = 0;
    unsigned long long n = std::stoull(v, &used);
    if (used == v.size() && v.front() != '-') return n;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'", {line, 1});
}

bool to_bool(const std::string& key, const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'", {line, 1});
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  TrainConfig& t = cfg.train;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto cut = line.find_first_of("#%");
    if (cut != std::string::npos) line.resize(cut);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", {line_no, 1});
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.rfind("model.", 0) == 0) {
      auto dot = key.find('.', 6);
      if (dot == std::string::npos || dot == 6)
        throw ConfigError("expected model.<name>.<field>, got " + key, {line_no, 1});
      ModelSpec& m = cfg.models[key.substr(6, dot - 6)];
      std::string field = key.substr(dot + 1);
      if (field == "type") {
        if (value != "mlp" && value != "table" && value != "bridge")
          throw ConfigError(key + ": expected mlp, table or bridge", {line_no, 1});
        m.type = value;
      } else if (field == "hidden") {
        m.hidden.clear();
        for (const std::string& w : split_commas(value)) {
          std::uint64_t n = to_unsigned(key, w, line_no);
          if (n == 0) throw ConfigError(key + ": layer widths must be positive", {line_no, 1});
          m.hidden.push_back(static_cast<std::size_t>(n));
        }
      } else if (field == "inputs") {
        m.inputs.clear();
        for (const std::string& f : split_commas(value)) m.inputs.push_back(parse_input_field(f));
      } else if (field == "optimizer") {
        if (value == "adam") {
          m.optimizer = OptimizerKind::kAdam;
        } else if (value == "sgd") {
          m.optimizer = OptimizerKind::kSgd;
        } else {
          throw ConfigError(key + ": expected adam or sgd", {line_no, 1});
        }
      } else if (field == "lr") {
        m.lr = to_double(key, value, line_no);
        if (!(m.lr > 0.0)) throw ConfigError(key + ": learning rate must be positive", {line_no, 1});
      } else if (field == "seed") {
        m.seed = to_unsigned(key, value, line_no);
        m.seed_set = true;
      } else if (field == "source") {
        m.source = value;
      } else {
        throw ConfigError("unknown model field " + field, {line_no, 1});
      }
    } else if (key == "epochs") {
      t.epochs = to_unsigned(key, value, line_no);
    } else if (key == "accumulation") {
      t.accumulation = to_unsigned(key, value, line_no);
      if (t.accumulation == 0) throw ConfigError("accumulation must be at least 1", {line_no, 1});
    } else if (key == "logic_lr") {
      t.logic_lr = to_double(key, value, line_no);
      if (!(t.logic_lr > 0.0)) throw ConfigError("logic_lr must be positive", {line_no, 1});
    } else if (key == "logic_warmup_start") {
      t.logic_warmup_start = to_double(key, value, line_no);
      if (!(t.logic_warmup_start > 0.0))
        throw ConfigError("logic_warmup_start must be positive", {line_no, 1});
    } else if (key == "logic_warmup_epochs") {
      t.logic_warmup_epochs = to_double(key, value, line_no);
      if (t.logic_warmup_epochs < 0.0)
        throw ConfigError("logic_warmup_epochs must be non-negative", {line_no, 1});
    } else if (key == "seed") {
      t.seed = to_unsigned(key, value, line_no);
    } else if (key == "shuffle") {
      t.shuffle = to_bool(key, value, line_no);
    } else if (key == "jobs") {
      t.jobs = std::max<std::uint64_t>(1, to_unsigned(key, value, line_no));
    } else if (key == "eval_prune") {
      t.eval_prune_below = to_double(key, value, line_no);
      if (t.eval_prune_below < 0.0 || t.eval_prune_below >= 1.0)
        throw ConfigError("eval_prune must be in [0,1)", {line_no, 1});
    } else if (key == "node_budget") {
      t.query.node_budget = to_unsigned(key, value, line_no);
    } else {
      throw ConfigError("unknown config key " + key, {line_no, 1});
    }
  }
  return cfg;
}

void build_models(const Program& program, const RunConfig& config,
                  std::shared_ptr<const VectorTable> vectors, std::shared_ptr<BridgeProcess> bridge,
                  NeuralRuntime& runtime) {
  std::map<Symbol, std::pair<std::size_t, std::size_t>> shape;  // outputs, inputs
  for (const NeuralAD& nad : program.nads) {
    auto [it, fresh] = shape.emplace(nad.model, std::make_pair(nad.domain.size(), nad.inputs.size()));
    if (!fresh && it->second != std::make_pair(nad.domain.size(), nad.inputs.size()))
      throw ConfigError("model " + symbol_name(nad.model) + " is used with different shapes");
  }
  std::map<std::string, std::shared_ptr<TableModel>> tables_by_file;
  for (const auto& [model, dims] : shape) {
    if (runtime.has(model)) continue;
    const std::string& name = symbol_name(model);
    auto spec_it = config.models.find(name);
    if (spec_it == config.models.end()) throw ConfigError("no configuration for neural model " + name);
    const ModelSpec& spec = spec_it->second;
    const auto [outputs, arity] = dims;
    if (spec.type == "mlp") {
      if (spec.inputs.size() != arity)
        throw ConfigError("model " + name + " takes " + std::to_string(arity) + " inputs but " +
                          std::to_string(spec.inputs.size()) + " encodings are configured");
      for (const InputField& f : spec.inputs)
        if (f.kind == InputField::Kind::kSymbol || f.kind == InputField::Kind::kAuto)
          throw ConfigError("model " + name + ": built-in networks need vector or onehot inputs");
      InputEncoder enc(spec.inputs, vectors);
      MlpConfig mc;
      mc.layers.push_back(enc.width());
      mc.layers.insert(mc.layers.end(), spec.hidden.begin(), spec.hidden.end());
      mc.layers.push_back(outputs);
      mc.optimizer = spec.optimizer;
      mc.learning_rate = spec.lr;
      mc.seed = spec.seed_set ? spec.seed : config.train.seed ^ fnv1a(name);
      runtime.add(model, std::make_shared<MlpModel>(std::move(enc), std::move(mc)));
    } else if (spec.type == "table") {
      if (spec.source.empty()) throw ConfigError("model " + name + ": table models need a source file");
      auto tables = parse_model_tables(slurp(spec.source));
      auto t = tables.find(model);
      if (t == tables.end()) throw ConfigError(spec.source + " has no entries for model " + name);
      if (t->second->output_size() != outputs)
        throw ConfigError("table for " + name + " has the wrong number of outputs");
      runtime.add(model, t->second);
    } else {
      if (!bridge) throw ConfigError("model " + name + " is served over the bridge but none is running");
      runtime.add(model, std::make_shared<BridgeModel>(bridge, spec.source.empty() ? name : spec.source,
                                                       outputs, InputEncoder(spec.inputs, vectors),
                                                       spec.lr));
    }
  }
}

// ---------------------------------------------------------------------------
// Gradients

ExampleGradient example_gradient(const Program& program, const QueryExample& example,
                                 const ParameterStore& store, NeuralRuntime& runtime,
                                 const QueryOptions& options) {
  CompiledQuery q = compile_query(program, example.query, &runtime, options);
  GradientValue gv = gradient(q, store);
  ExampleGradient out;
  out.probability = gv.p;
  out.loss = cross_entropy(gv.p, example.target);
  const double d = out.loss.derivative;
  out.logic.assign(q.layout.logic, 0.0);
  for (std::size_t i = 0; i < q.layout.logic; ++i) out.logic[i] = d * gv.g[i];
  for (std::size_t g = 0; g < q.program.groups.size(); ++g) {
    const NeuralGroup& group = q.program.groups[g];
    ExampleGradient::Neural n{group.model, group.inputs, std::vector<double>(group.facts.size())};
    bool any = false;
    for (std::size_t j = 0; j < group.facts.size(); ++j) {
      n.grad[j] = d * gv.g[q.layout.slot(g, j)];
      any = any || n.grad[j] != 0.0;
    }
    if (any) out.neural.push_back(std::move(n));
  }
  return out;
}

namespace {

/// Runs fn(0..n-1) on up to `jobs` threads; rethrows the lowest-index failure.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < std::min(jobs, n); ++k) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string group_key(const Atom& a) {
  std::string key = symbol_name(a.predicate()) + "/" + std::to_string(a.arity());
  for (std::size_t k = 0; k + 1 < a.arity(); ++k) key += "|" + to_string(a.args()[k]);
  return key;
}

Atom open_last(const Atom& a) {
  std::vector<Term> args(a.args().begin(), a.args().end());
  args.back() = Term::variable(0, intern("Answer"));
  return Atom(a.predicate(), std::move(args));
}

}  // namespace

Evaluation evaluate_accuracy(const Program& program, const std::vector<QueryExample>& dataset,
                             const ParameterStore& store, NeuralRuntime& runtime,
                             const TrainConfig& config, bool open) {
  // Groups in order of first appearance.
  std::vector<std::vector<std::size_t>> groups;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Atom& q = dataset[i].query;
    std::string key = q.arity() == 0 ? "#" + std::to_string(i) : group_key(q);
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(i);
  }

  struct Outcome {
    std::string truth;
    std::string predicted;
    bool correct = false;
  };
  std::vector<Outcome> outcomes(groups.size());
  QueryOptions exact = config.query;
  QueryOptions pruned = config.query;
  pruned.ground.neural_prune_below = config.eval_prune_below;

  auto judge = [&](std::size_t gi) {
    const std::vector<std::size_t>& members = groups[gi];
    Outcome& o = outcomes[gi];
    std::size_t best_target = members.front();
    for (std::size_t i : members)
      if (dataset[i].target > dataset[best_target].target) best_target = i;
    const Atom& truth = dataset[best_target].query;
    if (members.size() == 1 && (!open || truth.arity() == 0)) {
      // Pruned grounding gives a lower bound, which certifies "true" only.
      const bool bound = config.eval_prune_below > 0.0;
      double p = probability(compile_query(program, truth, &runtime, bound ? pruned : exact), store);
      o.truth = dataset[best_target].target > 0.5 ? "true" : "false";
      o.predicted = p > 0.5 ? "true" : (bound ? "uncertain" : "false");
      o.correct = o.truth == o.predicted;
      return;
    }
    o.truth = to_string(truth.args().back());
    if (members.size() == 1) {
      auto answers = answer_probabilities(program, open_last(truth), &runtime, store, pruned);
      if (answers.empty()) {
        o.predicted = "none";
        return;
      }
      std::size_t best = 0;
      for (std::size_t k = 1; k < answers.size(); ++k)
        if (answers[k].probability > answers[best].probability) best = k;
      o.predicted = to_string(answers[best].atom.args().back());
      bool certain = config.eval_prune_below == 0.0 || answers[best].probability > 0.5;
      o.correct = certain && answers[best].atom == truth;
      if (!certain) o.predicted = "uncertain";
      return;
    }
    std::size_t best = members.front();
    double best_p = -1.0;
    for (std::size_t i : members) {
      double p = probability(compile_query(program, dataset[i].query, &runtime, exact), store);
      if (p > best_p) {
        best_p = p;
        best = i;
      }
    }
    o.predicted = to_string(dataset[best].query.args().back());
    o.correct = best == best_target;
  };

  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < groups.size(); start += kChunk) {
    std::size_t count = std::min(kChunk, groups.size() - start);
    parallel_for(count, config.jobs, [&](std::size_t k) { judge(start + k); });
    runtime.clear_cache();
  }

  Evaluation ev;
  ev.total = outcomes.size();
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> classes;
  for (const Outcome& o : outcomes) {
    if (o.correct) {
      ++ev.correct;
      ++classes[o.truth].tp;
    } else {
      ++classes[o.truth].fn;
      ++classes[o.predicted].fp;
    }
  }
  ev.accuracy = ev.total ? static_cast<double>(ev.correct) / static_cast<double>(ev.total) : 0.0;
  double f1_sum = 0.0;
  for (const auto& [name, c] : classes) {
    double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(c.tp) / denom : 0.0;
  }
  ev.macro_f1 = classes.empty() ? 0.0 : f1_sum / static_cast<double>(classes.size());
  return ev;
}

// ---------------------------------------------------------------------------
// Training

std::string TrainReport::to_csv(bool timing) const {
  std::string out = timing ? "epoch,loss,accuracy,macro_f1,seconds\n" : "epoch,loss,accuracy,macro_f1\n";
  char buf[160];
  for (const EpochReport& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g,", e.epoch, e.loss);
    out += buf;
    if (e.eval) {
      std::snprintf(buf, sizeof buf, "%.12g,%.12g", e.eval->accuracy, e.eval->macro_f1);
      out += buf;
    } else {
      out += ",";
    }
    if (timing) {
      std::snprintf(buf, sizeof buf, ",%.3f", e.seconds);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

TrainReport train(const Program& program, const std::vector<QueryExample>& data,
                  const std::vector<QueryExample>* test, bool open_eval, const TrainConfig& config,
                  ParameterStore& store, NeuralRuntime& runtime, const EpochCallback& on_epoch) {
  if (data.empty()) throw DatasetError("training set is empty");
  if (config.accumulation == 0) throw ConfigError("accumulation must be at least 1");
  const std::size_t n = data.size();
  const std::size_t window = config.accumulation;
  const std::size_t steps_per_epoch = (n + window - 1) / window;
  const double warm_steps = config.logic_warmup_epochs * static_cast<double>(steps_per_epoch);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);
  std::size_t step = 0;
  store.project();

  TrainReport report;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    if (config.shuffle)
      for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += window) {
      const std::size_t count = std::min(window, n - start);
      std::vector<ExampleGradient> results(count);
      parallel_for(count, config.jobs, [&](std::size_t k) {
        results[k] = example_gradient(program, data[order[start + k]], store, runtime, config.query);
      });
      const double scale = 1.0 / static_cast<double>(count);
      std::vector<double> logic(store.size(), 0.0);
      for (const ExampleGradient& r : results) {
        loss_sum += r.loss.value;
        for (std::size_t i = 0; i < r.logic.size(); ++i) logic[i] += r.logic[i];
      }
      for (ExampleGradient& r : results)
        for (ExampleGradient::Neural& nb : r.neural) {
          for (double& g : nb.grad) g *= scale;
          runtime.backward(nb.model, nb.inputs, nb.grad);
        }
      double lr = config.logic_lr;
      if (warm_steps > 0.0 && static_cast<double>(step) < warm_steps)
        lr = config.logic_warmup_start +
             (config.logic_lr - config.logic_warmup_start) * static_cast<double>(step) / warm_steps;
      for (std::size_t i = 0; i < logic.size(); ++i) store.values()[i] -= lr * scale * logic[i];
      store.project();
      runtime.step();
      ++step;
    }
    EpochReport er;
    er.epoch = epoch;
    er.loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(er.loss)) throw LabelError("training loss is not finite");
    if (test && !test->empty()) er.eval = evaluate_accuracy(program, *test, store, runtime, config, open_eval);
    er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(er);
    if (on_epoch && !on_epoch(er)) break;
  }
  return report;
}

}  // namespace dpl
