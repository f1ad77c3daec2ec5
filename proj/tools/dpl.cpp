// Command-line front end: parse, ground, compile, query, learn, export-dot
// and gen-data.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dpl/errors.hpp"
#include "dpl/inference.hpp"
#include "dpl/learning.hpp"
#include "dpl/neural.hpp"
#include "dpl/oracle.hpp"
#include "dpl/parser.hpp"
#include "dpl/tasks.hpp"

namespace {

using namespace dpl;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Inputs shared by every subcommand that evaluates a program.
struct Setup {
  std::string program_path;
  std::string models_path;
  std::string vectors_path;
  std::string config_path;
  std::string params_path;
  std::string bridge;
  std::vector<std::string> order;
  double prune = 0.0;
  std::size_t jobs = 0;
  long long seed = -1;

  Program program;
  ParameterStore store;
  RunConfig config;
  NeuralRuntime runtime;
  std::shared_ptr<BridgeProcess> bridge_process;

  void add_options(CLI::App* app, bool neural) {
    app->add_option("program", program_path, "program file (.dpl)")->required()->check(CLI::ExistingFile);
    app->add_option("--params", params_path, "parameters file to load")->check(CLI::ExistingFile);
    app->add_option("--order", order, "variables to place first in the decision order");
    if (!neural) return;
    app->add_option("--models", models_path, "fixed model outputs: `model(inputs) p1 ... pn` lines")
        ->check(CLI::ExistingFile);
    app->add_option("--vectors", vectors_path, "feature vectors: `symbol v1 ... vk` lines")
        ->check(CLI::ExistingFile);
    app->add_option("--config", config_path, "run configuration (key = value)")->check(CLI::ExistingFile);
    app->add_option("--bridge", bridge, "command line of an external model server");
    app->add_option("--prune", prune, "drop neural outcomes below this probability")->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", seed, "random seed (overrides the config)");
    app->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  void load() {
    program = parse_program(slurp(program_path));
    store = ParameterStore(program);
    if (!params_path.empty()) store.load_text(slurp(params_path));
    if (!config_path.empty()) config = parse_run_config(slurp(config_path));
    if (seed >= 0) config.train.seed = static_cast<std::uint64_t>(seed);
    if (jobs > 0) config.train.jobs = jobs;
    config.train.query.order = order;
    config.train.query.ground.neural_prune_below = prune;
    if (!models_path.empty())
      for (auto& [name, table] : parse_model_tables(slurp(models_path))) runtime.add(name, table);
    std::shared_ptr<const VectorTable> vectors;
    if (!vectors_path.empty()) vectors = std::make_shared<VectorTable>(parse_vectors(slurp(vectors_path)));
    if (!bridge.empty()) bridge_process = std::make_shared<BridgeProcess>(bridge);
    bool missing = false;
    for (const NeuralAD& nad : program.nads) missing = missing || !runtime.has(nad.model);
    if (missing && (!config.models.empty() || bridge_process)) {
      // A bridge without explicit model entries serves every remaining model.
      if (bridge_process)
        for (const NeuralAD& nad : program.nads)
          if (!config.models.count(symbol_name(nad.model)))
            config.models[symbol_name(nad.model)].type = "bridge";
      build_models(program, config, vectors, bridge_process, runtime);
    }
  }

  std::vector<Atom> queries(const std::vector<std::string>& texts) const {
    std::vector<Atom> out;
    for (const std::string& t : texts) out.push_back(parse_atom(t));
    if (out.empty()) out = program.queries;
    if (out.empty()) throw ConfigError("no query given and the program has no query/1 directive");
    return out;
  }
};

int run_parse(Setup& s) {
  s.program = parse_program(slurp(s.program_path));
  std::cout << pretty_print(s.program);
  return 0;
}

int run_ground(Setup& s, const std::vector<std::string>& texts) {
  s.load();
  for (const Atom& q : s.queries(texts))
    std::cout << format_ground_program(ground(s.program, q, &s.runtime, s.config.train.query.ground));
  return 0;
}

int run_query(Setup& s, const std::vector<std::string>& texts, bool grad, bool exact) {
  s.load();
  for (const Atom& q : s.queries(texts)) {
    if (exact) {
      GroundProgram gp = ground(s.program, q, &s.runtime, s.config.train.query.ground);
      std::cout << "P(" << to_string(q) << ") = " << format_value(enumerate_probability(gp, s.store)) << "\n";
      if (grad) {
        auto fn = [&](const std::vector<double>& theta) {
          ParameterStore st = s.store;
          st.values() = theta;
          return enumerate_probability(gp, st);
        };
        std::vector<double> g = finite_difference_gradient(fn, s.store.values());
        SlotLayout layout = SlotLayout::of(gp);
        for (std::size_t i = 0; i < g.size(); ++i)
          std::cout << "  d/d " << slot_name(s.program, gp, layout, i) << " = " << format_value(g[i]) << "\n";
      }
      continue;
    }
    CompiledQuery cq = compile_query(s.program, q, &s.runtime, s.config.train.query);
    if (!grad) {
      std::cout << "P(" << to_string(q) << ") = " << format_value(probability(cq, s.store)) << "\n";
      continue;
    }
    GradientValue g = gradient(cq, s.store);
    std::cout << "P(" << to_string(q) << ") = " << format_value(g.p) << "\n";
    for (std::size_t i = 0; i < g.g.size(); ++i)
      std::cout << "  d/d " << slot_name(s.program, cq.program, cq.layout, i) << " = " << format_value(g.g[i])
                << "\n";
  }
  return 0;
}

int run_dot(Setup& s, const std::vector<std::string>& texts, bool annotate, bool grad) {
  s.load();
  for (const Atom& q : s.queries(texts)) {
    CompiledQuery cq = compile_query(s.program, q, &s.runtime, s.config.train.query);
    if (!annotate) {
      std::cout << export_dot(cq.circuit, cq.program);
      continue;
    }
    std::vector<std::string> notes(cq.circuit.size());
    if (grad) {
      GradientSemiring sr(cq.layout.size);
      auto values = evaluate_nodes(cq.circuit, gradient_labels(cq.circuit, cq.program, s.store, cq.layout), sr);
      values[cq.circuit.root()] = gradient(cq, s.store);
      for (std::size_t i = 0; i < values.size(); ++i) {
        std::string n = "(" + format_value(values[i].p) + ", [";
        for (std::size_t k = 0; k < values[i].g.size(); ++k) n += (k ? ", " : "") + format_value(values[i].g[k]);
        notes[i] = n + "])";
      }
    } else {
      ProbabilitySemiring sr;
      auto values = evaluate_nodes(cq.circuit, probability_labels(cq.circuit, cq.program, s.store), sr);
      values[cq.circuit.root()] = probability(cq, s.store);
      for (std::size_t i = 0; i < values.size(); ++i) notes[i] = format_value(values[i]);
    }
    std::cout << export_dot(cq.circuit, cq.program, &notes);
  }
  return 0;
}

int run_compile(Setup& s, const std::vector<std::string>& texts) {
  s.load();
  for (const Atom& q : s.queries(texts)) {
    CompiledQuery cq = compile_query(s.program, q, &s.runtime, s.config.train.query);
    std::cout << "// " << to_string(q) << ": " << cq.circuit.decision_nodes() << " decision nodes over "
              << cq.circuit.variables().size() << " variables\n";
    std::cout << export_dot(cq.circuit, cq.program);
  }
  return 0;
}

struct LearnOptions {
  std::string train_path;
  std::string test_path;
  std::string report_path = "report.csv";
  std::string params_out = "params.txt";
  long long epochs = -1;
  bool timing = false;
  bool open_eval = false;
  bool quiet = false;
};

int run_learn(Setup& s, const LearnOptions& o) {
  s.load();
  if (o.epochs >= 0) s.config.train.epochs = static_cast<std::size_t>(o.epochs);
  std::vector<QueryExample> data = parse_dataset(slurp(o.train_path));
  std::vector<QueryExample> test;
  if (!o.test_path.empty()) test = parse_dataset(slurp(o.test_path));
  TrainReport report = train(s.program, data, o.test_path.empty() ? nullptr : &test, o.open_eval, s.config.train,
                             s.store, s.runtime, [&](const EpochReport& e) {
                               if (!o.quiet) {
                                 std::cerr << "epoch " << e.epoch << " loss " << format_value(e.loss);
                                 if (e.eval) std::cerr << " accuracy " << format_value(e.eval->accuracy);
                                 std::cerr << "\n";
                               }
                               return true;
                             });
  spit(o.report_path, report.to_csv(o.timing));
  spit(o.params_out, s.store.to_text());
  return 0;
}

struct GenOptions {
  std::string task;
  std::string out = ".";
  std::size_t train = 0;
  std::size_t test = 0;
  std::uint64_t seed = 1;
  std::size_t length = 0;
  std::size_t max_length = 0;
  std::vector<std::size_t> test_lengths;
};

int run_gen(const GenOptions& o) {
  auto pick = [](std::size_t v, std::size_t fallback) { return v ? v : fallback; };
  TaskData data;
  if (o.task == "t1") {
    data = gen_t1(pick(o.train, 30000), pick(o.test, 1000), o.seed);
  } else if (o.task == "t2") {
    data = gen_t2(pick(o.train, 30000), pick(o.test, 200), pick(o.length, 1), 3, o.seed);
  } else if (o.task == "t3") {
    std::vector<std::size_t> lengths = o.test_lengths.empty() ? std::vector<std::size_t>{8, 64} : o.test_lengths;
    data = gen_t3(pick(o.train, 2000), pick(o.test, 50), pick(o.length, 2), lengths, o.seed);
  } else if (o.task == "t4") {
    std::vector<std::size_t> lengths = o.test_lengths.empty() ? std::vector<std::size_t>{8, 64} : o.test_lengths;
    data = gen_t4(pick(o.train, 2000), pick(o.test, 50), pick(o.length, 2), pick(o.max_length, 4), lengths, o.seed);
  } else if (o.task == "t6") {
    data = gen_t6(pick(o.train, 256), pick(o.test, 64), o.seed);
  } else {
    throw ConfigError("unknown task " + o.task + " (expected t1, t2, t3, t4 or t6)");
  }
  for (const std::string& p : write_task(data, o.out)) std::cout << p << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neurosymbolic probabilistic logic programming engine"};
  app.require_subcommand(1);
  Setup setup;
  std::vector<std::string> queries;
  bool grad = false;
  bool exact = false;
  bool annotate = false;
  LearnOptions learn;
  GenOptions gen;

  auto* parse = app.add_subcommand("parse", "parse a program and print it back");
  parse->add_option("program", setup.program_path, "program file (.dpl)")->required()->check(CLI::ExistingFile);

  auto* ground_cmd = app.add_subcommand("ground", "print the ground program of a query");
  setup.add_options(ground_cmd, true);
  ground_cmd->add_option("query", queries, "query atoms (default: the program's query/1 directives)");

  auto* compile_cmd = app.add_subcommand("compile", "compile a query and print its decision diagram");
  setup.add_options(compile_cmd, true);
  compile_cmd->add_option("query", queries, "query atoms");

  auto* query_cmd = app.add_subcommand("query", "print query probabilities");
  setup.add_options(query_cmd, true);
  query_cmd->add_option("query", queries, "query atoms");
  query_cmd->add_flag("--grad", grad, "also print the gradient with respect to every parameter");
  query_cmd->add_flag("--exact-enum", exact, "evaluate by enumerating possible worlds");

  auto* dot_cmd = app.add_subcommand("export-dot", "write the decision diagram as DOT");
  setup.add_options(dot_cmd, true);
  dot_cmd->add_option("query", queries, "query atoms");
  dot_cmd->add_flag("--annotate", annotate, "label nodes with their semiring values");
  dot_cmd->add_flag("--grad", grad, "annotate with gradient-semiring values");

  auto* learn_cmd = app.add_subcommand("learn", "train parameters and models on a dataset");
  setup.add_options(learn_cmd, true);
  learn_cmd->add_option("--train", learn.train_path, "training queries")->required()->check(CLI::ExistingFile);
  learn_cmd->add_option("--test", learn.test_path, "evaluation queries")->check(CLI::ExistingFile);
  learn_cmd->add_option("--report", learn.report_path, "CSV report path");
  learn_cmd->add_option("--params-out", learn.params_out, "final parameters path");
  learn_cmd->add_option("--epochs", learn.epochs, "epochs (overrides the config)");
  learn_cmd->add_flag("--timing", learn.timing, "add a seconds column to the report");
  learn_cmd->add_flag("--open-eval", learn.open_eval, "answer single test queries over their last argument");
  learn_cmd->add_flag("--quiet", learn.quiet, "no per-epoch progress on stderr");

  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic task dataset");
  gen_cmd->add_option("task", gen.task, "t1, t2, t3, t4 or t6")->required();
  gen_cmd->add_option("--out", gen.out, "output directory");
  gen_cmd->add_option("--train", gen.train, "training examples");
  gen_cmd->add_option("--test", gen.test, "test examples (per test length)");
  gen_cmd->add_option("--seed", gen.seed, "random seed");
  gen_cmd->add_option("--length", gen.length, "training length (digits per number, list length)");
  gen_cmd->add_option("--max-length", gen.max_length, "largest training list length (t4)");
  gen_cmd->add_option("--test-lengths", gen.test_lengths, "test list lengths (t3, t4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*parse) return run_parse(setup);
    if (*ground_cmd) return run_ground(setup, queries);
    if (*compile_cmd) return run_compile(setup, queries);
    if (*query_cmd) return run_query(setup, queries, grad, exact);
    if (*dot_cmd) return run_dot(setup, queries, annotate || grad, grad);
    if (*learn_cmd) return run_learn(setup, learn);
    if (*gen_cmd) return run_gen(gen);
  } catch (const Error& e) {
    std::cout.flush();
    std::cerr << "error: " << e.kind() << ": " << e.what();
    if (e.where().line > 0 && std::string(e.what()).find(" at line ") == std::string::npos) std::cerr << " (line " << e.where().line << ", column " << e.where().column << ")";
    std::cerr << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
