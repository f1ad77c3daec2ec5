#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dpl/inference.hpp"
#include "dpl/learning.hpp"
#include "dpl/neural.hpp"
#include "dpl/oracle.hpp"
#include "dpl/parser.hpp"

namespace py = pybind11;
using namespace dpl;

namespace {

/// A parsed program with its parameters and fixed-table models.
class Engine {
 public:
  explicit Engine(const std::string& program, const std::string& models)
      : program_(parse_program(program)), store_(program_) {
    for (auto& [name, table] : parse_model_tables(models)) runtime_->add(name, table);
  }

  double probability(const std::string& query) const {
    return dpl::probability(compile_query(program_, parse_atom(query), runtime_.get()), store_);
  }

  // Enumerates the possible worlds of the query's grounding.
  double exact_probability(const std::string& query) const {
    return enumerate_probability(ground(program_, parse_atom(query), runtime_.get()), store_);
  }

  std::pair<double, std::vector<std::pair<std::string, double>>> gradient(const std::string& query) const {
    CompiledQuery q = compile_query(program_, parse_atom(query), runtime_.get());
    GradientValue g = dpl::gradient(q, store_);
    std::vector<std::pair<std::string, double>> named;
    for (std::size_t i = 0; i < g.g.size(); ++i) named.emplace_back(slot_name(program_, q.program, q.layout, i), g.g[i]);
    return {g.p, named};
  }

  std::vector<std::pair<std::string, double>> answers(const std::string& query) const {
    std::vector<std::pair<std::string, double>> out;
    for (const AnswerProbability& a : answer_probabilities(program_, parse_atom(query), runtime_.get(), store_))
      out.emplace_back(to_string(a.atom), a.probability);
    return out;
  }

  std::string parameters() const { return store_.to_text(); }
  void set_parameters(const std::string& text) { store_.load_text(text); }

  // Trains on `key = value` config models; returns the report CSV.
  std::string learn(const std::string& train_queries, const std::string& config, const std::string& vectors,
                    const std::string& test_queries) {
    RunConfig rc = parse_run_config(config);
    auto table = std::make_shared<VectorTable>(parse_vectors(vectors));
    build_models(program_, rc, table, nullptr, *runtime_);
    std::vector<QueryExample> train_set = parse_dataset(train_queries), test_set = parse_dataset(test_queries);
    TrainReport r = train(program_, train_set, test_set.empty() ? nullptr : &test_set, false, rc.train, store_,
                          *runtime_);
    return r.to_csv(false);
  }

 private:
  Program program_;
  ParameterStore store_;
  std::unique_ptr<NeuralRuntime> runtime_ = std::make_unique<NeuralRuntime>();
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Probabilistic logic programs with neural predicates";
  m.def("pretty_print", [](const std::string& text) { return pretty_print(parse_program(text)); },
        py::arg("program"));
  py::class_<Engine>(m, "Engine")
      .def(py::init<const std::string&, const std::string&>(), py::arg("program"), py::arg("models") = "")
      .def("probability", &Engine::probability, py::arg("query"))
      .def("exact_probability", &Engine::exact_probability, py::arg("query"))
      .def("gradient", &Engine::gradient, py::arg("query"))
      .def("answers", &Engine::answers, py::arg("query"))
      .def("parameters", &Engine::parameters)
      .def("set_parameters", &Engine::set_parameters, py::arg("text"))
      .def("learn", &Engine::learn, py::arg("train"), py::arg("config"), py::arg("vectors") = "",
           py::arg("test") = "");
}
