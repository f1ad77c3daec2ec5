#pragma once

#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dpl/inference.hpp"
#include "dpl/neural.hpp"
#include "dpl/oracle.hpp"
#include "dpl/parser.hpp"

#ifndef DPL_SOURCE_DIR
#define DPL_SOURCE_DIR "."
#endif

namespace dpl::test {

inline std::string source_path(const std::string& relative) { return std::string(DPL_SOURCE_DIR) + "/" + relative; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline Program load_program(const std::string& relative) { return parse_program(read_file(source_path(relative))); }

/// Runtime holding every table model of a models file.
inline std::unique_ptr<NeuralRuntime> table_runtime(const std::string& text) {
  auto rt = std::make_unique<NeuralRuntime>();
  for (auto& [name, table] : parse_model_tables(text)) rt->add(name, table);
  return rt;
}

inline double query_probability(const Program& p, const std::string& query, DistributionProvider* models = nullptr,
                                const ParameterStore* store = nullptr) {
  ParameterStore own(p);
  return probability(compile_query(p, parse_atom(query), models), store ? *store : own);
}

inline double relative_error(double a, double b) {
  double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

/// Random ground programs over a small propositional vocabulary.
struct RandomProgramOptions {
  std::size_t max_facts = 10;
  std::size_t max_rules = 12;
  std::size_t max_ads = 0;
  /// Neural ADs over a single constant, answered by table models.
  std::size_t max_nads = 0;
  bool negation = true;
  bool learnable = false;
};

/// Emits program text: facts f0.., derived atoms d0.. defined only from
/// facts and lower-numbered derived atoms, so the program is acyclic and
/// stratified by construction. The query is the highest derived atom.
/// Table models for the nADs, if any, are written to `models`.
inline std::string random_program(std::mt19937_64& rng, const RandomProgramOptions& o, std::string* query,
                                  std::string* models = nullptr) {
  auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  auto prob = [&] {
    double p = static_cast<double>(1 + below(99)) / 100.0;
    return p;
  };
  std::ostringstream text;
  text.precision(17);
  const std::size_t facts = 1 + below(o.max_facts);
  for (std::size_t i = 0; i < facts; ++i) {
    if (o.learnable && below(2) == 0)
      text << "t(" << prob() << ")::f" << i << ".\n";
    else
      text << prob() << "::f" << i << ".\n";
  }
  std::vector<std::string> atoms;
  for (std::size_t i = 0; i < facts; ++i) atoms.push_back("f" + std::to_string(i));
  std::size_t ad_count = o.max_ads ? below(o.max_ads + 1) : 0;
  for (std::size_t a = 0; a < ad_count; ++a) {
    std::size_t heads = 2 + below(3);
    std::vector<double> w(heads);
    double total = 0.0;
    for (double& x : w) total += (x = static_cast<double>(1 + below(9)));
    // Learnable ADs are normalized at load; fixed ones may leave mass for "no head".
    bool learnable = o.learnable && below(3) == 0;
    double scale = learnable || below(2) ? 1.0 : 0.8;
    for (std::size_t h = 0; h < heads; ++h) {
      if (h) text << "; ";
      if (learnable) text << "t(" << w[h] / total << ")::";
      else text << w[h] / total * scale << "::";
      text << "a" << a << "_" << h;
    }
    if (below(2)) text << " :- " << atoms[below(atoms.size())];
    text << ".\n";
    for (std::size_t h = 0; h < heads; ++h) atoms.push_back("a" + std::to_string(a) + "_" + std::to_string(h));
  }
  std::size_t nad_count = o.max_nads && models ? below(o.max_nads + 1) : 0;
  std::ostringstream tables;
  tables.precision(17);
  for (std::size_t k = 0; k < nad_count; ++k) {
    std::size_t n = 2 + below(3);
    text << "nn(m" << k << ", c, [0,...," << n - 1 << "]) :: n" << k << "(c,0);...;n" << k << "(c," << n - 1 << ").\n";
    std::vector<double> w(n);
    double total = 0.0;
    for (double& x : w) total += (x = static_cast<double>(1 + below(9)));
    tables << "m" << k << "(c)";
    for (double x : w) tables << " " << x / total;
    tables << "\n";
    for (std::size_t j = 0; j < n; ++j) atoms.push_back("n" + std::to_string(k) + "(c," + std::to_string(j) + ")");
  }
  if (models) *models = tables.str();
  const std::size_t rules = 1 + below(o.max_rules);
  std::size_t derived = 0;
  for (std::size_t r = 0; r < rules; ++r) {
    // New head or another clause for an existing derived atom.
    std::size_t head = derived == 0 || below(3) == 0 ? derived++ : below(derived);
    std::vector<std::string> pool(atoms.begin(), atoms.end());
    for (std::size_t d = 0; d < head; ++d) pool.push_back("d" + std::to_string(d));
    std::size_t len = 1 + below(3);
    text << "d" << head << " :- ";
    for (std::size_t k = 0; k < len; ++k) {
      if (k) text << ", ";
      if (o.negation && below(4) == 0) text << "\\+";
      text << pool[below(pool.size())];
    }
    text << ".\n";
  }
  *query = "d" + std::to_string(derived - 1);
  return text.str();
}

}  // namespace dpl::test
