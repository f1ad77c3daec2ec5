#include "dpl/semiring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dpl/errors.hpp"
#include "dpl/transform.hpp"

namespace dpl {

GradientValue oplus(const GradientValue& a, const GradientValue& b) {
  if (a.g.size() != b.g.size())
    throw SemiringError("gradient length mismatch: " + std::to_string(a.g.size()) + " vs " +
                        std::to_string(b.g.size()));
  GradientValue out{a.p + b.p, a.g};
  for (std::size_t i = 0; i < out.g.size(); ++i) out.g[i] += b.g[i];
  return out;
}

GradientValue otimes(const GradientValue& a, const GradientValue& b) {
  if (a.g.size() != b.g.size())
    throw SemiringError("gradient length mismatch: " + std::to_string(a.g.size()) + " vs " +
                        std::to_string(b.g.size()));
  GradientValue out{a.p * b.p, std::vector<double>(a.g.size())};
  for (std::size_t i = 0; i < out.g.size(); ++i) out.g[i] = b.p * a.g[i] + a.p * b.g[i];
  return out;
}

ParameterStore::ParameterStore(const Program& program)
    : values_(program.initial_parameters), groups_(program.parameter_groups) {}

void ParameterStore::project(double eps) {
  for (double& v : values_) v = std::clamp(v, eps, 1.0 - eps);
  for (const ParameterGroup& g : groups_) {
    if (!g.normalized) continue;
    // Alternate rescaling and clipping; values pinned at a bound stay fixed
    // and the free ones absorb the remaining mass.
    std::vector<bool> pinned(g.parameters.size(), false);
    for (int iter = 0; iter < 64; ++iter) {
      double fixed = 0.0;
      double free = 0.0;
      for (std::size_t k = 0; k < g.parameters.size(); ++k)
        (pinned[k] ? fixed : free) += values_[g.parameters[k]];
      if (free <= 0.0) break;
      double scale = (1.0 - fixed) / free;
      bool changed = false;
      for (std::size_t k = 0; k < g.parameters.size(); ++k) {
        if (pinned[k]) continue;
        double& v = values_[g.parameters[k]];
        v *= scale;
        if (v < eps || v > 1.0 - eps) {
          v = std::clamp(v, eps, 1.0 - eps);
          pinned[k] = true;
          changed = true;
        }
      }
      if (!changed) break;
    }
  }
}

std::string ParameterStore::to_text() const {
  std::ostringstream os;
  char buf[40];
  for (std::size_t k = 0; k < groups_.size(); ++k) {
    os << "group " << k;
    for (std::size_t p : groups_[k].parameters) {
      std::snprintf(buf, sizeof buf, "%.17g", values_[p]);
      os << ' ' << buf;
    }
    os << "  %";
    for (const std::string& l : groups_[k].labels) os << ' ' << l;
    os << '\n';
  }
  return os.str();
}

void ParameterStore::load_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::vector<bool> loaded(groups_.size(), false);
  while (std::getline(in, line)) {
    ++line_no;
    auto pct = line.find('%');
    if (pct != std::string::npos) line.resize(pct);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::size_t k = 0;
    if (word != "group" || !(ls >> k) || k >= groups_.size())
      throw ConfigError("parameters line " + std::to_string(line_no) + ": expected 'group <k>'",
                        {line_no, 1});
    std::vector<double> vals;
    double v = 0.0;
    while (ls >> v) vals.push_back(v);
    if (vals.size() != groups_[k].parameters.size())
      throw ConfigError("parameters line " + std::to_string(line_no) + ": group " +
                            std::to_string(k) + " needs " +
                            std::to_string(groups_[k].parameters.size()) + " values",
                        {line_no, 1});
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (!(vals[i] >= 0.0 && vals[i] <= 1.0))
        throw ConfigError("parameters line " + std::to_string(line_no) + ": value outside [0,1]",
                          {line_no, 1});
      values_[groups_[k].parameters[i]] = vals[i];
    }
    loaded[k] = true;
  }
  for (std::size_t k = 0; k < loaded.size(); ++k)
    if (!loaded[k]) throw ConfigError("parameters file lacks group " + std::to_string(k));
}

SlotLayout SlotLayout::of(const GroundProgram& gp) {
  SlotLayout out;
  out.logic = gp.parameter_count;
  out.size = out.logic;
  for (const NeuralGroup& g : gp.groups) {
    out.group_offset.push_back(out.size);
    out.size += g.facts.size();
  }
  return out;
}

double fact_probability(const GroundProgram& gp, std::size_t fact, const ParameterStore& store) {
  const GroundFact& f = gp.facts.at(fact);
  switch (f.source) {
    case LabelSource::kFixed:
      return f.probability;
    case LabelSource::kLearnable:
      if (f.parameter >= store.size())
        throw LabelError("unknown parameter index " + std::to_string(f.parameter));
      return store[f.parameter];
    case LabelSource::kNeural:
      return gp.groups.at(f.group).distribution.at(f.output);
    case LabelSource::kChoice:
      return choice_label(gp.ads.at(f.ad), f.head, store.values()).value;
  }
  return 0.0;
}

GradientValue label(const GroundProgram& gp, std::size_t fact, bool positive,
                    const ParameterStore& store, const SlotLayout& layout) {
  const GroundFact& f = gp.facts.at(fact);
  GradientValue out{0.0, std::vector<double>(layout.size, 0.0)};
  switch (f.source) {
    case LabelSource::kFixed:
      out.p = f.probability;
      break;
    case LabelSource::kLearnable:
      out.p = fact_probability(gp, fact, store);
      out.g.at(f.parameter) = 1.0;
      break;
    case LabelSource::kNeural: {
      const NeuralGroup& g = gp.groups.at(f.group);
      out.p = g.distribution.at(f.output);
      std::size_t n = g.facts.size();
      if (f.output + 1 < n) {
        out.g.at(layout.slot(f.group, f.output)) = 1.0;
      } else {
        for (std::size_t j = 0; j + 1 < n; ++j) out.g.at(layout.slot(f.group, j)) = -1.0;
      }
      break;
    }
    case LabelSource::kChoice: {
      ChoiceLabel c = choice_label(gp.ads.at(f.ad), f.head, store.values());
      out.p = c.value;
      for (const auto& [idx, d] : c.gradient) out.g.at(idx) += d;
      break;
    }
  }
  if (!positive) {
    out.p = 1.0 - out.p;
    for (double& x : out.g) x = -x;
  }
  return out;
}

}  // namespace dpl
