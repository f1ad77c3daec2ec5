#include "dpl/inference.hpp"

#include "dpl/errors.hpp"

namespace dpl {

CompiledQuery compile_query(const Program& program, const Atom& query, DistributionProvider* models,
                            const QueryOptions& options) {
  GroundProgram gp = rewrite_ads(ground(program, query, models, options.ground));
  Formula f = build_formula(gp);
  VariableOrder order = resolve_order(options.order, gp);
  Circuit c = compile(f, gp, order, options.node_budget);
  SlotLayout layout = SlotLayout::of(gp);
  return {std::move(gp), std::move(f), std::move(c), std::move(layout)};
}

double probability(const CompiledQuery& q, const ParameterStore& store) {
  ProbabilitySemiring s;
  return evaluate(q.circuit, probability_labels(q.circuit, q.program, store), s);
}

GradientValue gradient(const CompiledQuery& q, const ParameterStore& store) {
  GradientSemiring s(q.layout.size);
  return evaluate(q.circuit, gradient_labels(q.circuit, q.program, store, q.layout), s);
}

std::vector<AnswerProbability> answer_probabilities(const Program& program, const Atom& query,
                                                    DistributionProvider* models,
                                                    const ParameterStore& store,
                                                    const QueryOptions& options) {
  GroundProgram gp = rewrite_ads(ground(program, query, models, options.ground));
  VariableOrder order = resolve_order(options.order, gp);
  std::vector<AnswerProbability> out;
  ProbabilitySemiring s;
  for (AtomId a : gp.answers) {
    Formula f = build_formula(gp, a);
    Circuit c = compile(f, gp, order, options.node_budget);
    out.push_back({gp.atoms[a], evaluate(c, probability_labels(c, gp, store), s)});
  }
  return out;
}

VariableOrder resolve_order(const std::vector<std::string>& names, const GroundProgram& gp) {
  VariableOrder out;
  for (const std::string& name : names) {
    bool found = false;
    for (std::size_t g = 0; g < gp.groups.size() && !found; ++g) {
      DecisionVar v{DecisionVar::Kind::kGroup, g, gp.groups[g].facts.size()};
      bool match = variable_name(v, gp) == name;
      for (std::size_t f : gp.groups[g].facts) match = match || to_string(gp.atoms[gp.facts[f].atom]) == name;
      if (match) {
        out.push_back(v);
        found = true;
      }
    }
    for (std::size_t f = 0; f < gp.facts.size() && !found; ++f) {
      if (gp.facts[f].source == LabelSource::kNeural) continue;
      if (to_string(gp.atoms[gp.facts[f].atom]) == name) {
        out.push_back({DecisionVar::Kind::kFact, f, 2});
        found = true;
      }
    }
    if (!found) throw ConfigError("order names unknown variable " + name);
  }
  return out;
}

std::string slot_name(const Program& program, const GroundProgram& gp, const SlotLayout& layout,
                      std::size_t i) {
  if (i < layout.logic) {
    std::size_t g = program.group_of(i);
    const ParameterGroup& group = program.parameter_groups[g];
    for (std::size_t k = 0; k < group.parameters.size(); ++k)
      if (group.parameters[k] == i) return group.labels[k];
    return "p" + std::to_string(i);
  }
  for (std::size_t g = 0; g < gp.groups.size(); ++g) {
    std::size_t off = layout.group_offset[g];
    if (i >= off && i < off + gp.groups[g].facts.size())
      return to_string(gp.atoms[gp.facts[gp.groups[g].facts[i - off]].atom]);
  }
  return "slot" + std::to_string(i);
}

}  // namespace dpl
