#include "dpl/ground_program.hpp"

#include <sstream>

namespace dpl {

AtomId GroundProgram::atom_id(const Atom& a) {
  auto [it, inserted] = index_.try_emplace(a, static_cast<AtomId>(atoms.size()));
  if (inserted) atoms.push_back(a);
  return it->second;
}

std::optional<AtomId> GroundProgram::find_atom(const Atom& a) const {
  auto it = index_.find(a);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t GroundProgram::add_fact(GroundFact f) {
  facts.push_back(std::move(f));
  return facts.size() - 1;
}

std::size_t GroundProgram::add_rule(GroundRule r) {
  rules.push_back(std::move(r));
  order.push_back({GroundItem::Kind::kRule, rules.size() - 1});
  return rules.size() - 1;
}

namespace {

void print_body(std::ostream& os, const GroundProgram& gp, const std::vector<GroundLiteral>& body) {
  if (body.empty()) return;
  os << " :- ";
  for (std::size_t k = 0; k < body.size(); ++k) {
    if (k) os << ", ";
    if (body[k].negated) os << "\\+";
    os << to_string(gp.atoms[body[k].atom]);
  }
}

std::string label(const ProbSpec& p) {
  if (p.is_learnable()) return "t(" + format_probability(p.value) + ")";
  return format_probability(p.value);
}

}  // namespace

std::string format_ground_program(const GroundProgram& gp) {
  std::ostringstream os;
  for (const GroundItem& item : gp.order) {
    switch (item.kind) {
      case GroundItem::Kind::kFact: {
        const GroundFact& f = gp.facts[item.index];
        if (f.source == LabelSource::kLearnable)
          os << "t(" << format_probability(f.probability) << ")";
        else
          os << format_probability(f.probability);
        os << "::" << to_string(gp.atoms[f.atom]) << ".\n";
        break;
      }
      case GroundItem::Kind::kGroup: {
        const NeuralGroup& g = gp.groups[item.index];
        for (std::size_t k = 0; k < g.facts.size(); ++k) {
          if (k) os << "; ";
          os << format_probability(g.distribution[k])
             << "::" << to_string(gp.atoms[gp.facts[g.facts[k]].atom]);
        }
        os << ".  % nn(" << symbol_name(g.model);
        for (const Term& t : g.inputs) os << "," << to_string(t);
        os << ")\n";
        break;
      }
      case GroundItem::Kind::kAd: {
        const GroundAd& ad = gp.ads[item.index];
        for (std::size_t k = 0; k < ad.heads.size(); ++k) {
          if (k) os << "; ";
          os << label(ad.heads[k].probability) << "::" << to_string(gp.atoms[ad.heads[k].atom]);
        }
        print_body(os, gp, ad.body);
        os << ".\n";
        break;
      }
      case GroundItem::Kind::kRule: {
        const GroundRule& r = gp.rules[item.index];
        os << to_string(gp.atoms[r.head]);
        print_body(os, gp, r.body);
        os << ".\n";
        break;
      }
    }
  }
  return os.str();
}

}  // namespace dpl
