#include "dpl/program.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dpl/errors.hpp"

namespace dpl {

std::size_t Program::group_of(std::size_t p) const {
  for (std::size_t g = 0; g < parameter_groups.size(); ++g)
    for (std::size_t q : parameter_groups[g].parameters)
      if (q == p) return g;
  throw ProgramError("unknown parameter index " + std::to_string(p));
}

std::string format_probability(double p) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", p);
  return buf;
}

namespace {

std::string annotation(const ProbSpec& p) {
  if (p.is_learnable()) return "t(" + format_probability(p.value) + ")";
  return format_probability(p.value);
}

void print_body(std::ostream& os, const std::vector<Literal>& body) {
  if (body.empty()) return;
  os << " :- ";
  for (std::size_t k = 0; k < body.size(); ++k) {
    if (k) os << ", ";
    os << to_string(body[k]);
  }
}

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

bool same_spec(const ProbSpec& a, const ProbSpec& b, double tol) {
  return a.kind == b.kind && close(a.value, b.value, tol) &&
         (!a.is_learnable() || a.parameter == b.parameter);
}

}  // namespace

std::string pretty_print(const Program& p) {
  std::ostringstream os;
  for (const ClauseRef& ref : p.order) {
    switch (ref.kind) {
      case ClauseRef::Kind::kFact: {
        const auto& f = p.facts[ref.index];
        os << annotation(f.probability) << "::" << to_string(f.atom);
        break;
      }
      case ClauseRef::Kind::kAd: {
        const auto& ad = p.ads[ref.index];
        for (std::size_t k = 0; k < ad.heads.size(); ++k) {
          if (k) os << "; ";
          os << annotation(ad.heads[k].probability) << "::" << to_string(ad.heads[k].atom);
        }
        print_body(os, ad.body);
        break;
      }
      case ClauseRef::Kind::kNad: {
        const auto& nad = p.nads[ref.index];
        os << "nn(" << symbol_name(nad.model);
        for (const Term& t : nad.inputs) os << ", " << to_string(t);
        os << ", " << to_string(Term::list(nad.domain)) << ") :: ";
        for (std::size_t k = 0; k < nad.heads.size(); ++k) {
          if (k) os << "; ";
          os << to_string(nad.heads[k]);
        }
        print_body(os, nad.body);
        break;
      }
      case ClauseRef::Kind::kRule:
        os << to_string(p.rules[ref.index].clause);
        os << "\n";
        continue;
    }
    os << ".\n";
  }
  for (const Atom& q : p.queries) os << "query(" << to_string(q) << ").\n";
  return os.str();
}

bool structurally_equal(const Program& a, const Program& b, double tol) {
  if (a.facts.size() != b.facts.size() || a.ads.size() != b.ads.size() ||
      a.nads.size() != b.nads.size() || a.rules.size() != b.rules.size() ||
      a.queries != b.queries || a.order.size() != b.order.size() ||
      a.initial_parameters.size() != b.initial_parameters.size())
    return false;
  for (std::size_t k = 0; k < a.order.size(); ++k)
    if (a.order[k].kind != b.order[k].kind || a.order[k].index != b.order[k].index) return false;
  for (std::size_t k = 0; k < a.facts.size(); ++k)
    if (!same_spec(a.facts[k].probability, b.facts[k].probability, tol) ||
        a.facts[k].atom != b.facts[k].atom)
      return false;
  for (std::size_t k = 0; k < a.ads.size(); ++k) {
    const auto& x = a.ads[k];
    const auto& y = b.ads[k];
    if (x.heads.size() != y.heads.size() || x.body != y.body) return false;
    for (std::size_t h = 0; h < x.heads.size(); ++h)
      if (!same_spec(x.heads[h].probability, y.heads[h].probability, tol) ||
          x.heads[h].atom != y.heads[h].atom)
        return false;
  }
  for (std::size_t k = 0; k < a.nads.size(); ++k) {
    const auto& x = a.nads[k];
    const auto& y = b.nads[k];
    if (x.model != y.model || x.inputs != y.inputs || x.domain != y.domain ||
        x.heads != y.heads || x.body != y.body)
      return false;
  }
  for (std::size_t k = 0; k < a.rules.size(); ++k)
    if (a.rules[k].clause != b.rules[k].clause) return false;
  for (std::size_t k = 0; k < a.initial_parameters.size(); ++k)
    if (!close(a.initial_parameters[k], b.initial_parameters[k], tol)) return false;
  return true;
}

}  // namespace dpl
