#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dpl/program.hpp"

namespace dpl {

/// Parses program text in the DeepProbLog surface syntax.
///
/// Supported: facts and rules, `p::f` and `t(p)::f` probabilistic facts,
/// annotated disjunctions, `nn(m, inputs..., [domain]) :: heads` neural ADs
/// (with `;...;` head ellipsis and `[a,...,b]` integer range sugar), `\+`
/// negation, integer arithmetic builtins and `query/1` directives. `%`
/// starts a line comment.
Program parse_program(std::string_view text);

/// One `(query, target probability)` training or evaluation record.
struct QueryExample {
  Atom query;
  double target = 1.0;
};

/// One record per line: `<ground atom> [<probability>]`, target defaults to 1.
std::vector<QueryExample> parse_dataset(std::string_view text);

/// Parses a single term (variables are allowed and numbered from 0).
Term parse_term(std::string_view text);
/// Parses a single atom, e.g. a query given on the command line.
Atom parse_atom(std::string_view text);

/// `symbol v1 v2 ... vk` per line.
using VectorTable = std::unordered_map<Symbol, std::vector<double>>;
VectorTable parse_vectors(std::string_view text);
std::string format_vectors(const VectorTable& table, const std::vector<Symbol>& order);

}  // namespace dpl
