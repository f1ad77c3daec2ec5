#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dpl {

/// Interned name of a constant, functor, predicate or variable.
using Symbol = std::uint32_t;
using VarId = std::uint32_t;

/// Thread-safe global symbol table. Symbol 0 is always `[]`, symbol 1 is `.`.
Symbol intern(std::string_view name);
const std::string& symbol_name(Symbol symbol);

inline constexpr Symbol kNilSymbol = 0;
inline constexpr Symbol kConsSymbol = 1;

/// Immutable first-order term: constant, integer, variable or compound.
///
/// Lists are sugar: `[H|T]` is the compound `'.'(H, T)` and `[]` the constant
/// `[]`. Compound nodes are shared; copying a Term is cheap. Groundness and a
/// structural hash are cached per compound node.
class Term {
 public:
  enum class Kind : std::uint8_t { kAtom, kInteger, kVariable, kCompound };

  /// The empty list `[]`.
  Term() = default;

  static Term atom(Symbol name) noexcept;
  static Term atom(std::string_view name) { return atom(intern(name)); }
  static Term integer(std::int64_t value) noexcept;
  static Term variable(VarId id, Symbol name) noexcept;
  static Term compound(Symbol functor, std::vector<Term> args);
  static Term compound(std::string_view functor, std::vector<Term> args) {
    return compound(intern(functor), std::move(args));
  }
  static Term nil() noexcept { return Term(); }
  static Term cons(Term head, Term tail);
  static Term list(std::span<const Term> items, Term tail);
  static Term list(std::span<const Term> items);

  Kind kind() const noexcept { return kind_; }
  bool is_atom() const noexcept { return kind_ == Kind::kAtom; }
  bool is_integer() const noexcept { return kind_ == Kind::kInteger; }
  bool is_variable() const noexcept { return kind_ == Kind::kVariable; }
  bool is_compound() const noexcept { return kind_ == Kind::kCompound; }
  bool is_nil() const noexcept { return kind_ == Kind::kAtom && symbol_ == kNilSymbol; }
  bool is_cons() const noexcept {
    return kind_ == Kind::kCompound && symbol_ == kConsSymbol && arity() == 2;
  }

  /// Constant name, functor, or variable display name.
  Symbol symbol() const noexcept { return symbol_; }
  std::int64_t integer_value() const noexcept { return value_; }
  VarId var_id() const noexcept { return static_cast<VarId>(value_); }
  std::span<const Term> args() const noexcept;
  std::size_t arity() const noexcept;
  bool ground() const noexcept;
  std::size_t hash() const noexcept;

  friend bool operator==(const Term& a, const Term& b) noexcept;
  friend bool operator!=(const Term& a, const Term& b) noexcept { return !(a == b); }

 private:
  struct CompoundNode {
    std::vector<Term> args;
    std::size_t hash = 0;
    bool ground = true;
  };

  Kind kind_ = Kind::kAtom;
  Symbol symbol_ = kNilSymbol;
  std::int64_t value_ = 0;
  std::shared_ptr<const CompoundNode> node_;
};

struct TermHash {
  std::size_t operator()(const Term& t) const noexcept { return t.hash(); }
};

/// `q(t1, ..., tn)`; a thin view over a constant or compound Term.
class Atom {
 public:
  Atom() = default;
  explicit Atom(Symbol predicate, std::vector<Term> args = {});
  Atom(std::string_view predicate, std::vector<Term> args = {})
      : Atom(intern(predicate), std::move(args)) {}
  /// Wraps a constant or compound term; throws TypeError otherwise.
  static Atom from_term(Term t);

  Symbol predicate() const noexcept { return term_.symbol(); }
  std::span<const Term> args() const noexcept { return term_.args(); }
  std::size_t arity() const noexcept { return term_.arity(); }
  const Term& as_term() const noexcept { return term_; }
  bool ground() const noexcept { return term_.ground(); }
  std::size_t hash() const noexcept { return term_.hash(); }

  friend bool operator==(const Atom& a, const Atom& b) noexcept { return a.term_ == b.term_; }
  friend bool operator!=(const Atom& a, const Atom& b) noexcept { return !(a == b); }

 private:
  Term term_;
};

struct AtomHash {
  std::size_t operator()(const Atom& a) const noexcept { return a.hash(); }
};

/// Predicate identity `q/n`.
struct PredicateKey {
  Symbol name = 0;
  std::size_t arity = 0;
  friend bool operator==(const PredicateKey&, const PredicateKey&) = default;
  friend auto operator<=>(const PredicateKey&, const PredicateKey&) = default;
};

struct PredicateKeyHash {
  std::size_t operator()(const PredicateKey& k) const noexcept {
    return (static_cast<std::size_t>(k.name) << 8) ^ k.arity;
  }
};

inline PredicateKey key_of(const Atom& a) { return {a.predicate(), a.arity()}; }

struct Literal {
  Atom atom;
  bool negated = false;
  friend bool operator==(const Literal&, const Literal&) = default;
};

/// `head :- body.`; an empty body is a fact.
struct Clause {
  Atom head;
  std::vector<Literal> body;
  friend bool operator==(const Clause&, const Clause&) = default;
};

/// Triangular binding store with an undo trail.
///
/// `bind` never overwrites; `mark`/`undo` restore earlier states so that
/// backtracking search can reuse one substitution.
class Substitution {
 public:
  Substitution() = default;
  Substitution(std::initializer_list<std::pair<VarId, Term>> bindings);

  std::optional<Term> lookup(VarId id) const;
  void bind(VarId id, Term value) { bindings_.emplace_back(id, std::move(value)); }
  /// Dereferences variable chains at the top level only.
  Term walk(const Term& t) const;
  /// Applies the substitution recursively.
  Term resolve(const Term& t) const;

  std::size_t mark() const noexcept { return bindings_.size(); }
  void undo(std::size_t mark) { bindings_.resize(mark); }
  bool empty() const noexcept { return bindings_.empty(); }
  std::size_t size() const noexcept { return bindings_.size(); }
  const std::vector<std::pair<VarId, Term>>& bindings() const noexcept { return bindings_; }

  /// Equivalent substitution whose bound values are fully resolved.
  Substitution resolved() const;

 private:
  std::vector<std::pair<VarId, Term>> bindings_;
};

Term apply(const Term& t, const Substitution& s);
Atom apply(const Atom& a, const Substitution& s);
Literal apply(const Literal& l, const Substitution& s);
Clause apply(const Clause& c, const Substitution& s);

/// Extends `s` with a most general unifier of `a` and `b` (occurs-check on).
/// On failure `s` is left unchanged and false is returned.
bool unify(const Term& a, const Term& b, Substitution& s);
std::optional<Substitution> unify(const Atom& a, const Atom& b);

/// Substitution equivalent to applying `first`, then `second`. Throws
/// std::invalid_argument when a value of `second` mentions a variable bound
/// by `first`: application dereferences chains, so that composite has no
/// representation.
Substitution compose(const Substitution& first, const Substitution& second);

inline bool is_ground(const Term& t) { return t.ground(); }
inline bool is_ground(const Atom& a) { return a.ground(); }
bool is_ground(const Clause& c);

/// Adds `offset` to every variable id. Used to rename clauses apart.
Term rename(const Term& t, VarId offset);
Atom rename(const Atom& a, VarId offset);

/// Largest variable id occurring in `t` plus one (0 when ground).
VarId variable_bound(const Term& t);

std::string to_string(const Term& t);
std::string to_string(const Atom& a);
std::string to_string(const Literal& l);
std::string to_string(const Clause& c);

std::ostream& operator<<(std::ostream& os, const Term& t);
std::ostream& operator<<(std::ostream& os, const Atom& a);

}  // namespace dpl
