#include "dpl/term.hpp"

#include <cctype>
#include <deque>
#include <functional>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "dpl/errors.hpp"

namespace dpl {

namespace {

class SymbolTable {
 public:
  SymbolTable() {
    intern("[]");
    intern(".");
  }

  Symbol intern(std::string_view name) {
    {
      std::shared_lock lock(mutex_);
      auto it = index_.find(name);
      if (it != index_.end()) return it->second;
    }
    std::unique_lock lock(mutex_);
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    names_.emplace_back(name);
    auto id = static_cast<Symbol>(names_.size() - 1);
    index_.emplace(std::string_view(names_.back()), id);
    return id;
  }

  const std::string& name(Symbol s) {
    std::shared_lock lock(mutex_);
    return names_.at(s);
  }

 private:
  std::shared_mutex mutex_;
  std::deque<std::string> names_;
  std::unordered_map<std::string_view, Symbol> index_;
};

SymbolTable& table() {
  static SymbolTable instance;
  return instance;
}

constexpr std::size_t kMix = 0x9e3779b97f4a7c15ULL;

std::size_t mix(std::size_t seed, std::size_t v) {
  return seed ^ (v + kMix + (seed << 6) + (seed >> 2));
}

std::size_t leaf_hash(Term::Kind kind, Symbol symbol, std::int64_t value) {
  switch (kind) {
    case Term::Kind::kAtom:
      return mix(0x51, symbol);
    case Term::Kind::kInteger:
      return mix(0x77, static_cast<std::size_t>(value));
    case Term::Kind::kVariable:
      return mix(0x33, static_cast<std::size_t>(value));
    case Term::Kind::kCompound:
      break;
  }
  return 0;
}

}  // namespace

Symbol intern(std::string_view name) { return table().intern(name); }

const std::string& symbol_name(Symbol symbol) { return table().name(symbol); }

// ---------------------------------------------------------------------------
// Term

Term Term::atom(Symbol name) noexcept {
  Term t;
  t.kind_ = Kind::kAtom;
  t.symbol_ = name;
  return t;
}

Term Term::integer(std::int64_t value) noexcept {
  Term t;
  t.kind_ = Kind::kInteger;
  t.symbol_ = 0;
  t.value_ = value;
  return t;
}

Term Term::variable(VarId id, Symbol name) noexcept {
  Term t;
  t.kind_ = Kind::kVariable;
  t.symbol_ = name;
  t.value_ = id;
  return t;
}

Term Term::compound(Symbol functor, std::vector<Term> args) {
  if (args.empty()) return atom(functor);
  auto node = std::make_shared<CompoundNode>();
  std::size_t h = mix(0x91, functor);
  h = mix(h, args.size());
  bool ground = true;
  for (const auto& a : args) {
    h = mix(h, a.hash());
    ground = ground && a.ground();
  }
  node->args = std::move(args);
  node->hash = h;
  node->ground = ground;
  Term t;
  t.kind_ = Kind::kCompound;
  t.symbol_ = functor;
  t.node_ = std::move(node);
  return t;
}

Term Term::cons(Term head, Term tail) {
  return compound(kConsSymbol, {std::move(head), std::move(tail)});
}

Term Term::list(std::span<const Term> items, Term tail) {
  Term out = std::move(tail);
  for (auto it = items.rbegin(); it != items.rend(); ++it) out = cons(*it, std::move(out));
  return out;
}

Term Term::list(std::span<const Term> items) { return list(items, Term()); }

std::span<const Term> Term::args() const noexcept {
  if (kind_ != Kind::kCompound) return {};
  return node_->args;
}

std::size_t Term::arity() const noexcept {
  return kind_ == Kind::kCompound ? node_->args.size() : 0;
}

bool Term::ground() const noexcept {
  switch (kind_) {
    case Kind::kVariable:
      return false;
    case Kind::kCompound:
      return node_->ground;
    default:
      return true;
  }
}

std::size_t Term::hash() const noexcept {
  if (kind_ == Kind::kCompound) return node_->hash;
  return leaf_hash(kind_, symbol_, value_);
}

bool operator==(const Term& a, const Term& b) noexcept {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case Term::Kind::kAtom:
      return a.symbol_ == b.symbol_;
    case Term::Kind::kInteger:
    case Term::Kind::kVariable:
      return a.value_ == b.value_;
    case Term::Kind::kCompound: {
      if (a.node_ == b.node_) return true;
      if (a.symbol_ != b.symbol_ || a.node_->hash != b.node_->hash) return false;
      const auto& x = a.node_->args;
      const auto& y = b.node_->args;
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i] == y[i])) return false;
      return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Atom

Atom::Atom(Symbol predicate, std::vector<Term> args)
    : term_(Term::compound(predicate, std::move(args))) {}

Atom Atom::from_term(Term t) {
  if (t.is_variable() || t.is_integer())
    throw TypeError("callable term expected, found " + to_string(t));
  Atom a;
  a.term_ = std::move(t);
  return a;
}

// ---------------------------------------------------------------------------
// Substitution

Substitution::Substitution(std::initializer_list<std::pair<VarId, Term>> bindings)
    : bindings_(bindings) {}

std::optional<Term> Substitution::lookup(VarId id) const {
  for (auto it = bindings_.rbegin(); it != bindings_.rend(); ++it)
    if (it->first == id) return it->second;
  return std::nullopt;
}

Term Substitution::walk(const Term& t) const {
  Term cur = t;
  while (cur.is_variable()) {
    auto bound = lookup(cur.var_id());
    if (!bound) break;
    cur = *bound;
  }
  return cur;
}

Term Substitution::resolve(const Term& t) const {
  if (t.ground() || bindings_.empty()) return t;
  if (t.is_variable()) {
    Term w = walk(t);
    if (w.is_variable()) return w;
    return resolve(w);
  }
  std::vector<Term> args;
  args.reserve(t.arity());
  bool changed = false;
  for (const auto& a : t.args()) {
    args.push_back(resolve(a));
    changed = changed || !(args.back() == a);
  }
  if (!changed) return t;
  return Term::compound(t.symbol(), std::move(args));
}

Substitution Substitution::resolved() const {
  Substitution out;
  std::vector<VarId> seen;
  for (auto it = bindings_.rbegin(); it != bindings_.rend(); ++it) {
    bool dup = false;
    for (VarId v : seen) dup = dup || v == it->first;
    if (dup) continue;
    seen.push_back(it->first);
  }
  for (auto it = seen.rbegin(); it != seen.rend(); ++it)
    out.bind(*it, resolve(Term::variable(*it, 0)));
  return out;
}

Term apply(const Term& t, const Substitution& s) { return s.resolve(t); }

Atom apply(const Atom& a, const Substitution& s) { return Atom::from_term(s.resolve(a.as_term())); }

Literal apply(const Literal& l, const Substitution& s) { return {apply(l.atom, s), l.negated}; }

Clause apply(const Clause& c, const Substitution& s) {
  Clause out{apply(c.head, s), {}};
  out.body.reserve(c.body.size());
  for (const auto& l : c.body) out.body.push_back(apply(l, s));
  return out;
}

namespace {

bool occurs(VarId v, const Term& t, const Substitution& s) {
  if (t.ground()) return false;
  Term w = s.walk(t);
  if (w.is_variable()) return w.var_id() == v;
  for (const auto& a : w.args())
    if (occurs(v, a, s)) return true;
  return false;
}

bool unify_rec(const Term& a, const Term& b, Substitution& s) {
  Term x = s.walk(a);
  Term y = s.walk(b);
  if (x.is_variable() && y.is_variable() && x.var_id() == y.var_id()) return true;
  if (x.is_variable()) {
    if (occurs(x.var_id(), y, s)) return false;
    s.bind(x.var_id(), y);
    return true;
  }
  if (y.is_variable()) {
    if (occurs(y.var_id(), x, s)) return false;
    s.bind(y.var_id(), x);
    return true;
  }
  if (x.kind() != y.kind()) return false;
  switch (x.kind()) {
    case Term::Kind::kAtom:
      return x.symbol() == y.symbol();
    case Term::Kind::kInteger:
      return x.integer_value() == y.integer_value();
    case Term::Kind::kCompound: {
      if (x.ground() && y.ground()) return x == y;
      if (x.symbol() != y.symbol() || x.arity() != y.arity()) return false;
      auto xs = x.args();
      auto ys = y.args();
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (!unify_rec(xs[i], ys[i], s)) return false;
      return true;
    }
    case Term::Kind::kVariable:
      break;
  }
  return false;
}

}  // namespace

bool unify(const Term& a, const Term& b, Substitution& s) {
  auto m = s.mark();
  if (unify_rec(a, b, s)) return true;
  s.undo(m);
  return false;
}

std::optional<Substitution> unify(const Atom& a, const Atom& b) {
  Substitution s;
  if (!unify(a.as_term(), b.as_term(), s)) return std::nullopt;
  return s.resolved();
}

Substitution compose(const Substitution& first, const Substitution& second) {
  Substitution a = first.resolved();
  Substitution b = second.resolved();
  // Bindings are dereferenced on application, so a value of `second` that
  // mentions a variable bound by `first` would be rewritten twice.
  std::function<bool(const Term&)> mentions_first = [&](const Term& t) {
    if (t.ground()) return false;
    if (t.is_variable()) return a.lookup(t.var_id()).has_value();
    for (const auto& arg : t.args())
      if (mentions_first(arg)) return true;
    return false;
  };
  for (const auto& [v, t] : b.bindings())
    if (mentions_first(t)) throw std::invalid_argument("compose: second substitution's range meets first's domain");
  Substitution out;
  for (const auto& [v, t] : a.bindings()) {
    Term r = b.resolve(t);
    if (r.is_variable() && r.var_id() == v) continue;
    out.bind(v, r);
  }
  for (const auto& [v, t] : b.bindings()) {
    if (!a.lookup(v)) out.bind(v, t);
  }
  return out;
}

bool is_ground(const Clause& c) {
  if (!c.head.ground()) return false;
  for (const auto& l : c.body)
    if (!l.atom.ground()) return false;
  return true;
}

Term rename(const Term& t, VarId offset) {
  if (t.ground() || offset == 0) return t;
  if (t.is_variable()) return Term::variable(t.var_id() + offset, t.symbol());
  std::vector<Term> args;
  args.reserve(t.arity());
  for (const auto& a : t.args()) args.push_back(rename(a, offset));
  return Term::compound(t.symbol(), std::move(args));
}

Atom rename(const Atom& a, VarId offset) { return Atom::from_term(rename(a.as_term(), offset)); }

VarId variable_bound(const Term& t) {
  if (t.ground()) return 0;
  if (t.is_variable()) return t.var_id() + 1;
  VarId m = 0;
  for (const auto& a : t.args()) m = std::max(m, variable_bound(a));
  return m;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

struct OpInfo {
  int priority;
  int left_max;
  int right_max;
  bool word;
};

std::optional<OpInfo> infix_op(const std::string& name) {
  if (name == "is") return OpInfo{700, 699, 699, true};
  if (name == "=:=" || name == "=\\=" || name == "<" || name == ">" || name == "=<" ||
      name == ">=" || name == "=" || name == "\\=")
    return OpInfo{700, 699, 699, false};
  if (name == "+" || name == "-") return OpInfo{500, 500, 499, false};
  if (name == "*" || name == "//") return OpInfo{400, 400, 399, false};
  if (name == "mod") return OpInfo{400, 400, 399, true};
  return std::nullopt;
}

bool is_symbol_char(char c) {
  static const std::string_view chars = "+-*/\\^<>=~:.?@#&$";
  return chars.find(c) != std::string_view::npos;
}

bool needs_quotes(const std::string& name) {
  if (name.empty()) return true;
  if (name == "[]" || name == "!" || name == ";" || name == ",") return name == ",";
  if (name[0] >= 'a' && name[0] <= 'z') {
    for (char c : name)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return true;
    return false;
  }
  for (char c : name)
    if (!is_symbol_char(c)) return true;
  return false;
}

void write_name(std::ostream& os, const std::string& name) {
  if (!needs_quotes(name)) {
    os << name;
    return;
  }
  os << '\'';
  for (char c : name) {
    if (c == '\'' || c == '\\') os << '\\';
    os << c;
  }
  os << '\'';
}

void write(std::ostream& os, const Term& t, int max_priority, bool operand);

void write_list(std::ostream& os, const Term& t) {
  os << '[';
  Term cur = t;
  bool first = true;
  while (cur.is_cons()) {
    if (!first) os << ',';
    first = false;
    write(os, cur.args()[0], 999, false);
    cur = cur.args()[1];
  }
  if (!cur.is_nil()) {
    os << '|';
    write(os, cur, 999, false);
  }
  os << ']';
}

void write(std::ostream& os, const Term& t, int max_priority, bool operand) {
  switch (t.kind()) {
    case Term::Kind::kAtom:
      write_name(os, symbol_name(t.symbol()));
      return;
    case Term::Kind::kInteger:
      if (operand && t.integer_value() < 0)
        os << '(' << t.integer_value() << ')';
      else
        os << t.integer_value();
      return;
    case Term::Kind::kVariable:
      os << symbol_name(t.symbol());
      return;
    case Term::Kind::kCompound:
      break;
  }
  if (t.is_cons()) {
    write_list(os, t);
    return;
  }
  const std::string& name = symbol_name(t.symbol());
  if (t.arity() == 2) {
    if (auto op = infix_op(name)) {
      bool paren = op->priority > max_priority;
      if (paren) os << '(';
      write(os, t.args()[0], op->left_max, true);
      if (op->word)
        os << ' ' << name << ' ';
      else
        os << name;
      write(os, t.args()[1], op->right_max, true);
      if (paren) os << ')';
      return;
    }
  }
  if (t.arity() == 1 && name == "-") {
    bool paren = 200 > max_priority;
    if (paren) os << '(';
    os << "-(";
    write(os, t.args()[0], 1200, false);
    os << ')';
    if (paren) os << ')';
    return;
  }
  write_name(os, name);
  os << '(';
  bool first = true;
  for (const auto& a : t.args()) {
    if (!first) os << ',';
    first = false;
    write(os, a, 999, false);
  }
  os << ')';
}

}  // namespace

std::ostream& operator<<(std::ostream& os, const Term& t) {
  write(os, t, 1200, false);
  return os;
}

std::ostream& operator<<(std::ostream& os, const Atom& a) { return os << a.as_term(); }

std::string to_string(const Term& t) {
  std::ostringstream os;
  write(os, t, 999, false);
  return os.str();
}

std::string to_string(const Atom& a) { return to_string(a.as_term()); }

std::string to_string(const Literal& l) {
  return l.negated ? "\\+" + to_string(l.atom) : to_string(l.atom);
}

std::string to_string(const Clause& c) {
  std::string out = to_string(c.head);
  if (!c.body.empty()) {
    out += " :- ";
    for (std::size_t i = 0; i < c.body.size(); ++i) {
      if (i) out += ", ";
      out += to_string(c.body[i]);
    }
  }
  out += '.';
  return out;
}

}  // namespace dpl
