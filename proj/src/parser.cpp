#include "dpl/parser.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "dpl/errors.hpp"

namespace dpl {

namespace {

// ---------------------------------------------------------------------------
// Tokenizer

enum class Tok : std::uint8_t { kName, kVar, kInt, kFloat, kPunct, kEnd, kEof };

struct Token {
  Tok kind = Tok::kEof;
  std::string text;
  SourceLocation loc;
  /// True when whitespace or a comment precedes the token.
  bool spaced = false;
  /// True for names written in quotes; these are never operators.
  bool quoted = false;
};

bool symbol_char(char c) {
  static const std::string_view chars = "+-*/\\^<>=~:.?@#&$";
  return chars.find(c) != std::string_view::npos;
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      bool spaced = skip_layout();
      Token t = next();
      t.spaced = spaced;
      out.push_back(t);
      if (t.kind == Tok::kEof) break;
    }
    return out;
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  bool skip_layout() {
    bool skipped = false;
    while (pos_ < text_.size()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
        skipped = true;
      } else if (c == '%') {
        while (pos_ < text_.size() && peek() != '\n') advance();
        skipped = true;
      } else {
        break;
      }
    }
    return skipped;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw SyntaxError(what + " at line " + std::to_string(line_) + ", column " +
                          std::to_string(col_),
                      {line_, col_});
  }

  Token next() {
    Token t;
    t.loc = {line_, col_};
    if (pos_ >= text_.size()) {
      t.kind = Tok::kEof;
      return t;
    }
    char c = peek();
    auto take = [&] {
      t.text.push_back(peek());
      advance();
    };
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (std::isdigit(static_cast<unsigned char>(peek()))) take();
      t.kind = Tok::kInt;
      if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
        take();
        while (std::isdigit(static_cast<unsigned char>(peek()))) take();
        t.kind = Tok::kFloat;
      }
      if ((peek() == 'e' || peek() == 'E') &&
          (std::isdigit(static_cast<unsigned char>(peek(1))) ||
           ((peek(1) == '-' || peek(1) == '+') &&
            std::isdigit(static_cast<unsigned char>(peek(2)))))) {
        take();
        if (peek() == '-' || peek() == '+') take();
        while (std::isdigit(static_cast<unsigned char>(peek()))) take();
        t.kind = Tok::kFloat;
      }
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') take();
      t.kind = (std::isupper(static_cast<unsigned char>(c)) || c == '_') ? Tok::kVar : Tok::kName;
      return t;
    }
    if (c == '\'') {
      advance();
      for (;;) {
        if (pos_ >= text_.size()) fail("unterminated quoted atom");
        char q = peek();
        if (q == '\'') {
          if (peek(1) == '\'') {
            t.text.push_back('\'');
            advance();
            advance();
            continue;
          }
          advance();
          break;
        }
        if (q == '\\' && pos_ + 1 < text_.size()) {
          advance();
        }
        take();
      }
      t.kind = Tok::kName;
      t.quoted = true;
      return t;
    }
    if (c == '(' || c == ')' || c == '[' || c == ']' || c == ',' || c == '|' || c == '{' ||
        c == '}') {
      take();
      t.kind = Tok::kPunct;
      return t;
    }
    if (c == ';' || c == '!') {
      take();
      t.kind = Tok::kName;
      return t;
    }
    if (symbol_char(c)) {
      // A lone '.' followed by layout or end of input terminates a clause.
      if (c == '.') {
        char n = peek(1);
        if (n == '\0' || std::isspace(static_cast<unsigned char>(n)) || n == '%') {
          take();
          t.kind = Tok::kEnd;
          return t;
        }
      }
      while (symbol_char(peek())) {
        // Stop before a clause-terminating '.' glued to an operator ("X=a.").
        if (peek() == '.' && !t.text.empty() &&
            (peek(1) == '\0' || std::isspace(static_cast<unsigned char>(peek(1))) ||
             peek(1) == '%'))
          break;
        take();
      }
      t.kind = Tok::kName;
      return t;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// ---------------------------------------------------------------------------
// Operator-precedence reader producing a small syntax tree.

struct Node {
  enum class Kind : std::uint8_t { kName, kVar, kInt, kFloat, kCompound };
  Kind kind = Kind::kName;
  std::string text;
  std::int64_t int_value = 0;
  double float_value = 0.0;
  std::vector<Node> args;
  SourceLocation loc;
  bool quoted = false;

  bool is(const std::string& name, std::size_t arity) const {
    if (arity == 0) return kind == Kind::kName && text == name;
    return kind == Kind::kCompound && text == name && args.size() == arity;
  }
};

struct InfixOp {
  int priority;
  int left_max;
  int right_max;
};

std::optional<InfixOp> infix(const std::string& name) {
  static const std::map<std::string, InfixOp> ops = {
      {":-", {1200, 1199, 1199}}, {";", {1100, 1099, 1100}},  {"::", {1050, 1049, 1049}},
      {",", {1000, 999, 1000}},   {"is", {700, 699, 699}},    {"=:=", {700, 699, 699}},
      {"=\\=", {700, 699, 699}},  {"<", {700, 699, 699}},     {">", {700, 699, 699}},
      {"=<", {700, 699, 699}},    {">=", {700, 699, 699}},    {"=", {700, 699, 699}},
      {"\\=", {700, 699, 699}},   {"+", {500, 500, 499}},     {"-", {500, 500, 499}},
      {"*", {400, 400, 399}},     {"//", {400, 400, 399}},    {"mod", {400, 400, 399}},
  };
  auto it = ops.find(name);
  if (it == ops.end()) return std::nullopt;
  return it->second;
}

std::optional<int> prefix(const std::string& name) {
  if (name == "\\+") return 900;
  if (name == "-") return 200;
  return std::nullopt;
}

class Reader {
 public:
  explicit Reader(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  bool at_eof() const { return cur().kind == Tok::kEof; }
  const Token& cur() const { return toks_[i_]; }
  const Token& ahead(std::size_t k = 1) const {
    return toks_[std::min(i_ + k, toks_.size() - 1)];
  }
  void next() {
    if (i_ + 1 < toks_.size()) ++i_;
  }

  [[noreturn]] void fail(const std::string& what, const Token& at) const {
    std::string found = at.kind == Tok::kEof ? "end of input" : "'" + at.text + "'";
    throw SyntaxError(what + ", found " + found + " at line " + std::to_string(at.loc.line) +
                          ", column " + std::to_string(at.loc.column),
                      at.loc);
  }

  void expect_punct(const char* p) {
    if (cur().kind != Tok::kPunct || cur().text != p) fail(std::string("expected '") + p + "'", cur());
    next();
  }

  Node clause() {
    Node n = parse(1200);
    if (cur().kind != Tok::kEnd) fail("expected operator or end of clause '.'", cur());
    next();
    return n;
  }

  Node parse(int max_priority) {
    auto [left, left_priority] = primary(max_priority);
    for (;;) {
      const Token& t = cur();
      std::string name;
      if (t.kind == Tok::kName && !t.quoted)
        name = t.text;
      else if (t.kind == Tok::kPunct && t.text == ",")
        name = ",";
      else
        break;
      auto op = infix(name);
      if (!op || op->priority > max_priority || left_priority > op->left_max) break;
      Token op_tok = t;
      next();
      Node right = parse(op->right_max);
      Node c;
      c.kind = Node::Kind::kCompound;
      c.text = name;
      c.loc = op_tok.loc;
      c.args.push_back(std::move(left));
      c.args.push_back(std::move(right));
      left = std::move(c);
      left_priority = op->priority;
    }
    return left;
  }

 private:
  static bool starts_term(const Token& t) {
    switch (t.kind) {
      case Tok::kName:
        return !infix(t.text) || t.quoted || prefix(t.text).has_value();
      case Tok::kVar:
      case Tok::kInt:
      case Tok::kFloat:
        return true;
      case Tok::kPunct:
        return t.text == "(" || t.text == "[";
      default:
        return false;
    }
  }

  std::pair<Node, int> primary(int max_priority) {
    Token t = cur();
    Node n;
    n.loc = t.loc;
    switch (t.kind) {
      case Tok::kInt: {
        next();
        n.kind = Node::Kind::kInt;
        auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), n.int_value);
        if (res.ec != std::errc()) fail("integer out of range", t);
        return {n, 0};
      }
      case Tok::kFloat:
        next();
        n.kind = Node::Kind::kFloat;
        n.float_value = std::strtod(t.text.c_str(), nullptr);
        return {n, 0};
      case Tok::kVar:
        next();
        n.kind = Node::Kind::kVar;
        n.text = t.text;
        return {n, 0};
      case Tok::kPunct:
        if (t.text == "(") {
          next();
          Node inner = parse(1200);
          expect_punct(")");
          return {inner, 0};
        }
        if (t.text == "[") return {list(), 0};
        fail("unexpected punctuation", t);
      case Tok::kName:
        break;
      case Tok::kEnd:
      case Tok::kEof:
        fail("unexpected end of clause", t);
    }
    next();
    n.kind = Node::Kind::kName;
    n.text = t.text;
    n.quoted = t.quoted;
    // Functional notation: name immediately followed by '('.
    if (cur().kind == Tok::kPunct && cur().text == "(" && !cur().spaced) {
      next();
      n.kind = Node::Kind::kCompound;
      n.args.push_back(parse(999));
      while (cur().kind == Tok::kPunct && cur().text == ",") {
        next();
        n.args.push_back(parse(999));
      }
      expect_punct(")");
      return {n, 0};
    }
    if (!t.quoted) {
      // Negative numeric literal.
      if (t.text == "-" && (cur().kind == Tok::kInt || cur().kind == Tok::kFloat) &&
          !cur().spaced) {
        auto [num, p] = primary(0);
        if (num.kind == Node::Kind::kInt)
          num.int_value = -num.int_value;
        else
          num.float_value = -num.float_value;
        num.loc = t.loc;
        return {num, 0};
      }
      if (auto pp = prefix(t.text); pp && starts_term(cur())) {
        int priority = *pp;
        if (priority > max_priority) priority = 999;
        Node arg = parse(priority);
        n.kind = Node::Kind::kCompound;
        n.args.push_back(std::move(arg));
        return {n, priority};
      }
      if (infix(t.text)) return {n, 1201 > max_priority ? 0 : 1201};
    }
    return {n, 0};
  }

  Node list() {
    Token open = cur();
    expect_punct("[");
    std::vector<Node> items;
    Node tail;
    tail.kind = Node::Kind::kName;
    tail.text = "[]";
    tail.loc = open.loc;
    if (cur().kind == Tok::kPunct && cur().text == "]") {
      next();
      return tail;
    }
    items.push_back(parse(999));
    while (cur().kind == Tok::kPunct && cur().text == ",") {
      next();
      items.push_back(parse(999));
    }
    if (cur().kind == Tok::kPunct && cur().text == "|") {
      next();
      tail = parse(999);
    }
    expect_punct("]");
    items = expand_ranges(std::move(items), open);
    Node out = tail;
    for (auto it = items.rbegin(); it != items.rend(); ++it) {
      Node c;
      c.kind = Node::Kind::kCompound;
      c.text = ".";
      c.loc = it->loc;
      c.args.push_back(std::move(*it));
      c.args.push_back(std::move(out));
      out = std::move(c);
    }
    return out;
  }

  std::vector<Node> expand_ranges(std::vector<Node> items, const Token& open) {
    std::vector<Node> out;
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (!items[k].is("...", 0) || items[k].quoted) {
        out.push_back(std::move(items[k]));
        continue;
      }
      if (out.empty() || k + 1 >= items.size() || out.back().kind != Node::Kind::kInt ||
          items[k + 1].kind != Node::Kind::kInt)
        throw SyntaxError("range '...' needs integer endpoints at line " +
                              std::to_string(items[k].loc.line) + ", column " +
                              std::to_string(items[k].loc.column),
                          items[k].loc);
      std::int64_t lo = out.back().int_value;
      std::int64_t hi = items[k + 1].int_value;
      if (hi < lo)
        throw SyntaxError("empty range in list at line " + std::to_string(open.loc.line),
                          open.loc);
      for (std::int64_t v = lo + 1; v < hi; ++v) {
        Node n;
        n.kind = Node::Kind::kInt;
        n.int_value = v;
        n.loc = items[k].loc;
        out.push_back(n);
      }
    }
    return out;
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

// ---------------------------------------------------------------------------
// Syntax tree to program model.

std::string where(const SourceLocation& loc) {
  return " at line " + std::to_string(loc.line) + ", column " + std::to_string(loc.column);
}

class ClauseScope {
 public:
  Term var(const std::string& name) {
    if (name == "_") return Term::variable(next_++, intern("_"));
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    Term v = Term::variable(next_++, intern(name));
    vars_.emplace(name, v);
    return v;
  }
  VarId count() const { return next_; }

 private:
  std::map<std::string, Term> vars_;
  VarId next_ = 0;
};

Term to_term(const Node& n, ClauseScope& scope) {
  switch (n.kind) {
    case Node::Kind::kName:
      return Term::atom(n.text);
    case Node::Kind::kVar:
      return scope.var(n.text);
    case Node::Kind::kInt:
      return Term::integer(n.int_value);
    case Node::Kind::kFloat:
      throw SyntaxError("floating-point numbers may only annotate probabilities" + where(n.loc),
                        n.loc);
    case Node::Kind::kCompound: {
      std::vector<Term> args;
      args.reserve(n.args.size());
      for (const auto& a : n.args) args.push_back(to_term(a, scope));
      return Term::compound(n.text, std::move(args));
    }
  }
  return {};
}

Atom to_atom(const Node& n, ClauseScope& scope) {
  if (n.kind == Node::Kind::kVar || n.kind == Node::Kind::kInt || n.kind == Node::Kind::kFloat)
    throw SyntaxError("callable term expected" + where(n.loc), n.loc);
  return Atom::from_term(to_term(n, scope));
}

void flatten(const Node& n, const std::string& op, std::vector<const Node*>& out) {
  if (n.is(op, 2) && !n.quoted) {
    flatten(n.args[0], op, out);
    flatten(n.args[1], op, out);
  } else {
    out.push_back(&n);
  }
}

std::vector<Literal> to_body(const Node& n, ClauseScope& scope) {
  std::vector<const Node*> parts;
  flatten(n, ",", parts);
  std::vector<Literal> body;
  for (const Node* p : parts) {
    if (p->is("\\+", 1))
      body.push_back({to_atom(p->args[0], scope), true});
    else if (p->is(";", 2))
      throw SyntaxError("disjunction in rule bodies is not supported" + where(p->loc), p->loc);
    else
      body.push_back({to_atom(*p, scope), false});
  }
  return body;
}

double number_of(const Node& n) {
  if (n.kind == Node::Kind::kInt) return static_cast<double>(n.int_value);
  if (n.kind == Node::Kind::kFloat) return n.float_value;
  throw SyntaxError("probability must be a number" + where(n.loc), n.loc);
}

class ProgramBuilder {
 public:
  Program build(std::string_view text) {
    Reader reader(Lexer(text).run());
    while (!reader.at_eof()) handle(reader.clause());
    return std::move(program_);
  }

 private:
  void handle(const Node& top) {
    if (top.is(":-", 1))
      throw SyntaxError("directives are not supported" + where(top.loc), top.loc);
    const Node* head = &top;
    const Node* body = nullptr;
    if (top.is(":-", 2)) {
      head = &top.args[0];
      body = &top.args[1];
    }
    ClauseScope scope;
    if (head->is("query", 1) && body == nullptr) {
      program_.queries.push_back(to_atom(head->args[0], scope));
      return;
    }
    std::vector<const Node*> disjuncts;
    flatten(*head, ";", disjuncts);
    bool annotated = false;
    for (const Node* d : disjuncts) annotated = annotated || d->is("::", 2);
    if (!annotated) {
      if (disjuncts.size() > 1)
        throw SyntaxError("disjunctive heads need probability annotations" + where(head->loc),
                          head->loc);
      Rule r;
      r.clause.head = to_atom(*head, scope);
      if (body) r.clause.body = to_body(*body, scope);
      r.variable_count = scope.count();
      add(ClauseRef::Kind::kRule, program_.rules, std::move(r));
      return;
    }
    const Node& first = *disjuncts.front();
    if (!first.is("::", 2))
      throw SyntaxError("first head of a disjunction must be annotated" + where(first.loc),
                        first.loc);
    if (first.args[0].is("nn", first.args[0].args.size()) && first.args[0].kind == Node::Kind::kCompound)
      neural(first, disjuncts, body, scope);
    else
      disjunction(disjuncts, body, scope);
  }

  ProbSpec annotation(const Node& n, std::vector<double>& learnable_init) {
    if (n.is("t", 1)) {
      double v = number_of(n.args[0]);
      check_range(v, n.loc);
      learnable_init.push_back(v);
      return ProbSpec::learnable(v, program_.initial_parameters.size() + learnable_init.size() - 1);
    }
    double v = number_of(n);
    check_range(v, n.loc);
    return ProbSpec::fixed(v);
  }

  static void check_range(double v, const SourceLocation& loc) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ProgramError("probability " + format_probability(v) + " outside [0,1]" + where(loc),
                         loc);
  }

  void disjunction(const std::vector<const Node*>& disjuncts, const Node* body,
                   ClauseScope& scope) {
    AnnotatedDisjunction ad;
    std::vector<double> init;
    double fixed_sum = 0.0;
    bool any_fixed = false;
    for (const Node* d : disjuncts) {
      if (!d->is("::", 2))
        throw SyntaxError("every head of an annotated disjunction needs a probability" +
                              where(d->loc),
                          d->loc);
      ProbSpec p = annotation(d->args[0], init);
      if (!p.is_learnable()) {
        fixed_sum += p.value;
        any_fixed = true;
      }
      ad.heads.push_back({p, to_atom(d->args[1], scope)});
    }
    const SourceLocation loc = disjuncts.front()->loc;
    if (any_fixed && !init.empty())
      throw ProgramError("annotated disjunction mixes fixed and learnable probabilities" +
                             where(loc),
                         loc);
    if (fixed_sum > 1.0 + 1e-9)
      throw ProgramError("annotated disjunction probabilities sum to " +
                             format_probability(fixed_sum) + " > 1" + where(loc),
                         loc);
    if (body) ad.body = to_body(*body, scope);
    ad.variable_count = scope.count();

    if (!init.empty()) {
      ParameterGroup group;
      group.normalized = init.size() > 1;
      if (group.normalized) {
        double s = 0.0;
        for (double v : init) s += v;
        if (s <= 0.0)
          throw ProgramError("learnable disjunction has zero total probability" + where(loc), loc);
        for (double& v : init) v /= s;
        for (std::size_t k = 0; k < ad.heads.size(); ++k) ad.heads[k].probability.value = init[k];
      }
      for (std::size_t k = 0; k < ad.heads.size(); ++k) {
        group.parameters.push_back(ad.heads[k].probability.parameter);
        group.labels.push_back(to_string(ad.heads[k].atom));
      }
      program_.initial_parameters.insert(program_.initial_parameters.end(), init.begin(),
                                         init.end());
      program_.parameter_groups.push_back(std::move(group));
    }

    if (ad.heads.size() == 1 && ad.body.empty()) {
      add(ClauseRef::Kind::kFact, program_.facts,
          ProbabilisticFact{ad.heads[0].probability, ad.heads[0].atom, ad.variable_count});
      return;
    }
    add(ClauseRef::Kind::kAd, program_.ads, std::move(ad));
  }

  void neural(const Node& first, const std::vector<const Node*>& disjuncts, const Node* body,
              ClauseScope& scope) {
    const Node& ann = first.args[0];
    if (ann.args.size() < 3)
      throw SyntaxError("nn/N needs a model, at least one input and a domain" + where(ann.loc),
                        ann.loc);
    if (ann.args[0].kind != Node::Kind::kName)
      throw SyntaxError("neural model identifier must be a constant" + where(ann.args[0].loc),
                        ann.args[0].loc);
    NeuralAD nad;
    nad.model = intern(ann.args[0].text);
    for (std::size_t k = 1; k + 1 < ann.args.size(); ++k)
      nad.inputs.push_back(to_term(ann.args[k], scope));
    Term domain = to_term(ann.args.back(), scope);
    while (domain.is_cons()) {
      nad.domain.push_back(domain.args()[0]);
      domain = domain.args()[1];
    }
    if (!domain.is_nil() || nad.domain.empty())
      throw SyntaxError("neural domain must be a non-empty proper list" + where(ann.args.back().loc),
                        ann.args.back().loc);
    for (std::size_t a = 0; a < nad.domain.size(); ++a) {
      if (!nad.domain[a].ground())
        throw ProgramError("neural domain values must be ground" + where(ann.loc), ann.loc);
      for (std::size_t b = 0; b < a; ++b)
        if (nad.domain[a] == nad.domain[b])
          throw ProgramError("duplicate neural domain value " + to_string(nad.domain[a]) +
                                 where(ann.loc),
                             ann.loc);
    }

    std::vector<Atom> written;
    std::vector<bool> ellipsis;
    written.push_back(to_atom(first.args[1], scope));
    ellipsis.push_back(false);
    for (std::size_t k = 1; k < disjuncts.size(); ++k) {
      const Node* d = disjuncts[k];
      if (d->is("::", 2))
        throw SyntaxError("heads after the first of a neural AD are not annotated" + where(d->loc),
                          d->loc);
      if (d->is("...", 0)) {
        ellipsis.back() = true;
        continue;
      }
      written.push_back(to_atom(*d, scope));
      ellipsis.push_back(false);
    }
    const Atom& proto = written.front();
    if (proto.arity() == 0)
      throw ProgramError("neural AD heads need an output argument" + where(first.loc), first.loc);
    auto with_value = [&](const Term& value) {
      std::vector<Term> args(proto.args().begin(), proto.args().end());
      args.back() = value;
      return Atom(proto.predicate(), std::move(args));
    };
    bool has_ellipsis = false;
    for (bool e : ellipsis) has_ellipsis = has_ellipsis || e;
    if (has_ellipsis) {
      for (const Term& v : nad.domain) nad.heads.push_back(with_value(v));
    } else {
      nad.heads = written;
    }
    if (nad.heads.size() != nad.domain.size())
      throw ProgramError("neural AD has " + std::to_string(written.size()) + " heads but a domain of " +
                             std::to_string(nad.domain.size()) + where(first.loc),
                         first.loc);
    for (const Atom& w : written) {
      bool found = false;
      for (const Atom& h : nad.heads) found = found || h == w;
      std::vector<Term> prefix_w(w.args().begin(), w.args().end());
      if (!found || w.predicate() != proto.predicate() || w.arity() != proto.arity())
        throw ProgramError("neural AD head " + to_string(w) +
                               " does not match the domain/head pattern" + where(first.loc),
                           first.loc);
    }
    for (std::size_t k = 0; k < nad.heads.size(); ++k) {
      if (!(with_value(nad.domain[k]) == nad.heads[k]))
        throw ProgramError("neural AD heads must differ only in their last argument" +
                               where(first.loc),
                           first.loc);
    }
    PredicateKey key = key_of(proto);
    if (!neural_predicates_.insert(key).second)
      throw ProgramError("duplicate model binding for predicate " + symbol_name(key.name) + "/" +
                             std::to_string(key.arity) + where(first.loc),
                         first.loc);
    if (body) nad.body = to_body(*body, scope);
    nad.variable_count = scope.count();
    add(ClauseRef::Kind::kNad, program_.nads, std::move(nad));
  }

  template <class T>
  void add(ClauseRef::Kind kind, std::vector<T>& into, T value) {
    program_.order.push_back({kind, into.size()});
    into.push_back(std::move(value));
  }

  Program program_;
  std::set<PredicateKey> neural_predicates_;
};

}  // namespace

Program parse_program(std::string_view text) { return ProgramBuilder().build(text); }

Term parse_term(std::string_view text) {
  std::vector<Token> toks = Lexer(text).run();
  Reader reader(std::move(toks));
  Node n = reader.parse(1200);
  if (reader.cur().kind == Tok::kEnd) reader.next();
  if (!reader.at_eof()) reader.fail("unexpected trailing input", reader.cur());
  ClauseScope scope;
  return to_term(n, scope);
}

Atom parse_atom(std::string_view text) {
  Term t = parse_term(text);
  if (t.is_variable() || t.is_integer())
    throw SyntaxError("atom expected, found " + to_string(t), {1, 1});
  return Atom::from_term(t);
}

std::vector<QueryExample> parse_dataset(std::string_view text) {
  std::vector<QueryExample> out;
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    std::vector<Token> toks;
    try {
      toks = Lexer(line).run();
    } catch (const SyntaxError& e) {
      throw DatasetError("line " + std::to_string(line_no) + ": " + e.what(), {line_no, 1});
    }
    if (toks.front().kind == Tok::kEof) {
      if (end == text.size()) break;
      continue;
    }
    Reader reader(std::move(toks));
    QueryExample ex;
    try {
      Node n = reader.parse(999);
      ClauseScope scope;
      ex.query = to_atom(n, scope);
    } catch (const SyntaxError& e) {
      throw DatasetError("line " + std::to_string(line_no) + ": " + e.what(), {line_no, 1});
    }
    if (reader.cur().kind == Tok::kInt || reader.cur().kind == Tok::kFloat) {
      ex.target = std::strtod(reader.cur().text.c_str(), nullptr);
      reader.next();
    }
    if (reader.cur().kind == Tok::kEnd) reader.next();
    if (!reader.at_eof())
      throw DatasetError("line " + std::to_string(line_no) + ": unexpected '" + reader.cur().text +
                             "'",
                         {line_no, reader.cur().loc.column});
    if (!ex.query.ground())
      throw DatasetError("line " + std::to_string(line_no) + ": query " + to_string(ex.query) +
                             " is not ground",
                         {line_no, 1});
    if (!(ex.target >= 0.0 && ex.target <= 1.0))
      throw DatasetError("line " + std::to_string(line_no) + ": target probability " +
                             format_probability(ex.target) + " outside [0,1]",
                         {line_no, 1});
    out.push_back(std::move(ex));
    if (end == text.size()) break;
  }
  return out;
}

VectorTable parse_vectors(std::string_view text) {
  VectorTable out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find_first_of("%#");
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    std::vector<double> values;
    std::string tok;
    while (ls >> tok) {
      char* endp = nullptr;
      double v = std::strtod(tok.c_str(), &endp);
      if (endp == tok.c_str() || *endp != '\0')
        throw DatasetError("vectors line " + std::to_string(line_no) + ": bad number '" + tok + "'",
                           {line_no, 1});
      values.push_back(v);
    }
    if (values.empty())
      throw DatasetError("vectors line " + std::to_string(line_no) + ": no values for " + name,
                         {line_no, 1});
    out[intern(name)] = std::move(values);
  }
  return out;
}

std::string format_vectors(const VectorTable& table, const std::vector<Symbol>& order) {
  std::ostringstream os;
  char buf[32];
  for (Symbol s : order) {
    auto it = table.find(s);
    if (it == table.end()) continue;
    os << symbol_name(s);
    for (double v : it->second) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ' ' << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace dpl
