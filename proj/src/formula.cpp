#include "modal/formula.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

#include "modal/error.hpp"

namespace modal {

namespace {

size_t mix(size_t h, size_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::shared_ptr<const Formula::Node> make_node(Op op, std::string name,
                                               std::shared_ptr<const Formula::Node> a,
                                               std::shared_ptr<const Formula::Node> b) {
  int depth = 0;
  if (a) depth = a->depth;
  if (b) depth = std::max(depth, b->depth);
  if (op == Op::Box || op == Op::Diamond) depth += 1;
  size_t h = static_cast<size_t>(op) * 0x9e3779b97f4a7c15ULL;
  h = mix(h, std::hash<std::string>{}(name));
  if (a) h = mix(h, a->hash);
  if (b) h = mix(h, b->hash);
  return std::make_shared<const Formula::Node>(
      Formula::Node{op, std::move(name), std::move(a), std::move(b), depth, h});
}

}  // namespace

Formula Formula::top() {
  static const Formula t{make_node(Op::Top, "", nullptr, nullptr)};
  return t;
}

Formula Formula::atom(std::string name) {
  return Formula(make_node(Op::Atom, std::move(name), nullptr, nullptr));
}

Formula Formula::neg(Formula f) {
  return Formula(make_node(Op::Neg, "", std::move(f.n_), nullptr));
}

Formula Formula::conj(Formula l, Formula r) {
  return Formula(make_node(Op::And, "", std::move(l.n_), std::move(r.n_)));
}

Formula Formula::disj(Formula l, Formula r) {
  return Formula(make_node(Op::Or, "", std::move(l.n_), std::move(r.n_)));
}

Formula Formula::implies(Formula l, Formula r) {
  return Formula(make_node(Op::Implies, "", std::move(l.n_), std::move(r.n_)));
}

Formula Formula::box(std::string agent, Formula f) {
  return Formula(make_node(Op::Box, std::move(agent), std::move(f.n_), nullptr));
}

Formula Formula::diamond(std::string agent, Formula f) {
  return Formula(make_node(Op::Diamond, std::move(agent), std::move(f.n_), nullptr));
}

Formula Formula::conj_all(const std::vector<Formula>& fs) {
  if (fs.empty()) return top();
  Formula acc = fs.back();
  for (size_t i = fs.size() - 1; i-- > 0;) acc = conj(fs[i], acc);
  return acc;
}

Formula Formula::disj_all(const std::vector<Formula>& fs) {
  if (fs.empty()) return neg(top());
  Formula acc = fs.back();
  for (size_t i = fs.size() - 1; i-- > 0;) acc = disj(fs[i], acc);
  return acc;
}

bool Formula::operator==(const Formula& o) const {
  struct Cmp {
    bool eq(const Node* x, const Node* y) {
      if (x == y) return true;
      if (x->op != y->op || x->hash != y->hash || x->name != y->name) return false;
      if (!!x->a != !!y->a || !!x->b != !!y->b) return false;
      if (x->a && !eq(x->a.get(), y->a.get())) return false;
      if (x->b && !eq(x->b.get(), y->b.get())) return false;
      return true;
    }
  };
  return Cmp{}.eq(n_.get(), o.n_.get());
}

Formula Formula::nnf() const {
  // Memoized on (node, polarity): negation-sharing keeps DAGs linear.
  struct Builder {
    std::unordered_map<const Node*, Formula> pos, neg;

    Formula run(const Formula& f, bool negated) {
      auto& memo = negated ? neg : pos;
      if (auto it = memo.find(f.node()); it != memo.end()) return it->second;
      Formula out = build(f, negated);
      memo.emplace(f.node(), out);
      return out;
    }

    Formula build(const Formula& f, bool negated) {
      switch (f.op()) {
        case Op::Top:
          return negated ? Formula::neg(Formula::top()) : Formula::top();
        case Op::Atom:
          return negated ? Formula::neg(f) : f;
        case Op::Neg:
          return run(f.child(), !negated);
        case Op::And:
          return negated ? Formula::disj(run(f.left(), true), run(f.right(), true))
                         : Formula::conj(run(f.left(), false), run(f.right(), false));
        case Op::Or:
          return negated ? Formula::conj(run(f.left(), true), run(f.right(), true))
                         : Formula::disj(run(f.left(), false), run(f.right(), false));
        case Op::Implies:
          return negated ? Formula::conj(run(f.left(), false), run(f.right(), true))
                         : Formula::disj(run(f.left(), true), run(f.right(), false));
        case Op::Box:
          return negated ? Formula::diamond(f.name(), run(f.child(), true))
                         : Formula::box(f.name(), run(f.child(), false));
        case Op::Diamond:
          return negated ? Formula::box(f.name(), run(f.child(), true))
                         : Formula::diamond(f.name(), run(f.child(), false));
      }
      throw Error("unreachable");
    }
  };
  return Builder{}.run(*this, false);
}

std::string Formula::render() const {
  std::ostringstream out;
  struct R {
    std::ostringstream& out;
    void go(const Formula& f) {
      switch (f.op()) {
        case Op::Top: out << 'T'; return;
        case Op::Atom: out << f.name(); return;
        case Op::Neg: out << '~'; go(f.child()); return;
        case Op::Box: out << '[' << f.name() << ']'; go(f.child()); return;
        case Op::Diamond: out << '<' << f.name() << '>'; go(f.child()); return;
        case Op::And: bin(f, "&"); return;
        case Op::Or: bin(f, "|"); return;
        case Op::Implies: bin(f, "->"); return;
      }
    }
    void bin(const Formula& f, const char* op) {
      out << '(';
      go(f.left());
      out << ' ' << op << ' ';
      go(f.right());
      out << ')';
    }
  };
  R{out}.go(*this);
  return out.str();
}

namespace {

struct Parser {
  std::string_view text;
  size_t pos = 0;
  const Signature& sig;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("formula parse error at position " + std::to_string(pos) + ": " + msg);
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  bool peek_is(char c) {
    skip_ws();
    return pos < text.size() && text[pos] == c;
  }

  void expect(char c) {
    skip_ws();
    if (pos >= text.size() || text[pos] != c)
      fail(std::string("expected '") + c + "'");
    ++pos;
  }

  std::string ident() {
    skip_ws();
    size_t start = pos;
    if (pos >= text.size() || !std::isalpha(static_cast<unsigned char>(text[pos])))
      fail("expected a name");
    ++pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    return std::string(text.substr(start, pos - start));
  }

  std::string agent() {
    size_t at = pos;
    std::string name = ident();
    if (sig.agent_index(name) < 0) {
      pos = at;
      fail("undeclared agent '" + name + "'");
    }
    return name;
  }

  Formula formula() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of input");
    char c = text[pos];
    if (c == '~') {
      ++pos;
      return Formula::neg(formula());
    }
    if (c == '[') {
      ++pos;
      std::string i = agent();
      expect(']');
      return Formula::box(i, formula());
    }
    if (c == '<') {
      ++pos;
      std::string i = agent();
      expect('>');
      return Formula::diamond(i, formula());
    }
    if (c == '(') {
      ++pos;
      Formula l = formula();
      skip_ws();
      Formula (*mk)(Formula, Formula) = nullptr;
      if (peek_is('&')) {
        ++pos;
        mk = &Formula::conj;
      } else if (peek_is('|')) {
        ++pos;
        mk = &Formula::disj;
      } else if (peek_is('-')) {
        ++pos;
        expect('>');
        mk = &Formula::implies;
      } else {
        fail("expected '&', '|' or '->'");
      }
      Formula r = formula();
      expect(')');
      return mk(l, r);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t at = pos;
      std::string name = ident();
      if (name == "T") return Formula::top();
      if (sig.atom_index(name) < 0) {
        pos = at;
        fail("undeclared atom '" + name + "'");
      }
      return Formula::atom(name);
    }
    fail("unexpected character");
  }
};

}  // namespace

Formula Formula::parse(std::string_view text, const Signature& sig) {
  Parser p{text, 0, sig};
  Formula f = p.formula();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing input");
  return f;
}

}  // namespace modal
