#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "modal/signature.hpp"

namespace modal {

enum class Op : uint8_t { Top, Atom, Neg, And, Or, Implies, Box, Diamond };

// Immutable formula over a modal signature. Nodes are shared, so formulas
// built via memoizing constructions (characteristic formulas, negation
// normal form) form DAGs; algorithms that walk formulas memoize on node
// identity to stay linear in the number of distinct nodes.
class Formula {
 public:
  struct Node {
    Op op;
    std::string name;  // atom name (Atom) or agent name (Box/Diamond)
    std::shared_ptr<const Node> a, b;
    int depth;    // modal depth
    size_t hash;  // structural hash
  };

  Formula() : Formula(top()) {}

  static Formula top();
  static Formula atom(std::string name);
  static Formula neg(Formula f);
  static Formula conj(Formula l, Formula r);
  static Formula disj(Formula l, Formula r);
  static Formula implies(Formula l, Formula r);
  static Formula box(std::string agent, Formula f);
  static Formula diamond(std::string agent, Formula f);

  // Right fold; empty conjunction is T, empty disjunction is ~T.
  static Formula conj_all(const std::vector<Formula>& fs);
  static Formula disj_all(const std::vector<Formula>& fs);

  Op op() const { return n_->op; }
  const std::string& name() const { return n_->name; }
  Formula left() const { return Formula(n_->a); }
  Formula right() const { return Formula(n_->b); }
  Formula child() const { return Formula(n_->a); }

  int modal_depth() const { return n_->depth; }
  size_t hash() const { return n_->hash; }
  const Node* node() const { return n_.get(); }

  // Structural equality (node identity is a fast path).
  bool operator==(const Formula& o) const;
  bool operator!=(const Formula& o) const { return !(*this == o); }

  // Implication-free form with negations only on atoms and T.
  Formula nnf() const;

  // Canonical text: binary connectives fully parenthesized, unary prefix.
  std::string render() const;

  // Grammar (whitespace insignificant):
  //   formula := 'T' | IDENT | '~' formula | '[' IDENT ']' formula
  //            | '<' IDENT '>' formula
  //            | '(' formula ('&'|'|'|'->') formula ')'
  // Atom and agent names must be declared in sig.
  static Formula parse(std::string_view text, const Signature& sig);

 private:
  explicit Formula(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
  std::shared_ptr<const Node> n_;
};

}  // namespace modal
