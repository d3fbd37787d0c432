#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "modal/bisim.hpp"
#include "modal/formula.hpp"
#include "modal/kripke.hpp"
#include "modal/metrics.hpp"

namespace modal {

// Postcondition of one action: T (change nothing) or a consistent
// conjunction of literals, each atom set true or false.
struct ConjunctiveClause {
  std::vector<std::string> set_true;   // atoms forced true, in signature order
  std::vector<std::string> set_false;  // atoms forced false, in signature order

  bool trivial() const { return set_true.empty() && set_false.empty(); }

  // Accepts T, a literal, or a parenthesized conjunction of literals; rejects
  // anything else, duplicate atoms, and contradictory assignments.
  static ConjunctiveClause parse(std::string_view text, const Signature& sig);
  static ConjunctiveClause from_formula(const Formula& f, const Signature& sig);
  Formula to_formula() const;
  std::string render() const { return to_formula().render(); }
};

// Multi-pointed action model: actions with precondition formulas, literal
// postconditions, per-agent relations, and a non-empty designated set.
class ActionModel {
 public:
  using Relations = std::map<std::string, std::vector<std::pair<std::string, std::string>>>;

  // Actions missing from pre/post default to T. Relations default to empty.
  ActionModel(Signature sig, std::vector<std::string> actions, const Relations& rel,
              std::map<std::string, Formula> pre, std::map<std::string, ConjunctiveClause> post,
              const std::vector<std::string>& designated);

  const Signature& sig() const { return sig_; }
  int num_actions() const { return static_cast<int>(actions_.size()); }
  const std::vector<std::string>& action_names() const { return actions_; }
  int action_index(const std::string& name) const;  // -1 when absent

  const Formula& pre(int action) const { return pre_[action]; }
  const ConjunctiveClause& post(int action) const { return post_[action]; }
  const StateSet& successors(int agent, int action) const { return succ_[agent][action]; }
  const std::vector<int>& designated() const { return designated_; }
  bool is_designated(int action) const;

  // Preconditions with structural duplicates removed, in first-use order.
  std::vector<Formula> distinct_preconditions() const;

 private:
  Signature sig_;
  std::vector<std::string> actions_;
  std::vector<std::vector<StateSet>> succ_;  // [agent][action] -> action set
  std::vector<Formula> pre_;
  std::vector<ConjunctiveClause> post_;
  std::vector<int> designated_;  // sorted
};

// Line-oriented action model format, mirroring the Kripke model format:
//   sig atoms: p
//   sig agents: a
//   actions: keep drop
//   rel a: keep->keep drop->drop
//   pre keep: p
//   post keep: T
//   pre drop: ~p
//   designated: keep drop
// sig headers, the actions line, and the designated line are required; pre
// and post lines are optional and default to T. '#' starts a comment line.
ActionModel parse_action_model(const std::string& text);
std::string write_action_model(const ActionModel& a);

// Product update. States are the pairs (s, action) where s satisfies the
// action's precondition; an agent relates two pairs iff it relates both
// components; an atom holds at (s, action) iff the postcondition forces it
// true, or holds at s and is not forced false. The new point is (point, d)
// for the unique designated action d whose precondition holds at the point;
// no such action or more than one is a PreconditionError.
PointedKripkeModel product_update(const PointedKripkeModel& x, const ActionModel& a);

// Semantic conditions over a finite sample standing in for the whole space.
// Closing is verified only up to bisimulation depth `closing_depth` and only
// at sample members where the update is defined, hence `approximate`.
struct ConditionsReport {
  bool deterministic = false;  // never two designated preconditions at once
  bool exhaustive = false;     // always at least one designated precondition
  bool closing = false;        // updates land on some sample member's class
  long closing_depth = 0;
  bool approximate = true;
  int distinct_preconditions = 0;
  std::vector<std::string> notes;  // one line per failure
};

ConditionsReport check_conditions(const ActionModel& a,
                                  const std::vector<PointedKripkeModel>& sample,
                                  long closing_depth = 3);

// Equivalent action model whose preconditions are pairwise equivalent or
// jointly unsatisfiable: each action is copied once per consistent signed
// conjunction of the distinct preconditions that entails its own, relations
// and designation lift componentwise, postconditions are copied.
// Consistency of the signed conjunctions is decided exactly by type
// enumeration, so deep or atom-rich preconditions can exceed the budget.
ActionModel disjointify(const ActionModel& a, long budget = kDefaultTypeBudget);

// An action model together with the sample it has been verified on.
// Construction checks determinism, exhaustivity, and (approximately)
// closing, and throws PreconditionError when a condition fails; the report
// is cached immutably.
class CleanMap {
 public:
  CleanMap(ActionModel a, std::vector<PointedKripkeModel> sample, long closing_depth = 3);

  const ActionModel& action_model() const { return action_model_; }
  const std::vector<PointedKripkeModel>& sample() const { return sample_; }
  const ConditionsReport& conditions() const { return conditions_; }

 private:
  ActionModel action_model_;
  std::vector<PointedKripkeModel> sample_;
  ConditionsReport conditions_;
};

// Updates the point's representative and locates the result among the map's
// sample: `id` and `members` name the sample members bisimilar to the
// output, with id -1 when the output leaves the sample ("created" class).
ModalSpacePoint apply_clean_map(const CleanMap& f, const ModalSpacePoint& x);

// A modulus of continuity for the map induced by f's action model, under a
// leveled descriptor: any two models closer than `delta` have images closer
// than `epsilon`.
//
// The construction follows the continuity proof: pick the cutoff level N
// with tail below epsilon, and take delta as the minimum of a structural
// recursion over the (signed) descriptor entries of the levels before N.
// The recursion bottoms out in weights of single descriptor levels; each
// box/diamond step needs, for the partition refining its child bound, only
// the weight of the deepest level involved, because descriptor entries at
// level n have modal depth at most n and level weights strictly decrease.
// The family member of deepest modal depth realizes each minimum, and the
// closed form bounds that depth by the level index, so the level *indices*
// may grow astronomical while the computation stays small. When some entry
// at the cutoff's last level attains full depth (true for the leveled
// descriptors here outside degenerate all-dead-end samples) the value equals
// the literal minimum; otherwise it is smaller and still a valid modulus.
// `continuity_modulus_enumerated` materializes the same families literally
// and is kept equal by tests on descriptors attaining the bound.
//
// Preconditions: the action model's preconditions are pairwise equivalent or
// inconsistent (apply disjointify first), and the descriptor is leveled.
//
// The proof swaps designated actions while recursing; the swapped models
// share the precondition set, so the value is unaffected, but whether they
// stay clean over the sample is checked and reported in `swap_notes` rather
// than assumed. (Determinism and exhaustivity depend only on the designated
// precondition multiset, which precondition-twin swaps preserve; closing is
// the condition a swap can actually break.)
struct ModulusResult {
  Rat delta;
  BigInt cutoff_level;   // first level whose tail bound is below epsilon
  BigInt deepest_level;  // deepest level whose weight the recursion consulted
  std::vector<std::string> swap_notes;
};

ModulusResult continuity_modulus(const CleanMap& f, const Descriptor& d, const Rat& eps);

// Literal transcription of the proof: builds the signed-conjunction
// partitions and the box-case subset families as explicit formulas and
// minimizes over them member by member. Exponential; throws BudgetError when
// a family would exceed `cap` members. Exists to pin the closed form above.
Rat continuity_modulus_enumerated(const CleanMap& f, const Descriptor& d, const Rat& eps,
                                  long cap = 1 << 20);

// Empirical check of the epsilon-delta implication on concrete pairs. A pair
// is probed when the lower bound of its input distance is below delta; it
// passes when the upper bound of the output distance is below epsilon, is a
// violation when even the lower bound reaches epsilon, and is indeterminate
// otherwise (interval too coarse at the probe tolerance). Pairs where the
// update is undefined are skipped with a note.
struct ProbeReport {
  int probed = 0;
  int passed = 0;
  int violations = 0;
  int indeterminate = 0;
  int skipped = 0;
  std::vector<std::string> notes;
};

ProbeReport probe_continuity(const CleanMap& f, const Descriptor& d, const Rat& eps,
                             const Rat& delta,
                             const std::vector<std::pair<PointedKripkeModel, PointedKripkeModel>>& pairs,
                             Rat probe_tol = Rat(0));  // <= 0 means eps / 8

}  // namespace modal
