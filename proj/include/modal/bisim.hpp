#pragma once

#include <map>
#include <utility>
#include <vector>

#include "modal/formula.hpp"
#include "modal/kripke.hpp"
#include "modal/rational.hpp"

namespace modal {

inline constexpr long kDefaultTypeBudget = 10000;

// Partition refinement over the disjoint union of the input models.
// Level 0 groups states by atomic valuation; level k+1 splits by the sets of
// level-k cells reachable per agent. Levels only split, so the partition is
// stable as soon as the cell count stops growing, which happens within
// (total states) rounds.
class Refinement {
 public:
  // max_level < 0 means refine to the stable partition.
  Refinement(const std::vector<PointedKripkeModel>& xs, long max_level = -1);

  int total_states() const { return total_; }
  int offset(int model) const { return offsets_[model]; }
  long levels_computed() const { return static_cast<long>(cells_.size()) - 1; }
  // -1 while not yet stable at levels_computed().
  long stable_level() const { return stable_; }
  // Cell of a union state; levels beyond the last computed one are only
  // meaningful once stable, and clamp to it.
  int cell(long level, int union_state) const;
  int num_cells(long level) const;
  // Cell of model m's point at the given level.
  int point_cell(long level, int model) const;

 private:
  std::vector<const KripkeModel*> models_;
  std::vector<int> points_;
  std::vector<int> offsets_;
  int total_ = 0;
  std::vector<std::vector<int>> cells_;  // [level][union state]
  std::vector<int> cell_counts_;
  long stable_ = -1;
};

bool are_n_bisimilar(const PointedKripkeModel& x, const PointedKripkeModel& y, long n);
bool are_bisimilar(const PointedKripkeModel& x, const PointedKripkeModel& y);

// Groups models by full bisimilarity of their points; cells are listed by
// first occurrence, each with its first member as representative.
struct BisimClass {
  int id;
  int rep;                   // index into the input list
  std::vector<int> members;  // indices into the input list
};
std::vector<BisimClass> bisim_quotient(const std::vector<PointedKripkeModel>& xs);

// Depth-n characteristic formula of x's point: the depth-0 part conjoins one
// literal per atom; each deeper level adds, per agent, a diamond for every
// successor's depth-(n-1) formula plus a box over their disjunction (no
// successors yields box ~T). Successors are collapsed up to (n-1)-equivalence
// and sub-formulas shared, so the result is a DAG of size O(states * n).
Formula characteristic_formula(const PointedKripkeModel& x, long n);

// Builder over one model: formulas for different states and depths share a
// refinement pass and their sub-DAGs. depth < 0 puts no bound on the depths
// at() may ask for (the refinement is run to its stable partition and deeper
// levels reuse it).
class CharacteristicFormulas {
 public:
  CharacteristicFormulas(std::shared_ptr<const KripkeModel> m, long depth = -1);
  Formula at(int state, long d);  // d <= construction depth when bounded

 private:
  std::shared_ptr<const KripkeModel> m_;
  long depth_;
  Refinement ref_;
  std::map<std::pair<int, long>, Formula> memo_;
};

// Canonical depth-stratified modal types over a signature: a depth-0 type is
// a valuation, a depth-(d+1) type is a valuation plus, per agent, a set of
// depth-d types. Two pointed models agree on all formulas of depth <= d
// exactly when they realize the same depth-d type.
struct NType {
  uint32_t valuation;                          // bit per atom, signature order
  std::vector<std::vector<int>> successors;    // per agent, sorted indices into depth-1 list
};

class TypeTable {
 public:
  // Enumerates all types of depth 0..depth; throws BudgetError when any
  // level's count exceeds budget.
  TypeTable(Signature sig, int depth, long budget = kDefaultTypeBudget);

  const Signature& sig() const { return sig_; }
  int depth() const { return static_cast<int>(levels_.size()) - 1; }
  const std::vector<NType>& at(int d) const { return levels_[d]; }

  // Truth of f (modal_depth <= d) at the depth-d type with this index.
  bool eval(const Formula& f, int d, int index) const;
  // Indices of depth-d types satisfying f.
  std::vector<int> sat_set(const Formula& f, int d) const;
  // The depth-k type refined by a depth-d type (k <= d).
  int truncate(int d, int index, int k) const;
  // Depth-d type realized by a pointed model (d <= depth()).
  int type_of(const PointedKripkeModel& x, int d) const;

  // One Kripke model containing a state per enumerated type, with edges from
  // each depth-d type to its depth-(d-1) successor types. The state for type
  // (d, i) realizes that type, so its depth-d characteristic formula
  // describes it; sharing one model keeps those formulas on a common DAG.
  std::shared_ptr<const KripkeModel> canonical_model() const { return canon_; }
  int canonical_state(int d, int index) const { return canon_state_[d][index]; }
  PointedKripkeModel canonical_point(int d, int index) const {
    return PointedKripkeModel(canon_, canonical_state(d, index));
  }

 private:
  int index_of(int d, const NType& t) const;

  Signature sig_;
  std::vector<std::vector<NType>> levels_;
  std::shared_ptr<const KripkeModel> canon_;
  std::vector<std::vector<int>> canon_state_;
  std::vector<std::vector<std::vector<int>>> trunc_;  // [d][index][k]
};

// t_n: number of depth-n types, in closed form (t_0 = 2^|atoms|,
// t_{n+1} = 2^|atoms| * 2^(t_n * |agents|)). Throws BudgetError once the
// exponent leaves representable range.
BigInt count_n_types(const Signature& sig, long n);

// Number of semantic classes of formulas whose shallowest equivalent depth
// is exactly n: 2^(t_0) at n = 0, else 2^(t_n) - 2^(t_{n-1}).
BigInt count_depth_propositions(const Signature& sig, long n);

// Least depth of any formula equivalent to f: the least k such that f's
// depth-md(f) type set is a union of depth-k blocks.
int shallowest_depth(const Formula& f, const Signature& sig, long budget = kDefaultTypeBudget);

// Equivalence / satisfiability over all models, decided on type sets at the
// formulas' modal depth. Budget-bound like everything type-based.
bool semantically_equivalent(const Formula& f, const Formula& g, const Signature& sig,
                             long budget = kDefaultTypeBudget);
bool satisfiable(const Formula& f, const Signature& sig, long budget = kDefaultTypeBudget);

}  // namespace modal
