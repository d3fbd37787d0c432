#pragma once

#include <boost/dynamic_bitset.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "modal/formula.hpp"
#include "modal/signature.hpp"

namespace modal {

// State sets within one model.
using StateSet = boost::dynamic_bitset<uint64_t>;

// Finite Kripke model. Everything here is desk scale; the cap below exists
// only to turn runaway constructions into clean errors.
class KripkeModel {
 public:
  static constexpr int kMaxStates = 65536;

  using Relations = std::map<std::string, std::vector<std::pair<std::string, std::string>>>;
  using Valuation = std::map<std::string, std::vector<std::string>>;

  KripkeModel(Signature sig, std::vector<std::string> states, const Relations& rel,
              const Valuation& val);

  const Signature& sig() const { return sig_; }
  int num_states() const { return static_cast<int>(states_.size()); }
  const std::vector<std::string>& state_names() const { return states_; }
  int state_index(const std::string& name) const;  // -1 when absent

  StateSet all_states() const { return StateSet(states_.size()).set(); }
  const StateSet& successors(int agent, int s) const { return succ_[agent][s]; }
  const StateSet& atom_states(int atom) const { return val_[atom]; }
  bool atom_at(int atom, int s) const { return val_[atom].test(s); }

 private:
  Signature sig_;
  std::vector<std::string> states_;
  std::vector<std::vector<StateSet>> succ_;  // [agent][state]
  std::vector<StateSet> val_;                // [atom]
};

struct PointedKripkeModel {
  std::shared_ptr<const KripkeModel> model;
  int point = 0;

  PointedKripkeModel() = default;
  PointedKripkeModel(std::shared_ptr<const KripkeModel> m, int pt);
  PointedKripkeModel(std::shared_ptr<const KripkeModel> m, const std::string& pt);

  const Signature& sig() const { return model->sig(); }
  const std::string& point_name() const { return model->state_names()[point]; }
};

// Bottom-up model checking with a per-model memo keyed on formula node
// identity, so shared sub-DAGs are evaluated once. Reusable across many
// formulas against the same model.
class Evaluator {
 public:
  explicit Evaluator(std::shared_ptr<const KripkeModel> m) : m_(std::move(m)) {}

  const StateSet& states_satisfying(const Formula& f);
  bool at(const Formula& f, int state) { return states_satisfying(f).test(state); }

 private:
  std::shared_ptr<const KripkeModel> m_;
  std::unordered_map<const Formula::Node*, StateSet> memo_;
};

bool satisfies(const PointedKripkeModel& x, const Formula& f);
// State set of f in M, as state names in model order.
std::vector<std::string> satisfying_states(const KripkeModel& m, const Formula& f);

// Restriction to the states reachable from the point (any agent, any length).
PointedKripkeModel generated_submodel(const PointedKripkeModel& x);

// Line-oriented model format:
//   sig atoms: p q
//   sig agents: a b
//   states: s t
//   rel a: s->t t->t
//   val p: s
//   point: s
// Both sig headers and the states/point lines are required; agents and atoms
// without a rel/val line get the empty relation/valuation. '#' starts a
// comment line.
PointedKripkeModel parse_model(const std::string& text);
std::string write_model(const PointedKripkeModel& x);

// Every pointed model over sig with 1..max_states states, all relations and
// valuations, all points. Intended for desk-scale exhaustive checks; throws
// BudgetError when the count would exceed cap.
std::vector<PointedKripkeModel> enumerate_pointed_models(const Signature& sig, int max_states,
                                                         long cap = 2000000);

}  // namespace modal
