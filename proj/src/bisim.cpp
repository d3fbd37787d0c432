#include "modal/bisim.hpp"

#include <algorithm>
#include <map>

#include "modal/error.hpp"

namespace modal {

namespace {

void require_same_sig(const PointedKripkeModel& x, const PointedKripkeModel& y) {
  if (x.sig() != y.sig()) throw PreconditionError("models have different signatures");
}

}  // namespace

Refinement::Refinement(const std::vector<PointedKripkeModel>& xs, long max_level) {
  if (xs.empty()) throw PreconditionError("refinement over no models");
  for (const auto& x : xs) {
    if (x.sig() != xs.front().sig())
      throw PreconditionError("models have different signatures");
    models_.push_back(x.model.get());
    points_.push_back(x.point);
    offsets_.push_back(total_);
    total_ += x.model->num_states();
  }
  std::vector<std::pair<int, int>> where;  // union state -> (model, local)
  where.reserve(total_);
  for (size_t m = 0; m < models_.size(); ++m)
    for (int s = 0; s < models_[m]->num_states(); ++s)
      where.emplace_back(static_cast<int>(m), s);

  int atoms = static_cast<int>(xs.front().sig().atoms().size());
  int agents = static_cast<int>(xs.front().sig().agents().size());

  // Level 0: atomic valuation, ids by first occurrence.
  {
    std::vector<int> cur(total_);
    std::map<uint32_t, int> ids;
    for (int u = 0; u < total_; ++u) {
      auto [m, s] = where[u];
      uint32_t key = 0;
      for (int p = 0; p < atoms; ++p)
        if (models_[m]->atom_at(p, s)) key |= 1u << p;
      cur[u] = ids.emplace(key, static_cast<int>(ids.size())).first->second;
    }
    cell_counts_.push_back(static_cast<int>(ids.size()));
    cells_.push_back(std::move(cur));
  }

  for (long level = 1; max_level < 0 || level <= max_level; ++level) {
    const std::vector<int>& prev = cells_.back();
    std::vector<int> cur(total_);
    std::map<std::vector<int>, int> ids;
    std::vector<int> key;
    for (int u = 0; u < total_; ++u) {
      auto [m, s] = where[u];
      key.clear();
      key.push_back(prev[u]);
      for (int a = 0; a < agents; ++a) {
        const StateSet& succ = models_[m]->successors(a, s);
        std::vector<int> seen;
        for (auto t = succ.find_first(); t != StateSet::npos; t = succ.find_next(t))
          seen.push_back(prev[offsets_[m] + static_cast<int>(t)]);
        std::sort(seen.begin(), seen.end());
        seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
        key.push_back(-1);  // separator between agents
        key.insert(key.end(), seen.begin(), seen.end());
      }
      cur[u] = ids.emplace(key, static_cast<int>(ids.size())).first->second;
    }
    // Splitting-only refinement: an unchanged cell count means an unchanged
    // partition, i.e. the stable one.
    if (static_cast<int>(ids.size()) == cell_counts_.back()) {
      stable_ = level - 1;
      break;
    }
    cell_counts_.push_back(static_cast<int>(ids.size()));
    cells_.push_back(std::move(cur));
  }
  if (stable_ < 0 && max_level < 0)
    throw Error("refinement failed to stabilize");  // cannot happen: splits are bounded
}

int Refinement::cell(long level, int union_state) const {
  if (level <= levels_computed()) return cells_[level][union_state];
  if (stable_ >= 0) return cells_.back()[union_state];
  throw Error("refinement level not computed");
}

int Refinement::num_cells(long level) const {
  if (level <= levels_computed()) return cell_counts_[level];
  if (stable_ >= 0) return cell_counts_.back();
  throw Error("refinement level not computed");
}

int Refinement::point_cell(long level, int model) const {
  return cell(level, offsets_[model] + points_[model]);
}

bool are_n_bisimilar(const PointedKripkeModel& x, const PointedKripkeModel& y, long n) {
  require_same_sig(x, y);
  if (n < 0) throw PreconditionError("negative bisimulation depth");
  Refinement r({x, y}, n);
  return r.point_cell(n, 0) == r.point_cell(n, 1);
}

bool are_bisimilar(const PointedKripkeModel& x, const PointedKripkeModel& y) {
  require_same_sig(x, y);
  Refinement r({x, y});
  long top = r.levels_computed();
  return r.point_cell(top, 0) == r.point_cell(top, 1);
}

std::vector<BisimClass> bisim_quotient(const std::vector<PointedKripkeModel>& xs) {
  Refinement r(xs);
  long top = r.levels_computed();
  std::vector<BisimClass> out;
  std::map<int, int> cls_of_cell;
  for (size_t i = 0; i < xs.size(); ++i) {
    int cell = r.point_cell(top, static_cast<int>(i));
    auto [it, fresh] = cls_of_cell.emplace(cell, static_cast<int>(out.size()));
    if (fresh) out.push_back(BisimClass{it->second, static_cast<int>(i), {}});
    out[it->second].members.push_back(static_cast<int>(i));
  }
  return out;
}

CharacteristicFormulas::CharacteristicFormulas(std::shared_ptr<const KripkeModel> m, long depth)
    : m_(std::move(m)),
      depth_(depth),
      ref_({PointedKripkeModel(m_, 0)}, depth) {}

Formula CharacteristicFormulas::at(int state, long d) {
  if (d < 0) throw PreconditionError("negative formula depth");
  if (depth_ >= 0 && d > depth_) throw PreconditionError("depth beyond construction depth");
  if (auto it = memo_.find({state, d}); it != memo_.end()) return it->second;
  const KripkeModel& m = *m_;
  std::vector<Formula> parts;
  for (size_t p = 0; p < m.sig().atoms().size(); ++p) {
    Formula atom = Formula::atom(m.sig().atoms()[p]);
    parts.push_back(m.atom_at(static_cast<int>(p), state) ? atom : Formula::neg(atom));
  }
  if (d > 0) {
    for (size_t a = 0; a < m.sig().agents().size(); ++a) {
      // One representative successor per (d-1)-equivalence cell.
      const StateSet& succ = m.successors(static_cast<int>(a), state);
      std::map<int, int> rep_of_cell;
      for (auto t = succ.find_first(); t != StateSet::npos; t = succ.find_next(t)) {
        int cell = ref_.cell(d - 1, static_cast<int>(t));
        auto it = rep_of_cell.find(cell);
        if (it == rep_of_cell.end() || it->second > static_cast<int>(t))
          rep_of_cell[cell] = static_cast<int>(t);
      }
      std::vector<int> reps;
      for (const auto& [cell, rep] : rep_of_cell) reps.push_back(rep);
      std::sort(reps.begin(), reps.end());
      std::vector<Formula> alternatives;
      for (int rep : reps) alternatives.push_back(at(rep, d - 1));
      for (const Formula& alt : alternatives)
        parts.push_back(Formula::diamond(m.sig().agents()[a], alt));
      parts.push_back(Formula::box(m.sig().agents()[a], Formula::disj_all(alternatives)));
    }
  }
  Formula out = Formula::conj_all(parts);
  memo_.emplace(std::make_pair(state, d), out);
  return out;
}

Formula characteristic_formula(const PointedKripkeModel& x, long n) {
  CharacteristicFormulas builder(x.model, n);
  return builder.at(x.point, n);
}

// ---------------------------------------------------------------------------
// Types

namespace {

constexpr unsigned long kMaxExponent = 1u << 22;  // bits of the largest representable count

unsigned long checked_exponent(const BigInt& e, const char* what) {
  if (e < 0 || e > kMaxExponent)
    throw BudgetError(std::string(what) + ": exponent 2^" + e.str() +
                      " is beyond representable range");
  return e.convert_to<unsigned long>();
}

}  // namespace

BigInt count_n_types(const Signature& sig, long n) {
  if (n < 0) throw PreconditionError("negative type depth");
  BigInt atoms = static_cast<long>(sig.atoms().size());
  BigInt agents = static_cast<long>(sig.agents().size());
  BigInt t = pow2(checked_exponent(atoms, "type count"));
  for (long d = 1; d <= n; ++d)
    t = pow2(checked_exponent(atoms + t * agents, "type count"));
  return t;
}

BigInt count_depth_propositions(const Signature& sig, long n) {
  if (n < 0) throw PreconditionError("negative depth");
  if (n == 0)
    return pow2(checked_exponent(count_n_types(sig, 0), "proposition count"));
  BigInt prev = count_n_types(sig, n - 1);
  BigInt cur = count_n_types(sig, n);
  return pow2(checked_exponent(cur, "proposition count")) -
         pow2(checked_exponent(prev, "proposition count"));
}

TypeTable::TypeTable(Signature sig, int depth, long budget) : sig_(std::move(sig)) {
  if (depth < 0) throw PreconditionError("negative type depth");
  for (long d = 0; d <= depth; ++d) {
    BigInt count = count_n_types(sig_, d);
    if (count > budget)
      throw BudgetError("enumerating depth-" + std::to_string(d) + " types needs " +
                        count.str() + " entries, budget is " + std::to_string(budget));
  }
  int atoms = static_cast<int>(sig_.atoms().size());
  int agents = static_cast<int>(sig_.agents().size());

  levels_.emplace_back();
  for (uint32_t val = 0; val < (1u << atoms); ++val)
    levels_[0].push_back(NType{val, {}});

  for (int d = 1; d <= depth; ++d) {
    size_t prev = levels_[d - 1].size();
    levels_.emplace_back();
    // Odometer over per-agent successor subsets, agent 0 most significant.
    std::vector<uint64_t> masks(agents, 0);
    for (uint32_t val = 0; val < (1u << atoms); ++val) {
      std::fill(masks.begin(), masks.end(), 0);
      while (true) {
        NType t{val, std::vector<std::vector<int>>(agents)};
        for (int a = 0; a < agents; ++a)
          for (size_t j = 0; j < prev; ++j)
            if ((masks[a] >> j) & 1) t.successors[a].push_back(static_cast<int>(j));
        levels_[d].push_back(std::move(t));
        int a = agents - 1;
        while (a >= 0) {
          if (++masks[a] < (1ULL << prev)) break;
          masks[a] = 0;
          --a;
        }
        if (a < 0) break;
      }
    }
  }

  // Canonical model: one state per type, edges to successor types.
  std::vector<std::string> states;
  canon_state_.resize(levels_.size());
  for (size_t d = 0; d < levels_.size(); ++d)
    for (size_t i = 0; i < levels_[d].size(); ++i) {
      canon_state_[d].push_back(static_cast<int>(states.size()));
      states.push_back("t" + std::to_string(d) + "_" + std::to_string(i));
    }
  KripkeModel::Relations rel;
  for (int a = 0; a < agents; ++a) {
    auto& pairs = rel[sig_.agents()[a]];
    for (size_t d = 1; d < levels_.size(); ++d)
      for (size_t i = 0; i < levels_[d].size(); ++i)
        for (int j : levels_[d][i].successors[a])
          pairs.emplace_back(states[canon_state_[d][i]], states[canon_state_[d - 1][j]]);
  }
  KripkeModel::Valuation val;
  for (int p = 0; p < atoms; ++p) {
    auto& where = val[sig_.atoms()[p]];
    for (size_t d = 0; d < levels_.size(); ++d)
      for (size_t i = 0; i < levels_[d].size(); ++i)
        if ((levels_[d][i].valuation >> p) & 1) where.push_back(states[canon_state_[d][i]]);
  }
  canon_ = std::make_shared<KripkeModel>(sig_, std::move(states), rel, val);

  // Truncation maps, eagerly: depth-0 indices are valuations, so truncating
  // to 0 is the valuation itself; deeper targets go through the successors.
  trunc_.resize(levels_.size());
  for (size_t d = 0; d < levels_.size(); ++d) {
    trunc_[d].resize(levels_[d].size());
    for (size_t i = 0; i < levels_[d].size(); ++i) {
      auto& row = trunc_[d][i];
      row.resize(d + 1);
      row[d] = static_cast<int>(i);
      row[0] = static_cast<int>(levels_[d][i].valuation);
      for (size_t k = 1; k < d; ++k) {
        NType cut{levels_[d][i].valuation, std::vector<std::vector<int>>(agents)};
        for (int a = 0; a < agents; ++a) {
          std::vector<int>& s = cut.successors[a];
          for (int j : levels_[d][i].successors[a]) s.push_back(trunc_[d - 1][j][k - 1]);
          std::sort(s.begin(), s.end());
          s.erase(std::unique(s.begin(), s.end()), s.end());
        }
        row[k] = index_of(static_cast<int>(k), cut);
      }
    }
  }
}

int TypeTable::index_of(int d, const NType& t) const {
  const auto& level = levels_[d];
  // Enumeration is odometer-ordered, so the index is computable, but a scan
  // keeps this independent of the enumeration layout. Levels are budget-sized.
  for (size_t i = 0; i < level.size(); ++i)
    if (level[i].valuation == t.valuation && level[i].successors == t.successors)
      return static_cast<int>(i);
  throw Error("type lookup failed");
}

bool TypeTable::eval(const Formula& f, int d, int index) const {
  if (f.modal_depth() > d) throw PreconditionError("formula deeper than type");
  const NType& t = levels_[d][index];
  switch (f.op()) {
    case Op::Top:
      return true;
    case Op::Atom: {
      int p = sig_.atom_index(f.name());
      if (p < 0) throw PreconditionError("atom '" + f.name() + "' not in signature");
      return (t.valuation >> p) & 1;
    }
    case Op::Neg:
      return !eval(f.child(), d, index);
    case Op::And:
      return eval(f.left(), d, index) && eval(f.right(), d, index);
    case Op::Or:
      return eval(f.left(), d, index) || eval(f.right(), d, index);
    case Op::Implies:
      return !eval(f.left(), d, index) || eval(f.right(), d, index);
    case Op::Box:
    case Op::Diamond: {
      int a = sig_.agent_index(f.name());
      if (a < 0) throw PreconditionError("agent '" + f.name() + "' not in signature");
      for (int j : t.successors[a]) {
        bool h = eval(f.child(), d - 1, j);
        if (f.op() == Op::Diamond && h) return true;
        if (f.op() == Op::Box && !h) return false;
      }
      return f.op() == Op::Box;
    }
  }
  throw Error("unreachable");
}

std::vector<int> TypeTable::sat_set(const Formula& f, int d) const {
  std::vector<int> out;
  for (size_t i = 0; i < levels_[d].size(); ++i)
    if (eval(f, d, static_cast<int>(i))) out.push_back(static_cast<int>(i));
  return out;
}

int TypeTable::truncate(int d, int index, int k) const {
  if (k > d) throw PreconditionError("truncation deeper than type");
  return trunc_[d][index][k];
}

int TypeTable::type_of(const PointedKripkeModel& x, int d) const {
  if (x.sig() != sig_) throw PreconditionError("model signature differs from table");
  if (d > depth()) throw PreconditionError("depth beyond table");
  const KripkeModel& m = *x.model;
  int atoms = static_cast<int>(sig_.atoms().size());
  int agents = static_cast<int>(sig_.agents().size());
  std::map<std::pair<int, int>, int> memo;  // (state, depth) -> index
  auto go = [&](auto&& self, int s, int dd) -> int {
    if (auto it = memo.find({s, dd}); it != memo.end()) return it->second;
    NType t{0, {}};
    for (int p = 0; p < atoms; ++p)
      if (m.atom_at(p, s)) t.valuation |= 1u << p;
    if (dd > 0) {
      t.successors.resize(agents);
      for (int a = 0; a < agents; ++a) {
        const StateSet& succ = m.successors(a, s);
        std::vector<int>& sub = t.successors[a];
        for (auto u = succ.find_first(); u != StateSet::npos; u = succ.find_next(u))
          sub.push_back(self(self, static_cast<int>(u), dd - 1));
        std::sort(sub.begin(), sub.end());
        sub.erase(std::unique(sub.begin(), sub.end()), sub.end());
      }
    }
    int idx = index_of(dd, t);
    memo.emplace(std::make_pair(s, dd), idx);
    return idx;
  };
  return go(go, x.point, d);
}

int shallowest_depth(const Formula& f, const Signature& sig, long budget) {
  int m = f.modal_depth();
  TypeTable tt(sig, m, budget);
  std::vector<char> in(tt.at(m).size(), 0);
  for (int i : tt.sat_set(f, m)) in[i] = 1;
  for (int k = 0; k <= m; ++k) {
    // Saturated under depth-k blocks: membership is constant on each block.
    std::map<int, char> block;  // depth-k type -> membership
    bool ok = true;
    for (size_t i = 0; i < in.size() && ok; ++i) {
      auto [it, fresh] = block.emplace(tt.truncate(m, static_cast<int>(i), k), in[i]);
      ok = fresh || it->second == in[i];
    }
    if (ok) return k;
  }
  return m;  // k = m is always saturated; kept for clarity
}

bool semantically_equivalent(const Formula& f, const Formula& g, const Signature& sig,
                             long budget) {
  int m = std::max(f.modal_depth(), g.modal_depth());
  TypeTable tt(sig, m, budget);
  return tt.sat_set(f, m) == tt.sat_set(g, m);
}

bool satisfiable(const Formula& f, const Signature& sig, long budget) {
  TypeTable tt(sig, f.modal_depth(), budget);
  return !tt.sat_set(f, f.modal_depth()).empty();
}

}  // namespace modal
