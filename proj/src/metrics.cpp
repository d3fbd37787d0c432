#include "modal/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_set>

#include "modal/error.hpp"

namespace modal {

namespace {

void check_over_signature(const Formula& f, const Signature& sig) {
  std::unordered_set<const Formula::Node*> seen;
  auto go = [&](auto&& self, const Formula& g) -> void {
    if (!seen.insert(g.node()).second) return;
    switch (g.op()) {
      case Op::Top:
        return;
      case Op::Atom:
        if (sig.atom_index(g.name()) < 0)
          throw PreconditionError("atom '" + g.name() + "' not in signature");
        return;
      case Op::Neg:
        self(self, g.child());
        return;
      case Op::And:
      case Op::Or:
      case Op::Implies:
        self(self, g.left());
        self(self, g.right());
        return;
      case Op::Box:
      case Op::Diamond:
        if (sig.agent_index(g.name()) < 0)
          throw PreconditionError("agent '" + g.name() + "' not in signature");
        self(self, g.child());
        return;
    }
  };
  go(go, f);
}

// Equivalence of descriptor entries, decided exactly via type sets when the
// needed depth fits the budget; past that, probed over all models with up to
// 3 states (fewer if that enumeration itself is too large). The probe can
// only certify inequivalence, so an unseparated pair is reported as
// indistinguishable rather than silently accepted.
bool certainly_inequivalent(const Formula& f, const Formula& g, const Signature& sig,
                            long budget) {
  try {
    return !semantically_equivalent(f, g, sig, budget);
  } catch (const BudgetError&) {
  }
  for (int max_states = 3; max_states >= 1; --max_states) {
    std::vector<PointedKripkeModel> probes;
    try {
      probes = enumerate_pointed_models(sig, max_states, 200000);
    } catch (const BudgetError&) {
      continue;
    }
    for (const auto& x : probes)
      if (satisfies(x, f) != satisfies(x, g)) return true;
    return false;
  }
  return false;
}

long to_level_index(const BigInt& n, const char* what) {
  if (n < 0 || n > kMaxMaterializedLevels)
    throw BudgetError(std::string(what) + ": level " + n.str() + " out of range");
  return n.convert_to<long>();
}

const std::vector<PointedKripkeModel>& checked_sample(
    const std::vector<PointedKripkeModel>& models, const Signature& sig) {
  if (models.empty()) throw PreconditionError("descriptor over no models");
  for (const auto& x : models)
    if (x.sig() != sig) throw PreconditionError("sample model signature differs");
  return models;
}

std::string_view trimmed(std::string_view sv) {
  while (!sv.empty() && isspace(static_cast<unsigned char>(sv.front()))) sv.remove_prefix(1);
  while (!sv.empty() && isspace(static_cast<unsigned char>(sv.back()))) sv.remove_suffix(1);
  return sv;
}

}  // namespace

const DescriptorLevel& Descriptor::level(long n) const {
  if (n < first_level() || (last_level() >= 0 && n > last_level()))
    throw PreconditionError("descriptor has no level " + std::to_string(n));
  std::lock_guard<std::mutex> lock(mu_);
  auto it = memo_.find(n);
  if (it == memo_.end()) it = memo_.emplace(n, materialize(n)).first;
  return it->second;
}

Rat Descriptor::entry_weight(const BigInt&) const {
  throw Error("descriptor has no uniform per-level weight");
}

// ---------------------------------------------------------------------------
// Finite descriptors

FiniteDescriptor::FiniteDescriptor(Signature sig, std::vector<Formula> entries,
                                   std::vector<Rat> weights, long budget)
    : sig_(std::move(sig)), entries_(std::move(entries)), weights_(std::move(weights)) {
  if (entries_.size() != weights_.size())
    throw PreconditionError("one weight per entry required");
  for (const Rat& w : weights_)
    if (w <= 0) throw PreconditionError("weights must be strictly positive");
  for (const Formula& f : entries_) check_over_signature(f, sig_);
  for (size_t i = 0; i < entries_.size(); ++i)
    for (size_t j = i + 1; j < entries_.size(); ++j)
      if (!certainly_inequivalent(entries_[i], entries_[j], sig_, budget))
        throw PreconditionError("descriptor entries " + std::to_string(i) + " and " +
                                std::to_string(j) + " are not distinguishable: " +
                                entries_[i].render() + " vs " + entries_[j].render());
  total_ = 0;
  for (const Rat& w : weights_) total_ += w;
}

DescriptorLevel FiniteDescriptor::materialize(long) const {
  return DescriptorLevel{entries_, weights_};
}

Rat FiniteDescriptor::tail_bound(const BigInt& n) const { return n <= 0 ? total_ : Rat(0); }

BigInt FiniteDescriptor::level_for_tail(const Rat& tol) const {
  if (tol <= 0) throw PreconditionError("tolerance must be positive");
  return total_ < tol ? 0 : 1;
}

FiniteDescriptor hamming_descriptor(const Signature& sig, int n) {
  if (n < 0 || n > static_cast<int>(sig.atoms().size()))
    throw PreconditionError("hamming descriptor over " + std::to_string(n) +
                            " atoms, signature has " +
                            std::to_string(sig.atoms().size()));
  std::vector<Formula> entries;
  std::vector<Rat> weights;
  for (int i = 0; i < n; ++i) {
    entries.push_back(Formula::atom(sig.atoms()[i]));
    weights.emplace_back(1);
  }
  return FiniteDescriptor(sig, std::move(entries), std::move(weights));
}

// ---------------------------------------------------------------------------
// Bisimilarity-level descriptor

BisimDescriptor::BisimDescriptor(Signature sig, std::vector<PointedKripkeModel> models)
    : sig_(std::move(sig)), models_(checked_sample(models, sig_)), ref_(models_) {
  builders_.resize(models_.size());
}

DescriptorLevel BisimDescriptor::materialize(long n) const {
  DescriptorLevel out;
  Rat w = entry_weight(n);
  std::set<int> seen;
  for (size_t m = 0; m < models_.size(); ++m) {
    int cell = ref_.point_cell(n, static_cast<int>(m));
    if (!seen.insert(cell).second) continue;
    if (!builders_[m])
      builders_[m] = std::make_unique<CharacteristicFormulas>(models_[m].model);
    out.entries.push_back(builders_[m]->at(models_[m].point, n));
    out.weights.push_back(w);
  }
  return out;
}

Rat BisimDescriptor::tail_bound(const BigInt& n) const {
  return n <= 1 ? Rat(1) : Rat(BigInt(1), n);
}

BigInt BisimDescriptor::level_for_tail(const Rat& tol) const {
  if (tol <= 0) throw PreconditionError("tolerance must be positive");
  Rat inv = 1 / tol;
  BigInt n = numerator(inv) / denominator(inv) + 1;
  return n < 1 ? BigInt(1) : n;
}

Rat BisimDescriptor::entry_weight(const BigInt& n) const {
  if (n < 1) throw PreconditionError("bisimilarity levels start at 1");
  return Rat(BigInt(1), 2 * n * (n + 1));
}

Rat bisimulation_distance(const PointedKripkeModel& x, const PointedKripkeModel& y) {
  if (x.sig() != y.sig()) throw PreconditionError("models have different signatures");
  Refinement r({x, y});
  long top = r.levels_computed();
  for (long n = 0; n <= top; ++n)
    if (r.point_cell(n, 0) != r.point_cell(n, 1))
      return Rat(1, std::max(n, 1L));
  return Rat(0);
}

Rat goranko_distance(const PointedKripkeModel& x, const PointedKripkeModel& y) {
  if (x.sig() != y.sig()) throw PreconditionError("models have different signatures");
  Refinement r({x, y});
  long top = r.levels_computed();
  for (long n = 0; n <= top; ++n)
    if (r.point_cell(n, 0) != r.point_cell(n, 1)) return Rat(1, n + 1);
  return Rat(0);
}

// ---------------------------------------------------------------------------
// Depth-weighted descriptor

DepthWeightedDescriptor::DepthWeightedDescriptor(Signature sig, long budget)
    : sig_(std::move(sig)), budget_(budget) {
  if (budget < 1) throw PreconditionError("budget must be at least 1");
}

BigInt DepthWeightedDescriptor::level_size(const BigInt& n) const {
  if (n < 0) throw PreconditionError("negative level");
  if (n > kMaxMaterializedLevels)
    throw BudgetError("level " + n.str() + " size is far beyond representable range");
  return count_depth_propositions(sig_, n.convert_to<long>());
}

Rat DepthWeightedDescriptor::entry_weight(const BigInt& n) const {
  if (n < 0) throw PreconditionError("negative level");
  BigInt product(1);
  for (BigInt k = 0; k < n; ++k) product *= level_size(k);
  return Rat(BigInt(1), level_size(n)) * Rat(BigInt(1), product) *
         Rat(BigInt(1), pow2(to_level_index(n, "level weight")));
}

Rat DepthWeightedDescriptor::tail_bound(const BigInt& n) const {
  BigInt m = n < 0 ? BigInt(0) : n;
  BigInt product(1);
  for (BigInt k = 0; k < m; ++k) product *= level_size(k);
  // Sum of per-level masses 2^{-k}/prod_{j<k}|level j| over k >= m, bounded
  // by freezing the product at its value below m.
  Rat geometric = m == 0 ? Rat(2) : Rat(BigInt(2), pow2(to_level_index(m, "tail")));
  return geometric / Rat(product);
}

BigInt DepthWeightedDescriptor::level_for_tail(const Rat& tol) const {
  if (tol <= 0) throw PreconditionError("tolerance must be positive");
  BigInt n(0);
  while (tail_bound(n) >= tol) ++n;  // level_size throws once counts explode
  return n;
}

DescriptorLevel DepthWeightedDescriptor::materialize(long n) const {
  BigInt size = level_size(n);
  if (size > budget_)
    throw BudgetError("level " + std::to_string(n) + " holds " + size.str() +
                      " formula classes, budget is " + std::to_string(budget_));
  TypeTable tt(sig_, static_cast<int>(n), budget_);
  CharacteristicFormulas chi(tt.canonical_model(), n);
  int types = static_cast<int>(tt.at(static_cast<int>(n)).size());

  DescriptorLevel out;
  Rat w = entry_weight(n);
  for (uint64_t mask = 0; mask < (uint64_t{1} << types); ++mask) {
    if (n > 0) {
      // Skip unions already expressible one level down: membership constant
      // on every block of the level-(n-1) truncation.
      std::map<int, bool> block;
      bool saturated = true;
      for (int i = 0; i < types && saturated; ++i) {
        auto [it, fresh] = block.emplace(tt.truncate(static_cast<int>(n), i, static_cast<int>(n) - 1),
                                         (mask >> i) & 1);
        saturated = fresh || it->second == bool((mask >> i) & 1);
      }
      if (saturated) continue;
    }
    std::vector<Formula> parts;
    for (int i = 0; i < types; ++i)
      if ((mask >> i) & 1) parts.push_back(chi.at(tt.canonical_state(static_cast<int>(n), i), n));
    out.entries.push_back(Formula::disj_all(parts));
    out.weights.push_back(w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distance

DistanceInterval distance(const PointedKripkeModel& x, const PointedKripkeModel& y,
                          const Descriptor& d, const Rat& tol) {
  if (x.sig() != y.sig() || x.sig() != d.sig())
    throw PreconditionError("models and descriptor must share a signature");
  if (tol <= 0) throw PreconditionError("tolerance must be positive");
  Evaluator ex(x.model);
  Evaluator ey(y.model);
  Rat lower(0);
  auto add_level = [&](long n) {
    const DescriptorLevel& lv = d.level(n);
    for (size_t i = 0; i < lv.entries.size(); ++i)
      if (ex.at(lv.entries[i], x.point) != ey.at(lv.entries[i], y.point))
        lower += lv.weights[i];
  };
  if (d.last_level() >= 0) {
    for (long n = d.first_level(); n <= d.last_level(); ++n) add_level(n);
    return DistanceInterval{lower, lower};
  }
  BigInt cutoff = d.level_for_tail(tol);
  long stop = to_level_index(cutoff, "distance truncation");
  for (long n = d.first_level(); n < stop; ++n) add_level(n);
  return DistanceInterval{lower, lower + d.tail_bound(cutoff)};
}

// ---------------------------------------------------------------------------
// Quotient

std::vector<ModalSpacePoint> quotient(const std::vector<PointedKripkeModel>& models,
                                      const Descriptor& d, long levels) {
  if (models.empty()) throw PreconditionError("quotient of no models");
  for (const auto& x : models)
    if (x.sig() != d.sig())
      throw PreconditionError("models and descriptor must share a signature");
  long first = d.first_level();
  long stop;  // exclusive
  if (levels < 0) {
    if (d.last_level() < 0)
      throw PreconditionError("leveled descriptor needs an explicit level count");
    stop = d.last_level() + 1;
  } else {
    stop = first + levels;
    if (d.last_level() >= 0) stop = std::min(stop, d.last_level() + 1);
  }

  std::vector<ModalSpacePoint> out;
  std::map<std::vector<bool>, int> classes;
  for (size_t m = 0; m < models.size(); ++m) {
    Evaluator ev(models[m].model);
    std::vector<bool> truth;
    for (long n = first; n < stop; ++n)
      for (const Formula& f : d.level(n).entries)
        truth.push_back(ev.at(f, models[m].point));
    auto [it, fresh] = classes.emplace(std::move(truth), static_cast<int>(out.size()));
    if (fresh)
      out.push_back(ModalSpacePoint{it->second, models[m], {}, it->first});
    out[it->second].members.push_back(static_cast<int>(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-space embedding

Embedding embed_finite_space(const std::vector<std::string>& ids,
                             const std::vector<std::vector<Rat>>& d) {
  size_t k = ids.size();
  if (k < 3)
    throw PreconditionError("embedding needs at least 3 points (per-point weights "
                            "degenerate below that)");
  if (std::set<std::string>(ids.begin(), ids.end()).size() != k)
    throw PreconditionError("duplicate point names");
  if (d.size() != k) throw PreconditionError("matrix size does not match point count");
  for (size_t i = 0; i < k; ++i) {
    if (d[i].size() != k) throw PreconditionError("matrix is not square");
    if (d[i][i] != 0) throw PreconditionError("not a metric: nonzero diagonal");
    for (size_t j = 0; j < k; ++j) {
      if (d[i][j] != d[j][i]) throw PreconditionError("not a metric: asymmetric");
      if (i != j && d[i][j] <= 0)
        throw PreconditionError("not a metric: non-positive off-diagonal");
      for (size_t l = 0; l < k; ++l)
        if (d[i][j] > d[i][l] + d[l][j])
          throw PreconditionError("not a metric: triangle inequality fails at " +
                                  ids[i] + "," + ids[j] + "," + ids[l]);
    }
  }

  Rat largest(0);
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j) largest = std::max(largest, d[i][j]);
  // Weight read off one ordered off-diagonal pair: smaller distances get
  // larger weights, scaled so that the induced distance is d plus a constant.
  auto pair_mass = [&](size_t i, size_t j) { return (1 + largest - d[i][j]) / 4; };

  Embedding e;
  e.points = ids;
  e.point_weight.assign(k, Rat(0));
  e.pair_weight.assign(k, std::vector<Rat>(k, Rat(0)));
  e.dw.assign(k, std::vector<Rat>(k, Rat(0)));
  for (size_t x = 0; x < k; ++x)
    for (size_t y = 0; y < k; ++y)
      for (size_t z = 0; z < k; ++z)
        if (y != z && x != y && x != z) e.point_weight[x] += pair_mass(y, z);
  for (size_t x = 0; x < k; ++x)
    for (size_t y = 0; y < k; ++y)
      if (x != y) e.pair_weight[x][y] = 2 * pair_mass(x, y);

  for (size_t x = 0; x < k; ++x)
    for (size_t y = 0; y < k; ++y) {
      if (x == y) continue;
      Rat sum = e.point_weight[x] + e.point_weight[y];
      for (size_t z = 0; z < k; ++z)
        if (z != x && z != y) sum += e.pair_weight[x][z] + e.pair_weight[y][z];
      e.dw[x][y] = sum;
    }
  e.c = e.dw[0][1] - d[0][1];
  for (size_t x = 0; x < k; ++x)
    for (size_t y = 0; y < k; ++y)
      if (x != y && e.dw[x][y] - d[x][y] != e.c)
        throw Error("embedding drift: induced distance is not d plus a constant");
  return e;
}

// ---------------------------------------------------------------------------
// Descriptor files

DescriptorFile parse_descriptor_file(const std::string& text, const Signature& sig) {
  DescriptorFile out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trimmed(line);
    if (sv.empty() || sv.front() == '#') continue;
    if (sv.substr(0, 7) == "metric:") {
      if (!out.metric.empty())
        throw ParseError("line " + std::to_string(lineno) + ": repeated metric header");
      sv = trimmed(sv.substr(7));
      if (sv.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty metric header");
      out.metric = std::string(sv);
      continue;
    }
    size_t at = sv.find('@');
    Rat weight(1);
    std::string_view ftext = sv;
    if (at != std::string_view::npos) {
      ftext = sv.substr(0, at);
      weight = parse_rational(trimmed(sv.substr(at + 1)));
      if (weight <= 0)
        throw ParseError("line " + std::to_string(lineno) + ": weight must be positive");
    }
    try {
      out.entries.push_back(Formula::parse(ftext, sig));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    out.weights.push_back(weight);
  }
  return out;
}

}  // namespace modal
