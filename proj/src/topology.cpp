#include "modal/topology.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "modal/error.hpp"
#include "modal/kripke.hpp"

namespace modal {

namespace {

void check_point_count(int n) {
  if (n < 1) throw PreconditionError("topology needs at least one point");
  if (n > kMaxTopologyPoints)
    throw BudgetError("topology on " + std::to_string(n) + " points exceeds the cap of " +
                      std::to_string(kMaxTopologyPoints));
}

// Truth of every level-0 descriptor entry at every space point, as one mask
// per entry (bit i = entry holds at space point i).
std::vector<PointMask> entry_masks(const std::vector<ModalSpacePoint>& space,
                                   const FiniteDescriptor& d) {
  const auto& entries = d.level(0).entries;
  std::vector<PointMask> masks(entries.size(), 0);
  for (size_t i = 0; i < space.size(); ++i) {
    Evaluator ev(space[i].representative.model);
    for (size_t e = 0; e < entries.size(); ++e)
      if (ev.at(entries[e], space[i].representative.point)) masks[e] |= PointMask(1) << i;
  }
  return masks;
}

}  // namespace

FiniteTopology::FiniteTopology(int num_points, const std::vector<PointMask>& generators) {
  check_point_count(num_points);
  num_points_ = num_points;
  universe_ = (PointMask(1) << num_points) - 1;
  for (PointMask g : generators)
    if (g & ~universe_) throw PreconditionError("generator mentions a point outside the space");

  // Minimal open of x = intersection of the generators containing x.
  std::vector<PointMask> minimal;
  for (int x = 0; x < num_points; ++x) {
    PointMask m = universe_;
    for (PointMask g : generators)
      if (g >> x & 1) m &= g;
    minimal.push_back(m);
  }
  std::sort(minimal.begin(), minimal.end());
  minimal.erase(std::unique(minimal.begin(), minimal.end()), minimal.end());

  // Opens = unions of minimal opens; at most 2^num_points of them.
  std::set<PointMask> opens;
  const size_t k = minimal.size();
  for (PointMask pick = 0; pick < (PointMask(1) << k); ++pick) {
    PointMask u = 0;
    for (size_t i = 0; i < k; ++i)
      if (pick >> i & 1) u |= minimal[i];
    opens.insert(u);
  }
  opens_.assign(opens.begin(), opens.end());
}

FiniteTopology FiniteTopology::discrete(int num_points) {
  check_point_count(num_points);
  std::vector<PointMask> singletons;
  for (int x = 0; x < num_points; ++x) singletons.push_back(PointMask(1) << x);
  return FiniteTopology(num_points, singletons);
}

FiniteTopology FiniteTopology::indiscrete(int num_points) {
  return FiniteTopology(num_points, {});
}

bool FiniteTopology::is_open(PointMask s) const {
  return std::binary_search(opens_.begin(), opens_.end(), s);
}

PointMask FiniteTopology::minimal_open(int point) const {
  if (point < 0 || point >= num_points_) throw PreconditionError("point out of range");
  PointMask m = universe_;
  for (PointMask o : opens_)
    if (o >> point & 1) m &= o;
  return m;
}

FiniteTopology stone_topology(const std::vector<ModalSpacePoint>& space,
                              const FiniteDescriptor& d) {
  if (space.empty()) throw PreconditionError("empty space");
  check_point_count(static_cast<int>(space.size()));
  PointMask universe = (PointMask(1) << space.size()) - 1;
  std::vector<PointMask> gens;
  for (PointMask m : entry_masks(space, d)) {
    gens.push_back(m);
    gens.push_back(universe & ~m);
  }
  return FiniteTopology(static_cast<int>(space.size()), gens);
}

FiniteTopology metric_topology(const std::vector<ModalSpacePoint>& space,
                               const std::vector<std::vector<Rat>>& dist) {
  if (space.empty()) throw PreconditionError("empty space");
  const size_t k = space.size();
  check_point_count(static_cast<int>(k));
  if (dist.size() != k) throw PreconditionError("distance matrix does not match the space");
  for (const auto& row : dist)
    if (row.size() != k) throw PreconditionError("distance matrix is not square");
  for (size_t i = 0; i < k; ++i) {
    if (dist[i][i] != 0) throw PreconditionError("nonzero self-distance");
    for (size_t j = 0; j < k; ++j) {
      if (dist[i][j] < 0) throw PreconditionError("negative distance");
      if (dist[i][j] != dist[j][i]) throw PreconditionError("asymmetric distance matrix");
    }
  }

  std::set<Rat> values;
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j) values.insert(dist[i][j]);
  std::vector<Rat> radii(values.begin(), values.end());
  const size_t realized = radii.size();
  for (size_t i = 0; i + 1 < realized; ++i) radii.push_back((radii[i] + radii[i + 1]) / 2);
  radii.push_back(radii[realized - 1] + 1);

  std::vector<PointMask> balls;
  for (size_t x = 0; x < k; ++x)
    for (const Rat& eps : radii) {
      PointMask b = 0;
      for (size_t y = 0; y < k; ++y)
        if (dist[x][y] < eps) b |= PointMask(1) << y;
      balls.push_back(b);
    }
  return FiniteTopology(static_cast<int>(k), balls);
}

bool is_hausdorff(const FiniteTopology& t) {
  // Minimal opens witness separation exactly: two points have disjoint open
  // neighborhoods iff their minimal opens are disjoint.
  std::vector<PointMask> m;
  for (int x = 0; x < t.num_points(); ++x) m.push_back(t.minimal_open(x));
  for (int x = 0; x < t.num_points(); ++x)
    for (int y = x + 1; y < t.num_points(); ++y)
      if (m[x] & m[y]) return false;
  return true;
}

bool is_totally_disconnected(const FiniteTopology& t) {
  std::vector<PointMask> clopens = clopen_sets(t);
  for (int x = 0; x < t.num_points(); ++x)
    for (int y = x + 1; y < t.num_points(); ++y) {
      bool split = false;
      for (PointMask c : clopens)
        if (((c >> x ^ c >> y) & 1) != 0) {
          split = true;
          break;
        }
      if (!split) return false;
    }
  return true;
}

namespace {

// Whether the subfamily admits a subcover with at most num_points members:
// greedily pick, for each point, one member containing it.
bool has_small_subcover(const FiniteTopology& t, const std::vector<PointMask>& family) {
  PointMask got = 0;
  for (int x = 0; x < t.num_points(); ++x)
    for (PointMask o : family)
      if (o >> x & 1) {
        got |= o;
        break;
      }
  return got == t.universe();
}

}  // namespace

bool is_compact(const FiniteTopology& t) {
  const std::vector<PointMask>& os = t.opens();
  const size_t n = os.size();
  if (n <= 16) {
    for (std::uint32_t pick = 0; pick < (std::uint32_t(1) << n); ++pick) {
      PointMask covered = 0;
      std::vector<PointMask> family;
      for (size_t i = 0; i < n; ++i)
        if (pick >> i & 1) {
          covered |= os[i];
          family.push_back(os[i]);
        }
      if (covered == t.universe() && !has_small_subcover(t, family)) return false;
    }
    return true;
  }
  // Too many subfamilies to enumerate; spot-check the full family and every
  // leave-one-out subfamily.
  if (!has_small_subcover(t, os)) return false;
  for (size_t skip = 0; skip < n; ++skip) {
    std::vector<PointMask> family;
    PointMask covered = 0;
    for (size_t i = 0; i < n; ++i)
      if (i != skip) {
        family.push_back(os[i]);
        covered |= os[i];
      }
    if (covered == t.universe() && !has_small_subcover(t, family)) return false;
  }
  return true;
}

std::vector<PointMask> clopen_sets(const FiniteTopology& t) {
  std::vector<PointMask> out;
  for (PointMask o : t.opens())
    if (t.is_open(t.universe() & ~o)) out.push_back(o);
  return out;
}

DefinabilityReport definable_check(const FiniteTopology& t,
                                   const std::vector<ModalSpacePoint>& space,
                                   const FiniteDescriptor& d) {
  if (static_cast<int>(space.size()) != t.num_points())
    throw PreconditionError("space and topology have different point counts");
  std::vector<PointMask> masks = entry_masks(space, d);
  const auto& entries = d.level(0).entries;

  // Truth-vector cells: points indistinguishable by the descriptor.
  std::map<std::vector<bool>, PointMask> cells;
  for (int x = 0; x < t.num_points(); ++x) {
    std::vector<bool> vec;
    for (PointMask m : masks) vec.push_back(m >> x & 1);
    cells[vec] |= PointMask(1) << x;
  }

  DefinabilityReport report;
  report.all_definable = true;
  for (PointMask c : clopen_sets(t)) {
    DefinabilityRow row;
    row.clopen = c;
    row.definable = true;
    std::vector<Formula> parts;
    for (const auto& [vec, cell] : cells) {
      if ((c & cell) == 0) continue;
      if ((c & cell) != cell) {
        row.definable = false;  // cuts through a cell: no combination fits
        break;
      }
      std::vector<Formula> signs;
      for (size_t e = 0; e < entries.size(); ++e)
        signs.push_back(vec[e] ? entries[e] : Formula::neg(entries[e]));
      parts.push_back(Formula::conj_all(signs));
    }
    if (row.definable) {
      if (c == t.universe())
        row.witness = Formula::top();
      else if (c == 0)
        row.witness = Formula::neg(Formula::top());
      else
        row.witness = Formula::disj_all(parts);
    } else {
      report.all_definable = false;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace modal
