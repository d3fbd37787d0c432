#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "modal/formula.hpp"
#include "modal/metrics.hpp"

namespace modal {

// Subsets of a topology's point set, one bit per point.
using PointMask = std::uint64_t;

inline constexpr int kMaxTopologyPoints = 16;

// A topology on a finite point set {0, ..., n-1}: the exact family of open
// sets, closed under finite intersections and (finite = arbitrary) unions,
// always containing the empty set and the whole space.
//
// Construction generates the topology from an arbitrary family of subsets:
// every point's minimal open is the intersection of the generators containing
// it, and on a finite space the opens are exactly the unions of minimal
// opens.  This is exact, not an approximation, and keeps generation linear in
// the number of opens rather than quadratic in closure passes.
class FiniteTopology {
 public:
  FiniteTopology(int num_points, const std::vector<PointMask>& generators);

  static FiniteTopology discrete(int num_points);
  static FiniteTopology indiscrete(int num_points);

  int num_points() const { return num_points_; }
  PointMask universe() const { return universe_; }

  // All open sets, deduplicated, in increasing mask order.
  const std::vector<PointMask>& opens() const { return opens_; }
  bool is_open(PointMask s) const;

  // Smallest open set containing the point.
  PointMask minimal_open(int point) const;

  friend bool operator==(const FiniteTopology& a, const FiniteTopology& b) {
    return a.num_points_ == b.num_points_ && a.opens_ == b.opens_;
  }

 private:
  int num_points_ = 0;
  PointMask universe_ = 0;
  std::vector<PointMask> opens_;
};

// Topology generated by the sets {x : x satisfies f} and {x : x satisfies ~f}
// for every entry f of the descriptor, evaluated at each space point's
// representative.
FiniteTopology stone_topology(const std::vector<ModalSpacePoint>& space,
                              const FiniteDescriptor& d);

// Topology generated by the open balls {y : dist(x, y) < e}.  Because the
// space is finite, e only needs to range over the realized distances, the
// midpoints between consecutive realized distances, and one value beyond the
// largest; every other ball coincides with one of these.
FiniteTopology metric_topology(const std::vector<ModalSpacePoint>& space,
                               const std::vector<std::vector<Rat>>& dist);

// Any two distinct points lie in disjoint open sets.
bool is_hausdorff(const FiniteTopology& t);

// Any two distinct points are split by a complementary clopen pair.
bool is_totally_disconnected(const FiniteTopology& t);

// Every open cover has a subcover with at most num_points members.  True on
// every finite space; the check enumerates covers exhaustively when the
// family is small (and falls back to the full family and its leave-one-out
// subfamilies otherwise) as executable documentation rather than a theorem
// one could falsify here.
bool is_compact(const FiniteTopology& t);

// Open sets whose complement is also open, in increasing mask order.
std::vector<PointMask> clopen_sets(const FiniteTopology& t);

// One clopen set matched against the boolean combinations of descriptor
// entries: `witness` holds a combination whose extension in the space is
// exactly the set, when one exists.
struct DefinabilityRow {
  PointMask clopen = 0;
  bool definable = false;
  std::optional<Formula> witness;
};

struct DefinabilityReport {
  std::vector<DefinabilityRow> rows;  // one per clopen set
  bool all_definable = false;
};

// Matches every clopen set of the topology against extensions of boolean
// combinations of the descriptor's entries.  A set is definable exactly when
// it is a union of truth-vector cells; the witness is then the disjunction,
// over cells inside the set, of the signed conjunction describing the cell.
// On a space quotiented by the same descriptor every clopen is definable;
// on coarser descriptors the report flags the unmatched clopens.
DefinabilityReport definable_check(const FiniteTopology& t,
                                   const std::vector<ModalSpacePoint>& space,
                                   const FiniteDescriptor& d);

}  // namespace modal
