#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "modal/bisim.hpp"
#include "modal/formula.hpp"
#include "modal/kripke.hpp"
#include "modal/rational.hpp"

namespace modal {

inline constexpr long kMaxMaterializedLevels = 100000;

struct DescriptorLevel {
  std::vector<Formula> entries;
  std::vector<Rat> weights;  // parallel to entries, all strictly positive
};

// A weighted, level-organized family of pairwise-inequivalent formulas.
// Finite kinds have a single level; leveled kinds stream levels on demand
// and bound the total weight of everything not yet materialized, which is
// what certifies truncation of the distance series.
class Descriptor {
 public:
  virtual ~Descriptor() = default;

  virtual const Signature& sig() const = 0;
  virtual long first_level() const = 0;
  // Last level index, or -1 when levels continue indefinitely.
  virtual long last_level() const = 0;

  // Memoized; a concurrent caller sees either a fully built level or none.
  const DescriptorLevel& level(long n) const;

  // Upper bound on the total weight of all entries at levels >= n; 0 past
  // the last level of a finite descriptor; monotone non-increasing.
  virtual Rat tail_bound(const BigInt& n) const = 0;
  // Least N with tail_bound(N) < tol.
  virtual BigInt level_for_tail(const Rat& tol) const = 0;
  // Weight shared by every entry of level n; defined far beyond any
  // materializable level for descriptors with uniform per-level weights
  // (the continuity modulus asks at astronomically deep levels).
  virtual Rat entry_weight(const BigInt& n) const;

 protected:
  virtual DescriptorLevel materialize(long n) const = 0;

 private:
  mutable std::mutex mu_;
  mutable std::map<long, DescriptorLevel> memo_;
};

// Fixed entries with per-entry weights, all on level 0. Entries must be
// pairwise inequivalent; this is checked by comparing type sets at the
// deepest depth whose type count fits the budget (at most the maximum modal
// depth present), and a pair the check cannot distinguish is rejected.
class FiniteDescriptor : public Descriptor {
 public:
  FiniteDescriptor(Signature sig, std::vector<Formula> entries, std::vector<Rat> weights,
                   long budget = kDefaultTypeBudget);

  const Signature& sig() const override { return sig_; }
  long first_level() const override { return 0; }
  long last_level() const override { return 0; }
  Rat tail_bound(const BigInt& n) const override;
  BigInt level_for_tail(const Rat& tol) const override;

 protected:
  DescriptorLevel materialize(long n) const override;

 private:
  Signature sig_;
  std::vector<Formula> entries_;
  std::vector<Rat> weights_;
  Rat total_;
};

// The first n atoms with unit weights: distance is the Hamming distance of
// the atom truth-vectors at the points.
FiniteDescriptor hamming_descriptor(const Signature& sig, int n);

// Level n >= 1 holds one depth-n characteristic formula per n-bisimilarity
// class realized among the given models; every level-n entry weighs
// 1/(2n(n+1)). A pair of models disagrees on at most two entries per level
// (each model satisfies exactly one), so the mass at levels >= N telescopes
// to 1/N, and the resulting distance brackets the bisimilarity metric below.
class BisimDescriptor : public Descriptor {
 public:
  BisimDescriptor(Signature sig, std::vector<PointedKripkeModel> models);

  const Signature& sig() const override { return sig_; }
  long first_level() const override { return 1; }
  long last_level() const override { return -1; }
  Rat tail_bound(const BigInt& n) const override;
  BigInt level_for_tail(const Rat& tol) const override;
  Rat entry_weight(const BigInt& n) const override;

 protected:
  DescriptorLevel materialize(long n) const override;

 private:
  Signature sig_;
  std::vector<PointedKripkeModel> models_;
  Refinement ref_;
  // Guarded by the base-class materialization lock.
  mutable std::vector<std::unique_ptr<CharacteristicFormulas>> builders_;
};

// 1/n for the least n >= 1 at which the models stop being n-bisimilar, 0 for
// bisimilar models. Disagreement at depth 0 already implies it at depth 1,
// yielding the maximum 1.
Rat bisimulation_distance(const PointedKripkeModel& x, const PointedKripkeModel& y);

// 1/(n+1) for the least n at which the models' depth-n theories differ
// (n = 0 counts), 0 for bisimilar models.
Rat goranko_distance(const PointedKripkeModel& x, const PointedKripkeModel& y);

// Level n holds one representative formula per semantic class whose
// shallowest equivalent depth is exactly n (a disjunction of canonical type
// formulas per non-redundant union of depth-n types); each weighs
// (1/|level n|) * (1/prod of earlier level sizes) * 2^{-n}. Level sizes grow
// so fast that a single disagreement at level n outweighs every deeper level
// combined; the same growth makes levels >= 2 unmaterializable for any
// signature, so distance queries needing them fail with a budget error.
class DepthWeightedDescriptor : public Descriptor {
 public:
  explicit DepthWeightedDescriptor(Signature sig, long budget = kDefaultTypeBudget);

  const Signature& sig() const override { return sig_; }
  long first_level() const override { return 0; }
  long last_level() const override { return -1; }
  Rat tail_bound(const BigInt& n) const override;
  BigInt level_for_tail(const Rat& tol) const override;
  Rat entry_weight(const BigInt& n) const override;

  // |level n|: number of semantic classes of shallowest depth exactly n.
  BigInt level_size(const BigInt& n) const;

 protected:
  DescriptorLevel materialize(long n) const override;

 private:
  Signature sig_;
  long budget_;
};

// Exact-rational bracket around the (possibly infinite) weighted sum of
// disagreements; width equals the tail bound at the truncation level.
struct DistanceInterval {
  Rat lower;
  Rat upper;
  Rat width() const { return upper - lower; }
};

// Materializes levels until the tail bound drops below tol, sums the weights
// of entries the two models disagree on, and returns that sum plus the tail
// as the bracket. Finite descriptors are consumed whole and give width 0.
DistanceInterval distance(const PointedKripkeModel& x, const PointedKripkeModel& y,
                          const Descriptor& d, const Rat& tol);

// One class of models per truth-vector over the descriptor's entries.
struct ModalSpacePoint {
  int id;
  PointedKripkeModel representative;  // first member
  std::vector<int> members;           // indices into the input list
  std::vector<bool> truth;            // over consumed entries, level-major
};

// Groups models by their truth-vector over `levels` materialized levels
// (levels < 0 means all levels of a finite descriptor).
std::vector<ModalSpacePoint> quotient(const std::vector<PointedKripkeModel>& models,
                                      const Descriptor& d, long levels = -1);

// Weighted abstract propositions realizing a given finite metric space as a
// descriptor distance, up to one additive constant: a proposition per point
// (true only there) and per unordered pair (true on its two members), with
// weights read off the sorted distance values so that dw = d + c exactly on
// distinct pairs.
struct Embedding {
  std::vector<std::string> points;
  std::vector<Rat> point_weight;              // by point index
  std::vector<std::vector<Rat>> pair_weight;  // symmetric, zero diagonal
  std::vector<std::vector<Rat>> dw;           // induced distance matrix
  Rat c;                                      // dw(x,y) - d(x,y) for x != y
};

// Requires at least 3 points (with 2 the per-point weights degenerate to 0)
// and d a genuine metric; both violations raise precondition errors.
Embedding embed_finite_space(const std::vector<std::string>& ids,
                             const std::vector<std::vector<Rat>>& d);

// Descriptor file: optional "metric: <spec>" header line naming a built-in
// (hamming:<n> | bisim | goranko | depth | custom), then one formula per
// line with an optional "@ <rational>" weight suffix (default weight 1).
// '#' starts a comment line.
struct DescriptorFile {
  std::string metric;  // empty when no header present
  std::vector<Formula> entries;
  std::vector<Rat> weights;
};
DescriptorFile parse_descriptor_file(const std::string& text, const Signature& sig);

}  // namespace modal
