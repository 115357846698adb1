#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "smclimits/rng.hpp"
#include "smclimits/weighted_sample.hpp"

namespace smclimits {

/// One outcome of an enumerable proposal: the proposed point and its R-probability.
struct SupportAtom {
  Point point;
  double probability;
};

/// Draws x~ ~ R(x, .) into `out` (length = dim(x) + dim_increment).
using ProposeFn = std::function<void(Rng&, PointView from, std::span<double> out)>;
/// log W(x, x~) where W = dL(x,.)/dR(x,.). -inf encodes a zero weight.
using LogWeightFn = std::function<double(PointView from, PointView to)>;
/// Full enumeration of R(x, .) for discrete models.
using SupportFn = std::function<std::vector<SupportAtom>(PointView from)>;

/**
 * \brief A target kernel L represented through a samplable proposal R and the weight W = dL/dR.
 *
 * Pairs are stateless: randomness enters only through the engine passed to `propose`.
 * `support` is empty for kernels without a finite enumeration.
 */
struct MutationKernelPair {
  std::size_t dim_increment = 0;
  ProposeFn propose;
  LogWeightFn log_weight;
  SupportFn support;
  /// True when R(x, .) is the Dirac mass at x.
  bool dirac = false;

  [[nodiscard]] double weight(PointView from, PointView to) const;
  [[nodiscard]] bool enumerable() const noexcept { return static_cast<bool>(support); }
};

/// Target-kernel mass at one point: L(x, {x~}). Used to build multi-proposal weights.
using KernelMassFn = std::function<double(PointView from, PointView to)>;

/**
 * \brief alpha proposals sharing the weight dL/dR with R the average of the proposals.
 *
 * Offspring k of every parent is drawn from proposals[k].
 */
struct MultiProposal {
  std::vector<MutationKernelPair> proposals;
  LogWeightFn log_weight;

  [[nodiscard]] std::size_t alpha() const noexcept { return proposals.size(); }
  [[nodiscard]] std::size_t dim_increment() const;

  /// Builds the shared weight L(x,{x~}) / Rbar(x,{x~}) for enumerable proposals.
  static MultiProposal from_target_mass(std::vector<MutationKernelPair> proposals, KernelMassFn target_mass);
};

/// Enumerates the average kernel of an enumerable multi-proposal, merging equal points.
std::vector<SupportAtom> average_support(const MultiProposal& multi, PointView from);
std::vector<SupportAtom> average_support(std::span<const MutationKernelPair> proposals, PointView from);

/// Importance reweighting as a mutation: R(x,.) = delta_x and W(x, x~) = density_ratio(x~).
MutationKernelPair reweighting_pair(std::function<double(PointView)> density_ratio);

/// True for Dirac-proposal pairs that leave the dimension unchanged.
bool is_reweighting_as_mutation(const MutationKernelPair& pair);

/// Finite law on the real line.
class DiscreteDistribution {
 public:
  struct Atom {
    double value;
    double probability;
  };

  explicit DiscreteDistribution(std::vector<Atom> atoms);

  [[nodiscard]] std::span<const Atom> atoms() const noexcept { return atoms_; }
  [[nodiscard]] double expectation(const std::function<double(double)>& f) const;
  /// Inverse-CDF draw.
  [[nodiscard]] double sample(Rng& rng) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
};

}  // namespace smclimits
