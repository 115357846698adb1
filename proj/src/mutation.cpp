#include "smclimits/mutation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "smclimits/error.hpp"

namespace smclimits {

namespace {

struct RawOffspring {
  std::size_t dim;
  std::vector<double> coords;
  std::vector<double> log_increments;
};

/// proposal_for(k) returns the pair used for offspring slot k.
template <class ProposalFor>
RawOffspring draw_offspring(const WeightedSample& sample, std::size_t alpha, std::size_t dim_increment,
                            ProposalFor&& proposal_for, const LogWeightFn& log_weight, Rng& rng) {
  if (alpha == 0) {
    throw Error(ErrorCode::kInvalidOffspringCount, "invalid offspring count");
  }
  RawOffspring raw;
  raw.dim = sample.dim() + dim_increment;
  const std::size_t n_out = sample.size() * alpha;
  raw.coords.resize(n_out * raw.dim);
  raw.log_increments.resize(n_out);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const PointView parent = sample.point(i);
    for (std::size_t k = 0; k < alpha; ++k) {
      const std::size_t j = alpha * i + k;
      std::span<double> child{raw.coords.data() + j * raw.dim, raw.dim};
      proposal_for(k).propose(rng, parent, child);
      const double lw = log_weight(parent, child);
      if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
        throw Error(ErrorCode::kInvalidWeight, "invalid weight");
      }
      raw.log_increments[j] = lw;
    }
  }
  return raw;
}

WeightedSample assemble(const WeightedSample& sample, std::size_t alpha, RawOffspring raw, double log_shift) {
  std::vector<double> weights(raw.log_increments.size());
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const double w = sample.weight(j / alpha) * std::exp(raw.log_increments[j] - log_shift);
    if (!std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidWeight, "invalid weight");
    }
    weights[j] = w;
  }
  return WeightedSample(raw.dim, std::move(raw.coords), std::move(weights));
}

}  // namespace

WeightedSample mutate(const WeightedSample& sample, const MutationKernelPair& pair, std::size_t alpha, Rng& rng) {
  auto raw = draw_offspring(
      sample, alpha, pair.dim_increment, [&](std::size_t) -> const MutationKernelPair& { return pair; },
      pair.log_weight, rng);
  return assemble(sample, alpha, std::move(raw), 0.0);
}

WeightedSample mutate_multi(const WeightedSample& sample, const MultiProposal& multi, Rng& rng) {
  auto raw = draw_offspring(
      sample, multi.alpha(), multi.dim_increment(),
      [&](std::size_t k) -> const MutationKernelPair& { return multi.proposals[k]; }, multi.log_weight, rng);
  return assemble(sample, multi.alpha(), std::move(raw), 0.0);
}

RescaledMutation mutate_rescaled(const WeightedSample& sample, const MutationKernelPair& pair, std::size_t alpha,
                                 Rng& rng) {
  auto raw = draw_offspring(
      sample, alpha, pair.dim_increment, [&](std::size_t) -> const MutationKernelPair& { return pair; },
      pair.log_weight, rng);
  double shift = -std::numeric_limits<double>::infinity();
  for (double lw : raw.log_increments) {
    shift = std::max(shift, lw);
  }
  if (!std::isfinite(shift)) {
    throw Error(ErrorCode::kDegenerateWeights, "degenerate weights");
  }
  auto out = assemble(sample, alpha, std::move(raw), shift);
  return {std::move(out), shift};
}

}  // namespace smclimits
