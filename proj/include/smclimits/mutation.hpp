#pragma once

#include <cstddef>

#include "smclimits/kernels.hpp"
#include "smclimits/rng.hpp"
#include "smclimits/weighted_sample.hpp"

namespace smclimits {

/**
 * \brief Propagates every particle through `pair`, producing `alpha` offspring per parent.
 *
 * Offspring (i, k) sits at index alpha * i + k, is drawn from R(x_i, .) and carries
 * weight w_i * W(x_i, x~). Draws are consumed parent-major, offspring-minor.
 */
WeightedSample mutate(const WeightedSample& sample, const MutationKernelPair& pair, std::size_t alpha, Rng& rng);

/// Offspring k of each parent is drawn from multi.proposals[k]; weights use the shared average-kernel density.
WeightedSample mutate_multi(const WeightedSample& sample, const MultiProposal& multi, Rng& rng);

/// Mutation output with weights rescaled by exp(-log_shift), log_shift being the largest log-weight increment.
struct RescaledMutation {
  WeightedSample sample;
  double log_shift;
};

/// Same draws as mutate(); increments are exponentiated after subtracting their maximum.
RescaledMutation mutate_rescaled(const WeightedSample& sample, const MutationKernelPair& pair, std::size_t alpha,
                                 Rng& rng);

}  // namespace smclimits
