#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "smclimits/weighted_sample.hpp"

namespace smclimits {

/// Scalar weighted sample with M particles drawn by the suite generators.
struct SuiteCase {
  WeightedSample sample;
  std::size_t m_out;
};

/// Hand-picked weight vectors on M <= 4 particles: ties, one-hot, zeros, integer and near-integer M~w/W, extreme ratios.
std::vector<SuiteCase> adversarial_cases();

/// Random scalar samples with M, M~ in [1, 4].
std::vector<SuiteCase> random_small_cases(std::size_t count, std::uint64_t seed);

struct UnbiasednessReport {
  std::size_t checks = 0;
  double max_abs_error = 0.0;
  bool pass = false;
};

/// Enumerated conditional mean of both schemes vs the weighted estimate, for an indicator and the coordinate.
UnbiasednessReport unbiasedness_suite(std::size_t random_cases, std::uint64_t seed, double tolerance);

struct VarianceOrderReport {
  std::size_t instances = 0;
  /// min over instances of Var_multinomial - Var_residual.
  double min_slack = 0.0;
  bool pass = false;
};

VarianceOrderReport variance_order_suite(std::size_t instances, std::uint64_t seed, double tolerance);

struct EssIdentityReport {
  std::size_t vectors = 0;
  double max_rel_error = 0.0;
  bool extremes_exact = false;
  bool pass = false;
};

EssIdentityReport ess_identity_suite(std::size_t vectors, std::uint64_t seed, double tolerance);

struct WEllPhiRow {
  double ell;
  /// M~ times the exact residual conditional variance.
  double scaled_variance;
  double limit;
  double rel_error;
};

struct WEllPhiReport {
  std::size_t m = 0;
  std::vector<WEllPhiRow> rows;
  bool pass = false;
};

/// Three-atom nu in the Phi-form (atoms drawn from nu/Phi, weights Phi) at M particles, ell in {1/2, 1, 2}.
WEllPhiReport w_ell_phi_suite(std::size_t m, double rel_tolerance);

}  // namespace smclimits
