#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "smclimits/kernels.hpp"
#include "smclimits/rng.hpp"
#include "smclimits/weighted_sample.hpp"

namespace smclimits {

enum class ResamplingScheme { kMultinomial, kResidual };

/// When a filter step resamples.
struct ResamplingTrigger {
  enum class Kind { kAlways, kNever, kCvThreshold };

  Kind kind = Kind::kAlways;
  /// Threshold on CV^2; only read for kCvThreshold. May be +inf.
  double kappa2 = 0.0;

  static ResamplingTrigger always() { return {Kind::kAlways, 0.0}; }
  static ResamplingTrigger never() { return {Kind::kNever, 0.0}; }
  static ResamplingTrigger cv_threshold(double kappa2);

  /// Non-strict comparison: fires when cv2 >= kappa2.
  [[nodiscard]] bool fires(double cv2) const noexcept;
  /// Threshold as an extended real: 0 for always, +inf for never.
  [[nodiscard]] double effective_kappa2() const noexcept;
};

/// Output size either as ratio ell = M~/M or as an absolute count.
struct ResamplingSize {
  double ratio = 1.0;
  std::size_t absolute = 0;  ///< 0 means "use ratio"

  [[nodiscard]] std::size_t output_size(std::size_t m_in) const;
};

struct ResamplingPolicy {
  ResamplingScheme scheme = ResamplingScheme::kMultinomial;
  ResamplingTrigger trigger = ResamplingTrigger::always();
  ResamplingSize size;
};

/// m_out i.i.d. categorical draws with P(I = i) = w_i / W; unit output weights.
WeightedSample multinomial_resample(const WeightedSample& sample, std::size_t m_out, Rng& rng);

/// Deterministic part of residual resampling.
struct ResidualCounts {
  std::vector<std::size_t> floors;
  /// Empty when m_bar == m_out (no residual stage).
  std::vector<double> residual_probs;
  std::size_t m_bar = 0;
};

ResidualCounts residual_counts(const WeightedSample& sample, std::size_t m_out);

/// Deterministic copies first (input order), then m_out - m_bar residual draws.
WeightedSample residual_resample(const WeightedSample& sample, std::size_t m_out, Rng& rng);

WeightedSample resample(ResamplingScheme scheme, const WeightedSample& sample, std::size_t m_out, Rng& rng);

/// Closed-form E[M~^{-1} sum f(x~) | sample].
double conditional_mean_oracle(ResamplingScheme scheme, const WeightedSample& sample, const Integrand& f,
                               std::size_t m_out);
/// Closed-form Var[M~^{-1} sum f(x~) | sample].
double conditional_var_oracle(ResamplingScheme scheme, const WeightedSample& sample, const Integrand& f,
                              std::size_t m_out);

struct ConditionalMoments {
  double mean;
  double variance;
};

/// Exact conditional moments by enumerating every outcome of the random stage(s).
/// Cost is M^(number of random draws); intended for M, M~ <= 4.
ConditionalMoments enumerate_conditional_moments(ResamplingScheme scheme, const WeightedSample& sample,
                                                 const Integrand& f, std::size_t m_out);

/// Residual-mass weight 1 - floor(x)/x, with x = ell * nu(1/Phi) * Phi(xi); x = +inf (ell = inf) gives 0.
double w_ell_phi(double x);

/// True iff no atom of nu has ell * nu(1/Phi) * Phi integer (within 1e-9) or infinite.
bool residual_regularity_check(const DiscreteDistribution& nu, double ell, const std::function<double(double)>& phi);

/// nu(f floor(x)/x): limit of M~^{-1} sum floor(M~ w_i / W) f(x_i).
double residual_deterministic_limit(const DiscreteDistribution& nu, double ell,
                                    const std::function<double(double)>& phi, const std::function<double(double)>& f);

/// nu{W[ell,Phi] (f - c*)^2} with c* = nu{W f} / nu{W}: the residual stage's limiting variance at rate sqrt(M~).
double residual_variance_limit(const DiscreteDistribution& nu, double ell, const std::function<double(double)>& phi,
                               const std::function<double(double)>& f);

}  // namespace smclimits
