#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "smclimits/resampling.hpp"
#include "smclimits/state_space.hpp"

namespace smclimits {

/// Test function of the terminal coordinate x_k.
struct TestFunction {
  enum class Kind { kIndicator, kAffine };

  Kind kind = Kind::kIndicator;
  /// Indicator target state (kIndicator).
  std::size_t state = 0;
  /// a * x + b (kAffine).
  double a = 1.0;
  double b = 0.0;

  static TestFunction indicator(std::size_t s) { return {Kind::kIndicator, s, 1.0, 0.0}; }
  static TestFunction affine(double a, double b) { return {Kind::kAffine, 0, a, b}; }

  [[nodiscard]] double operator()(double terminal) const;
  /// Integrand over whole paths.
  [[nodiscard]] Integrand on_paths() const;
  [[nodiscard]] std::string label() const;
};

struct ExperimentConfig {
  StateSpaceModel model;
  ProposalKind proposal = ProposalKind::kPrior;
  ResamplingPolicy policy;
  std::size_t horizon = 0;
  std::vector<TestFunction> functions;
  std::vector<std::size_t> m_list;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
  /// Thread count; never affects results and is excluded from the hash.
  std::size_t workers = 1;

  void validate() const;
};

/// Canonical JSON of every result-relevant field.
nlohmann::json canonical_json(const ExperimentConfig& config);
/// FNV-1a 64 of canonical_json(config).dump(), as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct ReplicateResult {
  std::size_t m = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  /// One entry per config function.
  std::vector<double> estimates;
  std::vector<double> scaled_errors;
  double final_ess = 0.0;
  double final_max_weight_fraction = 0.0;
  std::size_t n_resamples = 0;
  /// Per step k = 1..horizon (pre-selection CV^2 and selection decision).
  std::vector<double> step_cv2;
  std::vector<int> step_resampled;
};

struct MAggregate {
  std::size_t m = 0;
  /// Per function.
  std::vector<double> rmse;
  double median_final_max_weight_fraction = 0.0;
  double mean_final_ess = 0.0;
  double mean_resamples = 0.0;
  /// Per step.
  std::vector<double> mean_step_cv2;
  std::vector<double> resample_frequency;
};

struct ExperimentReport {
  std::string config_hash;
  std::vector<double> truths;
  /// Sorted by (m index, replicate).
  std::vector<ReplicateResult> rows;
  std::vector<MAggregate> aggregates;

  /// Scaled errors of function `f` at particle count `m`, in replicate order.
  [[nodiscard]] std::vector<double> scaled_errors(std::size_t m, std::size_t f = 0) const;
};

/// Exact target values psi_horizon(f) (discrete) or Kalman means (linear-Gaussian, affine f only).
std::vector<double> exact_truths(const ExperimentConfig& config);

/// Replicate r at particle count M uses seed derive_seed(config.seed, {M, r}).
ExperimentReport run_replicates(const ExperimentConfig& config);

struct LlnResult {
  double slope;
  bool max_weight_decreasing;
  bool pass;
};

LlnResult lln_check(const ExperimentReport& report, std::size_t function = 0);

struct KsResult {
  double statistic;
  double p_value;
};

/// One-sample Kolmogorov-Smirnov test against N(0, 1); requires at least 10 values.
KsResult ks_test(std::vector<double> values);

/// Standard normal CDF.
double normal_cdf(double x);

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

struct CltResult {
  double var_ratio;
  double ks_stat;
  double ks_p;
  bool pass;
  /// Set when sigma2 = 0 while the errors are not identically zero.
  bool degenerate_oracle;
};

CltResult clt_check(const std::vector<double>& scaled_errors, double sigma2_oracle);

struct CounterexampleResult {
  std::vector<double> values;
  double mass_near_low;
  double mass_near_high;
  double max_window_mass;
  bool pass;
};

/// T_M = M^{-1} sum floor(M w_i / W) xi_i with xi i.i.d. on {1/2, 2} (probabilities 2/3, 1/3) and w = xi.
double counterexample_statistic(std::size_t m, Rng& rng);

/// Replicate r uses seed derive_seed(seed, {m, r}).
CounterexampleResult counterexample_run(std::size_t m, std::size_t replicates, std::uint64_t seed,
                                        std::size_t workers = 1);

/// Largest fraction of `values` inside any closed interval of the given width.
double max_window_mass(std::vector<double> values, double width);

}  // namespace smclimits
