#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "smclimits/kernels.hpp"
#include "smclimits/resampling.hpp"
#include "smclimits/rng.hpp"
#include "smclimits/weighted_sample.hpp"

namespace smclimits {

/**
 * \brief Finite-state hidden Markov model with a fixed observation record.
 *
 * Time indices are 1-based: likelihood(k, x) is g_k(x) for k in [1, horizon()].
 * Every likelihood entry must be strictly positive.
 */
class DiscreteHMM {
 public:
  DiscreteHMM(std::vector<double> chi, std::vector<std::vector<double>> transition,
              std::vector<std::vector<double>> likelihood);

  /// g_k(x) = n_symbols * emission[x][y_k]: the emission density w.r.t. the uniform law on symbols.
  static DiscreteHMM from_emissions(std::vector<double> chi, std::vector<std::vector<double>> transition,
                                    const std::vector<std::vector<double>>& emission,
                                    const std::vector<std::size_t>& observations);

  /// Simulates a state path and its symbol record; the stream is fully determined by `seed`.
  static std::vector<std::size_t> simulate_observations(const std::vector<double>& chi,
                                                        const std::vector<std::vector<double>>& transition,
                                                        const std::vector<std::vector<double>>& emission,
                                                        std::size_t horizon, std::uint64_t seed);

  [[nodiscard]] std::size_t n_states() const noexcept { return chi_.size(); }
  [[nodiscard]] std::size_t horizon() const noexcept { return likelihood_.size(); }
  [[nodiscard]] const std::vector<double>& chi() const noexcept { return chi_; }
  [[nodiscard]] double transition(std::size_t from, std::size_t to) const { return transition_[from][to]; }
  [[nodiscard]] const std::vector<double>& transition_row(std::size_t from) const { return transition_[from]; }
  [[nodiscard]] double likelihood(std::size_t k, std::size_t x) const { return likelihood_[k - 1][x]; }
  [[nodiscard]] const std::vector<double>& likelihood_row(std::size_t k) const { return likelihood_[k - 1]; }
  [[nodiscard]] const std::vector<std::vector<double>>& likelihood_table() const noexcept { return likelihood_; }
  [[nodiscard]] const std::vector<std::vector<double>>& transition_matrix() const noexcept { return transition_; }

  /// Same model restricted to the first `horizon` observations.
  [[nodiscard]] DiscreteHMM truncated(std::size_t horizon) const;

 private:
  std::vector<double> chi_;
  std::vector<std::vector<double>> transition_;
  std::vector<std::vector<double>> likelihood_;
};

/**
 * \brief Scalar model X_k = phi X_{k-1} + sigma_x V_k, Y_k = X_k + tau U_k.
 *
 * X_1 follows the stationary law N(0, sigma_x^2 / (1 - phi^2)) when |phi| < 1, else N(0, sigma_x^2).
 */
struct LinearGaussianSSM {
  double phi = 0.9;
  double sigma_x = 1.0;
  double tau = 1.0;
  std::vector<double> observations;

  void validate() const;
  [[nodiscard]] std::size_t horizon() const noexcept { return observations.size(); }
  [[nodiscard]] double initial_variance() const noexcept;
  [[nodiscard]] LinearGaussianSSM truncated(std::size_t horizon) const;

  static std::vector<double> simulate_observations(double phi, double sigma_x, double tau, std::size_t horizon,
                                                   std::uint64_t seed);
};

using StateSpaceModel = std::variant<LinearGaussianSSM, DiscreteHMM>;

std::size_t horizon(const StateSpaceModel& model);
StateSpaceModel truncated(const StateSpaceModel& model, std::size_t horizon);

enum class ProposalKind { kPrior, kOptimal, kResampleMove };

/// Kernel producing step k from step k-1: propose by Q, weight by g_k. Requires 1 < k <= horizon.
MutationKernelPair prior_proposal(const StateSpaceModel& model, std::size_t k);

/// Kernel drawing x_k from Q(x_{k-1}, .) g_k / (Q g_k)(x_{k-1}); its weight (Q g_k)(x_{k-1}) ignores the offspring.
MutationKernelPair optimal_proposal(const StateSpaceModel& model, std::size_t k);

/// Metropolis-Hastings refresh of the last path coordinate followed by a prior extension.
/// For k < 3 there is no conditional to target and the move is the identity.
MutationKernelPair resample_move_proposal(const DiscreteHMM& model, std::size_t k, std::size_t n_moves = 1);

/// True when resample_move_proposal(model, k) has an identity move.
constexpr bool resample_move_is_degenerate(std::size_t k) noexcept { return k < 3; }

/// Conditional law of x_{k-1} given x_{k-2} = prev: proportional to Q(prev, .) g_{k-1}(.).
std::vector<double> resample_move_target(const DiscreteHMM& model, std::size_t k, std::size_t prev);

/// One-move MH transition matrix (uniform independence proposal) for resample_move_target(model, k, prev).
std::vector<std::vector<double>> resample_move_matrix(const DiscreteHMM& model, std::size_t k, std::size_t prev);

MutationKernelPair make_proposal(const StateSpaceModel& model, ProposalKind kind, std::size_t k);

/// Diagnostics and population after one filter step.
struct SmcStep {
  WeightedSample sample;
  double ess;
  double cv2;
  /// Max-weight fraction of the mutated (pre-selection) sample.
  double max_weight_fraction;
  bool resampled;
  /// Omega~_k / Omega_{k-1} on the true (unshifted) weight scale; 1 at step 1.
  double increment;
  /// True weights are sample weights times exp(log_scale).
  double log_scale;
};

struct SmcTrace {
  std::vector<SmcStep> steps;

  [[nodiscard]] std::size_t k() const noexcept { return steps.size(); }
  [[nodiscard]] const WeightedSample& current() const { return steps.back().sample; }
  [[nodiscard]] std::size_t resample_count() const;
};

/// Step 1: m i.i.d. draws from the first filter phi_1, equally weighted.
SmcTrace smc_init(const StateSpaceModel& model, std::size_t m, Rng& rng);

/// Mutation by the chosen kernel, then selection when policy.trigger fires on the mutated CV^2.
void smc_step(SmcTrace& trace, const StateSpaceModel& model, ProposalKind kind, const ResamplingPolicy& policy,
              Rng& rng);

/// Full run to the model horizon. Deterministic in `seed`.
SmcTrace smc_run(const StateSpaceModel& model, ProposalKind kind, const ResamplingPolicy& policy, std::size_t m,
                 std::uint64_t seed);

/// Exact law over paths x_{1:k}; index encodes x_1 as the most significant base-n digit.
struct PathDistribution {
  std::size_t n_states = 0;
  std::size_t length = 0;
  std::vector<double> probs;

  [[nodiscard]] std::size_t size() const noexcept { return probs.size(); }
  [[nodiscard]] Point decode(std::size_t index) const;
  [[nodiscard]] double expectation(const Integrand& f) const;
  /// Marginal law of coordinate j (1-based).
  [[nodiscard]] std::vector<double> marginal(std::size_t j) const;
};

constexpr std::size_t kDefaultEnumerationCap = 4096;

/// psi_k by path enumeration. Throws "path space too large" when n^k exceeds `cap`.
PathDistribution exact_joint_smoothing(const DiscreteHMM& model, std::size_t k,
                                       std::size_t cap = kDefaultEnumerationCap);

/// Smoothing marginals P(X_j | y_{1:k}), j = 1..k, by normalized forward-backward recursions.
std::vector<std::vector<double>> forward_backward_marginals(const DiscreteHMM& model, std::size_t k);

struct GaussianMoments {
  double mean;
  double variance;
};

/// Kalman filtering moments of X_j given y_{1:j}, j = 1..horizon.
std::vector<GaussianMoments> kalman_filter(const LinearGaussianSSM& model);

}  // namespace smclimits
