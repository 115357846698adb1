#pragma once

#include <cstddef>
#include <vector>

#include "smclimits/state_space.hpp"
#include "smclimits/weighted_sample.hpp"

namespace smclimits {

/// Function on X^k stored by path index (same indexing as PathDistribution).
using PathFunction = std::vector<double>;

/// Enumerated proposal R_{k-1} and weight W_{k-1} from X^{k-1} to X^k.
struct KernelTable {
  struct Entry {
    std::size_t child;
    double probability;
    double weight;
  };
  /// rows[p] lists the atoms of R(p, .) with W(p, child).
  std::vector<std::vector<Entry>> rows;
};

/// Quantities for step k of the recursion.
struct RecursionLevel {
  std::vector<double> psi;
  std::vector<double> gamma;
  /// Absent at k = 1; otherwise 0 or 1.
  int epsilon = -1;
  /// psi_{k-1} L_{k-1}(1); 1 at k = 1.
  double normalizer = 1.0;
  /// gamma~_k(1) - 1 of the mutated sample; 0 at k = 1.
  double ess_limit = 0.0;
  /// |ess_limit + 1 - (1 + kappa2)| / (1 + kappa2) < 0.1.
  bool near_boundary = false;
  /// Kernel reaching this level; empty at k = 1.
  KernelTable kernel;
};

/**
 * \brief Exact path-space representation of the asymptotic-variance recursion for a discrete HMM.
 *
 * Levels are 1-based in the accessors: psi(k) is the smoothing law of X_{1:k}.
 */
class VarianceRecursionState {
 public:
  VarianceRecursionState(std::size_t n_states, std::size_t cap, RecursionLevel first);

  [[nodiscard]] std::size_t k() const noexcept { return levels_.size(); }
  [[nodiscard]] std::size_t n_states() const noexcept { return n_states_; }
  [[nodiscard]] std::size_t cap() const noexcept { return cap_; }
  [[nodiscard]] const RecursionLevel& level(std::size_t k) const { return levels_.at(k - 1); }
  [[nodiscard]] const std::vector<double>& psi() const { return levels_.back().psi; }
  [[nodiscard]] const std::vector<double>& gamma() const { return levels_.back().gamma; }
  [[nodiscard]] double normalizer() const { return levels_.back().normalizer; }
  /// epsilon_2..epsilon_k.
  [[nodiscard]] std::vector<int> epsilons() const;
  [[nodiscard]] PathDistribution psi_distribution() const;

  /// Tabulates f on X^k.
  [[nodiscard]] PathFunction tabulate(const Integrand& f) const;

  void push(RecursionLevel level) { levels_.push_back(std::move(level)); }

 private:
  std::size_t n_states_;
  std::size_t cap_;
  std::vector<RecursionLevel> levels_;
};

VarianceRecursionState recursion_init(const DiscreteHMM& model, std::size_t cap = kDefaultEnumerationCap);

/// Advances to k + 1. Multinomial selection fires when gamma~(1) >= 1 + kappa2; kappa2 <= 0 always fires.
void recursion_step(VarianceRecursionState& state, const DiscreteHMM& model, ProposalKind kind, double kappa2);

/// gamma~_{k+1}(1) - 1 for the next mutation, without advancing.
double ess_limit(const VarianceRecursionState& state, const DiscreteHMM& model, ProposalKind kind);

/// Asymptotic variance sigma_k^2(f) at the current level.
double sigma2(const VarianceRecursionState& state, const Integrand& f);
double sigma2(const VarianceRecursionState& state, const PathFunction& f);

/// Runs recursion_init and recursion_step up to `horizon`.
VarianceRecursionState run_recursion(const DiscreteHMM& model, ProposalKind kind, double kappa2,
                                     std::size_t horizon, std::size_t cap = kDefaultEnumerationCap);

struct VarianceTableRow {
  std::size_t k;
  int epsilon;
  double normalizer;
  double gamma_mass;
  double ess_limit;
  bool near_boundary;
  std::vector<double> sigma2;
};

/// One row per k = 1..horizon; functions are evaluated on the terminal coordinate of the level-k path.
std::vector<VarianceTableRow> variance_table(const DiscreteHMM& model, ProposalKind kind, double kappa2,
                                             std::size_t horizon, const std::vector<Integrand>& functions,
                                             std::size_t cap = kDefaultEnumerationCap);

}  // namespace smclimits
