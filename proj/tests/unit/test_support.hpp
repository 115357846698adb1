#pragma once

// Fixtures and independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the oracle code paths it is used to check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "smclimits/state_space.hpp"

namespace smclimits::testing {

inline const std::vector<double> kChi = {0.5, 0.5};
inline const std::vector<std::vector<double>> kQ = {{0.9, 0.1}, {0.2, 0.8}};
inline const std::vector<std::vector<double>> kEmission = {{0.8, 0.2}, {0.2, 0.8}};
inline constexpr std::uint64_t kObsSeed = 7;

/// The default 2-state model with horizon 5.
inline DiscreteHMM default_model() {
  return DiscreteHMM::from_emissions(kChi, kQ, kEmission, DiscreteHMM::simulate_observations(kChi, kQ, kEmission, 5, kObsSeed));
}

/// k = 2 fixture: g_1 = (1, 1), g_2 = (2, 0.5).
inline DiscreteHMM k2_fixture() { return DiscreteHMM(kChi, kQ, {{1.0, 1.0}, {2.0, 0.5}}); }

/// Path x_{1:k} for index i, x_1 most significant.
inline std::vector<std::size_t> path_of(std::size_t i, std::size_t n, std::size_t k) {
  std::vector<std::size_t> p(k);
  for (std::size_t j = k; j-- > 0;) {
    p[j] = i % n;
    i /= n;
  }
  return p;
}

inline std::size_t power(std::size_t n, std::size_t k) {
  std::size_t out = 1;
  for (std::size_t j = 0; j < k; ++j) {
    out *= n;
  }
  return out;
}

/// Unnormalized smoothing weight chi(x_1) g_1(x_1) prod Q(x_{j-1}, x_j) g_j(x_j).
inline double path_weight(const DiscreteHMM& m, const std::vector<std::size_t>& p) {
  double w = m.chi()[p[0]] * m.likelihood(1, p[0]);
  for (std::size_t j = 1; j < p.size(); ++j) {
    w *= m.transition(p[j - 1], p[j]) * m.likelihood(j + 1, p[j]);
  }
  return w;
}

/// Smoothing law over X^k by direct product enumeration.
inline std::vector<double> brute_smoothing(const DiscreteHMM& m, std::size_t k) {
  const std::size_t n = m.n_states();
  std::vector<double> out(power(n, k));
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = path_weight(m, path_of(i, n, k));
    z += out[i];
  }
  for (double& v : out) {
    v /= z;
  }
  return out;
}

/// Asymptotic variance of the never-resampled prior-kernel filter: importance sampling of whole paths
/// from phi_1 x Q x ... x Q with weight prod_{j>=2} g_j, via the delta method.
inline double never_resample_variance(const DiscreteHMM& m, std::size_t k,
                                      const std::function<double(const std::vector<std::size_t>&)>& f) {
  const std::size_t n = m.n_states();
  std::vector<double> phi1(n);
  double z1 = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    phi1[x] = m.chi()[x] * m.likelihood(1, x);
    z1 += phi1[x];
  }
  const std::size_t size = power(n, k);
  std::vector<double> q(size);
  std::vector<double> w(size);
  std::vector<double> fv(size);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const auto p = path_of(i, n, k);
    q[i] = phi1[p[0]] / z1;
    w[i] = 1.0;
    for (std::size_t j = 1; j < k; ++j) {
      q[i] *= m.transition(p[j - 1], p[j]);
      w[i] *= m.likelihood(j + 1, p[j]);
    }
    fv[i] = f(p);
    num += q[i] * w[i] * fv[i];
    den += q[i] * w[i];
  }
  const double mean = num / den;
  double acc = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = fv[i] - mean;
    acc += q[i] * w[i] * w[i] * d * d;
  }
  return acc / (den * den);
}

/// Bootstrap filter (resample every step) at k = 2 with the prior kernel:
/// Var_{psi_2}(f) + sum_paths q w^2 (f - psi_2 f)^2 / (sum q w)^2, q = phi_1 x Q, w = g_2(x_2).
inline double bootstrap_k2_variance(const DiscreteHMM& m,
                                    const std::function<double(const std::vector<std::size_t>&)>& f) {
  const auto psi2 = brute_smoothing(m, 2);
  const std::size_t n = m.n_states();
  double mean = 0.0;
  for (std::size_t i = 0; i < psi2.size(); ++i) {
    mean += psi2[i] * f(path_of(i, n, 2));
  }
  double var = 0.0;
  for (std::size_t i = 0; i < psi2.size(); ++i) {
    const double d = f(path_of(i, n, 2)) - mean;
    var += psi2[i] * d * d;
  }
  return var + never_resample_variance(m, 2, f);
}

}  // namespace smclimits::testing
