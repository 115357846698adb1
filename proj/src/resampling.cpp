#include "smclimits/resampling.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "smclimits/error.hpp"
#include "smclimits/numeric.hpp"

namespace smclimits {

ResamplingTrigger ResamplingTrigger::cv_threshold(double kappa2) {
  if (!(kappa2 >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "kappa2 must be nonnegative");
  }
  return {Kind::kCvThreshold, kappa2};
}

bool ResamplingTrigger::fires(double cv2) const noexcept {
  switch (kind) {
    case Kind::kAlways:
      return true;
    case Kind::kNever:
      return false;
    case Kind::kCvThreshold:
      return cv2 >= kappa2;
  }
  return false;
}

double ResamplingTrigger::effective_kappa2() const noexcept {
  switch (kind) {
    case Kind::kAlways:
      return 0.0;
    case Kind::kNever:
      return std::numeric_limits<double>::infinity();
    case Kind::kCvThreshold:
      return kappa2;
  }
  return kappa2;
}

std::size_t ResamplingSize::output_size(std::size_t m_in) const {
  if (absolute > 0) {
    return absolute;
  }
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw Error(ErrorCode::kInvalidArgument, "output size ratio must be positive and finite");
  }
  const double m = std::round(ratio * static_cast<double>(m_in));
  if (m < 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "resampled size must be at least one");
  }
  return static_cast<std::size_t>(m);
}

namespace {

WeightedSample gather(const WeightedSample& sample, const std::vector<std::size_t>& indices) {
  const std::size_t dim = sample.dim();
  std::vector<double> coords(indices.size() * dim);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const PointView p = sample.point(indices[j]);
    std::copy(p.begin(), p.end(), coords.begin() + static_cast<std::ptrdiff_t>(j * dim));
  }
  return WeightedSample(dim, std::move(coords), std::vector<double>(indices.size(), 1.0));
}

void require_positive_size(std::size_t m_out) {
  if (m_out == 0) {
    throw Error(ErrorCode::kInvalidArgument, "resampled size must be at least one");
  }
}

std::vector<double> evaluate(const WeightedSample& sample, const Integrand& f) {
  std::vector<double> values(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    values[i] = f(sample.point(i));
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kNonFiniteIntegrand, "non-finite integrand");
    }
  }
  return values;
}

/// Mean and variance of f under the probability vector p.
ConditionalMoments moments_under(std::span<const double> p, std::span<const double> f) {
  CompensatedSum mean_acc;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mean_acc.add(p[i] * f[i]);
  }
  const double mean = mean_acc.value();
  CompensatedSum var_acc;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = f[i] - mean;
    var_acc.add(p[i] * d * d);
  }
  return {mean, var_acc.value()};
}

std::vector<double> normalized_weights(const WeightedSample& sample) {
  std::vector<double> p(sample.weights().begin(), sample.weights().end());
  for (double& v : p) {
    v /= sample.total();
  }
  return p;
}

/// Mean and variance of (offset + sum_k f[I_k]) / m_out over all outcomes of `draws` i.i.d. categorical(p) indices.
ConditionalMoments enumerate_categorical(std::span<const double> p, std::span<const double> f, std::size_t draws,
                                         double offset, std::size_t m_out) {
  const std::size_t n = p.size();
  std::size_t outcomes = 1;
  for (std::size_t k = 0; k < draws; ++k) {
    outcomes *= n;
  }
  std::vector<std::size_t> digits(draws, 0);
  std::vector<double> probs(outcomes);
  std::vector<double> values(outcomes);
  for (std::size_t o = 0; o < outcomes; ++o) {
    std::size_t code = o;
    double prob = 1.0;
    CompensatedSum total;
    total.add(offset);
    for (std::size_t k = 0; k < draws; ++k) {
      const std::size_t idx = code % n;
      code /= n;
      prob *= p[idx];
      total.add(f[idx]);
    }
    probs[o] = prob;
    values[o] = total.value() / static_cast<double>(m_out);
  }
  return moments_under(probs, values);
}

}  // namespace

WeightedSample multinomial_resample(const WeightedSample& sample, std::size_t m_out, Rng& rng) {
  require_positive_size(m_out);
  const auto cumulative = cumulative_sums(sample.weights());
  const double total = cumulative.back();
  std::vector<std::size_t> indices(m_out);
  for (auto& idx : indices) {
    idx = inverse_cdf_index(cumulative, uniform01(rng) * total);
  }
  return gather(sample, indices);
}

ResidualCounts residual_counts(const WeightedSample& sample, std::size_t m_out) {
  require_positive_size(m_out);
  const auto m = static_cast<double>(m_out);
  const std::size_t n = sample.size();
  ResidualCounts rc;
  rc.floors.resize(n);
  std::vector<double> fractional(n);
  std::size_t m_bar = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double expected = m * sample.weight(i) / sample.total();
    // Plain floor: values a hair below an integer stay below it, so floors never exceed the exact count.
    const double fl = std::floor(expected);
    rc.floors[i] = static_cast<std::size_t>(fl);
    fractional[i] = std::max(0.0, expected - fl);
    m_bar += rc.floors[i];
  }
  // Rounding of m*w/W upward can only push m_bar past m_out by a few units; shed copies
  // from the particles whose expected count sits closest to its floor.
  while (m_bar > m_out) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (rc.floors[i] > 0 && (best == n || fractional[i] < fractional[best])) {
        best = i;
      }
    }
    --rc.floors[best];
    fractional[best] += 1.0;
    --m_bar;
  }
  rc.m_bar = m_bar;
  if (m_bar < m_out) {
    const double frac_total = compensated_sum(fractional);
    rc.residual_probs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rc.residual_probs[i] = fractional[i] / frac_total;
    }
  }
  return rc;
}

WeightedSample residual_resample(const WeightedSample& sample, std::size_t m_out, Rng& rng) {
  const ResidualCounts rc = residual_counts(sample, m_out);
  std::vector<std::size_t> indices;
  indices.reserve(m_out);
  for (std::size_t i = 0; i < rc.floors.size(); ++i) {
    indices.insert(indices.end(), rc.floors[i], i);
  }
  if (rc.m_bar < m_out) {
    const auto cumulative = cumulative_sums(rc.residual_probs);
    const double total = cumulative.back();
    for (std::size_t k = rc.m_bar; k < m_out; ++k) {
      indices.push_back(inverse_cdf_index(cumulative, uniform01(rng) * total));
    }
  }
  return gather(sample, indices);
}

WeightedSample resample(ResamplingScheme scheme, const WeightedSample& sample, std::size_t m_out, Rng& rng) {
  return scheme == ResamplingScheme::kMultinomial ? multinomial_resample(sample, m_out, rng)
                                                  : residual_resample(sample, m_out, rng);
}

double conditional_mean_oracle(ResamplingScheme scheme, const WeightedSample& sample, const Integrand& f,
                               std::size_t m_out) {
  require_positive_size(m_out);
  const auto values = evaluate(sample, f);
  if (scheme == ResamplingScheme::kMultinomial) {
    return moments_under(normalized_weights(sample), values).mean;
  }
  const ResidualCounts rc = residual_counts(sample, m_out);
  CompensatedSum det;
  for (std::size_t i = 0; i < values.size(); ++i) {
    det.add(static_cast<double>(rc.floors[i]) * values[i]);
  }
  double residual_part = 0.0;
  if (rc.m_bar < m_out) {
    residual_part = static_cast<double>(m_out - rc.m_bar) * moments_under(rc.residual_probs, values).mean;
  }
  det.add(residual_part);
  return det.value() / static_cast<double>(m_out);
}

double conditional_var_oracle(ResamplingScheme scheme, const WeightedSample& sample, const Integrand& f,
                              std::size_t m_out) {
  require_positive_size(m_out);
  const auto values = evaluate(sample, f);
  const auto m = static_cast<double>(m_out);
  if (scheme == ResamplingScheme::kMultinomial) {
    return moments_under(normalized_weights(sample), values).variance / m;
  }
  const ResidualCounts rc = residual_counts(sample, m_out);
  if (rc.m_bar == m_out) {
    return 0.0;
  }
  return static_cast<double>(m_out - rc.m_bar) * moments_under(rc.residual_probs, values).variance / (m * m);
}

ConditionalMoments enumerate_conditional_moments(ResamplingScheme scheme, const WeightedSample& sample,
                                                 const Integrand& f, std::size_t m_out) {
  require_positive_size(m_out);
  const auto values = evaluate(sample, f);
  if (scheme == ResamplingScheme::kMultinomial) {
    return enumerate_categorical(normalized_weights(sample), values, m_out, 0.0, m_out);
  }
  const ResidualCounts rc = residual_counts(sample, m_out);
  CompensatedSum det;
  for (std::size_t i = 0; i < values.size(); ++i) {
    det.add(static_cast<double>(rc.floors[i]) * values[i]);
  }
  if (rc.m_bar == m_out) {
    return {det.value() / static_cast<double>(m_out), 0.0};
  }
  return enumerate_categorical(rc.residual_probs, values, m_out - rc.m_bar, det.value(), m_out);
}

double w_ell_phi(double x) {
  if (std::isinf(x) && x > 0.0) {
    return 0.0;
  }
  if (!(x > 0.0)) {
    throw Error(ErrorCode::kPhiNotPositive, "Phi must be positive");
  }
  return 1.0 - std::floor(x) / x;
}

namespace {

std::vector<double> scaled_phi(const DiscreteDistribution& nu, double ell, const std::function<double(double)>& phi) {
  CompensatedSum inv;
  for (const auto& a : nu.atoms()) {
    const double p = phi(a.value);
    if (!(p > 0.0)) {
      throw Error(ErrorCode::kPhiNotPositive, "Phi must be positive");
    }
    inv.add(a.probability / p);
  }
  const double nu_inv_phi = inv.value();
  std::vector<double> x;
  x.reserve(nu.atoms().size());
  for (const auto& a : nu.atoms()) {
    x.push_back(ell * nu_inv_phi * phi(a.value));
  }
  return x;
}

}  // namespace

bool residual_regularity_check(const DiscreteDistribution& nu, double ell, const std::function<double(double)>& phi) {
  if (!(ell > 0.0) || std::isinf(ell)) {
    return false;
  }
  const auto x = scaled_phi(nu, ell, phi);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (nu.atoms()[j].probability == 0.0) {
      continue;
    }
    if (!std::isfinite(x[j]) || std::abs(x[j] - std::round(x[j])) <= 1e-9) {
      return false;
    }
  }
  return true;
}

double residual_deterministic_limit(const DiscreteDistribution& nu, double ell,
                                    const std::function<double(double)>& phi, const std::function<double(double)>& f) {
  if (!residual_regularity_check(nu, ell, phi)) {
    throw Error(ErrorCode::kAtomicIntegerMass, "atomic integer mass");
  }
  const auto x = scaled_phi(nu, ell, phi);
  CompensatedSum acc;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& a = nu.atoms()[j];
    acc.add(a.probability * f(a.value) * std::floor(x[j]) / x[j]);
  }
  return acc.value();
}

double residual_variance_limit(const DiscreteDistribution& nu, double ell, const std::function<double(double)>& phi,
                               const std::function<double(double)>& f) {
  if (std::isinf(ell)) {
    return 0.0;
  }
  if (!residual_regularity_check(nu, ell, phi)) {
    throw Error(ErrorCode::kAtomicIntegerMass, "atomic integer mass");
  }
  const auto x = scaled_phi(nu, ell, phi);
  CompensatedSum mass;
  CompensatedSum first;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& a = nu.atoms()[j];
    const double w = w_ell_phi(x[j]);
    mass.add(a.probability * w);
    first.add(a.probability * w * f(a.value));
  }
  if (mass.value() == 0.0) {
    return 0.0;
  }
  const double centre = first.value() / mass.value();
  CompensatedSum acc;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& a = nu.atoms()[j];
    const double d = f(a.value) - centre;
    acc.add(a.probability * w_ell_phi(x[j]) * d * d);
  }
  return acc.value();
}

}  // namespace smclimits
