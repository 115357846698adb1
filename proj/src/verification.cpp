#include "smclimits/verification.hpp"

#include <algorithm>
#include <cmath>

#include "smclimits/kernels.hpp"
#include "smclimits/resampling.hpp"
#include "smclimits/rng.hpp"

namespace smclimits {

namespace {

constexpr std::uint64_t kSmallStream = 0x5a11;
constexpr std::uint64_t kOrderStream = 0x04de;
constexpr std::uint64_t kEssStream = 0xe55;

std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + std::min(hi - lo, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1)));
}

std::vector<double> random_weights(Rng& rng, std::size_t m) {
  std::vector<double> w(m);
  do {
    for (double& v : w) {
      // Mix of exponential-tailed and occasionally zero weights.
      const double u = uniform01(rng);
      v = u < 0.1 ? 0.0 : -std::log1p(-uniform01(rng));
    }
  } while (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; }));
  return w;
}

std::vector<double> random_points(Rng& rng, std::size_t m) {
  std::vector<double> x(m);
  for (double& v : x) {
    v = std::round(8.0 * uniform01(rng) - 4.0) / 2.0;
  }
  return x;
}

double coordinate(PointView p) { return p[0]; }
double indicator_nonnegative(PointView p) { return p[0] >= 0.0 ? 1.0 : 0.0; }

}  // namespace

std::vector<SuiteCase> adversarial_cases() {
  struct Shape {
    std::vector<double> x;
    std::vector<double> w;
    std::size_t m_out;
  };
  const std::vector<Shape> shapes = {
      {{0.0}, {1.0}, 1},
      {{0.0}, {3.0}, 4},
      {{1.0, -1.0}, {1.0, 1.0}, 2},
      {{1.0, -1.0}, {1.0, 1.0}, 3},
      {{1.0, -1.0, 2.0}, {1.0, 0.0, 0.0}, 4},
      {{1.0, -1.0, 2.0, 3.0}, {0.0, 0.0, 0.0, 5.0}, 3},
      {{1.0, 2.0, 3.0}, {1.0, 1.0, 2.0}, 4},
      {{1.0, 2.0, 3.0, 4.0}, {1.0, 1.0, 1.0, 1.0}, 4},
      {{1.0, 2.0, 3.0, 4.0}, {1.0, 1.0, 1.0, 1.0}, 1},
      {{-2.0, 2.0}, {1.0, 1e-300}, 4},
      {{-2.0, 2.0}, {1e300, 1.0}, 3},
      {{0.5, 1.5, 2.5}, {1.0, 1.0 + 1e-12, 1.0 - 1e-12}, 3},
      {{0.5, 1.5, 2.5}, {1.0, 2.0, 1.0}, 2},
      {{0.5, 1.5, 2.5, 3.5}, {1e-12, 1.0, 1.0, 1.0}, 3},
      {{0.5, -1.5}, {1.0, 3.0}, 4},
      {{0.5, -1.5}, {1.0, 3.0}, 1},
      {{0.5, -1.5, 2.0}, {0.1, 0.2, 0.7}, 4},
      {{3.0, 3.0, -3.0, -3.0}, {0.25, 0.25, 0.25, 0.25}, 2},
      {{-1.0, 0.0, 1.0, 2.0}, {4.0, 3.0, 2.0, 1.0}, 4},
      {{-1.0, 0.0, 1.0, 2.0}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0}, 3},
  };
  std::vector<SuiteCase> cases;
  for (const auto& s : shapes) {
    cases.push_back({WeightedSample::scalar(s.x, s.w), s.m_out});
  }
  return cases;
}

std::vector<SuiteCase> random_small_cases(std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed, {kSmallStream});
  std::vector<SuiteCase> cases;
  cases.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t m = uniform_index(rng, 1, 4);
    const std::size_t m_out = uniform_index(rng, 1, 4);
    auto x = random_points(rng, m);
    auto w = random_weights(rng, m);
    cases.push_back({WeightedSample::scalar(std::move(x), std::move(w)), m_out});
  }
  return cases;
}

UnbiasednessReport unbiasedness_suite(std::size_t random_cases, std::uint64_t seed, double tolerance) {
  auto cases = random_small_cases(random_cases, seed);
  for (auto& c : adversarial_cases()) {
    cases.push_back(std::move(c));
  }
  UnbiasednessReport report;
  const std::vector<Integrand> functions = {coordinate, indicator_nonnegative};
  for (const auto& c : cases) {
    for (const auto& f : functions) {
      const double target = estimate(c.sample, f);
      for (auto scheme : {ResamplingScheme::kMultinomial, ResamplingScheme::kResidual}) {
        const auto moments = enumerate_conditional_moments(scheme, c.sample, f, c.m_out);
        report.max_abs_error = std::max(report.max_abs_error, std::abs(moments.mean - target));
        ++report.checks;
      }
    }
  }
  report.pass = report.max_abs_error <= tolerance;
  return report;
}

VarianceOrderReport variance_order_suite(std::size_t instances, std::uint64_t seed, double tolerance) {
  Rng rng = make_rng(seed, {kOrderStream});
  VarianceOrderReport report;
  report.instances = instances;
  report.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t m = uniform_index(rng, 1, 64);
    const std::size_t m_out = uniform_index(rng, 1, 128);
    const auto sample = WeightedSample::scalar(random_points(rng, m), random_weights(rng, m));
    for (const auto& f : std::vector<Integrand>{coordinate, indicator_nonnegative}) {
      const double mult = conditional_var_oracle(ResamplingScheme::kMultinomial, sample, f, m_out);
      const double res = conditional_var_oracle(ResamplingScheme::kResidual, sample, f, m_out);
      report.min_slack = std::min(report.min_slack, mult - res);
    }
  }
  report.pass = report.min_slack >= -tolerance;
  return report;
}

EssIdentityReport ess_identity_suite(std::size_t vectors, std::uint64_t seed, double tolerance) {
  Rng rng = make_rng(seed, {kEssStream});
  EssIdentityReport report;
  report.vectors = vectors;
  for (std::size_t i = 0; i < vectors; ++i) {
    const std::size_t m = uniform_index(rng, 1, 1000);
    const auto sample = WeightedSample::scalar(std::vector<double>(m, 0.0), random_weights(rng, m));
    const double lhs = ess(sample) * (1.0 + cv2(sample));
    report.max_rel_error = std::max(report.max_rel_error, std::abs(lhs - static_cast<double>(m)) / static_cast<double>(m));
  }
  report.extremes_exact = true;
  for (std::size_t m : {1, 2, 3, 7, 10, 100, 1000}) {
    std::vector<double> one_hot(m, 0.0);
    one_hot[m / 2] = 2.5;
    const auto degenerate = WeightedSample::scalar(std::vector<double>(m, 0.0), one_hot);
    const auto equal = WeightedSample::scalar(std::vector<double>(m, 0.0), std::vector<double>(m, 0.7));
    if (ess(degenerate) != 1.0 || ess(equal) != static_cast<double>(m)) {
      report.extremes_exact = false;
    }
  }
  report.pass = report.max_rel_error <= tolerance && report.extremes_exact;
  return report;
}

WEllPhiReport w_ell_phi_suite(std::size_t m, double rel_tolerance) {
  const DiscreteDistribution nu({{0.0, 0.5}, {1.0, 0.3}, {2.5, 0.2}});
  const auto phi = [](double v) { return 1.0 + 0.5 * v; };
  const auto f = [](double v) { return v; };
  // Atom j appears in proportion to nu_j / Phi_j and carries weight Phi_j.
  const auto& atoms = nu.atoms();
  std::vector<double> lambda;
  for (const auto& a : atoms) {
    lambda.push_back(a.probability / phi(a.value));
  }
  double lambda_total = 0.0;
  for (double l : lambda) {
    lambda_total += l;
  }
  std::vector<double> xs;
  std::vector<double> ws;
  std::size_t placed = 0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    const std::size_t count = j + 1 == atoms.size()
                                  ? m - placed
                                  : static_cast<std::size_t>(std::llround(static_cast<double>(m) * lambda[j] / lambda_total));
    placed += count;
    xs.insert(xs.end(), count, atoms[j].value);
    ws.insert(ws.end(), count, phi(atoms[j].value));
  }
  const auto sample = WeightedSample::scalar(std::move(xs), std::move(ws));
  WEllPhiReport report;
  report.m = m;
  report.pass = true;
  for (double ell : {0.5, 1.0, 2.0}) {
    const std::size_t m_out = ResamplingSize{ell, 0}.output_size(m);
    const double scaled =
        static_cast<double>(m_out) *
        conditional_var_oracle(ResamplingScheme::kResidual, sample, [&f](PointView p) { return f(p[0]); }, m_out);
    const double limit = residual_variance_limit(nu, ell, phi, f);
    const double rel = std::abs(scaled - limit) / std::abs(limit);
    report.rows.push_back({ell, scaled, limit, rel});
    report.pass = report.pass && rel <= rel_tolerance;
  }
  return report;
}

}  // namespace smclimits
