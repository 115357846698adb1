#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "smclimits/error.hpp"
#include "smclimits/numeric.hpp"
#include "smclimits/variance_oracle.hpp"
#include "test_support.hpp"

using namespace smclimits;
using namespace smclimits::testing;
using Catch::Approx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double terminal_indicator(PointView p) { return p.back() == 0.0 ? 1.0 : 0.0; }

DiscreteHMM random_model(Rng& rng, std::size_t n, std::size_t horizon) {
  auto simplex = [&] {
    std::vector<double> v(n);
    double s = 0.0;
    for (double& x : v) {
      x = 0.05 + uniform01(rng);
      s += x;
    }
    for (double& x : v) {
      x /= s;
    }
    return v;
  };
  std::vector<std::vector<double>> q;
  for (std::size_t i = 0; i < n; ++i) {
    q.push_back(simplex());
  }
  std::vector<std::vector<double>> g(horizon, std::vector<double>(n));
  for (auto& row : g) {
    for (double& x : row) {
      x = 0.3 + 2.7 * uniform01(rng);
    }
  }
  return DiscreteHMM(simplex(), q, g);
}

}  // namespace

TEST_CASE("initial level") {
  const DiscreteHMM m({0.6, 0.4}, kQ, {{1.0, 1.0}, {1.0, 1.0}});
  const auto s = recursion_init(m);
  CHECK(s.k() == 1);
  CHECK(s.psi() == s.gamma());
  CHECK(s.level(1).epsilon == -1);
  CHECK(sigma2(s, terminal_indicator) == Approx(0.24));
  CHECK(sigma2(s, [](PointView) { return 3.0; }) == Approx(0.0).margin(1e-15));
}

TEST_CASE("psi_k equals exact smoothing for every proposal and threshold") {
  const auto m = default_model();
  for (auto kind : {ProposalKind::kPrior, ProposalKind::kOptimal, ProposalKind::kResampleMove}) {
    for (double k2 : {0.0, 1.0, kInf}) {
      auto s = recursion_init(m);
      for (std::size_t k = 2; k <= 5; ++k) {
        recursion_step(s, m, kind, k2);
        const auto exact = exact_joint_smoothing(m, k);
        for (std::size_t i = 0; i < exact.size(); ++i) {
          CHECK(s.psi()[i] == Approx(exact.probs[i]).margin(1e-12));
        }
        CHECK(compensated_sum(s.psi()) == Approx(1.0).margin(1e-12));
        if (s.level(k).epsilon == 1) {
          CHECK(s.gamma() == s.psi());
        }
      }
    }
  }
}

TEST_CASE("sigma_2^2 on the k = 2 fixture equals the brute-force evaluator") {
  const auto m = k2_fixture();
  const auto s = run_recursion(m, ProposalKind::kPrior, 0.0, 2);
  REQUIRE(s.level(2).epsilon == 1);
  const double brute = bootstrap_k2_variance(m, [](const std::vector<std::size_t>& p) { return p[1] == 0 ? 1.0 : 0.0; });
  CHECK(std::abs(sigma2(s, terminal_indicator) - brute) <= 1e-12);
}

TEST_CASE("never-resample recursion equals whole-path importance sampling") {
  const auto m = default_model();
  auto s = recursion_init(m);
  for (std::size_t k = 2; k <= 5; ++k) {
    recursion_step(s, m, ProposalKind::kPrior, kInf);
    CHECK(s.level(k).epsilon == 0);
    const double rec = sigma2(s, terminal_indicator);
    const double ref = never_resample_variance(m, k, [](const std::vector<std::size_t>& p) { return p.back() == 0 ? 1.0 : 0.0; });
    CHECK(rec == Approx(ref).epsilon(1e-12));
    if (k >= 3) {
      const auto path_f = [](PointView p) { return p[0] + 2.0 * p[2]; };
      const double ref_path =
          never_resample_variance(m, k, [](const std::vector<std::size_t>& p) { return p[0] + 2.0 * p[2]; });
      CHECK(sigma2(s, path_f) == Approx(ref_path).epsilon(1e-12));
    }
  }
}

TEST_CASE("g = 1 with resampling at every step reduces to the Markov cascade") {
  const std::vector<std::vector<double>> q = {{0.7, 0.2, 0.1}, {0.3, 0.4, 0.3}, {0.1, 0.1, 0.8}};
  const std::vector<double> chi = {0.5, 0.3, 0.2};
  const std::size_t horizon = 5;
  const DiscreteHMM m(chi, q, std::vector<std::vector<double>>(horizon, std::vector<double>(3, 1.0)));
  const std::vector<double> f = {1.0, -2.0, 0.5};
  auto s = recursion_init(m);
  for (std::size_t k = 2; k <= horizon; ++k) {
    // gamma_{k-1}(1) = 1 under constant weights, so the rule fires exactly when kappa2 = 0.
    CHECK(ess_limit(s, m, ProposalKind::kPrior) == Approx(0.0).margin(1e-14));
    recursion_step(s, m, ProposalKind::kPrior, 0.0);

    // Closed form: h_k = f, h_{j-1} = Q h_j, pi_j = chi Q^{j-1}.
    std::vector<std::vector<double>> h(k + 1);
    h[k] = f;
    for (std::size_t j = k; j > 1; --j) {
      h[j - 1].assign(3, 0.0);
      for (std::size_t x = 0; x < 3; ++x) {
        for (std::size_t z = 0; z < 3; ++z) {
          h[j - 1][x] += q[x][z] * h[j][z];
        }
      }
    }
    std::vector<std::vector<double>> pi(k + 1);
    pi[1] = chi;
    for (std::size_t j = 2; j <= k; ++j) {
      pi[j].assign(3, 0.0);
      for (std::size_t x = 0; x < 3; ++x) {
        for (std::size_t z = 0; z < 3; ++z) {
          pi[j][z] += pi[j - 1][x] * q[x][z];
        }
      }
    }
    auto var = [](const std::vector<double>& p, const std::vector<double>& v) {
      double mu = 0.0;
      double sq = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        mu += p[i] * v[i];
        sq += p[i] * v[i] * v[i];
      }
      return sq - mu * mu;
    };
    double closed = var(pi[1], h[1]);
    for (std::size_t j = 2; j <= k; ++j) {
      closed += var(pi[j], h[j]);
      for (std::size_t x = 0; x < 3; ++x) {
        closed += pi[j - 1][x] * var(q[x], h[j]);
      }
    }
    CHECK(sigma2(s, [&f](PointView p) { return f[static_cast<std::size_t>(p.back())]; }) == Approx(closed).epsilon(1e-12));
  }
  // The same constant-weight model never resamples for kappa2 > 0.
  const auto adaptive = run_recursion(m, ProposalKind::kPrior, 0.5, horizon);
  for (int e : adaptive.epsilons()) {
    CHECK(e == 0);
  }
}

TEST_CASE("kappa2 = 0 forces selection and kappa2 = inf forbids it") {
  const auto m = default_model();
  const auto always = run_recursion(m, ProposalKind::kPrior, 0.0, 5);
  const auto never = run_recursion(m, ProposalKind::kPrior, kInf, 5);
  for (std::size_t k = 2; k <= 5; ++k) {
    CHECK(always.level(k).epsilon == 1);
    CHECK(always.level(k).ess_limit > 0.0);
    CHECK(never.level(k).epsilon == 0);
  }
  const auto adaptive = run_recursion(m, ProposalKind::kPrior, 1.0, 5);
  CHECK(adaptive.epsilons() == std::vector<int>{0, 1, 0, 0});
  for (std::size_t k = 2; k <= 5; ++k) {
    CHECK_FALSE(adaptive.level(k).near_boundary);
  }
}

TEST_CASE("sigma^2 invariants") {
  const auto m = default_model();
  for (auto kind : {ProposalKind::kPrior, ProposalKind::kOptimal, ProposalKind::kResampleMove}) {
    for (double k2 : {0.0, 1.0, kInf}) {
      const auto s = run_recursion(m, kind, k2, 5);
      const auto f = [](PointView p) { return p[1] - 0.5 * p[4] + (p[2] == 1.0 ? 2.0 : 0.0); };
      const double base = sigma2(s, f);
      CHECK(base >= 0.0);
      CHECK(sigma2(s, [](PointView) { return -4.0; }) == Approx(0.0).margin(1e-13));
      CHECK(sigma2(s, [&f](PointView p) { return 3.0 * f(p); }) == Approx(9.0 * base).epsilon(1e-12));
      CHECK(sigma2(s, [&f](PointView p) { return f(p) + 11.0; }) == Approx(base).epsilon(1e-10));
      CHECK(compensated_sum(s.gamma()) >= 1.0 - 1e-12);
    }
  }
}

TEST_CASE("ess limit is nonnegative and gamma(1) >= 1 on random models") {
  Rng rng = make_rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(uniform01(rng) * 2);
    const auto m = random_model(rng, n, 4);
    auto s = recursion_init(m);
    for (std::size_t k = 2; k <= 4; ++k) {
      const auto kind = trial % 2 == 0 ? ProposalKind::kPrior : ProposalKind::kOptimal;
      CHECK(ess_limit(s, m, kind) >= -1e-14);
      recursion_step(s, m, kind, 0.8);
      CHECK(compensated_sum(s.gamma()) >= 1.0 - 1e-12);
    }
  }
}

TEST_CASE("optimal kernel with one-step look-ahead has constant-in-child weights") {
  // With the optimal kernel and always resampling, the k = 2 mutation term involves Var of W only through the parent.
  const auto m = k2_fixture();
  const auto s = run_recursion(m, ProposalKind::kOptimal, 0.0, 2);
  const auto& table = s.level(2).kernel;
  for (const auto& row : table.rows) {
    for (const auto& e : row) {
      CHECK(e.weight == Approx(row.front().weight));
    }
  }
}

TEST_CASE("boundary proximity and cap") {
  const auto m = default_model();
  auto s = recursion_init(m);
  const double limit = ess_limit(s, m, ProposalKind::kPrior);
  recursion_step(s, m, ProposalKind::kPrior, limit * 1.02);
  CHECK(s.level(2).near_boundary);
  CHECK(s.level(2).epsilon == 0);
  CHECK_THROWS_AS(run_recursion(m, ProposalKind::kPrior, 0.0, 5, 8), Error);
  CHECK_THROWS_AS(recursion_step(s, m, ProposalKind::kPrior, -1.0), Error);
}

TEST_CASE("variance table rows") {
  const auto m = default_model();
  const auto rows = variance_table(m, ProposalKind::kPrior, 1.0, 5, {[](PointView p) { return p[0] == 0.0 ? 1.0 : 0.0; }});
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].epsilon == -1);
  CHECK(rows[0].sigma2[0] == Approx(0.16));
  const auto s = run_recursion(m, ProposalKind::kPrior, 1.0, 4);
  CHECK(rows[3].sigma2[0] == Approx(sigma2(s, terminal_indicator)).epsilon(1e-14));
  CHECK(rows[2].epsilon == 1);
  CHECK(rows[2].gamma_mass == Approx(1.0));
}
