#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "smclimits/error.hpp"
#include "smclimits/limit_harness.hpp"
#include "test_support.hpp"

using namespace smclimits;
using namespace smclimits::testing;
using Catch::Approx;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.model = default_model();
  c.proposal = ProposalKind::kPrior;
  c.policy.trigger = ResamplingTrigger::cv_threshold(1.0);
  c.horizon = 4;
  c.functions = {TestFunction::indicator(0), TestFunction::indicator(1)};
  c.m_list = {64, 256};
  c.replicates = 12;
  c.seed = 5;
  return c;
}

/// Brute-force sup_x |F_n(x) - Phi(x)| over a fine grid plus both sides of every jump.
double brute_ks(const std::vector<double>& v) {
  double sup = 0.0;
  const double n = static_cast<double>(v.size());
  auto ecdf = [&](double x, bool inclusive) {
    std::size_t c = 0;
    for (double u : v) {
      c += inclusive ? (u <= x) : (u < x);
    }
    return static_cast<double>(c) / n;
  };
  for (double u : v) {
    sup = std::max(sup, std::abs(ecdf(u, true) - normal_cdf(u)));
    sup = std::max(sup, std::abs(ecdf(u, false) - normal_cdf(u)));
  }
  return sup;
}

}  // namespace

TEST_CASE("normal cdf") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == Approx(0.975).epsilon(1e-12));
  CHECK(normal_cdf(-1.0) == Approx(0.15865525393145707).epsilon(1e-12));
  CHECK(normal_cdf(-40.0) >= 0.0);
}

TEST_CASE("Kolmogorov survival function") {
  CHECK(kolmogorov_survival(0.0) == 1.0);
  CHECK(kolmogorov_survival(1.3580986393225505) == Approx(0.05).epsilon(1e-6));
  CHECK(kolmogorov_survival(1.2238478702170825) == Approx(0.10).epsilon(1e-6));
  CHECK(kolmogorov_survival(1.6276236115189) == Approx(0.01).epsilon(1e-5));
  // Continuity across the switch between the two series.
  CHECK(kolmogorov_survival(1.18 - 1e-9) == Approx(kolmogorov_survival(1.18 + 1e-9)).epsilon(1e-7));
  double prev = 1.0;
  for (double x = 0.01; x < 4.0; x += 0.01) {
    const double s = kolmogorov_survival(x);
    CHECK(s <= prev + 1e-14);
    CHECK(s >= 0.0);
    prev = s;
  }
}

TEST_CASE("KS statistic") {
  // Exact normal quantiles at (i - 1/2) / n give D = 1 / (2n).
  const std::size_t n = 40;
  std::vector<double> q;
  for (std::size_t i = 1; i <= n; ++i) {
    const double u = (static_cast<double>(i) - 0.5) / static_cast<double>(n);
    double lo = -10.0;
    double hi = 10.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (normal_cdf(mid) < u ? lo : hi) = mid;
    }
    q.push_back(0.5 * (lo + hi));
  }
  CHECK(ks_test(q).statistic == Approx(0.5 / n).epsilon(1e-9));
  CHECK(ks_test(q).p_value > 0.99);

  CHECK(ks_test(std::vector<double>(20, 0.0)).statistic == Approx(0.5));

  Rng rng = make_rng(12);
  std::vector<double> z(100);
  for (double& v : z) {
    v = standard_normal(rng) * 1.3 + 0.2;
  }
  CHECK(ks_test(z).statistic == Approx(brute_ks(z)).epsilon(1e-12));

  CHECK_THROWS_AS(ks_test(std::vector<double>(9, 0.0)), Error);
  std::vector<double> with_nan(20, 0.0);
  with_nan[3] = std::nan("");
  CHECK_THROWS_AS(ks_test(with_nan), Error);
}

TEST_CASE("CLT check accepts matching variance and rejects a misspecified one") {
  Rng rng = make_rng(21);
  std::vector<double> e(500);
  for (double& v : e) {
    v = 0.7 * standard_normal(rng);
  }
  const auto ok = clt_check(e, 0.49);
  CHECK(ok.pass);
  CHECK(ok.var_ratio == Approx(1.0).margin(0.15));
  CHECK_FALSE(ok.degenerate_oracle);
  CHECK_FALSE(clt_check(e, 0.49 * 4.0).pass);
  CHECK_FALSE(clt_check(e, 0.49 / 4.0).pass);

  const auto constant = clt_check(std::vector<double>(50, 0.0), 0.0);
  CHECK(constant.pass);
  CHECK(constant.var_ratio == 1.0);
  const auto degenerate = clt_check(e, 0.0);
  CHECK_FALSE(degenerate.pass);
  CHECK(degenerate.degenerate_oracle);
}

TEST_CASE("test functions") {
  const auto ind = TestFunction::indicator(1);
  CHECK(ind(1.0) == 1.0);
  CHECK(ind(0.0) == 0.0);
  CHECK(ind.label() == "indicator(1)");
  const auto aff = TestFunction::affine(2.0, -1.0);
  CHECK(aff(3.0) == 5.0);
  const Point path = {0.0, 4.0};
  CHECK(aff.on_paths()(path) == 7.0);
}

TEST_CASE("experiment configuration validation and hashing") {
  auto c = small_config();
  CHECK_NOTHROW(c.validate());
  const auto h = config_hash(c);
  CHECK(h.size() == 16);
  auto w = c;
  w.workers = 8;
  CHECK(config_hash(w) == h);
  auto s = c;
  s.seed = 6;
  CHECK(config_hash(s) != h);
  auto k = c;
  k.policy.trigger = ResamplingTrigger::cv_threshold(2.0);
  CHECK(config_hash(k) != h);

  auto bad = c;
  bad.m_list = {};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.replicates = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.horizon = 9;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("replicates are reproducible and independent of the worker count") {
  auto c = small_config();
  const auto a = run_replicates(c);
  c.workers = 4;
  const auto b = run_replicates(c);
  REQUIRE(a.rows.size() == 24);
  REQUIRE(b.rows.size() == a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].m == b.rows[i].m);
    CHECK(a.rows[i].replicate == b.rows[i].replicate);
    CHECK(a.rows[i].seed == derive_seed(5, {a.rows[i].m, a.rows[i].replicate}));
    CHECK(a.rows[i].estimates == b.rows[i].estimates);
    CHECK(a.rows[i].step_cv2 == b.rows[i].step_cv2);
    CHECK(a.rows[i].step_resampled.size() == 4);
    CHECK(a.rows[i].step_resampled[0] == 0);
    // f_0 + f_1 = 1 for the two indicators.
    CHECK(a.rows[i].estimates[0] + a.rows[i].estimates[1] == Approx(1.0));
  }
  CHECK(a.truths.size() == 2);
  CHECK(a.truths[0] + a.truths[1] == Approx(1.0));
  CHECK(a.scaled_errors(64).size() == 12);
  CHECK(a.aggregates.size() == 2);
}

TEST_CASE("a single replicate with a single particle yields one row") {
  auto c = small_config();
  c.m_list = {1};
  c.replicates = 1;
  const auto r = run_replicates(c);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].final_ess == 1.0);
  CHECK((r.rows[0].estimates[0] == 0.0 || r.rows[0].estimates[0] == 1.0));
}

TEST_CASE("LLN check") {
  auto c = small_config();
  c.functions = {TestFunction::indicator(0)};
  c.m_list = {128, 512, 2048, 8192};
  c.replicates = 60;
  const auto report = run_replicates(c);
  const auto lln = lln_check(report);
  CHECK(lln.slope == Approx(-0.5).margin(0.15));
  CHECK(lln.pass);

  // Negative control: a report whose errors do not shrink.
  auto flat = report;
  for (auto& agg : flat.aggregates) {
    agg.rmse[0] = 0.1;
  }
  CHECK_FALSE(lln_check(flat).pass);

  auto short_span = report;
  short_span.aggregates.resize(3);
  CHECK_THROWS_AS(lln_check(short_span), Error);
}

TEST_CASE("linear-Gaussian truths") {
  ExperimentConfig c;
  LinearGaussianSSM lg;
  lg.observations = LinearGaussianSSM::simulate_observations(0.9, 1.0, 1.0, 4, 3);
  c.model = lg;
  c.horizon = 4;
  c.functions = {TestFunction::affine(2.0, 1.0)};
  c.m_list = {10};
  c.replicates = 1;
  c.seed = 1;
  const auto kf = kalman_filter(lg);
  CHECK(exact_truths(c)[0] == Approx(2.0 * kf[3].mean + 1.0));
  c.functions = {TestFunction::indicator(0)};
  try {
    (void)exact_truths(c);
    FAIL("indicator truth should be unavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTruthUnavailable);
  }
}

TEST_CASE("counterexample statistic") {
  Rng rng = make_rng(4);
  for (int i = 0; i < 20; ++i) {
    const double t = counterexample_statistic(1000, rng);
    CHECK(t >= 0.0);
    CHECK(t <= 2.0);
  }
  const auto r = counterexample_run(20000, 400, 9, 3);
  REQUIRE(r.values.size() == 400);
  CHECK(r.pass);
  CHECK(r.mass_near_low >= 0.25);
  CHECK(r.mass_near_high >= 0.25);
  CHECK(r.mass_near_low + r.mass_near_high == Catch::Approx(1.0));
  CHECK(r.max_window_mass < 0.9);
  const auto again = counterexample_run(20000, 400, 9, 1);
  CHECK(again.values == r.values);

  CHECK(max_window_mass({0.0, 0.01, 0.02, 1.0}, 0.02) == Approx(0.75));
  CHECK(max_window_mass({0.0, 0.5, 1.0}, 0.1) == Approx(1.0 / 3.0));
}
