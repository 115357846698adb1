#include "smclimits/limit_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

#include "smclimits/error.hpp"
#include "smclimits/numeric.hpp"
#include "smclimits/weighted_sample.hpp"

namespace smclimits {

namespace {

/// Runs body(i) for i in [0, n) on up to `workers` threads; the first exception is rethrown.
template <class Body>
void parallel_for(std::size_t n, std::size_t workers, Body&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) {
            failure = std::current_exception();
          }
          next.store(n);
        }
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const char* proposal_name(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::kPrior:
      return "prior";
    case ProposalKind::kOptimal:
      return "optimal";
    case ProposalKind::kResampleMove:
      return "resample_move";
  }
  return "unknown";
}

nlohmann::json kappa_json(double kappa2) {
  if (std::isinf(kappa2)) {
    return "inf";
  }
  return kappa2;
}

}  // namespace

double TestFunction::operator()(double terminal) const {
  if (kind == Kind::kIndicator) {
    return terminal == static_cast<double>(state) ? 1.0 : 0.0;
  }
  return a * terminal + b;
}

Integrand TestFunction::on_paths() const {
  return [self = *this](PointView p) { return self(p.back()); };
}

std::string TestFunction::label() const {
  if (kind == Kind::kIndicator) {
    return "indicator(" + std::to_string(state) + ")";
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "affine(%.17g,%.17g)", a, b);
  return buf;
}

void ExperimentConfig::validate() const {
  const std::size_t h = smclimits::horizon(model);
  if (horizon == 0 || horizon > h) {
    throw Error(ErrorCode::kConfig, "experiment horizon must be in [1, model horizon]");
  }
  if (functions.empty()) {
    throw Error(ErrorCode::kConfig, "at least one test function is required");
  }
  if (m_list.empty()) {
    throw Error(ErrorCode::kConfig, "M_list must not be empty");
  }
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    if (m_list[i] == 0 || (i > 0 && m_list[i] <= m_list[i - 1])) {
      throw Error(ErrorCode::kConfig, "M_list must be positive and strictly increasing");
    }
  }
  if (replicates == 0) {
    throw Error(ErrorCode::kConfig, "replicates must be positive");
  }
  if (proposal == ProposalKind::kResampleMove && !std::holds_alternative<DiscreteHMM>(model)) {
    throw Error(ErrorCode::kConfig, "resample_move requires a discrete HMM");
  }
  if (const auto* hmm = std::get_if<DiscreteHMM>(&model)) {
    for (const auto& f : functions) {
      if (f.kind == TestFunction::Kind::kIndicator && f.state >= hmm->n_states()) {
        throw Error(ErrorCode::kConfig, "indicator state out of range");
      }
    }
  }
}

nlohmann::json canonical_json(const ExperimentConfig& config) {
  nlohmann::json j;
  if (const auto* hmm = std::get_if<DiscreteHMM>(&config.model)) {
    j["model"] = {{"type", "discrete_hmm"},
                  {"chi", hmm->chi()},
                  {"transition", hmm->transition_matrix()},
                  {"likelihood", hmm->likelihood_table()}};
  } else {
    const auto& lg = std::get<LinearGaussianSSM>(config.model);
    j["model"] = {{"type", "linear_gaussian"},
                  {"phi", lg.phi},
                  {"sigma_x", lg.sigma_x},
                  {"tau", lg.tau},
                  {"observations", lg.observations}};
  }
  j["proposal"] = proposal_name(config.proposal);
  const auto& pol = config.policy;
  const char* trigger = pol.trigger.kind == ResamplingTrigger::Kind::kAlways  ? "always"
                        : pol.trigger.kind == ResamplingTrigger::Kind::kNever ? "never"
                                                                              : "cv_threshold";
  j["policy"] = {{"scheme", pol.scheme == ResamplingScheme::kMultinomial ? "multinomial" : "residual"},
                 {"trigger", trigger},
                 {"kappa2", kappa_json(pol.trigger.effective_kappa2())},
                 {"ell", pol.size.ratio},
                 {"absolute", pol.size.absolute}};
  nlohmann::json fs = nlohmann::json::array();
  for (const auto& f : config.functions) {
    fs.push_back(f.label());
  }
  j["experiment"] = {{"horizon", config.horizon},
                     {"functions", fs},
                     {"M_list", config.m_list},
                     {"replicates", config.replicates},
                     {"seed", config.seed}};
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = canonical_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> ExperimentReport::scaled_errors(std::size_t m, std::size_t f) const {
  std::vector<double> out;
  for (const auto& row : rows) {
    if (row.m == m) {
      out.push_back(row.scaled_errors.at(f));
    }
  }
  return out;
}

std::vector<double> exact_truths(const ExperimentConfig& config) {
  std::vector<double> truths;
  if (const auto* hmm = std::get_if<DiscreteHMM>(&config.model)) {
    const auto marginal = forward_backward_marginals(*hmm, config.horizon).back();
    for (const auto& f : config.functions) {
      CompensatedSum acc;
      for (std::size_t x = 0; x < marginal.size(); ++x) {
        acc.add(marginal[x] * f(static_cast<double>(x)));
      }
      truths.push_back(acc.value());
    }
    return truths;
  }
  const auto& lg = std::get<LinearGaussianSSM>(config.model);
  const auto moments = kalman_filter(lg.truncated(config.horizon)).back();
  for (const auto& f : config.functions) {
    if (f.kind != TestFunction::Kind::kAffine) {
      throw Error(ErrorCode::kTruthUnavailable, "truth unavailable for indicator functions on continuous models");
    }
    truths.push_back(f.a * moments.mean + f.b);
  }
  return truths;
}

ExperimentReport run_replicates(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport report;
  report.config_hash = config_hash(config);
  report.truths = exact_truths(config);
  const StateSpaceModel model = truncated(config.model, config.horizon);
  const std::size_t r_count = config.replicates;
  report.rows.resize(config.m_list.size() * r_count);

  parallel_for(report.rows.size(), config.workers, [&](std::size_t task) {
    const std::size_t m = config.m_list[task / r_count];
    const std::size_t r = task % r_count;
    ReplicateResult row;
    row.m = m;
    row.replicate = r;
    row.seed = derive_seed(config.seed, {m, r});
    const SmcTrace trace = smc_run(model, config.proposal, config.policy, m, row.seed);
    const WeightedSample& final_sample = trace.current();
    const double root_m = std::sqrt(static_cast<double>(m));
    for (std::size_t i = 0; i < config.functions.size(); ++i) {
      const double est = estimate(final_sample, config.functions[i].on_paths());
      row.estimates.push_back(est);
      row.scaled_errors.push_back(root_m * (est - report.truths[i]));
    }
    row.final_ess = ess(final_sample);
    row.final_max_weight_fraction = trace.steps.back().max_weight_fraction;
    row.n_resamples = trace.resample_count();
    for (const auto& step : trace.steps) {
      row.step_cv2.push_back(step.cv2);
      row.step_resampled.push_back(step.resampled ? 1 : 0);
    }
    report.rows[task] = std::move(row);
  });

  for (std::size_t mi = 0; mi < config.m_list.size(); ++mi) {
    MAggregate agg;
    agg.m = config.m_list[mi];
    const auto first = report.rows.begin() + static_cast<std::ptrdiff_t>(mi * r_count);
    const auto last = first + static_cast<std::ptrdiff_t>(r_count);
    const double r = static_cast<double>(r_count);
    for (std::size_t i = 0; i < config.functions.size(); ++i) {
      CompensatedSum sq;
      for (auto it = first; it != last; ++it) {
        const double e = it->estimates[i] - report.truths[i];
        sq.add(e * e);
      }
      agg.rmse.push_back(std::sqrt(sq.value() / r));
    }
    std::vector<double> mwf;
    CompensatedSum ess_sum;
    CompensatedSum resample_sum;
    agg.mean_step_cv2.assign(config.horizon, 0.0);
    agg.resample_frequency.assign(config.horizon, 0.0);
    std::vector<CompensatedSum> cv2_sum(config.horizon);
    std::vector<CompensatedSum> freq_sum(config.horizon);
    for (auto it = first; it != last; ++it) {
      mwf.push_back(it->final_max_weight_fraction);
      ess_sum.add(it->final_ess);
      resample_sum.add(static_cast<double>(it->n_resamples));
      for (std::size_t k = 0; k < config.horizon; ++k) {
        cv2_sum[k].add(it->step_cv2[k]);
        freq_sum[k].add(it->step_resampled[k]);
      }
    }
    for (std::size_t k = 0; k < config.horizon; ++k) {
      agg.mean_step_cv2[k] = cv2_sum[k].value() / r;
      agg.resample_frequency[k] = freq_sum[k].value() / r;
    }
    agg.median_final_max_weight_fraction = median(std::move(mwf));
    agg.mean_final_ess = ess_sum.value() / r;
    agg.mean_resamples = resample_sum.value() / r;
    report.aggregates.push_back(std::move(agg));
  }
  return report;
}

LlnResult lln_check(const ExperimentReport& report, std::size_t function) {
  const auto& aggs = report.aggregates;
  if (aggs.size() < 4) {
    throw Error(ErrorCode::kInsufficientData, "LLN check needs at least 4 particle counts");
  }
  const double span = std::log2(static_cast<double>(aggs.back().m)) - std::log2(static_cast<double>(aggs.front().m));
  if (span < 2.0) {
    throw Error(ErrorCode::kInsufficientData, "LLN check needs M to span at least 2 in log2");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& a : aggs) {
    if (!(a.rmse.at(function) > 0.0)) {
      throw Error(ErrorCode::kInsufficientData, "LLN check needs positive RMSE at every M");
    }
    xs.push_back(std::log2(static_cast<double>(a.m)));
    ys.push_back(std::log2(a.rmse[function]));
  }
  const double n = static_cast<double>(xs.size());
  const double mx = compensated_sum(xs) / n;
  const double my = compensated_sum(ys) / n;
  CompensatedSum sxy;
  CompensatedSum sxx;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy.add((xs[i] - mx) * (ys[i] - my));
    sxx.add((xs[i] - mx) * (xs[i] - mx));
  }
  LlnResult out{sxy.value() / sxx.value(), true, false};
  for (std::size_t i = 1; i < aggs.size(); ++i) {
    if (!(aggs[i].median_final_max_weight_fraction < aggs[i - 1].median_final_max_weight_fraction)) {
      out.max_weight_decreasing = false;
    }
  }
  out.pass = out.slope >= -0.6 && out.slope <= -0.4 && out.max_weight_decreasing;
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) {
    return 1.0;
  }
  constexpr int kTerms = 100;
  if (lambda < 1.18) {
    // Dual (Jacobi theta) form converges fast for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    CompensatedSum acc;
    for (int j = 1; j <= kTerms; ++j) {
      const double odd = 2.0 * j - 1.0;
      acc.add(std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda)));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * acc.value(), 0.0, 1.0);
  }
  CompensatedSum acc;
  for (int j = 1; j <= kTerms; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    acc.add(j % 2 == 1 ? term : -term);
  }
  return std::clamp(2.0 * acc.value(), 0.0, 1.0);
}

KsResult ks_test(std::vector<double> values) {
  if (values.size() < 10) {
    throw Error(ErrorCode::kInsufficientData, "KS test needs at least 10 values");
  }
  for (double v : values) {
    if (std::isnan(v)) {
      throw Error(ErrorCode::kInvalidArgument, "KS test values must not be NaN");
    }
  }
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double cdf = normal_cdf(values[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  const double root_n = std::sqrt(n);
  return {d, kolmogorov_survival((root_n + 0.12 + 0.11 / root_n) * d)};
}

CltResult clt_check(const std::vector<double>& scaled_errors, double sigma2_oracle) {
  if (scaled_errors.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "CLT check needs at least 2 errors");
  }
  if (!(sigma2_oracle >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "oracle variance must be nonnegative");
  }
  const double n = static_cast<double>(scaled_errors.size());
  const double mean = compensated_sum(scaled_errors) / n;
  CompensatedSum sq;
  for (double e : scaled_errors) {
    sq.add((e - mean) * (e - mean));
  }
  const double sample_var = sq.value() / (n - 1.0);
  const bool all_zero = std::all_of(scaled_errors.begin(), scaled_errors.end(), [](double e) { return e == 0.0; });
  if (sigma2_oracle == 0.0) {
    if (all_zero) {
      return {1.0, 0.0, 1.0, true, false};
    }
    return {std::numeric_limits<double>::infinity(), 1.0, 0.0, false, true};
  }
  const double sd = std::sqrt(sigma2_oracle);
  std::vector<double> standardized;
  standardized.reserve(scaled_errors.size());
  for (double e : scaled_errors) {
    standardized.push_back(e / sd);
  }
  const KsResult ks = ks_test(std::move(standardized));
  CltResult out{sample_var / sigma2_oracle, ks.statistic, ks.p_value, false, false};
  out.pass = out.var_ratio >= 0.8 && out.var_ratio <= 1.25 && out.ks_p >= 0.01;
  return out;
}

double counterexample_statistic(std::size_t m, Rng& rng) {
  if (m == 0) {
    throw Error(ErrorCode::kInvalidArgument, "M must be positive");
  }
  std::vector<double> xi(m);
  CompensatedSum total;
  for (double& x : xi) {
    x = uniform01(rng) < 2.0 / 3.0 ? 0.5 : 2.0;
    total.add(x);
  }
  const double omega = total.value();
  const double md = static_cast<double>(m);
  CompensatedSum t;
  for (double x : xi) {
    t.add(std::floor(md * x / omega) * x);
  }
  return t.value() / md;
}

double max_window_mass(std::vector<double> values, double width) {
  if (values.empty()) {
    return 0.0;
  }
  std::sort(values.begin(), values.end());
  std::size_t best = 0;
  std::size_t hi = 0;
  for (std::size_t lo = 0; lo < values.size(); ++lo) {
    hi = std::max(hi, lo);
    while (hi < values.size() && values[hi] - values[lo] <= width) {
      ++hi;
    }
    best = std::max(best, hi - lo);
  }
  return static_cast<double>(best) / static_cast<double>(values.size());
}

CounterexampleResult counterexample_run(std::size_t m, std::size_t replicates, std::uint64_t seed,
                                        std::size_t workers) {
  if (replicates == 0) {
    throw Error(ErrorCode::kInvalidArgument, "replicates must be positive");
  }
  CounterexampleResult out;
  out.values.resize(replicates);
  parallel_for(replicates, workers, [&](std::size_t r) {
    Rng rng = make_rng(seed, {m, r});
    out.values[r] = counterexample_statistic(m, rng);
  });
  const double r = static_cast<double>(replicates);
  auto near = [&](double atom) {
    return static_cast<double>(std::count_if(out.values.begin(), out.values.end(),
                                             [atom](double v) { return std::abs(v - atom) <= 0.05; })) /
           r;
  };
  out.mass_near_low = near(2.0 / 3.0);
  out.mass_near_high = near(4.0 / 3.0);
  out.max_window_mass = max_window_mass(out.values, 0.1);
  out.pass = out.mass_near_low >= 0.40 && out.mass_near_high >= 0.40 && out.max_window_mass < 0.95;
  return out;
}

}  // namespace smclimits
