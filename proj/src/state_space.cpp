#include "smclimits/state_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "smclimits/error.hpp"
#include "smclimits/mutation.hpp"
#include "smclimits/numeric.hpp"

namespace smclimits {

namespace {

void require_probability_vector(const std::vector<double>& p, const std::string& what) {
  if (p.empty()) {
    throw Error(ErrorCode::kInvalidArgument, what + " is empty");
  }
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, what + " has a negative or non-finite entry");
    }
  }
  if (std::abs(compensated_sum(p) - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, what + " does not sum to one");
  }
}

std::size_t state_of(double coordinate) { return static_cast<std::size_t>(coordinate); }

std::size_t draw_categorical(const std::vector<double>& cumulative, Rng& rng) {
  return inverse_cdf_index(cumulative, uniform01(rng) * cumulative.back());
}

void check_step(std::size_t k, std::size_t horizon) {
  if (k < 2 || k > horizon) {
    throw Error(ErrorCode::kInvalidArgument, "proposal step must satisfy 1 < k <= horizon");
  }
}

double log_normal_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

Point extended(PointView from, double last) {
  Point p(from.begin(), from.end());
  p.push_back(last);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Models

DiscreteHMM::DiscreteHMM(std::vector<double> chi, std::vector<std::vector<double>> transition,
                         std::vector<std::vector<double>> likelihood)
    : chi_(std::move(chi)), transition_(std::move(transition)), likelihood_(std::move(likelihood)) {
  const std::size_t n = chi_.size();
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "discrete HMM needs at least two states");
  }
  require_probability_vector(chi_, "chi");
  if (transition_.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "transition matrix must be n_states x n_states");
  }
  for (const auto& row : transition_) {
    if (row.size() != n) {
      throw Error(ErrorCode::kInvalidArgument, "transition matrix must be n_states x n_states");
    }
    require_probability_vector(row, "transition row");
  }
  if (likelihood_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "likelihood table needs at least one time step");
  }
  for (const auto& row : likelihood_) {
    if (row.size() != n) {
      throw Error(ErrorCode::kInvalidArgument, "likelihood rows must have n_states entries");
    }
    for (double g : row) {
      if (!(g > 0.0) || !std::isfinite(g)) {
        throw Error(ErrorCode::kInvalidArgument, "likelihood entries must be positive and finite");
      }
    }
  }
}

DiscreteHMM DiscreteHMM::from_emissions(std::vector<double> chi, std::vector<std::vector<double>> transition,
                                        const std::vector<std::vector<double>>& emission,
                                        const std::vector<std::size_t>& observations) {
  if (emission.size() != chi.size() || emission.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "emission matrix must have one row per state");
  }
  const std::size_t n_symbols = emission.front().size();
  for (const auto& row : emission) {
    if (row.size() != n_symbols) {
      throw Error(ErrorCode::kInvalidArgument, "emission rows differ in length");
    }
    require_probability_vector(row, "emission row");
  }
  std::vector<std::vector<double>> g;
  g.reserve(observations.size());
  for (std::size_t y : observations) {
    if (y >= n_symbols) {
      throw Error(ErrorCode::kInvalidArgument, "observation symbol out of range");
    }
    std::vector<double> row(chi.size());
    for (std::size_t x = 0; x < chi.size(); ++x) {
      row[x] = static_cast<double>(n_symbols) * emission[x][y];
    }
    g.push_back(std::move(row));
  }
  return DiscreteHMM(std::move(chi), std::move(transition), std::move(g));
}

std::vector<std::size_t> DiscreteHMM::simulate_observations(const std::vector<double>& chi,
                                                            const std::vector<std::vector<double>>& transition,
                                                            const std::vector<std::vector<double>>& emission,
                                                            std::size_t horizon, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x0b5e7'0001ULL});
  std::vector<std::vector<double>> q_cum;
  std::vector<std::vector<double>> e_cum;
  for (const auto& row : transition) {
    q_cum.push_back(cumulative_sums(row));
  }
  for (const auto& row : emission) {
    e_cum.push_back(cumulative_sums(row));
  }
  std::vector<std::size_t> ys;
  ys.reserve(horizon);
  std::size_t x = draw_categorical(cumulative_sums(chi), rng);
  for (std::size_t k = 0; k < horizon; ++k) {
    if (k > 0) {
      x = draw_categorical(q_cum.at(x), rng);
    }
    ys.push_back(draw_categorical(e_cum.at(x), rng));
  }
  return ys;
}

DiscreteHMM DiscreteHMM::truncated(std::size_t h) const {
  if (h == 0 || h > horizon()) {
    throw Error(ErrorCode::kInvalidArgument, "truncation horizon out of range");
  }
  return DiscreteHMM(chi_, transition_, std::vector<std::vector<double>>(likelihood_.begin(), likelihood_.begin() + static_cast<std::ptrdiff_t>(h)));
}

void LinearGaussianSSM::validate() const {
  if (!(sigma_x > 0.0) || !(tau > 0.0) || !std::isfinite(phi)) {
    throw Error(ErrorCode::kInvalidArgument, "linear-Gaussian model needs sigma_x > 0, tau > 0 and finite phi");
  }
  if (observations.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "linear-Gaussian model needs at least one observation");
  }
}

double LinearGaussianSSM::initial_variance() const noexcept {
  const double s2 = sigma_x * sigma_x;
  return std::abs(phi) < 1.0 ? s2 / (1.0 - phi * phi) : s2;
}

LinearGaussianSSM LinearGaussianSSM::truncated(std::size_t h) const {
  if (h == 0 || h > horizon()) {
    throw Error(ErrorCode::kInvalidArgument, "truncation horizon out of range");
  }
  LinearGaussianSSM out = *this;
  out.observations.resize(h);
  return out;
}

std::vector<double> LinearGaussianSSM::simulate_observations(double phi, double sigma_x, double tau,
                                                             std::size_t horizon, std::uint64_t seed) {
  LinearGaussianSSM shape{phi, sigma_x, tau, {0.0}};
  shape.validate();
  Rng rng = make_rng(seed, {0x0b5e7'0002ULL});
  std::vector<double> ys;
  double x = std::sqrt(shape.initial_variance()) * standard_normal(rng);
  for (std::size_t k = 0; k < horizon; ++k) {
    if (k > 0) {
      x = phi * x + sigma_x * standard_normal(rng);
    }
    ys.push_back(x + tau * standard_normal(rng));
  }
  return ys;
}

std::size_t horizon(const StateSpaceModel& model) {
  return std::visit([](const auto& m) { return m.horizon(); }, model);
}

StateSpaceModel truncated(const StateSpaceModel& model, std::size_t h) {
  return std::visit([h](const auto& m) -> StateSpaceModel { return m.truncated(h); }, model);
}

// ---------------------------------------------------------------------------------------------
// Proposal kernels

namespace {

MutationKernelPair hmm_prior(const DiscreteHMM& model, std::size_t k) {
  check_step(k, model.horizon());
  std::vector<std::vector<double>> q_cum;
  for (std::size_t x = 0; x < model.n_states(); ++x) {
    q_cum.push_back(cumulative_sums(model.transition_row(x)));
  }
  MutationKernelPair pair;
  pair.dim_increment = 1;
  pair.propose = [q_cum = std::move(q_cum)](Rng& rng, PointView from, std::span<double> out) {
    std::copy(from.begin(), from.end(), out.begin());
    out.back() = static_cast<double>(draw_categorical(q_cum[state_of(from.back())], rng));
  };
  std::vector<double> log_g(model.n_states());
  for (std::size_t x = 0; x < model.n_states(); ++x) {
    log_g[x] = std::log(model.likelihood(k, x));
  }
  pair.log_weight = [log_g = std::move(log_g)](PointView, PointView to) { return log_g[state_of(to.back())]; };
  pair.support = [q = model.transition_matrix()](PointView from) {
    std::vector<SupportAtom> atoms;
    const auto& row = q[state_of(from.back())];
    for (std::size_t x = 0; x < row.size(); ++x) {
      if (row[x] > 0.0) {
        atoms.push_back({extended(from, static_cast<double>(x)), row[x]});
      }
    }
    return atoms;
  };
  return pair;
}

MutationKernelPair lg_prior(const LinearGaussianSSM& model, std::size_t k) {
  check_step(k, model.horizon());
  MutationKernelPair pair;
  pair.dim_increment = 1;
  pair.propose = [phi = model.phi, sx = model.sigma_x](Rng& rng, PointView from, std::span<double> out) {
    std::copy(from.begin(), from.end(), out.begin());
    out.back() = phi * from.back() + sx * standard_normal(rng);
  };
  pair.log_weight = [y = model.observations[k - 1], t2 = model.tau * model.tau](PointView, PointView to) {
    return log_normal_density(y, to.back(), t2);
  };
  return pair;
}

MutationKernelPair hmm_optimal(const DiscreteHMM& model, std::size_t k) {
  check_step(k, model.horizon());
  const std::size_t n = model.n_states();
  std::vector<std::vector<double>> post_cum(n);
  std::vector<std::vector<double>> post(n);
  std::vector<double> log_pred(n);
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<double> unnorm(n);
    for (std::size_t z = 0; z < n; ++z) {
      unnorm[z] = model.transition(x, z) * model.likelihood(k, z);
    }
    const double pred = compensated_sum(unnorm);
    if (!(pred > 0.0)) {
      // Rows with zero predictive mass are only fatal if a particle actually sits there.
      log_pred[x] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    for (double& v : unnorm) {
      v /= pred;
    }
    log_pred[x] = std::log(pred);
    post_cum[x] = cumulative_sums(unnorm);
    post[x] = std::move(unnorm);
  }
  MutationKernelPair pair;
  pair.dim_increment = 1;
  pair.propose = [post_cum](Rng& rng, PointView from, std::span<double> out) {
    const auto& cum = post_cum[state_of(from.back())];
    if (cum.empty()) {
      throw Error(ErrorCode::kOptimalKernelUndefined, "optimal kernel undefined");
    }
    std::copy(from.begin(), from.end(), out.begin());
    out.back() = static_cast<double>(draw_categorical(cum, rng));
  };
  pair.log_weight = [log_pred](PointView from, PointView) {
    const double lw = log_pred[state_of(from.back())];
    if (std::isnan(lw)) {
      throw Error(ErrorCode::kOptimalKernelUndefined, "optimal kernel undefined");
    }
    return lw;
  };
  pair.support = [post = std::move(post)](PointView from) {
    const auto& row = post[state_of(from.back())];
    if (row.empty()) {
      throw Error(ErrorCode::kOptimalKernelUndefined, "optimal kernel undefined");
    }
    std::vector<SupportAtom> atoms;
    for (std::size_t x = 0; x < row.size(); ++x) {
      if (row[x] > 0.0) {
        atoms.push_back({extended(from, static_cast<double>(x)), row[x]});
      }
    }
    return atoms;
  };
  return pair;
}

MutationKernelPair lg_optimal(const LinearGaussianSSM& model, std::size_t k) {
  check_step(k, model.horizon());
  const double sx2 = model.sigma_x * model.sigma_x;
  const double t2 = model.tau * model.tau;
  const double post_var = 1.0 / (1.0 / sx2 + 1.0 / t2);
  const double y = model.observations[k - 1];
  MutationKernelPair pair;
  pair.dim_increment = 1;
  pair.propose = [=, phi = model.phi](Rng& rng, PointView from, std::span<double> out) {
    std::copy(from.begin(), from.end(), out.begin());
    const double mean = post_var * (phi * from.back() / sx2 + y / t2);
    out.back() = mean + std::sqrt(post_var) * standard_normal(rng);
  };
  pair.log_weight = [=, phi = model.phi](PointView from, PointView) {
    return log_normal_density(y, phi * from.back(), sx2 + t2);
  };
  return pair;
}

std::vector<std::vector<double>> matrix_power(const std::vector<std::vector<double>>& m, std::size_t power) {
  const std::size_t n = m.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    out[i][i] = 1.0;
  }
  for (std::size_t p = 0; p < power; ++p) {
    std::vector<std::vector<double>> next(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        CompensatedSum acc;
        for (std::size_t l = 0; l < n; ++l) {
          acc.add(out[i][l] * m[l][j]);
        }
        next[i][j] = acc.value();
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

MutationKernelPair prior_proposal(const StateSpaceModel& model, std::size_t k) {
  return std::visit(
      [k](const auto& m) -> MutationKernelPair {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, DiscreteHMM>) {
          return hmm_prior(m, k);
        } else {
          return lg_prior(m, k);
        }
      },
      model);
}

MutationKernelPair optimal_proposal(const StateSpaceModel& model, std::size_t k) {
  return std::visit(
      [k](const auto& m) -> MutationKernelPair {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, DiscreteHMM>) {
          return hmm_optimal(m, k);
        } else {
          return lg_optimal(m, k);
        }
      },
      model);
}

std::vector<double> resample_move_target(const DiscreteHMM& model, std::size_t k, std::size_t prev) {
  if (resample_move_is_degenerate(k) || k > model.horizon()) {
    throw Error(ErrorCode::kInvalidArgument, "resample-move target needs 3 <= k <= horizon");
  }
  std::vector<double> target(model.n_states());
  for (std::size_t y = 0; y < target.size(); ++y) {
    target[y] = model.transition(prev, y) * model.likelihood(k - 1, y);
  }
  const double z = compensated_sum(target);
  for (double& v : target) {
    v /= z;
  }
  return target;
}

std::vector<std::vector<double>> resample_move_matrix(const DiscreteHMM& model, std::size_t k, std::size_t prev) {
  const auto target = resample_move_target(model, k, prev);
  const std::size_t n = target.size();
  const double proposal = 1.0 / static_cast<double>(n);
  std::vector<std::vector<double>> mh(n, std::vector<double>(n, 0.0));
  for (std::size_t x = 0; x < n; ++x) {
    CompensatedSum leave;
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) {
        continue;
      }
      const double accept = target[x] > 0.0 ? std::min(1.0, target[y] / target[x]) : 1.0;
      mh[x][y] = proposal * accept;
      leave.add(mh[x][y]);
    }
    mh[x][x] = 1.0 - leave.value();
  }
  return mh;
}

MutationKernelPair resample_move_proposal(const DiscreteHMM& model, std::size_t k, std::size_t n_moves) {
  MutationKernelPair pair = hmm_prior(model, k);
  if (resample_move_is_degenerate(k) || n_moves == 0) {
    return pair;
  }
  const std::size_t n = model.n_states();
  // targets[prev][y]: conditional of x_{k-1} given x_{k-2} = prev.
  std::vector<std::vector<double>> targets;
  std::vector<std::vector<std::vector<double>>> move_power;
  for (std::size_t prev = 0; prev < n; ++prev) {
    targets.push_back(resample_move_target(model, k, prev));
    move_power.push_back(matrix_power(resample_move_matrix(model, k, prev), n_moves));
  }
  std::vector<std::vector<double>> q_cum;
  for (std::size_t x = 0; x < n; ++x) {
    q_cum.push_back(cumulative_sums(model.transition_row(x)));
  }
  pair.propose = [targets, q_cum = std::move(q_cum), n, n_moves](Rng& rng, PointView from, std::span<double> out) {
    std::copy(from.begin(), from.end(), out.begin());
    const std::size_t last = from.size() - 1;
    const auto& target = targets[state_of(from[last - 1])];
    std::size_t x = state_of(from[last]);
    for (std::size_t move = 0; move < n_moves; ++move) {
      const auto y = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
      const double u = uniform01(rng);
      const double accept = target[x] > 0.0 ? std::min(1.0, target[y] / target[x]) : 1.0;
      if (u < accept) {
        x = y;
      }
    }
    out[last] = static_cast<double>(x);
    out.back() = static_cast<double>(draw_categorical(q_cum[x], rng));
  };
  pair.support = [move_power = std::move(move_power), q = model.transition_matrix()](PointView from) {
    std::vector<SupportAtom> atoms;
    const std::size_t last = from.size() - 1;
    const auto& mh = move_power[state_of(from[last - 1])];
    const auto& row = mh[state_of(from[last])];
    for (std::size_t y = 0; y < row.size(); ++y) {
      if (row[y] <= 0.0) {
        continue;
      }
      Point moved(from.begin(), from.end());
      moved[last] = static_cast<double>(y);
      for (std::size_t z = 0; z < q[y].size(); ++z) {
        if (q[y][z] > 0.0) {
          atoms.push_back({extended(moved, static_cast<double>(z)), row[y] * q[y][z]});
        }
      }
    }
    return atoms;
  };
  return pair;
}

MutationKernelPair make_proposal(const StateSpaceModel& model, ProposalKind kind, std::size_t k) {
  switch (kind) {
    case ProposalKind::kPrior:
      return prior_proposal(model, k);
    case ProposalKind::kOptimal:
      return optimal_proposal(model, k);
    case ProposalKind::kResampleMove: {
      const auto* hmm = std::get_if<DiscreteHMM>(&model);
      if (hmm == nullptr) {
        throw Error(ErrorCode::kInvalidArgument, "resample-move proposal requires a discrete HMM");
      }
      return resample_move_proposal(*hmm, k);
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown proposal kind");
}

// ---------------------------------------------------------------------------------------------
// Filter

std::size_t SmcTrace::resample_count() const {
  return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const SmcStep& s) { return s.resampled; }));
}

SmcTrace smc_init(const StateSpaceModel& model, std::size_t m, Rng& rng) {
  if (m == 0) {
    throw Error(ErrorCode::kInvalidArgument, "particle count must be positive");
  }
  std::vector<double> coords(m);
  if (const auto* hmm = std::get_if<DiscreteHMM>(&model)) {
    std::vector<double> first(hmm->n_states());
    for (std::size_t x = 0; x < first.size(); ++x) {
      first[x] = hmm->chi()[x] * hmm->likelihood(1, x);
    }
    const auto cum = cumulative_sums(first);
    for (double& c : coords) {
      c = static_cast<double>(draw_categorical(cum, rng));
    }
  } else {
    const auto& lg = std::get<LinearGaussianSSM>(model);
    lg.validate();
    const auto first = kalman_filter(lg.truncated(1)).front();
    const double sd = std::sqrt(first.variance);
    for (double& c : coords) {
      c = first.mean + sd * standard_normal(rng);
    }
  }
  WeightedSample sample(1, std::move(coords), std::vector<double>(m, 1.0));
  SmcTrace trace;
  trace.steps.push_back({std::move(sample), static_cast<double>(m), 0.0, 1.0 / static_cast<double>(m), false, 1.0, 0.0});
  return trace;
}

void smc_step(SmcTrace& trace, const StateSpaceModel& model, ProposalKind kind, const ResamplingPolicy& policy,
              Rng& rng) {
  if (trace.steps.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "trace must be initialized before stepping");
  }
  const std::size_t k = trace.k() + 1;
  const SmcStep& prev = trace.steps.back();
  const MutationKernelPair pair = make_proposal(model, kind, k);

  RescaledMutation mutated = [&] {
    try {
      return mutate_rescaled(prev.sample, pair, 1, rng);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDegenerateWeights) {
        throw Error(ErrorCode::kWeightCollapse, "weight collapse");
      }
      throw;
    }
  }();

  SmcStep step{std::move(mutated.sample), 0.0, 0.0, 0.0, false, 0.0, 0.0};
  step.increment = std::exp(mutated.log_shift) * step.sample.total() / prev.sample.total();
  step.ess = ess(step.sample);
  step.cv2 = cv2(step.sample);
  step.max_weight_fraction = max_weight_fraction(step.sample);
  step.resampled = policy.trigger.fires(step.cv2);
  if (step.resampled) {
    const std::size_t m_out = policy.size.output_size(step.sample.size());
    step.sample = resample(policy.scheme, step.sample, m_out, rng);
    step.log_scale = 0.0;
  } else {
    // Keep the largest weight at 1 so long runs without selection cannot underflow.
    const auto w = step.sample.weights();
    const double peak = *std::max_element(w.begin(), w.end());
    std::vector<double> weights(w.begin(), w.end());
    for (double& v : weights) {
      v /= peak;
    }
    step.log_scale = prev.log_scale + mutated.log_shift + std::log(peak);
    step.sample = WeightedSample(step.sample.dim(),
                                 std::vector<double>(step.sample.coords().begin(), step.sample.coords().end()),
                                 std::move(weights));
  }
  trace.steps.push_back(std::move(step));
}

SmcTrace smc_run(const StateSpaceModel& model, ProposalKind kind, const ResamplingPolicy& policy, std::size_t m,
                 std::uint64_t seed) {
  Rng rng{seed};
  SmcTrace trace = smc_init(model, m, rng);
  const std::size_t h = horizon(model);
  while (trace.k() < h) {
    smc_step(trace, model, kind, policy, rng);
  }
  return trace;
}

// ---------------------------------------------------------------------------------------------
// Exact references

Point PathDistribution::decode(std::size_t index) const {
  Point p(length);
  for (std::size_t j = length; j-- > 0;) {
    p[j] = static_cast<double>(index % n_states);
    index /= n_states;
  }
  return p;
}

double PathDistribution::expectation(const Integrand& f) const {
  CompensatedSum acc;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] != 0.0) {
      const Point p = decode(i);
      acc.add(probs[i] * f(p));
    }
  }
  return acc.value();
}

std::vector<double> PathDistribution::marginal(std::size_t j) const {
  if (j == 0 || j > length) {
    throw Error(ErrorCode::kInvalidArgument, "marginal index out of range");
  }
  std::vector<CompensatedSum> acc(n_states);
  std::size_t stride = 1;
  for (std::size_t t = j; t < length; ++t) {
    stride *= n_states;
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc[(i / stride) % n_states].add(probs[i]);
  }
  std::vector<double> out(n_states);
  for (std::size_t x = 0; x < n_states; ++x) {
    out[x] = acc[x].value();
  }
  return out;
}

PathDistribution exact_joint_smoothing(const DiscreteHMM& model, std::size_t k, std::size_t cap) {
  if (k == 0 || k > model.horizon()) {
    throw Error(ErrorCode::kInvalidArgument, "smoothing step out of range");
  }
  const std::size_t n = model.n_states();
  std::size_t size = 1;
  for (std::size_t j = 0; j < k; ++j) {
    if (size > cap / n) {
      throw Error(ErrorCode::kPathSpaceTooLarge, "path space too large");
    }
    size *= n;
  }
  std::vector<double> probs(n);
  for (std::size_t x = 0; x < n; ++x) {
    probs[x] = model.chi()[x] * model.likelihood(1, x);
  }
  for (std::size_t j = 2; j <= k; ++j) {
    std::vector<double> next(probs.size() * n);
    for (std::size_t p = 0; p < probs.size(); ++p) {
      const std::size_t last = p % n;
      for (std::size_t x = 0; x < n; ++x) {
        next[p * n + x] = probs[p] * model.transition(last, x) * model.likelihood(j, x);
      }
    }
    probs = std::move(next);
  }
  const double z = compensated_sum(probs);
  for (double& v : probs) {
    v /= z;
  }
  return {n, k, std::move(probs)};
}

std::vector<std::vector<double>> forward_backward_marginals(const DiscreteHMM& model, std::size_t k) {
  if (k == 0 || k > model.horizon()) {
    throw Error(ErrorCode::kInvalidArgument, "smoothing step out of range");
  }
  const std::size_t n = model.n_states();
  auto normalize_in_place = [](std::vector<double>& v) {
    const double z = compensated_sum(v);
    for (double& e : v) {
      e /= z;
    }
  };
  std::vector<std::vector<double>> alpha(k, std::vector<double>(n));
  for (std::size_t x = 0; x < n; ++x) {
    alpha[0][x] = model.chi()[x] * model.likelihood(1, x);
  }
  normalize_in_place(alpha[0]);
  for (std::size_t j = 1; j < k; ++j) {
    for (std::size_t x = 0; x < n; ++x) {
      CompensatedSum acc;
      for (std::size_t z = 0; z < n; ++z) {
        acc.add(alpha[j - 1][z] * model.transition(z, x));
      }
      alpha[j][x] = acc.value() * model.likelihood(j + 1, x);
    }
    normalize_in_place(alpha[j]);
  }
  std::vector<std::vector<double>> beta(k, std::vector<double>(n, 1.0));
  for (std::size_t j = k - 1; j-- > 0;) {
    for (std::size_t x = 0; x < n; ++x) {
      CompensatedSum acc;
      for (std::size_t z = 0; z < n; ++z) {
        acc.add(model.transition(x, z) * model.likelihood(j + 2, z) * beta[j + 1][z]);
      }
      beta[j][x] = acc.value();
    }
    normalize_in_place(beta[j]);
  }
  std::vector<std::vector<double>> marginals(k, std::vector<double>(n));
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t x = 0; x < n; ++x) {
      marginals[j][x] = alpha[j][x] * beta[j][x];
    }
    normalize_in_place(marginals[j]);
  }
  return marginals;
}

std::vector<GaussianMoments> kalman_filter(const LinearGaussianSSM& model) {
  model.validate();
  const double sx2 = model.sigma_x * model.sigma_x;
  const double t2 = model.tau * model.tau;
  std::vector<GaussianMoments> out;
  double pred_mean = 0.0;
  double pred_var = model.initial_variance();
  for (std::size_t j = 0; j < model.horizon(); ++j) {
    if (j > 0) {
      pred_mean = model.phi * out.back().mean;
      pred_var = model.phi * model.phi * out.back().variance + sx2;
    }
    const double gain = pred_var / (pred_var + t2);
    out.push_back({pred_mean + gain * (model.observations[j] - pred_mean), (1.0 - gain) * pred_var});
  }
  return out;
}

}  // namespace smclimits
