#include "smclimits/variance_oracle.hpp"

#include <cmath>
#include <string>

#include <spdlog/spdlog.h>

#include "smclimits/error.hpp"
#include "smclimits/numeric.hpp"

namespace smclimits {

namespace {

std::size_t path_count(std::size_t n, std::size_t k, std::size_t cap) {
  std::size_t size = 1;
  for (std::size_t j = 0; j < k; ++j) {
    if (size > cap / n) {
      throw Error(ErrorCode::kPathSpaceTooLarge, "path space too large");
    }
    size *= n;
  }
  return size;
}

Point decode(std::size_t index, std::size_t n, std::size_t length) {
  Point p(length);
  for (std::size_t j = length; j-- > 0;) {
    p[j] = static_cast<double>(index % n);
    index /= n;
  }
  return p;
}

std::size_t encode(PointView p, std::size_t n) {
  std::size_t index = 0;
  for (double c : p) {
    index = index * n + static_cast<std::size_t>(c);
  }
  return index;
}

double dot(const std::vector<double>& mu, const PathFunction& f) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    acc.add(mu[i] * f[i]);
  }
  return acc.value();
}

double variance_under(const std::vector<double>& mu, const PathFunction& f) {
  const double mean = dot(mu, f);
  CompensatedSum acc;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = f[i] - mean;
    acc.add(mu[i] * d * d);
  }
  return acc.value();
}

struct NextStep {
  KernelTable kernel;
  double normalizer;
  /// gamma_{k-1} R(W^2 1_{child}) before division by normalizer^2.
  std::vector<double> gamma_tilde;
  std::vector<double> psi_unnormalized;
};

NextStep build_next(const VarianceRecursionState& state, const DiscreteHMM& model, ProposalKind kind) {
  const std::size_t k = state.k() + 1;
  if (k > model.horizon()) {
    throw Error(ErrorCode::kInvalidArgument, "recursion already at the model horizon");
  }
  const std::size_t n = model.n_states();
  const std::size_t children = path_count(n, k, state.cap());
  const MutationKernelPair pair = make_proposal(StateSpaceModel{model}, kind, k);
  if (!pair.enumerable()) {
    throw Error(ErrorCode::kInvalidArgument, "proposal has no finite enumeration");
  }
  const auto& psi = state.psi();
  const auto& gamma = state.gamma();
  NextStep next;
  next.kernel.rows.resize(psi.size());
  std::vector<CompensatedSum> psi_acc(children);
  std::vector<CompensatedSum> gamma_acc(children);
  CompensatedSum norm;
  for (std::size_t p = 0; p < psi.size(); ++p) {
    const Point parent = decode(p, n, k - 1);
    for (const SupportAtom& atom : pair.support(parent)) {
      const std::size_t child = encode(atom.point, n);
      const double w = pair.weight(parent, atom.point);
      next.kernel.rows[p].push_back({child, atom.probability, w});
      const double mass = atom.probability * w;
      psi_acc[child].add(psi[p] * mass);
      gamma_acc[child].add(gamma[p] * mass * w);
      norm.add(psi[p] * mass);
    }
  }
  next.normalizer = norm.value();
  if (!(next.normalizer > 0.0)) {
    throw Error(ErrorCode::kWeightCollapse, "weight collapse");
  }
  next.gamma_tilde.resize(children);
  next.psi_unnormalized.resize(children);
  for (std::size_t c = 0; c < children; ++c) {
    next.gamma_tilde[c] = gamma_acc[c].value();
    next.psi_unnormalized[c] = psi_acc[c].value();
  }
  return next;
}

double sigma2_at(const VarianceRecursionState& state, std::size_t k, const PathFunction& f) {
  const RecursionLevel& level = state.level(k);
  if (f.size() != level.psi.size()) {
    throw Error(ErrorCode::kInvalidArgument, "path function has the wrong length");
  }
  if (k == 1) {
    return variance_under(level.psi, f);
  }
  const double mean = dot(level.psi, f);
  const RecursionLevel& prev = state.level(k - 1);
  PathFunction propagated(prev.psi.size());
  CompensatedSum mutation;
  for (std::size_t p = 0; p < prev.psi.size(); ++p) {
    CompensatedSum first;
    CompensatedSum second;
    for (const auto& e : level.kernel.rows[p]) {
      const double wf = e.weight * (f[e.child] - mean);
      first.add(e.probability * wf);
      second.add(e.probability * wf * wf);
    }
    propagated[p] = first.value();
    if (prev.gamma[p] != 0.0) {
      mutation.add(prev.gamma[p] * (second.value() - first.value() * first.value()));
    }
  }
  const double c2 = level.normalizer * level.normalizer;
  const double selection = level.epsilon == 1 ? variance_under(level.psi, f) : 0.0;
  return selection + (sigma2_at(state, k - 1, propagated) + mutation.value()) / c2;
}

}  // namespace

VarianceRecursionState::VarianceRecursionState(std::size_t n_states, std::size_t cap, RecursionLevel first)
    : n_states_(n_states), cap_(cap) {
  levels_.push_back(std::move(first));
}

std::vector<int> VarianceRecursionState::epsilons() const {
  std::vector<int> out;
  for (std::size_t j = 1; j < levels_.size(); ++j) {
    out.push_back(levels_[j].epsilon);
  }
  return out;
}

PathDistribution VarianceRecursionState::psi_distribution() const { return {n_states_, k(), psi()}; }

PathFunction VarianceRecursionState::tabulate(const Integrand& f) const {
  PathFunction out(psi().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Point p = decode(i, n_states_, k());
    out[i] = f(p);
    if (!std::isfinite(out[i])) {
      throw Error(ErrorCode::kNonFiniteIntegrand, "non-finite integrand");
    }
  }
  return out;
}

VarianceRecursionState recursion_init(const DiscreteHMM& model, std::size_t cap) {
  const std::size_t n = model.n_states();
  path_count(n, 1, cap);
  RecursionLevel first;
  first.psi.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    first.psi[x] = model.chi()[x] * model.likelihood(1, x);
  }
  const double z = compensated_sum(first.psi);
  for (double& v : first.psi) {
    v /= z;
  }
  first.gamma = first.psi;
  return VarianceRecursionState(n, cap, std::move(first));
}

double ess_limit(const VarianceRecursionState& state, const DiscreteHMM& model, ProposalKind kind) {
  const NextStep next = build_next(state, model, kind);
  return compensated_sum(next.gamma_tilde) / (next.normalizer * next.normalizer) - 1.0;
}

void recursion_step(VarianceRecursionState& state, const DiscreteHMM& model, ProposalKind kind, double kappa2) {
  if (std::isnan(kappa2) || kappa2 < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "kappa2 must be a nonnegative extended real");
  }
  NextStep next = build_next(state, model, kind);
  RecursionLevel level;
  level.normalizer = next.normalizer;
  const double c2 = next.normalizer * next.normalizer;
  level.psi = std::move(next.psi_unnormalized);
  for (double& v : level.psi) {
    v /= next.normalizer;
  }
  const double gamma_mass = compensated_sum(next.gamma_tilde) / c2;
  level.ess_limit = gamma_mass - 1.0;
  level.epsilon = (kappa2 == 0.0 || gamma_mass >= 1.0 + kappa2) ? 1 : 0;
  if (std::isfinite(kappa2) && kappa2 > 0.0) {
    level.near_boundary = std::abs(gamma_mass - (1.0 + kappa2)) / (1.0 + kappa2) < 0.1;
    if (level.near_boundary) {
      spdlog::warn("step {}: gamma~(1) = {:.6g} is within 10% of 1 + kappa2 = {:.6g}", state.k() + 1, gamma_mass,
                   1.0 + kappa2);
    }
  }
  if (level.epsilon == 1) {
    level.gamma = level.psi;
  } else {
    level.gamma = std::move(next.gamma_tilde);
    for (double& v : level.gamma) {
      v /= c2;
    }
  }
  level.kernel = std::move(next.kernel);
  state.push(std::move(level));
}

double sigma2(const VarianceRecursionState& state, const PathFunction& f) { return sigma2_at(state, state.k(), f); }

double sigma2(const VarianceRecursionState& state, const Integrand& f) { return sigma2(state, state.tabulate(f)); }

VarianceRecursionState run_recursion(const DiscreteHMM& model, ProposalKind kind, double kappa2,
                                     std::size_t horizon, std::size_t cap) {
  if (horizon == 0 || horizon > model.horizon()) {
    throw Error(ErrorCode::kInvalidArgument, "recursion horizon out of range");
  }
  VarianceRecursionState state = recursion_init(model, cap);
  while (state.k() < horizon) {
    recursion_step(state, model, kind, kappa2);
  }
  return state;
}

std::vector<VarianceTableRow> variance_table(const DiscreteHMM& model, ProposalKind kind, double kappa2,
                                             std::size_t horizon, const std::vector<Integrand>& functions,
                                             std::size_t cap) {
  std::vector<VarianceTableRow> rows;
  VarianceRecursionState state = recursion_init(model, cap);
  for (;;) {
    const RecursionLevel& level = state.level(state.k());
    VarianceTableRow row{state.k(), level.epsilon, level.normalizer, compensated_sum(level.gamma),
                         level.ess_limit, level.near_boundary, {}};
    for (const auto& f : functions) {
      row.sigma2.push_back(sigma2(state, [&f](PointView p) { return f(p.last(1)); }));
    }
    rows.push_back(std::move(row));
    if (state.k() == horizon) {
      break;
    }
    recursion_step(state, model, kind, kappa2);
  }
  return rows;
}

}  // namespace smclimits
