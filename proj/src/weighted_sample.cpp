#include "smclimits/weighted_sample.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smclimits/error.hpp"
#include "smclimits/numeric.hpp"

namespace smclimits {

WeightedSample::WeightedSample(std::size_t dim, std::vector<double> coords, std::vector<double> weights)
    : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)), total_(0.0) {
  if (weights_.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "weighted sample must hold at least one particle");
  }
  if (dim_ == 0 || coords_.size() != dim_ * weights_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "coordinate buffer does not match particle count and dimension");
  }
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kInvalidWeight, "invalid weight");
    }
  }
  total_ = compensated_sum(weights_);
  if (!(total_ > 0.0)) {
    throw Error(ErrorCode::kDegenerateWeights, "degenerate weights");
  }
}

WeightedSample WeightedSample::unweighted(std::vector<double> values) {
  std::vector<double> weights(values.size(), 1.0);
  return WeightedSample(1, std::move(values), std::move(weights));
}

WeightedSample WeightedSample::scalar(std::vector<double> values, std::vector<double> weights) {
  if (values.size() != weights.size()) {
    throw Error(ErrorCode::kInvalidArgument, "values and weights differ in length");
  }
  return WeightedSample(1, std::move(values), std::move(weights));
}

double estimate(const WeightedSample& sample, const Integrand& f) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double value = f(sample.point(i));
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::kNonFiniteIntegrand, "non-finite integrand");
    }
    acc.add(sample.weight(i) * value);
  }
  return acc.value() / sample.total();
}

double ess(const WeightedSample& sample) {
  // Scaling by the largest weight keeps the equal-weight and one-hot cases exact.
  const auto w = sample.weights();
  const double peak = *std::max_element(w.begin(), w.end());
  CompensatedSum sum;
  CompensatedSum sq;
  for (double v : w) {
    const double q = v / peak;
    sum.add(q);
    sq.add(q * q);
  }
  return sum.value() * sum.value() / sq.value();
}

double cv2(const WeightedSample& sample) {
  const auto m = static_cast<double>(sample.size());
  CompensatedSum acc;
  for (double w : sample.weights()) {
    const double d = m * w / sample.total() - 1.0;
    acc.add(d * d);
  }
  return acc.value() / m;
}

double max_weight_fraction(const WeightedSample& sample) {
  const auto w = sample.weights();
  return *std::max_element(w.begin(), w.end()) / sample.total();
}

WeightedSample normalize(const WeightedSample& sample) {
  std::vector<double> weights(sample.weights().begin(), sample.weights().end());
  for (double& w : weights) {
    w /= sample.total();
  }
  return WeightedSample(sample.dim(), std::vector<double>(sample.coords().begin(), sample.coords().end()),
                        std::move(weights));
}

}  // namespace smclimits
