#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace smclimits {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double value) noexcept {
    const double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      compensation_ += (sum_ - t) + value;
    } else {
      compensation_ += (value - t) + sum_;
    }
    sum_ = t;
  }

  CompensatedSum& operator+=(double value) noexcept {
    add(value);
    return *this;
  }

  [[nodiscard]] double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline double compensated_sum(std::span<const double> values) noexcept {
  CompensatedSum acc;
  for (double v : values) {
    acc.add(v);
  }
  return acc.value();
}

/// Running compensated sums: out[i] = w[0] + ... + w[i].
inline std::vector<double> cumulative_sums(std::span<const double> weights) {
  std::vector<double> out(weights.size());
  CompensatedSum acc;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc.add(weights[i]);
    out[i] = acc.value();
  }
  return out;
}

/// Smallest i with cumulative[i] > target; never lands on a zero-increment entry.
inline std::size_t inverse_cdf_index(std::span<const double> cumulative, double target) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it != cumulative.end()) {
    return static_cast<std::size_t>(it - cumulative.begin());
  }
  // target at or above the total after rounding: take the last entry carrying mass.
  std::size_t i = cumulative.size() - 1;
  while (i > 0 && cumulative[i] == cumulative[i - 1]) {
    --i;
  }
  return i;
}

}  // namespace smclimits
