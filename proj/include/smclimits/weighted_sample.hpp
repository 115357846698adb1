#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace smclimits {

/// Owning point: a tuple of coordinates. Discrete states are stored as integral doubles.
using Point = std::vector<double>;

/// Non-owning view of one particle's coordinates.
using PointView = std::span<const double>;

/// Test function evaluated on particles.
using Integrand = std::function<double(PointView)>;

/**
 * \brief Particles with nonnegative linear-scale weights.
 *
 * All particles share the same dimension (path length). Coordinates are kept in one
 * contiguous row-major buffer. The total weight is maintained with compensated summation;
 * construction rejects empty samples, negative or non-finite weights, and an all-zero
 * weight vector.
 */
class WeightedSample {
 public:
  WeightedSample(std::size_t dim, std::vector<double> coords, std::vector<double> weights);

  /// Unit-weight sample of one-dimensional points.
  static WeightedSample unweighted(std::vector<double> values);
  /// Sample of one-dimensional points with the given weights.
  static WeightedSample scalar(std::vector<double> values, std::vector<double> weights);

  [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] double total() const noexcept { return total_; }

  [[nodiscard]] PointView point(std::size_t i) const noexcept {
    return PointView{coords_.data() + i * dim_, dim_};
  }
  [[nodiscard]] double weight(std::size_t i) const noexcept { return weights_[i]; }

  [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
  [[nodiscard]] std::span<const double> coords() const noexcept { return coords_; }

 private:
  std::size_t dim_;
  std::vector<double> coords_;
  std::vector<double> weights_;
  double total_;
};

/// Self-normalized weighted mean of f.
double estimate(const WeightedSample& sample, const Integrand& f);

/// Effective sample size [sum (w_i / W)^2]^{-1}, in [1, M].
double ess(const WeightedSample& sample);

/// Squared coefficient of variation M^{-1} sum (M w_i / W - 1)^2.
double cv2(const WeightedSample& sample);

/// max_i w_i / W.
double max_weight_fraction(const WeightedSample& sample);

WeightedSample normalize(const WeightedSample& sample);

}  // namespace smclimits
