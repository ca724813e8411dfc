#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skm/error.hpp"

namespace skm {

/// k centroids in R^d, stored row by row, plus the iteration index t.
class CentroidSet {
 public:
  CentroidSet() = default;

  CentroidSet(std::size_t k, std::size_t d, std::vector<double> coords, std::size_t iteration = 0)
      : k_(k), d_(d), coords_(std::move(coords)), iteration_(iteration) {
    if (k == 0 || d == 0) throw Error(ErrorCode::invalid_shape, "centroid set needs k, d >= 1");
    if (coords_.size() != k * d) {
      throw Error(ErrorCode::dimension_mismatch,
                  "expected " + std::to_string(k * d) + " centroid coordinates, got " +
                      std::to_string(coords_.size()));
    }
    for (double x : coords_) {
      if (!std::isfinite(x)) throw Error(ErrorCode::non_finite_entry, "centroid coordinate");
    }
  }

  static CentroidSet zeros(std::size_t k, std::size_t d, std::size_t iteration = 0) {
    return CentroidSet(k, d, std::vector<double>(k * d, 0.0), iteration);
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t d() const noexcept { return d_; }
  std::size_t iteration() const noexcept { return iteration_; }
  void set_iteration(std::size_t t) noexcept { iteration_ = t; }

  std::span<const double> centroid(std::size_t j) const noexcept {
    return {coords_.data() + j * d_, d_};
  }
  std::span<double> centroid(std::size_t j) noexcept { return {coords_.data() + j * d_, d_}; }
  std::span<const double> coords() const noexcept { return coords_; }

  double sq_norm(std::size_t j) const noexcept {
    double s = 0.0;
    for (double x : centroid(j)) s += x * x;
    return s;
  }

  /// ||C||_F^2, reported so callers can check the centroid-norm premise of sampled labeling.
  double frobenius_sq() const noexcept {
    double s = 0.0;
    for (double x : coords_) s += x * x;
    return s;
  }

  friend bool operator==(const CentroidSet&, const CentroidSet&) = default;

 private:
  std::size_t k_ = 0;
  std::size_t d_ = 0;
  std::vector<double> coords_;
  std::size_t iteration_ = 0;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    const double diff = a[l] - b[l];
    s += diff * diff;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) noexcept {
  return std::sqrt(squared_distance(a, b));
}

/// (1/k) sum_j ||a_j - b_j||: the convergence measure between iterates.
inline double mean_centroid_shift(const CentroidSet& a, const CentroidSet& b) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < a.k(); ++j) s += distance(a.centroid(j), b.centroid(j));
  return s / static_cast<double>(a.k());
}

/// max_j ||a_j - b_j||.
inline double max_centroid_error(const CentroidSet& a, const CentroidSet& b) noexcept {
  double m = 0.0;
  for (std::size_t j = 0; j < a.k(); ++j) m = std::max(m, distance(a.centroid(j), b.centroid(j)));
  return m;
}

}  // namespace skm
