#pragma once

// Lower-bound instances that hide Hamming weights inside cluster means.
//
// Cluster j (0-based) holds the n/k consecutive columns starting at j n/k and
// is anchored at c_j^0 = ((j + 1) / k, 0, ..., 0). Each column carries a bit
// string w_i of weight h = floor(d/2): h uniform bits, their complements, and
// a trailing 0 when d is odd. Columns are
//
//   v_i = alpha c_j^0 + alpha R (w_i - (h/d) 1),
//
// where R is the Householder reflection sending 1/sqrt(d) to e_1. Centering
// puts every w_i - (h/d) 1 orthogonal to 1, so R maps it orthogonal to e_1 and
// the first coordinate of v_i is exactly alpha (j + 1) / k. Norms are constant
// within a cluster because |w_i| is.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "skm/centroids.hpp"
#include "skm/error.hpp"
#include "skm/rng.hpp"
#include "skm/sample_access.hpp"

namespace skm {

struct AdversarialInstance {
  SampleAccessMatrix matrix;
  double alpha = 1.0;
  std::size_t k = 1;
  std::size_t n = 1;
  std::size_t d = 2;
  /// n bit strings of length d, row i at [i * d, (i + 1) * d).
  std::vector<std::uint8_t> hidden_bits;
  /// The d x d reflection R, row-major.
  std::vector<double> rotation;
  static constexpr bool centered = true;

  std::size_t half() const noexcept { return d / 2; }
  std::size_t cluster_size() const noexcept { return n / k; }
  std::size_t cluster_of(std::size_t i) const noexcept { return i / cluster_size(); }

  std::span<const std::uint8_t> bits(std::size_t i) const noexcept {
    return {hidden_bits.data() + i * d, d};
  }

  /// The anchors c_j^0 that define the fixed partition.
  CentroidSet anchor_centroids() const {
    std::vector<double> coords(k * d, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      coords[j * d] = static_cast<double>(j + 1) / static_cast<double>(k);
    }
    return CentroidSet(k, d, coords);
  }

  /// sum over i in C_j of w_i.
  std::vector<double> hidden_sums(std::size_t j) const {
    std::vector<double> sums(d, 0.0);
    for (std::size_t i = j * cluster_size(); i < (j + 1) * cluster_size(); ++i) {
      const auto w = bits(i);
      for (std::size_t l = 0; l < d; ++l) sums[l] += w[l];
    }
    return sums;
  }

  /// The exact cluster means of the fixed partition.
  CentroidSet exact_centroids() const {
    std::vector<double> coords(k * d, 0.0);
    const double size = static_cast<double>(cluster_size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = matrix.column(i);
      const std::size_t j = cluster_of(i);
      for (std::size_t l = 0; l < d; ++l) coords[j * d + l] += v[l];
    }
    for (double& c : coords) c /= size;
    return CentroidSet(k, d, coords);
  }
};

/// H = I - 2 x x^T / ||x||^2 with x = 1/sqrt(d) - e_1, so H (1/sqrt(d)) = e_1.
inline std::vector<double> householder_to_e1(std::size_t d) {
  std::vector<double> x(d, 1.0 / std::sqrt(static_cast<double>(d)));
  x[0] -= 1.0;
  double xx = 0.0;
  for (double xi : x) xx += xi * xi;
  std::vector<double> h(d * d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      h[a * d + b] = (a == b ? 1.0 : 0.0) - 2.0 * x[a] * x[b] / xx;
    }
  }
  return h;
}

template <Bits64Generator G>
AdversarialInstance build_instance(std::size_t n, std::size_t k, std::size_t d, double alpha,
                                   G& gen) {
  if (d < 2) throw Error(ErrorCode::invalid_shape, "d must be at least 2");
  if (k == 0 || n == 0 || n % k != 0) {
    throw Error(ErrorCode::invalid_shape,
                "k = " + std::to_string(k) + " must divide n = " + std::to_string(n));
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::invalid_parameter, "alpha must be positive");
  }
  const std::size_t h = d / 2;
  const double offset = static_cast<double>(h) / static_cast<double>(d);
  std::vector<double> R = householder_to_e1(d);
  std::vector<std::uint8_t> bits(n * d, 0);
  std::vector<double> values(n * d, 0.0);
  std::vector<double> centered(d);
  const std::size_t per_cluster = n / k;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint8_t* w = bits.data() + i * d;
    for (std::size_t l = 0; l < h; ++l) {
      w[l] = static_cast<std::uint8_t>(gen() >> 63);
      w[h + l] = static_cast<std::uint8_t>(1 - w[l]);
    }
    for (std::size_t l = 0; l < d; ++l) centered[l] = static_cast<double>(w[l]) - offset;
    double* v = values.data() + i * d;
    for (std::size_t a = 0; a < d; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < d; ++b) s += R[a * d + b] * centered[b];
      v[a] = alpha * s;
    }
    // (R w_centered)_1 vanishes analytically; store the exact zero.
    v[0] = alpha * static_cast<double>(i / per_cluster + 1) / static_cast<double>(k);
  }
  return AdversarialInstance{SampleAccessMatrix::build(d, n, std::move(values)),
                             alpha,
                             k,
                             n,
                             d,
                             std::move(bits),
                             std::move(R)};
}

/// Coordinates whose magnitude is at most 2 eps_budget / d. When
/// ||x||_1 <= eps_budget this always includes the ceil(d/2) smallest ones.
inline std::vector<std::size_t> extract_small_subset(std::span<const double> x,
                                                     double eps_budget) {
  double l1 = 0.0;
  for (double xi : x) l1 += std::abs(xi);
  if (l1 > eps_budget) {
    throw Error(ErrorCode::budget_violated, "||x||_1 = " + std::to_string(l1) +
                                                " exceeds budget " + std::to_string(eps_budget));
  }
  const double threshold = 2.0 * eps_budget / static_cast<double>(x.size());
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (std::abs(x[l]) <= threshold) out.push_back(l);
  }
  return out;
}

struct HammingRecovery {
  /// Recovered weight-sum estimates, k rows of d values.
  std::vector<double> estimates;
  /// |estimate - true sum| per (j, l), k x d.
  std::vector<double> deviations;
  /// Additive bound 4 n eps / (alpha k sqrt(d)) on the good coordinates.
  double bound = 0.0;
  /// Per cluster: first-half coordinates whose deviation is within bound.
  std::vector<std::vector<std::size_t>> good_coordinates;
  /// floor(d/4), the number of good coordinates each cluster must reach.
  std::size_t required = 0;
  bool subset_bound_holds = false;
  double max_deviation = 0.0;
  /// max_j ||c_j - exact mean_j|| of the supplied centroids.
  double centroid_error = 0.0;
};

/// Inverts w~_j = (|C_j| / alpha) R^T (c_j - alpha c_j^0) and undoes the
/// centering; checks the subset guarantee for accuracy epsilon.
inline HammingRecovery recover_hamming(const AdversarialInstance& inst,
                                       const CentroidSet& centroids, double epsilon) {
  if (centroids.k() != inst.k || centroids.d() != inst.d) {
    throw Error(ErrorCode::dimension_mismatch, "centroids do not match the instance shape");
  }
  const std::size_t d = inst.d;
  const std::size_t k = inst.k;
  const std::size_t h = inst.half();
  const double size = static_cast<double>(inst.cluster_size());
  const double offset = static_cast<double>(h) / static_cast<double>(d);
  const CentroidSet anchors = inst.anchor_centroids();

  HammingRecovery out;
  out.estimates.assign(k * d, 0.0);
  out.deviations.assign(k * d, 0.0);
  out.bound = 4.0 * static_cast<double>(inst.n) * epsilon /
              (inst.alpha * static_cast<double>(k) * std::sqrt(static_cast<double>(d)));
  out.required = d / 4;
  out.good_coordinates.resize(k);
  out.subset_bound_holds = true;
  out.centroid_error = max_centroid_error(centroids, inst.exact_centroids());

  std::vector<double> shifted(d);
  for (std::size_t j = 0; j < k; ++j) {
    const auto c = centroids.centroid(j);
    const auto c0 = anchors.centroid(j);
    for (std::size_t l = 0; l < d; ++l) shifted[l] = c[l] - inst.alpha * c0[l];
    const auto truth = inst.hidden_sums(j);
    for (std::size_t a = 0; a < d; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < d; ++b) s += inst.rotation[b * d + a] * shifted[b];
      const double estimate = size / inst.alpha * s + size * offset;
      out.estimates[j * d + a] = estimate;
      const double dev = std::abs(estimate - truth[a]);
      out.deviations[j * d + a] = dev;
      out.max_deviation = std::max(out.max_deviation, dev);
      if (a < h && dev <= out.bound) out.good_coordinates[j].push_back(a);
    }
    if (out.good_coordinates[j].size() < out.required) out.subset_bound_holds = false;
  }
  return out;
}

}  // namespace skm
