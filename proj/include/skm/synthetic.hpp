#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "skm/centroids.hpp"
#include "skm/rng.hpp"
#include "skm/sample_access.hpp"

namespace skm {

struct Mixture {
  SampleAccessMatrix matrix;
  CentroidSet means;
  std::vector<std::size_t> component;  // generating component of each column
};

/// Balanced isotropic Gaussian mixture: column i comes from component i mod k.
template <Bits64Generator G>
Mixture gaussian_mixture(std::size_t n, const CentroidSet& means, double sigma, G& gen) {
  const std::size_t d = means.d();
  const std::size_t k = means.k();
  std::vector<double> values(n * d);
  std::vector<std::size_t> component(n);
  for (std::size_t i = 0; i < n; ++i) {
    component[i] = i % k;
    const auto mu = means.centroid(component[i]);
    for (std::size_t l = 0; l < d; ++l) values[i * d + l] = mu[l] + sigma * standard_normal(gen);
  }
  return {SampleAccessMatrix::build(d, n, std::move(values)), means, std::move(component)};
}

/// k vertices of a regular simplex of circumradius `radius` centred at the
/// origin, embedded in the first k - 1 coordinates of R^d (k >= 2, d >= k - 1).
inline CentroidSet simplex_means(std::size_t k, std::size_t d, double radius) {
  // Centre the standard basis e_1..e_k of R^k, then rotate into R^{k-1} by
  // Gram-Schmidt on the centred vectors.
  std::vector<std::vector<double>> pts(k, std::vector<double>(k, -1.0 / static_cast<double>(k)));
  for (std::size_t j = 0; j < k; ++j) pts[j][j] += 1.0;
  std::vector<std::vector<double>> basis;
  for (std::size_t j = 0; j < k && basis.size() + 1 < k; ++j) {
    std::vector<double> b = pts[j];
    for (const auto& e : basis) {
      double dot = 0.0;
      for (std::size_t a = 0; a < k; ++a) dot += b[a] * e[a];
      for (std::size_t a = 0; a < k; ++a) b[a] -= dot * e[a];
    }
    double norm = 0.0;
    for (double x : b) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : b) x /= norm;
    basis.push_back(std::move(b));
  }
  const double scale = radius / std::sqrt(1.0 - 1.0 / static_cast<double>(k));
  std::vector<double> coords(k * d, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t b = 0; b < basis.size() && b < d; ++b) {
      double dot = 0.0;
      for (std::size_t a = 0; a < k; ++a) dot += pts[j][a] * basis[b][a];
      coords[j * d + b] = scale * dot;
    }
  }
  return CentroidSet(k, d, std::move(coords));
}

}  // namespace skm
