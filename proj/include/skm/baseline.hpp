#pragma once

// Exact Lloyd iteration, RSS cost, and standard k-means++ (D^2) seeding.

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "skm/centroids.hpp"
#include "skm/error.hpp"
#include "skm/rng.hpp"
#include "skm/sample_access.hpp"

namespace skm {

namespace detail {

inline void check_centroid_dim(const SampleAccessMatrix& m, const CentroidSet& C) {
  if (C.d() != m.d()) {
    throw Error(ErrorCode::dimension_mismatch,
                "centroid dimension " + std::to_string(C.d()) + " vs data dimension " +
                    std::to_string(m.d()));
  }
}

inline std::size_t nearest(std::span<const double> v, const CentroidSet& C, double* best_out) {
  std::size_t label = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < C.k(); ++j) {
    const double dist = squared_distance(v, C.centroid(j));
    if (dist < best) {
      best = dist;
      label = j;
    }
  }
  if (best_out) *best_out = best;
  return label;
}

}  // namespace detail

/// Exact labels for every column; lowest index wins ties.
inline std::vector<std::size_t> exact_labels(const SampleAccessMatrix& m, const CentroidSet& C) {
  detail::check_centroid_dim(m, C);
  std::vector<std::size_t> labels(m.n());
  for (std::size_t i = 0; i < m.n(); ++i) labels[i] = detail::nearest(m.column(i), C, nullptr);
  return labels;
}

/// One exact Lloyd step. Clusters that receive no points keep their centroid.
inline CentroidSet lloyd_iterate(const SampleAccessMatrix& m, const CentroidSet& C) {
  const auto labels = exact_labels(m, C);
  const std::size_t k = C.k();
  const std::size_t d = C.d();
  std::vector<double> sums(k * d, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < m.n(); ++i) {
    const auto v = m.column(i);
    const std::size_t j = labels[i];
    ++counts[j];
    for (std::size_t l = 0; l < d; ++l) sums[j * d + l] += v[l];
  }
  CentroidSet next = C;
  next.set_iteration(C.iteration() + 1);
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    auto c = next.centroid(j);
    for (std::size_t l = 0; l < d; ++l) c[l] = sums[j * d + l] / static_cast<double>(counts[j]);
  }
  return next;
}

/// sum_i min_j ||v_i - c_j||^2.
inline double rss_cost(const SampleAccessMatrix& m, const CentroidSet& C) {
  detail::check_centroid_dim(m, C);
  double total = 0.0;
  for (std::size_t i = 0; i < m.n(); ++i) {
    double best = 0.0;
    detail::nearest(m.column(i), C, &best);
    total += best;
  }
  return total;
}

struct LloydRun {
  std::vector<CentroidSet> trajectory;  // trajectory[0] is the initial set
  bool converged = false;
};

/// Iterates exact Lloyd until the mean centroid shift is at most threshold.
inline LloydRun lloyd_run(const SampleAccessMatrix& m, const CentroidSet& init, double threshold,
                          std::size_t max_iters) {
  LloydRun run;
  run.trajectory.push_back(init);
  for (std::size_t t = 0; t < max_iters; ++t) {
    CentroidSet next = lloyd_iterate(m, run.trajectory.back());
    const double shift = mean_centroid_shift(run.trajectory.back(), next);
    run.trajectory.push_back(std::move(next));
    if (shift <= threshold) {
      run.converged = true;
      break;
    }
  }
  return run;
}

/// D^2 seeding: first centroid uniform, each next one drawn with probability
/// proportional to its squared distance to the nearest chosen centroid.
template <Bits64Generator G>
CentroidSet kmeanspp_init(const SampleAccessMatrix& m, std::size_t k, G& gen) {
  if (k == 0) throw Error(ErrorCode::invalid_parameter, "k must be at least 1");
  if (k > m.n()) {
    throw Error(ErrorCode::k_too_large,
                "k = " + std::to_string(k) + " exceeds n = " + std::to_string(m.n()));
  }
  const std::size_t n = m.n();
  const std::size_t d = m.d();
  std::vector<double> coords;
  coords.reserve(k * d);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());

  std::size_t pick = static_cast<std::size_t>(uniform_below(gen, n));
  for (std::size_t c = 0; c < k; ++c) {
    const auto chosen = m.column(pick);
    coords.insert(coords.end(), chosen.begin(), chosen.end());
    if (c + 1 == k) break;
    std::vector<double> prefix(n);
    double running = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], squared_distance(m.column(i), chosen));
      running += best[i];
      prefix[i] = running;
    }
    if (running > 0.0) {
      pick = CumulativeView(prefix).find(uniform01(gen) * running);
    } else {
      // Every point coincides with a chosen centroid; fall back to uniform.
      pick = static_cast<std::size_t>(uniform_below(gen, n));
    }
  }
  return CentroidSet(k, d, std::move(coords));
}

}  // namespace skm
