#pragma once

// Cluster labels: exact nearest-centroid assignment, and the sampled
// assignment that estimates each <c_j, v_i> by median-of-means over
// X = ||v_i||^2 c_l / (v_i)_l with l drawn from the squared-entry
// distribution of v_i. Coordinates with (v_i)_l = 0 have zero sampling weight,
// so the division never sees a zero denominator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "skm/centroids.hpp"
#include "skm/error.hpp"
#include "skm/rng.hpp"
#include "skm/sample_access.hpp"

namespace skm {

enum class LabelMethod { exact, sampled };

struct LabelResult {
  std::size_t label = 0;
  std::vector<double> distances_sq;
  LabelMethod method = LabelMethod::exact;
  std::uint64_t samples_used = 0;
};

/// Multipliers of the median-of-means sizes: K = ceil(groups * ln(1/delta))
/// groups, each averaging ceil(group_size * ||v||^2 ||c||^2 / tau^2) draws.
struct EstimatorConstants {
  double groups = 8.0;
  double group_size = 64.0;
};

enum class EstimatorMode {
  sampled,
  /// Replaces the estimate by the exact mean of X, enumerated over its support.
  analytic_mean,
};

struct EstimatorOptions {
  EstimatorConstants constants;
  EstimatorMode mode = EstimatorMode::sampled;
  /// Reuse each drawn coordinate for every centroid of a label call. Each
  /// centroid's estimator keeps its marginal law; only cross-centroid
  /// independence is dropped, which the union bound does not need.
  bool share_draws = true;
};

struct InnerProductEstimate {
  double value = 0.0;
  std::uint64_t samples = 0;
};

struct EstimatorMoments {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

inline void check_dims(const SampleAccessMatrix& m, std::size_t i, std::size_t centroid_dim) {
  if (i >= m.n()) throw Error(ErrorCode::index_out_of_range, "column " + std::to_string(i));
  if (centroid_dim != m.d()) {
    throw Error(ErrorCode::dimension_mismatch,
                "centroid dimension " + std::to_string(centroid_dim) + " vs data dimension " +
                    std::to_string(m.d()));
  }
}

inline void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::invalid_tau, "tau must be positive and finite");
  }
}

inline void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::invalid_delta, "delta must lie in (0, 1)");
  }
}

inline std::uint64_t ceil_count(double x) {
  if (!(x > 0.0)) return 0;
  const double c = std::ceil(x);
  if (c >= 9.0e18) throw Error(ErrorCode::invalid_parameter, "sample count overflows");
  return static_cast<std::uint64_t>(c);
}

inline double median_in_place(std::vector<double>& xs) {
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  const double upper = xs[mid];
  if (xs.size() % 2 == 1) return upper;
  const double lower = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// Group count of the median-of-means estimator for failure share delta.
inline std::uint64_t median_groups(double delta_share, const EstimatorConstants& c = {}) {
  return std::max<std::uint64_t>(1, detail::ceil_count(c.groups * std::log(1.0 / delta_share)));
}

/// Draws per group for a pair with the given squared norms.
inline std::uint64_t group_size(double v_sq_norm, double c_sq_norm, double tau,
                                const EstimatorConstants& c = {}) {
  return detail::ceil_count(c.group_size * v_sq_norm * c_sq_norm / (tau * tau));
}

/// Exact mean and variance of X by summation over the support of l.
inline EstimatorMoments estimator_moments(const SampleAccessMatrix& m, std::size_t i,
                                          std::span<const double> c) {
  detail::check_dims(m, i, c.size());
  const double v_sq = m.col_sq_norm(i);
  if (v_sq == 0.0) return {};
  const auto v = m.column(i);
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t l = 0; l < v.size(); ++l) {
    if (v[l] == 0.0) continue;
    const double prob = v[l] * v[l] / v_sq;
    const double x = v_sq * c[l] / v[l];
    mean += prob * x;
    second += prob * x * x;
  }
  return {mean, std::max(0.0, second - mean * mean)};
}

inline LabelResult exact_label(const SampleAccessMatrix& m, std::size_t i, const CentroidSet& C,
                               QueryCounter* counter = nullptr) {
  detail::check_dims(m, i, C.d());
  const auto v = m.column(i);
  LabelResult out;
  out.method = LabelMethod::exact;
  out.distances_sq.resize(C.k());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < C.k(); ++j) {
    const double dist = squared_distance(v, C.centroid(j));
    out.distances_sq[j] = dist;
    if (dist < best) {
      best = dist;
      out.label = j;
    }
  }
  if (counter) counter->entry_reads += m.d();
  return out;
}

/// Estimates <c, v_i> to additive error tau/4 with probability 1 - delta_share.
template <Bits64Generator G>
InnerProductEstimate estimate_inner_product(const SampleAccessMatrix& m, std::size_t i,
                                            std::span<const double> c, double tau,
                                            double delta_share, G& gen,
                                            const EstimatorOptions& options = {},
                                            QueryCounter* counter = nullptr) {
  detail::check_tau(tau);
  detail::check_delta(delta_share);
  detail::check_dims(m, i, c.size());
  if (counter) ++counter->norm_reads;
  const double v_sq = m.col_sq_norm(i);
  if (v_sq == 0.0) return {};
  if (options.mode == EstimatorMode::analytic_mean) {
    if (counter) counter->entry_reads += m.d();
    return {estimator_moments(m, i, c).mean, 0};
  }
  double c_sq = 0.0;
  for (double x : c) c_sq += x * x;
  const std::uint64_t per_group = group_size(v_sq, c_sq, tau, options.constants);
  if (per_group == 0) return {};
  const std::uint64_t groups = median_groups(delta_share, options.constants);

  const auto v = m.column(i);
  std::vector<double> means(groups);
  for (std::uint64_t g = 0; g < groups; ++g) {
    double sum = 0.0;
    for (std::uint64_t s = 0; s < per_group; ++s) {
      const std::size_t l = m.sample_entry_in_col(i, gen);
      sum += v_sq * c[l] / v[l];
    }
    means[g] = sum / static_cast<double>(per_group);
  }
  const std::uint64_t total = groups * per_group;
  if (counter) {
    counter->samples += total;
    counter->entry_reads += total;
  }
  return {detail::median_in_place(means), total};
}

/// Label whose squared distance is within tau of the minimum, with
/// probability 1 - delta. Each centroid gets failure share delta / k.
template <Bits64Generator G>
LabelResult approx_label(const SampleAccessMatrix& m, std::size_t i, const CentroidSet& C,
                         double tau, double delta, G& gen, const EstimatorOptions& options = {},
                         QueryCounter* counter = nullptr) {
  detail::check_tau(tau);
  detail::check_delta(delta);
  detail::check_dims(m, i, C.d());
  const std::size_t k = C.k();
  const double delta_share = delta / static_cast<double>(k);
  if (counter) ++counter->norm_reads;
  const double v_sq = m.col_sq_norm(i);

  std::vector<double> estimates(k, 0.0);
  std::uint64_t samples = 0;
  if (v_sq > 0.0 && options.mode == EstimatorMode::sampled && options.share_draws) {
    std::vector<std::uint64_t> sizes(k);
    std::uint64_t max_size = 0;
    for (std::size_t j = 0; j < k; ++j) {
      sizes[j] = group_size(v_sq, C.sq_norm(j), tau, options.constants);
      max_size = std::max(max_size, sizes[j]);
    }
    if (max_size > 0) {
      const std::uint64_t groups = median_groups(delta_share, options.constants);
      const std::size_t d = m.d();
      const auto v = m.column(i);
      const CumulativeView tree = m.entry_tree(i);
      const double total = tree.total();
      std::vector<double> ratio(d, 0.0);
      for (std::size_t l = 0; l < d; ++l) {
        if (v[l] != 0.0) ratio[l] = v_sq / v[l];
      }
      // Centroid j averages the first sizes[j] draws of the group, so per-slot
      // hit counts are folded in as each prefix length is reached.
      std::vector<std::size_t> order(k);
      for (std::size_t j = 0; j < k; ++j) order[j] = j;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return sizes[a] < sizes[b]; });
      std::vector<std::vector<double>> means(k, std::vector<double>(groups, 0.0));
      std::vector<std::uint64_t> hits(d);
      for (std::uint64_t g = 0; g < groups; ++g) {
        std::fill(hits.begin(), hits.end(), 0);
        std::size_t next = 0;
        while (next < k && sizes[order[next]] == 0) ++next;
        for (std::uint64_t s = 1; s <= max_size; ++s) {
          ++hits[tree.find(uniform01(gen) * total)];
          for (; next < k && sizes[order[next]] == s; ++next) {
            const std::size_t j = order[next];
            const auto c = C.centroid(j);
            double sum = 0.0;
            for (std::size_t l = 0; l < d; ++l) {
              if (hits[l] != 0) sum += static_cast<double>(hits[l]) * ratio[l] * c[l];
            }
            means[j][g] = sum / static_cast<double>(s);
          }
        }
      }
      for (std::size_t j = 0; j < k; ++j) {
        estimates[j] = sizes[j] > 0 ? detail::median_in_place(means[j]) : 0.0;
      }
      samples = groups * max_size;
      if (counter) {
        counter->samples += samples;
        counter->entry_reads += samples;
      }
    }
  } else if (v_sq > 0.0) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto est =
          estimate_inner_product(m, i, C.centroid(j), tau, delta_share, gen, options, counter);
      estimates[j] = est.value;
      samples += est.samples;
    }
  }

  LabelResult out;
  out.method = LabelMethod::sampled;
  out.samples_used = samples;
  out.distances_sq.resize(k);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    const double w = v_sq + C.sq_norm(j) - 2.0 * estimates[j];
    out.distances_sq[j] = w;
    if (w < best) {
      best = w;
      out.label = j;
    }
  }
  return out;
}

}  // namespace skm
