#pragma once

// Sampling-based approximate Lloyd iterations.
//
// Both variants estimate the cluster sizes |C_j| from p uniform column draws
// P and the cluster sums from q weighted draws Q, then combine them as
//
//   c_j = p / (n |P_j|) * (1/q) * sum over Q_j of an unbiased term of V.
//
// eps0   : Q holds columns drawn with probability ||v_i|| / ||V||_{2,1}; the
//          term is ||V||_{2,1} v_i / ||v_i||; labels are exact.
// epstau : Q holds entries (i, l) drawn with probability |V_li| / ||V||_{1,1};
//          the term is ||V||_{1,1} sgn(V_li) e_l; labels come from the
//          sampled inner-product estimator with slack tau.
//
// Labels are computed once per distinct column of P and Q; all n labels are
// never materialized outside of the zero-noise test hooks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skm/assignment.hpp"
#include "skm/baseline.hpp"
#include "skm/centroids.hpp"
#include "skm/error.hpp"
#include "skm/rng.hpp"
#include "skm/sample_access.hpp"

namespace skm {

enum class AssignMode { exact_assign, sampled_assign };

constexpr const char* to_string(AssignMode m) {
  return m == AssignMode::exact_assign ? "exact_assign" : "sampled_assign";
}

/// Test hooks that replace sampled quantities by their expectations.
enum class ZeroNoise {
  none,
  /// |P_j| replaced by its mean p |C_j| / n (requires all n exact labels).
  exact_cluster_sizes,
  /// Labels exact; |P_j| and the Q-sum replaced by means obtained by
  /// enumerating the sampling distributions.
  full_expectation,
};

struct SampleConstants {
  double p = 48.0;
  double q = 192.0;
  double mm_groups = 8.0;
  double mm_size = 64.0;
};

struct IterationParams {
  double epsilon = 1.0;
  double tau = 0.0;
  double delta = 0.1;
  double threshold_T = 1e-3;
  std::size_t max_iters = 100;
  SampleConstants constants;
  AssignMode mode = AssignMode::exact_assign;
  std::uint64_t seed = 0;

  std::optional<std::uint64_t> p_override;
  std::optional<std::uint64_t> q_override;
  SpectralMethod spectral = SpectralMethod::frobenius_bound;
  /// Norms to size samples with; computed from the matrix when absent.
  std::optional<MatrixNorms> norms;
  EstimatorMode estimator_mode = EstimatorMode::sampled;
  bool share_draws = true;
  ZeroNoise zero_noise = ZeroNoise::none;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw Error(ErrorCode::invalid_parameter, "epsilon must be positive and finite");
    }
    if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::invalid_delta, "delta in (0, 1)");
    if (mode == AssignMode::sampled_assign && !(tau > 0.0 && std::isfinite(tau))) {
      throw Error(ErrorCode::invalid_tau, "sampled assignment needs tau > 0");
    }
    if (mode == AssignMode::exact_assign && tau != 0.0) {
      throw Error(ErrorCode::invalid_tau, "exact assignment requires tau = 0");
    }
    if (!(constants.p > 0.0 && constants.q > 0.0 && constants.mm_groups > 0.0 &&
          constants.mm_size > 0.0)) {
      throw Error(ErrorCode::invalid_parameter, "sample-size constants must be positive");
    }
    if (!(threshold_T >= 0.0)) throw Error(ErrorCode::invalid_parameter, "threshold_T < 0");
    if (max_iters == 0) throw Error(ErrorCode::invalid_parameter, "max_iters must be >= 1");
    if ((p_override && *p_override == 0) || (q_override && *q_override == 0)) {
      throw Error(ErrorCode::invalid_parameter, "sample-size overrides must be >= 1");
    }
  }

  EstimatorOptions estimator() const {
    EstimatorOptions o;
    o.constants = {constants.mm_groups, constants.mm_size};
    o.mode = estimator_mode;
    o.share_draws = share_draws;
    return o;
  }
};

struct SampleSizes {
  std::uint64_t p = 1;
  std::uint64_t q = 1;
  /// Formula values before ceiling and clamping.
  double p_raw = 0.0;
  double q_raw = 0.0;
};

/// p = c_p (||V||^2 / n) (k^2 / eps^2) ln(2k / delta), clamped to [1, n].
/// q = c_q max{(N^2 / n^2)(k^2 / eps^2), (N / n)(k / eps)} ln(k / delta),
/// clamped to [1, n d], with N = ||V||_{2,1} for exact assignment and
/// N = ||V||_{1,1} for sampled assignment.
inline SampleSizes sample_sizes(const MatrixNorms& norms, std::size_t n, std::size_t d,
                                std::size_t k, double epsilon, double delta, AssignMode mode,
                                const SampleConstants& constants = {}) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_parameter, "epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::invalid_delta, "delta in (0, 1)");
  const double nn = static_cast<double>(n);
  const double kk = static_cast<double>(k);
  const double spectral_sq = norms.spectral_upper * norms.spectral_upper;

  SampleSizes out;
  out.p_raw = constants.p * (spectral_sq / nn) * (kk * kk / (epsilon * epsilon)) *
              std::log(2.0 * kk / delta);
  const double mass = mode == AssignMode::exact_assign ? norms.norm_21 : norms.norm_11;
  const double per_point = mass / nn;
  const double quadratic = per_point * per_point * kk * kk / (epsilon * epsilon);
  const double linear = per_point * kk / epsilon;
  out.q_raw = constants.q * std::max(quadratic, linear) * std::log(kk / delta);

  auto clamp_count = [](double raw, double upper) -> std::uint64_t {
    if (!(raw > 1.0)) return 1;
    const double c = std::ceil(raw);
    return c >= upper ? static_cast<std::uint64_t>(upper) : static_cast<std::uint64_t>(c);
  };
  out.p = clamp_count(out.p_raw, nn);
  out.q = clamp_count(out.q_raw, nn * static_cast<double>(d));
  return out;
}

struct IterationReport {
  CentroidSet new_centroids;
  std::uint64_t p_used = 0;
  std::uint64_t q_used = 0;
  std::vector<std::uint64_t> p_hits;  // |P_j|
  std::vector<std::uint64_t> q_hits;  // |Q_j|, or sum over l of |Q_jl|
  double centroid_shift = 0.0;
  std::vector<std::size_t> empty_clusters;
  std::uint64_t rng_draws = 0;
  std::uint64_t wall_nanos = 0;
  QueryCounter queries;
  std::uint64_t distinct_labeled = 0;
  std::uint64_t estimator_samples = 0;
  /// ||C^t||_F^2 of the input centroids.
  double input_frobenius_sq = 0.0;
};

namespace detail {

constexpr std::uint64_t kIterationTag = 0x17e7a710ULL;
constexpr std::uint64_t kLabelTag = 0x1abe1ULL;

inline std::uint64_t clock_nanos() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::steady_clock::now().time_since_epoch())
          .count());
}

/// Sorted distinct column indices with their labels.
struct LabelTable {
  std::vector<std::size_t> columns;
  std::vector<std::size_t> labels;

  std::size_t label_of(std::size_t column) const {
    const auto it = std::lower_bound(columns.begin(), columns.end(), column);
    return labels[static_cast<std::size_t>(it - columns.begin())];
  }
};

inline std::vector<std::size_t> distinct(std::vector<std::size_t> xs) {
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

inline void check_inputs(const SampleAccessMatrix& m, const CentroidSet& C,
                         const IterationParams& params, AssignMode expected) {
  params.validate();
  if (params.mode != expected) {
    throw Error(ErrorCode::invalid_parameter,
                std::string("iteration requires mode ") + to_string(expected));
  }
  check_centroid_dim(m, C);
}

inline SampleSizes resolve_sizes(const SampleAccessMatrix& m, const CentroidSet& C,
                                 const IterationParams& params) {
  const MatrixNorms norms = params.norms ? *params.norms : m.norms(params.spectral);
  SampleSizes sizes = sample_sizes(norms, m.n(), m.d(), C.k(), params.epsilon,
                                   params.delta, params.mode, params.constants);
  if (params.p_override) sizes.p = *params.p_override;
  if (params.q_override) sizes.q = *params.q_override;
  return sizes;
}

/// Applies c_j = scale_j * sum_j to non-empty clusters; freezes the rest.
inline void finish_centroids(IterationReport& report, const CentroidSet& C,
                             const std::vector<double>& cluster_size_estimate,
                             const std::vector<double>& sums, double mass_per_draw) {
  const std::size_t k = C.k();
  const std::size_t d = C.d();
  report.new_centroids = C;
  report.new_centroids.set_iteration(C.iteration() + 1);
  for (std::size_t j = 0; j < k; ++j) {
    if (!(cluster_size_estimate[j] > 0.0)) {
      report.empty_clusters.push_back(j);
      continue;
    }
    const double scale = mass_per_draw / cluster_size_estimate[j];
    auto c = report.new_centroids.centroid(j);
    for (std::size_t l = 0; l < d; ++l) c[l] = scale * sums[j * d + l];
  }
  report.centroid_shift = mean_centroid_shift(C, report.new_centroids);
}

}  // namespace detail

/// One iteration with exact labels and column-norm sampling for the sums.
inline IterationReport iterate_eps0(const SampleAccessMatrix& m, const CentroidSet& C,
                                    const IterationParams& params, SplitMix64& gen) {
  detail::check_inputs(m, C, params, AssignMode::exact_assign);
  const std::uint64_t start = detail::clock_nanos();
  const std::uint64_t draws_before = gen.draws();
  const std::size_t n = m.n();
  const std::size_t k = C.k();
  const std::size_t d = m.d();
  const double nn = static_cast<double>(n);

  IterationReport report;
  report.input_frobenius_sq = C.frobenius_sq();
  report.p_hits.assign(k, 0);
  report.q_hits.assign(k, 0);
  std::vector<double> sums(k * d, 0.0);
  std::vector<double> size_estimate(k, 0.0);
  const SampleSizes sizes = detail::resolve_sizes(m, C, params);
  report.p_used = sizes.p;
  report.q_used = sizes.q;
  const double pp = static_cast<double>(sizes.p);
  const double qq = static_cast<double>(sizes.q);
  const double norm_21 = m.norm_21();

  if (params.zero_noise == ZeroNoise::full_expectation) {
    // E|P_j| = p |C_j| / n and E[sum over Q_j] = q sum_{i in C_j} P(i) v_i / ||v_i||.
    const auto labels = exact_labels(m, C);
    std::vector<double> cluster_count(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = labels[i];
      cluster_count[j] += 1.0;
      const double norm = m.col_norm(i);
      if (norm == 0.0) continue;
      const double weight = qq * m.prob_col_by_norm(i) / norm;
      const auto v = m.column(i);
      for (std::size_t l = 0; l < d; ++l) sums[j * d + l] += weight * v[l];
    }
    for (std::size_t j = 0; j < k; ++j) size_estimate[j] = pp * cluster_count[j] / nn;
    report.queries.entry_reads += n * d;
  } else {
    std::vector<std::size_t> P(sizes.p);
    std::vector<std::size_t> Q(sizes.q);
    for (auto& i : P) i = m.sample_uniform(gen);
    for (auto& i : Q) i = m.sample_col_by_norm(gen);
    report.queries.samples += sizes.p + sizes.q;

    detail::LabelTable table;
    std::vector<std::size_t> all(P);
    all.insert(all.end(), Q.begin(), Q.end());
    table.columns = detail::distinct(std::move(all));
    table.labels.resize(table.columns.size());
    for (std::size_t s = 0; s < table.columns.size(); ++s) {
      table.labels[s] = exact_label(m, table.columns[s], C, &report.queries).label;
    }
    report.distinct_labeled = table.columns.size();

    for (std::size_t i : P) ++report.p_hits[table.label_of(i)];
    for (std::size_t i : Q) {
      const std::size_t j = table.label_of(i);
      ++report.q_hits[j];
      const double norm = m.col_norm(i);
      const auto v = m.column(i);
      for (std::size_t l = 0; l < d; ++l) sums[j * d + l] += v[l] / norm;
    }
    report.queries.norm_reads += sizes.q;

    if (params.zero_noise == ZeroNoise::exact_cluster_sizes) {
      const auto labels = exact_labels(m, C);
      std::vector<double> cluster_count(k, 0.0);
      for (std::size_t j : labels) cluster_count[j] += 1.0;
      for (std::size_t j = 0; j < k; ++j) size_estimate[j] = pp * cluster_count[j] / nn;
    } else {
      for (std::size_t j = 0; j < k; ++j) {
        size_estimate[j] = static_cast<double>(report.p_hits[j]);
      }
    }
  }

  // c_j = p / (n |P_j|) * (||V||_{2,1} / q) * sum; rearranged as
  // (p ||V||_{2,1} / (n q)) / |P_j| * sum.
  detail::finish_centroids(report, C, size_estimate, sums, pp * norm_21 / (nn * qq));
  report.rng_draws = gen.draws() - draws_before;
  report.wall_nanos = detail::clock_nanos() - start;
  return report;
}

/// One iteration with sampled labels and entry sampling for the sums.
inline IterationReport iterate_epstau(const SampleAccessMatrix& m, const CentroidSet& C,
                                      const IterationParams& params, SplitMix64& gen) {
  detail::check_inputs(m, C, params, AssignMode::sampled_assign);
  const std::uint64_t start = detail::clock_nanos();
  const std::uint64_t draws_before = gen.draws();
  const std::size_t n = m.n();
  const std::size_t k = C.k();
  const std::size_t d = m.d();
  const double nn = static_cast<double>(n);

  IterationReport report;
  report.input_frobenius_sq = C.frobenius_sq();
  report.p_hits.assign(k, 0);
  report.q_hits.assign(k, 0);
  std::vector<double> sums(k * d, 0.0);
  std::vector<double> size_estimate(k, 0.0);
  const SampleSizes sizes = detail::resolve_sizes(m, C, params);
  report.p_used = sizes.p;
  report.q_used = sizes.q;
  const double pp = static_cast<double>(sizes.p);
  const double qq = static_cast<double>(sizes.q);
  const double norm_11 = m.norm_11();
  std::uint64_t label_draws = 0;

  if (params.zero_noise == ZeroNoise::full_expectation) {
    // E[sum over Q_jl of sgn] = q sum_{i in C_j} P(i, l) sgn(V_li).
    const auto labels = exact_labels(m, C);
    std::vector<double> cluster_count(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = labels[i];
      cluster_count[j] += 1.0;
      const auto v = m.column(i);
      for (std::size_t l = 0; l < d; ++l) {
        if (v[l] == 0.0) continue;
        const double sign = v[l] > 0.0 ? 1.0 : -1.0;
        sums[j * d + l] += qq * m.prob_entry_global(i, l) * sign;
      }
    }
    for (std::size_t j = 0; j < k; ++j) size_estimate[j] = pp * cluster_count[j] / nn;
    report.queries.entry_reads += n * d;
  } else {
    std::vector<std::size_t> P(sizes.p);
    std::vector<EntryIndex> Q(sizes.q);
    for (auto& i : P) i = m.sample_uniform(gen);
    for (auto& e : Q) e = m.sample_entry_global(gen);
    report.queries.samples += sizes.p + sizes.q;

    detail::LabelTable table;
    std::vector<std::size_t> all(P);
    for (const auto& e : Q) all.push_back(e.column);
    table.columns = detail::distinct(std::move(all));
    table.labels.resize(table.columns.size());
    const double call_delta = params.delta / (4.0 * (pp + qq));
    const EstimatorOptions options = params.estimator();
    for (std::size_t s = 0; s < table.columns.size(); ++s) {
      SplitMix64 label_gen = derive_stream(gen.key(), {detail::kLabelTag, s});
      const LabelResult r = approx_label(m, table.columns[s], C, params.tau, call_delta,
                                         label_gen, options, &report.queries);
      table.labels[s] = r.label;
      report.estimator_samples += r.samples_used;
      label_draws += label_gen.draws();
    }
    report.distinct_labeled = table.columns.size();

    for (std::size_t i : P) ++report.p_hits[table.label_of(i)];
    for (const auto& e : Q) {
      const std::size_t j = table.label_of(e.column);
      ++report.q_hits[j];
      // Drawn entries have |V_li| > 0, so the sign is never zero.
      sums[j * d + e.row] += m.column(e.column)[e.row] > 0.0 ? 1.0 : -1.0;
    }
    report.queries.entry_reads += sizes.q;

    if (params.zero_noise == ZeroNoise::exact_cluster_sizes) {
      const auto labels = exact_labels(m, C);
      std::vector<double> cluster_count(k, 0.0);
      for (std::size_t j : labels) cluster_count[j] += 1.0;
      for (std::size_t j = 0; j < k; ++j) size_estimate[j] = pp * cluster_count[j] / nn;
    } else {
      for (std::size_t j = 0; j < k; ++j) {
        size_estimate[j] = static_cast<double>(report.p_hits[j]);
      }
    }
  }

  detail::finish_centroids(report, C, size_estimate, sums, pp * norm_11 / (nn * qq));
  report.rng_draws = gen.draws() - draws_before + label_draws;
  report.wall_nanos = detail::clock_nanos() - start;
  return report;
}

/// Dispatches on params.mode.
inline IterationReport iterate(const SampleAccessMatrix& m, const CentroidSet& C,
                                      const IterationParams& params, SplitMix64& gen) {
  return params.mode == AssignMode::exact_assign ? iterate_eps0(m, C, params, gen)
                                                 : iterate_epstau(m, C, params, gen);
}

struct Trajectory {
  std::vector<IterationReport> iterations;
  bool converged = false;
};

/// Iterates until the mean centroid shift drops to threshold_T or max_iters
/// is reached. Iteration t draws from the stream keyed by (seed, t).
inline Trajectory run(const SampleAccessMatrix& m, const CentroidSet& init,
                      const IterationParams& params) {
  params.validate();
  Trajectory out;
  CentroidSet current = init;
  for (std::size_t t = 0; t < params.max_iters; ++t) {
    SplitMix64 gen = derive_stream(params.seed, {detail::kIterationTag, t});
    IterationReport report = iterate(m, current, params, gen);
    current = report.new_centroids;
    const bool done = report.centroid_shift <= params.threshold_T;
    out.iterations.push_back(std::move(report));
    if (done) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace skm
