#pragma once

// Static sampling-access structure over a dense data matrix V (d rows, n
// columns, column-major). Supports entry reads, column norms, and draws from
// the column-norm distribution, the per-column squared-entry distribution and
// the global absolute-entry distribution, each by one binary search over a
// cumulative-weight index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "skm/compensated_sum.hpp"
#include "skm/cumulative_index.hpp"
#include "skm/error.hpp"
#include "skm/rng.hpp"

namespace skm {

enum class SpectralMethod { frobenius_bound, power_iteration };

constexpr const char* to_string(SpectralMethod m) {
  return m == SpectralMethod::frobenius_bound ? "frobenius_bound" : "power_iteration";
}

struct PowerIterationOptions {
  double relative_tolerance = 1e-6;
  std::size_t max_iterations = 200000;
};

struct MatrixNorms {
  /// Upper bound on the spectral norm used by the sample-size formulas.
  double spectral_upper = 0.0;
  double frobenius = 0.0;
  double norm_21 = 0.0;
  double norm_11 = 0.0;
  double norm_2inf = 0.0;
  SpectralMethod spectral_method = SpectralMethod::frobenius_bound;
};

struct EntryIndex {
  std::size_t column = 0;
  std::size_t row = 0;
  friend bool operator==(const EntryIndex&, const EntryIndex&) = default;
};

class SampleAccessMatrix {
 public:
  /// `values` is column-major: entry (row l, column i) lives at i * d + l.
  static SampleAccessMatrix build(std::size_t d, std::size_t n, std::vector<double> values) {
    if (n == 0 || d == 0) throw Error(ErrorCode::empty_matrix, "matrix has a zero dimension");
    if (values.size() != n * d) {
      throw Error(ErrorCode::dimension_mismatch,
                  "expected " + std::to_string(n * d) + " values, got " +
                      std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < d; ++l) {
        if (!std::isfinite(values[i * d + l])) {
          throw Error(ErrorCode::non_finite_entry,
                      "entry (column " + std::to_string(i) + ", row " + std::to_string(l) +
                          ") is not finite");
        }
      }
    }
    return SampleAccessMatrix(d, n, std::move(values));
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t d() const noexcept { return d_; }

  double entry(std::size_t i, std::size_t l) const {
    if (i >= n_ || l >= d_) {
      throw Error(ErrorCode::index_out_of_range,
                  "(" + std::to_string(i) + ", " + std::to_string(l) + ") outside " +
                      std::to_string(n_) + " columns x " + std::to_string(d_) + " rows");
    }
    return values_[i * d_ + l];
  }

  /// Unchecked column view.
  std::span<const double> column(std::size_t i) const noexcept {
    return {values_.data() + i * d_, d_};
  }
  std::span<const double> values() const noexcept { return values_; }

  double col_norm(std::size_t i) const noexcept { return col_norms_[i]; }
  double col_sq_norm(std::size_t i) const noexcept { return entry_tree(i).total(); }
  double col_l1_norm(std::size_t i) const noexcept { return col_l1_norms_[i]; }
  std::span<const double> col_norms() const noexcept { return col_norms_; }
  std::span<const double> col_l1_norms() const noexcept { return col_l1_norms_; }

  double norm_21() const noexcept { return column_tree().total(); }
  double norm_11() const noexcept { return global_tree().total(); }
  double frobenius() const noexcept { return frobenius_; }
  double norm_2inf() const noexcept { return norm_2inf_; }

  CumulativeView column_tree() const noexcept { return CumulativeView(tree_cols_); }
  CumulativeView entry_tree(std::size_t i) const noexcept {
    return CumulativeView(std::span<const double>(trees_entries_).subspan(i * d_, d_));
  }
  CumulativeView global_tree() const noexcept { return CumulativeView(tree_global_); }

  MatrixNorms norms(SpectralMethod method = SpectralMethod::frobenius_bound,
                    const PowerIterationOptions& options = {}) const {
    MatrixNorms out;
    out.frobenius = frobenius_;
    out.norm_21 = norm_21();
    out.norm_11 = norm_11();
    out.norm_2inf = norm_2inf_;
    out.spectral_method = method;
    out.spectral_upper =
        method == SpectralMethod::frobenius_bound ? frobenius_ : power_iteration_bound(options);
    return out;
  }

  /// Column i with probability ||v_i|| / ||V||_{2,1}.
  template <Bits64Generator G>
  std::size_t sample_col_by_norm(G& gen) const {
    const CumulativeView tree = column_tree();
    if (!(tree.total() > 0.0)) {
      throw Error(ErrorCode::degenerate_distribution, "all column norms are zero");
    }
    return tree.find(uniform01(gen) * tree.total());
  }

  /// Row l of column i with probability V_li^2 / ||v_i||^2.
  template <Bits64Generator G>
  std::size_t sample_entry_in_col(std::size_t i, G& gen) const {
    if (i >= n_) throw Error(ErrorCode::index_out_of_range, "column " + std::to_string(i));
    const CumulativeView tree = entry_tree(i);
    if (!(tree.total() > 0.0)) {
      throw Error(ErrorCode::degenerate_distribution,
                  "column " + std::to_string(i) + " has zero norm");
    }
    return tree.find(uniform01(gen) * tree.total());
  }

  /// Entry (i, l) with probability |V_li| / ||V||_{1,1}.
  template <Bits64Generator G>
  EntryIndex sample_entry_global(G& gen) const {
    const CumulativeView tree = global_tree();
    if (!(tree.total() > 0.0)) {
      throw Error(ErrorCode::degenerate_distribution, "matrix is identically zero");
    }
    const std::size_t flat = tree.find(uniform01(gen) * tree.total());
    return {flat / d_, flat % d_};
  }

  template <Bits64Generator G>
  std::size_t sample_uniform(G& gen) const {
    return static_cast<std::size_t>(uniform_below(gen, n_));
  }

  // Analytic probability mass functions of the three weighted samplers.
  double prob_col_by_norm(std::size_t i) const noexcept { return col_norms_[i] / norm_21(); }
  double prob_entry_in_col(std::size_t i, std::size_t l) const noexcept {
    const double v = values_[i * d_ + l];
    return v * v / col_sq_norm(i);
  }
  double prob_entry_global(std::size_t i, std::size_t l) const noexcept {
    return std::abs(values_[i * d_ + l]) / norm_11();
  }

 private:
  SampleAccessMatrix(std::size_t d, std::size_t n, std::vector<double> values)
      : d_(d),
        n_(n),
        values_(std::move(values)),
        col_norms_(n),
        col_l1_norms_(n),
        tree_cols_(n),
        trees_entries_(n * d),
        tree_global_(n * d) {
    std::vector<double> scratch(d);
    CompensatedSum frob_sq;
    for (std::size_t i = 0; i < n; ++i) {
      const auto col = column(i);
      CompensatedSum l1;
      for (std::size_t l = 0; l < d; ++l) {
        scratch[l] = col[l] * col[l];
        l1.add(std::abs(col[l]));
      }
      const std::span<double> block = std::span<double>(trees_entries_).subspan(i * d, d);
      build_prefix(scratch, block);
      const double sq = block.back();
      col_norms_[i] = std::sqrt(sq);
      col_l1_norms_[i] = l1.value();
      frob_sq.add(sq);
      norm_2inf_ = std::max(norm_2inf_, col_norms_[i]);
    }
    frobenius_ = std::sqrt(frob_sq.value());
    build_prefix(col_norms_, tree_cols_);

    std::vector<double> abs_values(values_.size());
    std::transform(values_.begin(), values_.end(), abs_values.begin(),
                   [](double x) { return std::abs(x); });
    build_prefix(abs_values, tree_global_);
  }

  // Power iteration on the smaller Gram matrix. The returned value is the
  // converged estimate inflated by half the tolerance, capped at ||V||_F.
  double power_iteration_bound(const PowerIterationOptions& options) const {
    const bool rows_side = d_ <= n_;
    const std::size_t m = rows_side ? d_ : n_;
    std::vector<double> gram(m * m, 0.0);
    if (rows_side) {
      for (std::size_t i = 0; i < n_; ++i) {
        const auto col = column(i);
        for (std::size_t a = 0; a < d_; ++a) {
          const double va = col[a];
          if (va == 0.0) continue;
          for (std::size_t b = 0; b < d_; ++b) gram[a * m + b] += va * col[b];
        }
      }
    } else {
      for (std::size_t a = 0; a < n_; ++a) {
        for (std::size_t b = a; b < n_; ++b) {
          double s = 0.0;
          const auto ca = column(a);
          const auto cb = column(b);
          for (std::size_t l = 0; l < d_; ++l) s += ca[l] * cb[l];
          gram[a * m + b] = s;
          gram[b * m + a] = s;
        }
      }
    }
    if (frobenius_ == 0.0) return 0.0;

    SplitMix64 gen(0x5eed5eed5eedULL);
    std::vector<double> x(m), y(m);
    for (double& xi : x) xi = 1.0 + 0.5 * uniform01(gen);
    auto normalize = [](std::vector<double>& v) {
      double s = 0.0;
      for (double vi : v) s += vi * vi;
      const double norm = std::sqrt(s);
      for (double& vi : v) vi /= norm;
      return norm;
    };
    normalize(x);
    double lambda_prev = 0.0;
    const double stop = options.relative_tolerance * 1e-6;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      for (std::size_t a = 0; a < m; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < m; ++b) s += gram[a * m + b] * x[b];
        y[a] = s;
      }
      const double lambda = normalize(y);
      std::swap(x, y);
      if (lambda == 0.0) return 0.0;
      if (it > 0 && std::abs(lambda - lambda_prev) <= stop * lambda) {
        const double sigma = std::sqrt(lambda) * (1.0 + 0.5 * options.relative_tolerance);
        return std::min(sigma, frobenius_);
      }
      lambda_prev = lambda;
    }
    throw Error(ErrorCode::power_iteration_stall,
                "no convergence within " + std::to_string(options.max_iterations) +
                    " iterations");
  }

  std::size_t d_;
  std::size_t n_;
  std::vector<double> values_;
  std::vector<double> col_norms_;
  std::vector<double> col_l1_norms_;
  std::vector<double> tree_cols_;
  std::vector<double> trees_entries_;
  std::vector<double> tree_global_;
  double frobenius_ = 0.0;
  double norm_2inf_ = 0.0;
};

/// Classical queries issued by one iteration.
struct QueryCounter {
  std::uint64_t entry_reads = 0;
  std::uint64_t norm_reads = 0;
  std::uint64_t samples = 0;

  QueryCounter& operator+=(const QueryCounter& o) noexcept {
    entry_reads += o.entry_reads;
    norm_reads += o.norm_reads;
    samples += o.samples;
    return *this;
  }
};

}  // namespace skm
