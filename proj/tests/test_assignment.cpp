#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "skm/assignment.hpp"
#include "skm/rng.hpp"

using skm::CentroidSet;
using skm::ErrorCode;
using skm::SampleAccessMatrix;

namespace {

template <class Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const skm::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected skm::Error";
  return ErrorCode::io_error;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) s += a[l] * b[l];
  return s;
}

std::size_t brute_nearest(std::span<const double> v, const CentroidSet& C) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < C.k(); ++j) {
    double s = 0.0;
    for (std::size_t l = 0; l < v.size(); ++l) {
      const double diff = v[l] - C.centroid(j)[l];
      s += diff * diff;
    }
    if (s < best_d) {
      best_d = s;
      best = j;
    }
  }
  return best;
}

// Upper 3-sigma bound on the failure count of a Binomial(trials, rate).
double three_sigma_rate(double rate, int trials) {
  return rate + 3.0 * std::sqrt(rate * (1.0 - rate) / trials);
}

}  // namespace

TEST(ExactLabel, NearestAndDistances) {
  const auto m = SampleAccessMatrix::build(2, 1, {0, 0});
  const CentroidSet C(2, 2, {1, 0, 3, 0});
  const auto r = skm::exact_label(m, 0, C);
  EXPECT_EQ(r.label, 0u);
  EXPECT_EQ(r.method, skm::LabelMethod::exact);
  ASSERT_EQ(r.distances_sq.size(), 2u);
  EXPECT_EQ(r.distances_sq[0], 1.0);
  EXPECT_EQ(r.distances_sq[1], 9.0);
}

TEST(ExactLabel, TieGoesToLowestIndex) {
  const auto m = SampleAccessMatrix::build(2, 1, {0, 0});
  EXPECT_EQ(skm::exact_label(m, 0, CentroidSet(2, 2, {1, 0, -1, 0})).label, 0u);
  EXPECT_EQ(skm::exact_label(m, 0, CentroidSet(3, 2, {5, 0, 0, 2, -2, 0})).label, 1u);
}

TEST(ExactLabel, MatchesBruteForce) {
  skm::SplitMix64 gen(21);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> v(7), c(35);
    for (double& x : v) x = skm::standard_normal(gen);
    for (double& x : c) x = skm::standard_normal(gen);
    const auto m = SampleAccessMatrix::build(7, 1, v);
    const CentroidSet C(5, 7, c);
    skm::QueryCounter q;
    ASSERT_EQ(skm::exact_label(m, 0, C, &q).label, brute_nearest(v, C));
    ASSERT_EQ(q.entry_reads, 7u);
  }
}

TEST(ExactLabel, DimensionMismatch) {
  const auto m = SampleAccessMatrix::build(2, 1, {0, 0});
  EXPECT_EQ(code_of([&] { skm::exact_label(m, 0, CentroidSet(1, 3, {0, 0, 0})); }),
            ErrorCode::dimension_mismatch);
}

TEST(Estimator, SupportAndMean) {
  const auto m = SampleAccessMatrix::build(2, 1, {3, 4});
  const std::vector<double> c = {1, 2};
  // The two values of X with their probabilities.
  const double x0 = 25.0 * 1.0 / 3.0;
  const double x1 = 25.0 * 2.0 / 4.0;
  EXPECT_DOUBLE_EQ(x0, 25.0 / 3.0);
  EXPECT_DOUBLE_EQ(x1, 12.5);
  const double mean = 9.0 / 25.0 * x0 + 16.0 / 25.0 * x1;
  EXPECT_NEAR(mean, 11.0, 1e-12);
  const auto mom = skm::estimator_moments(m, 0, c);
  EXPECT_NEAR(mom.mean, 11.0, 1e-12);
  const double var = 9.0 / 25.0 * x0 * x0 + 16.0 / 25.0 * x1 * x1 - 121.0;
  EXPECT_NEAR(mom.variance, var, 1e-9);
  EXPECT_LE(mom.variance, 25.0 * 5.0);
}

TEST(Estimator, SizesFollowConstants) {
  EXPECT_EQ(skm::median_groups(0.05), 24u);  // ceil(8 ln 20) = ceil(23.97)
  EXPECT_EQ(skm::group_size(25.0, 5.0, 0.8), 12500u);
  EXPECT_EQ(skm::median_groups(0.05, {4.0, 64.0}), 12u);
  EXPECT_EQ(skm::group_size(25.0, 5.0, 0.8, {8.0, 32.0}), 6250u);
}

TEST(Estimator, ZeroCentroidAndZeroColumn) {
  skm::SplitMix64 gen(1);
  const auto m = SampleAccessMatrix::build(2, 2, {3, 4, 0, 0});
  const std::vector<double> zero = {0, 0};
  const auto r = skm::estimate_inner_product(m, 0, zero, 0.5, 0.1, gen);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.samples, 0u);
  const auto z = skm::estimate_inner_product(m, 1, std::vector<double>{1, 1}, 0.5, 0.1, gen);
  EXPECT_EQ(z.value, 0.0);
  EXPECT_EQ(z.samples, 0u);
  EXPECT_EQ(gen.draws(), 0u);
}

TEST(Estimator, Errors) {
  skm::SplitMix64 gen(1);
  const auto m = SampleAccessMatrix::build(2, 1, {3, 4});
  const std::vector<double> c = {1, 2};
  EXPECT_EQ(code_of([&] { skm::estimate_inner_product(m, 0, c, 0.0, 0.1, gen); }),
            ErrorCode::invalid_tau);
  EXPECT_EQ(code_of([&] { skm::estimate_inner_product(m, 0, c, -1.0, 0.1, gen); }),
            ErrorCode::invalid_tau);
  EXPECT_EQ(code_of([&] { skm::estimate_inner_product(m, 0, c, 1.0, 0.0, gen); }),
            ErrorCode::invalid_delta);
  EXPECT_EQ(code_of([&] { skm::estimate_inner_product(m, 0, c, 1.0, 1.0, gen); }),
            ErrorCode::invalid_delta);
  const CentroidSet C(1, 2, {1, 2});
  EXPECT_EQ(code_of([&] { skm::approx_label(m, 0, C, 0.0, 0.1, gen); }), ErrorCode::invalid_tau);
  EXPECT_EQ(code_of([&] { skm::approx_label(m, 0, C, 1.0, 1.5, gen); }),
            ErrorCode::invalid_delta);
}

TEST(Estimator, ConcentratesWithinQuarterTau) {
  const auto m = SampleAccessMatrix::build(2, 1, {3, 4});
  const std::vector<double> c = {1, 2};
  const int runs = 1000;
  int within = 0;
  for (int r = 0; r < runs; ++r) {
    auto gen = skm::derive_stream(77, {static_cast<std::uint64_t>(r)});
    const auto est = skm::estimate_inner_product(m, 0, c, 0.8, 0.05, gen);
    if (std::abs(est.value - 11.0) <= 0.2) ++within;
    if (r == 0) {
      EXPECT_EQ(est.samples, 24u * 12500u);
    }
  }
  EXPECT_GE(within, static_cast<int>(0.94 * runs));
}

TEST(Estimator, UnbiasedOnIntegerGrid) {
  skm::SplitMix64 gen(31);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t d = 1 + skm::uniform_below(gen, 8);
    std::vector<double> v(d), c(d);
    for (double& x : v) x = static_cast<double>(static_cast<int>(skm::uniform_below(gen, 7)) - 3);
    for (double& x : c) x = static_cast<double>(static_cast<int>(skm::uniform_below(gen, 7)) - 3);
    const auto m = SampleAccessMatrix::build(d, 1, v);
    const double truth = dot(v, c);  // small integers: exact
    const auto mom = skm::estimator_moments(m, 0, c);
    ASSERT_NEAR(mom.mean, truth, 1e-12 * std::max(1.0, std::abs(truth)));
  }
}

TEST(Estimator, VarianceBoundBySummation) {
  skm::SplitMix64 gen(32);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t d = 1 + skm::uniform_below(gen, 8);
    std::vector<double> v(d), c(d);
    for (double& x : v) x = skm::uniform01(gen) < 0.25 ? 0.0 : skm::standard_normal(gen);
    for (double& x : c) x = skm::standard_normal(gen);
    v[0] = 1.0 + std::abs(v[0]);
    const auto m = SampleAccessMatrix::build(d, 1, v);
    double v_sq = 0.0;
    double c_sq = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      v_sq += v[l] * v[l];
      c_sq += c[l] * c[l];
    }
    // Independent second moment: sum over the support of P(l) X(l)^2.
    double second = 0.0;
    for (std::size_t l = 0; l < d; ++l) {
      if (v[l] != 0.0) second += v_sq * c[l] * c[l];
    }
    const double truth = dot(v, c);
    const double var = second - truth * truth;
    const auto mom = skm::estimator_moments(m, 0, c);
    ASSERT_NEAR(mom.variance, std::max(0.0, var), 1e-9 * std::max(1.0, second));
    ASSERT_LE(mom.variance, v_sq * c_sq * (1 + 1e-12));
  }
}

TEST(ApproxLabel, ZeroColumnUsesCentroidNorms) {
  const auto m = SampleAccessMatrix::build(2, 1, {0, 0});
  const CentroidSet C(3, 2, {2, 0, 0, -1, 3, 3});
  skm::SplitMix64 gen(3);
  const auto r = skm::approx_label(m, 0, C, 0.1, 0.1, gen);
  EXPECT_EQ(r.label, 1u);
  EXPECT_EQ(r.method, skm::LabelMethod::sampled);
  EXPECT_EQ(r.distances_sq, (std::vector<double>{4.0, 1.0, 18.0}));
  EXPECT_EQ(r.samples_used, 0u);
}

TEST(ApproxLabel, AnalyticMeanReproducesExactDistances) {
  skm::SplitMix64 gen(41);
  skm::EstimatorOptions opts;
  opts.mode = skm::EstimatorMode::analytic_mean;
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> v(4), c(12);
    for (double& x : v) x = skm::uniform01(gen) < 0.2 ? 0.0 : skm::standard_normal(gen);
    for (double& x : c) x = skm::standard_normal(gen);
    v[2] = 0.5;
    const auto m = SampleAccessMatrix::build(4, 1, v);
    const CentroidSet C(3, 4, c);
    const auto exact = skm::exact_label(m, 0, C);
    const auto approx = skm::approx_label(m, 0, C, 0.01, 0.1, gen, opts);
    ASSERT_EQ(approx.label, exact.label);
    for (std::size_t j = 0; j < 3; ++j) {
      ASSERT_NEAR(approx.distances_sq[j], exact.distances_sq[j], 1e-12 * (1 + exact.distances_sq[j]));
    }
  }
}

TEST(ApproxLabel, SharedDrawsMatchDirectPrefixMeans) {
  skm::SplitMix64 inst(43);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t d = 1 + skm::uniform_below(inst, 6);
    const std::size_t k = 1 + skm::uniform_below(inst, 4);
    std::vector<double> v(d), c(k * d);
    for (double& x : v) x = skm::uniform01(inst) < 0.2 ? 0.0 : skm::standard_normal(inst);
    v[0] = 1.5;
    for (double& x : c) x = (1 + skm::uniform_below(inst, 3)) * skm::standard_normal(inst);
    const auto m = SampleAccessMatrix::build(d, 1, v);
    const CentroidSet C(k, d, c);
    const double tau = 2.0, delta = 0.3;
    skm::SplitMix64 gen(1000 + rep);
    const auto r = skm::approx_label(m, 0, C, tau, delta, gen);

    // Replay the same stream: each group draws max_size indices and centroid j
    // averages the first size_j of them; the estimate is the median of groups.
    skm::SplitMix64 replay(1000 + rep);
    const double v_sq = m.col_sq_norm(0);
    std::vector<std::uint64_t> sizes(k);
    for (std::size_t j = 0; j < k; ++j) sizes[j] = skm::group_size(v_sq, C.sq_norm(j), tau);
    const std::uint64_t max_size = *std::max_element(sizes.begin(), sizes.end());
    const std::uint64_t groups = skm::median_groups(delta / static_cast<double>(k));
    std::vector<std::vector<double>> means(k);
    for (std::uint64_t g = 0; g < groups; ++g) {
      std::vector<double> sums(k, 0.0);
      for (std::uint64_t s = 0; s < max_size; ++s) {
        const std::size_t l = m.sample_entry_in_col(0, replay);
        for (std::size_t j = 0; j < k; ++j) {
          if (s < sizes[j]) sums[j] += v_sq * C.centroid(j)[l] / v[l];
        }
      }
      for (std::size_t j = 0; j < k; ++j) means[j].push_back(sums[j] / sizes[j]);
    }
    ASSERT_EQ(replay.draws(), gen.draws());
    for (std::size_t j = 0; j < k; ++j) {
      std::sort(means[j].begin(), means[j].end());
      const std::size_t mid = means[j].size() / 2;
      const double med = means[j].size() % 2 ? means[j][mid] : 0.5 * (means[j][mid - 1] + means[j][mid]);
      const double expected = v_sq + C.sq_norm(j) - 2.0 * med;
      ASSERT_NEAR(r.distances_sq[j], expected, 1e-9 * (1.0 + std::abs(expected)));
    }
  }
}

TEST(ApproxLabel, SampledDistancesWithinHalfTau) {
  const auto m = SampleAccessMatrix::build(3, 1, {1, -2, 0.5});
  const CentroidSet C(2, 3, {1, 1, 1, -1, 0, 2});
  const auto exact = skm::exact_label(m, 0, C);
  const double tau = 0.5;
  for (bool shared : {true, false}) {
    skm::EstimatorOptions opts;
    opts.share_draws = shared;
    skm::SplitMix64 gen(5);
    const auto r = skm::approx_label(m, 0, C, tau, 0.2, gen, opts);
    EXPECT_GT(r.samples_used, 0u);
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_LE(std::abs(r.distances_sq[j] - exact.distances_sq[j]), tau / 2);
    }
  }
}

TEST(ApproxLabel, GapAboveTauMislabelRate) {
  const auto m = SampleAccessMatrix::build(2, 1, {1, 2});
  const CentroidSet C(2, 2, {1, 2, 2, 2});  // squared distances 0 and 1
  for (bool shared : {true, false}) {
    skm::EstimatorOptions opts;
    opts.share_draws = shared;
    int wrong = 0;
    for (int t = 0; t < 1000; ++t) {
      auto gen = skm::derive_stream(shared ? 1 : 2, {static_cast<std::uint64_t>(t)});
      if (skm::approx_label(m, 0, C, 0.5, 0.1, gen, opts).label != 0) ++wrong;
    }
    EXPECT_LE(wrong, 130) << "share_draws=" << shared;
  }
}

TEST(ApproxLabel, WideGapsMislabelRate) {
  skm::SplitMix64 inst(51);
  std::vector<double> v(4);
  for (double& x : v) x = skm::standard_normal(inst);
  const auto m = SampleAccessMatrix::build(4, 1, v);
  // Centroid 0 at v, others far enough that every gap is at least 10 tau.
  std::vector<double> c(v);
  for (double x : v) c.push_back(x + 2.0);
  for (double x : v) c.push_back(x - 2.5);
  const CentroidSet C(3, 4, c);
  const auto exact = skm::exact_label(m, 0, C);
  const double tau = 0.4;
  for (std::size_t j = 1; j < 3; ++j) ASSERT_GE(exact.distances_sq[j], 10 * tau);
  const double delta = 0.1;
  int wrong = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    auto gen = skm::derive_stream(52, {static_cast<std::uint64_t>(t)});
    if (skm::approx_label(m, 0, C, tau, delta, gen).label != 0) ++wrong;
  }
  EXPECT_LE(wrong, three_sigma_rate(delta, trials) * trials);
}

TEST(ApproxLabel, WithinTauOfMinimum) {
  skm::SplitMix64 inst(61);
  const double tau = 0.3;
  int violations = 0;
  const int trials = 300;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> v(5), c(20);
    for (double& x : v) x = skm::standard_normal(inst);
    for (double& x : c) x = skm::standard_normal(inst);
    const auto m = SampleAccessMatrix::build(5, 1, v);
    const CentroidSet C(4, 5, c);
    const auto exact = skm::exact_label(m, 0, C);
    const double best = *std::min_element(exact.distances_sq.begin(), exact.distances_sq.end());
    const auto r = skm::approx_label(m, 0, C, tau, 0.1, inst);
    if (exact.distances_sq[r.label] > best + tau) ++violations;
  }
  EXPECT_LE(violations, three_sigma_rate(0.1, trials) * trials);
}

TEST(ApproxLabel, PermutationEquivariantWithDistinctDistances) {
  skm::SplitMix64 gen(71);
  skm::EstimatorOptions opts;
  opts.mode = skm::EstimatorMode::analytic_mean;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(3), c(12);
    for (double& x : v) x = skm::standard_normal(gen);
    for (double& x : c) x = skm::standard_normal(gen);
    const auto m = SampleAccessMatrix::build(3, 1, v);
    std::vector<std::size_t> perm = {2, 0, 3, 1};
    std::vector<double> pc;
    for (std::size_t j : perm) pc.insert(pc.end(), c.begin() + j * 3, c.begin() + j * 3 + 3);
    const auto a = skm::approx_label(m, 0, CentroidSet(4, 3, c), 0.1, 0.1, gen, opts);
    const auto b = skm::approx_label(m, 0, CentroidSet(4, 3, pc), 0.1, 0.1, gen, opts);
    ASSERT_EQ(perm[b.label], a.label);
  }
}
