#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "skm/compensated_sum.hpp"
#include "skm/cumulative_index.hpp"
#include "skm/rng.hpp"
#include "skm/sample_access.hpp"

using skm::ErrorCode;
using skm::SampleAccessMatrix;

namespace {

SampleAccessMatrix two_columns() { return SampleAccessMatrix::build(2, 2, {3, 4, 6, 8}); }

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

double tv(const std::vector<std::uint64_t>& counts, const std::vector<double>& probs) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  double s = 0.0;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    s += std::abs(static_cast<double>(counts[a]) / total - probs[a]);
  }
  return 0.5 * s;
}

SampleAccessMatrix random_matrix(std::size_t d, std::size_t n, skm::SplitMix64& gen) {
  std::vector<double> v(d * n);
  for (double& x : v) x = skm::standard_normal(gen);
  return SampleAccessMatrix::build(d, n, v);
}

double svd_norm(const SampleAccessMatrix& m) {
  Eigen::MatrixXd a(m.d(), m.n());
  for (std::size_t i = 0; i < m.n(); ++i) {
    for (std::size_t l = 0; l < m.d(); ++l) a(l, i) = m.entry(i, l);
  }
  return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()(0);
}

}  // namespace

TEST(SampleAccessBuild, NormsOfTwoColumns) {
  const auto m = two_columns();
  EXPECT_EQ(m.n(), 2u);
  EXPECT_EQ(m.d(), 2u);
  EXPECT_DOUBLE_EQ(m.col_norm(0), 5.0);
  EXPECT_DOUBLE_EQ(m.col_norm(1), 10.0);
  EXPECT_DOUBLE_EQ(m.norm_21(), 15.0);
  EXPECT_DOUBLE_EQ(m.norm_11(), 21.0);
  EXPECT_DOUBLE_EQ(m.col_l1_norm(0), 7.0);
}

TEST(SampleAccessBuild, AllZeroBuildsButSamplersRefuse) {
  const auto m = SampleAccessMatrix::build(2, 3, std::vector<double>(6, 0.0));
  EXPECT_EQ(m.norm_21(), 0.0);
  skm::SplitMix64 gen(1);
  EXPECT_EQ(code_of([&] { m.sample_col_by_norm(gen); }), ErrorCode::degenerate_distribution);
  EXPECT_EQ(code_of([&] { m.sample_entry_in_col(0, gen); }), ErrorCode::degenerate_distribution);
  EXPECT_EQ(code_of([&] { m.sample_entry_global(gen); }), ErrorCode::degenerate_distribution);
  EXPECT_LT(m.sample_uniform(gen), 3u);
}

TEST(SampleAccessBuild, SingleEntry) {
  const auto m = SampleAccessMatrix::build(1, 1, {-2.0});
  EXPECT_EQ(m.col_norm(0), 2.0);
  EXPECT_EQ(m.norm_11(), 2.0);
  EXPECT_EQ(m.norm_21(), 2.0);
}

TEST(SampleAccessBuild, Errors) {
  EXPECT_EQ(code_of([] { SampleAccessMatrix::build(0, 3, {}); }), ErrorCode::empty_matrix);
  EXPECT_EQ(code_of([] { SampleAccessMatrix::build(2, 0, {}); }), ErrorCode::empty_matrix);
  EXPECT_EQ(code_of([] { SampleAccessMatrix::build(2, 1, {1.0, NAN}); }),
            ErrorCode::non_finite_entry);
  EXPECT_EQ(code_of([] { SampleAccessMatrix::build(2, 1, {INFINITY, 0.0}); }),
            ErrorCode::non_finite_entry);
  EXPECT_EQ(code_of([] { SampleAccessMatrix::build(2, 2, {1.0}); }),
            ErrorCode::dimension_mismatch);
}

TEST(SampleAccessEntry, ReadsAndBounds) {
  const auto m = two_columns();
  EXPECT_EQ(m.entry(0, 1), 4.0);
  EXPECT_EQ(m.entry(1, 0), 6.0);
  EXPECT_EQ(code_of([&] { m.entry(2, 0); }), ErrorCode::index_out_of_range);
  EXPECT_EQ(code_of([&] { m.entry(0, 2); }), ErrorCode::index_out_of_range);
}

TEST(SampleAccessEntry, BitIdenticalStorage) {
  skm::SplitMix64 gen(11);
  std::vector<double> v(35);
  for (double& x : v) x = std::ldexp(skm::standard_normal(gen), static_cast<int>(gen() % 40) - 20);
  v[3] = -0.0;
  v[4] = 5e-324;
  const auto m = SampleAccessMatrix::build(5, 7, v);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t l = 0; l < 5; ++l) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(m.entry(i, l)),
                std::bit_cast<std::uint64_t>(v[i * 5 + l]));
    }
  }
}

TEST(SampleAccessProbabilities, AnalyticValues) {
  const auto m = two_columns();
  EXPECT_DOUBLE_EQ(m.prob_col_by_norm(0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.prob_col_by_norm(1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.prob_entry_in_col(0, 0), 9.0 / 25.0);
  EXPECT_DOUBLE_EQ(m.prob_entry_in_col(0, 1), 16.0 / 25.0);
  EXPECT_DOUBLE_EQ(m.prob_entry_global(0, 0), 3.0 / 21.0);
}

TEST(SampleAccessSamplers, DegenerateSupportsAreDeterministic) {
  skm::SplitMix64 gen(5);
  const auto one_col = SampleAccessMatrix::build(2, 3, {0, 0, 1, -1, 0, 0});
  const auto sparse_col = SampleAccessMatrix::build(2, 1, {0, 7});
  const auto one_entry = SampleAccessMatrix::build(3, 2, {0, 0, 0, 0, -4, 0});
  const auto single = SampleAccessMatrix::build(1, 1, {3.0});
  for (int s = 0; s < 10000; ++s) {
    ASSERT_EQ(one_col.sample_col_by_norm(gen), 1u);
    ASSERT_EQ(sparse_col.sample_entry_in_col(0, gen), 1u);
    ASSERT_EQ(one_entry.sample_entry_global(gen), (skm::EntryIndex{1, 1}));
    ASSERT_EQ(single.sample_uniform(gen), 0u);
  }
}

TEST(SampleAccessSamplers, ZeroNormColumnRefusesEntrySampling) {
  const auto m = SampleAccessMatrix::build(2, 2, {0, 0, 1, 2});
  skm::SplitMix64 gen(2);
  EXPECT_EQ(code_of([&] { m.sample_entry_in_col(0, gen); }), ErrorCode::degenerate_distribution);
  EXPECT_EQ(code_of([&] { m.sample_entry_in_col(2, gen); }), ErrorCode::index_out_of_range);
}

TEST(SampleAccessSamplers, ColumnNormFrequencies) {
  const auto m = SampleAccessMatrix::build(1, 3, {1, -2, 3});
  skm::SplitMix64 gen(101);
  std::vector<std::uint64_t> counts(3, 0);
  for (int s = 0; s < 1000000; ++s) ++counts[m.sample_col_by_norm(gen)];
  EXPECT_LE(tv(counts, {1.0 / 6, 2.0 / 6, 3.0 / 6}), 0.005);
}

TEST(SampleAccessSamplers, EntryInColumnFrequencies) {
  const auto m = SampleAccessMatrix::build(3, 1, {1, 1, std::sqrt(2.0)});
  skm::SplitMix64 gen(102);
  std::vector<std::uint64_t> counts(3, 0);
  for (int s = 0; s < 1000000; ++s) ++counts[m.sample_entry_in_col(0, gen)];
  EXPECT_LE(tv(counts, {0.25, 0.25, 0.5}), 0.005);
}

TEST(SampleAccessSamplers, GlobalEntryFrequencies) {
  skm::SplitMix64 gen(103);
  const auto m = random_matrix(3, 4, gen);
  std::vector<std::uint64_t> counts(12, 0);
  std::vector<double> probs(12);
  for (int s = 0; s < 1000000; ++s) {
    const auto e = m.sample_entry_global(gen);
    ++counts[e.column * 3 + e.row];
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t l = 0; l < 3; ++l) probs[i * 3 + l] = m.prob_entry_global(i, l);
  }
  EXPECT_LE(tv(counts, probs), 0.005);
}

TEST(SampleAccessSamplers, UniformFrequencies) {
  const auto m = SampleAccessMatrix::build(1, 10, std::vector<double>(10, 1.0));
  skm::SplitMix64 gen(104);
  std::vector<std::uint64_t> counts(10, 0);
  for (int s = 0; s < 1000000; ++s) ++counts[m.sample_uniform(gen)];
  EXPECT_LE(tv(counts, std::vector<double>(10, 0.1)), 0.005);
}

TEST(SampleAccessNorms, RankOneAndIdentity) {
  const auto m = two_columns();
  const auto f = m.norms();
  EXPECT_DOUBLE_EQ(f.spectral_upper, std::sqrt(125.0));
  EXPECT_EQ(f.spectral_method, skm::SpectralMethod::frobenius_bound);
  const auto p = m.norms(skm::SpectralMethod::power_iteration);
  EXPECT_EQ(p.spectral_method, skm::SpectralMethod::power_iteration);
  EXPECT_NEAR(p.spectral_upper, std::sqrt(125.0), 1e-6 * std::sqrt(125.0));

  const auto id = SampleAccessMatrix::build(2, 2, {1, 0, 0, 1});
  const auto n = id.norms(skm::SpectralMethod::power_iteration);
  EXPECT_NEAR(n.spectral_upper, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(n.frobenius, std::sqrt(2.0));
  EXPECT_EQ(n.norm_21, 2.0);
  EXPECT_EQ(n.norm_11, 2.0);
  EXPECT_EQ(n.norm_2inf, 1.0);
}

TEST(SampleAccessNorms, PowerIterationMatchesSvd) {
  skm::SplitMix64 gen(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = random_matrix(5, 8, gen);
    const double truth = svd_norm(m);
    const double est = m.norms(skm::SpectralMethod::power_iteration).spectral_upper;
    EXPECT_NEAR(est, truth, 1e-6 * truth);
    EXPECT_GE(est, truth * (1.0 - 1e-9));
  }
}

TEST(SampleAccessNorms, PowerIterationStall) {
  skm::SplitMix64 gen(8);
  const auto m = random_matrix(4, 4, gen);
  skm::PowerIterationOptions opts;
  opts.max_iterations = 1;
  EXPECT_EQ(code_of([&] { m.norms(skm::SpectralMethod::power_iteration, opts); }),
            ErrorCode::power_iteration_stall);
}

TEST(SampleAccessNorms, NormChainOnRandomMatrices) {
  skm::SplitMix64 gen(9);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t d = 1 + skm::uniform_below(gen, 32);
    const std::size_t n = 1 + skm::uniform_below(gen, 32);
    const auto m = random_matrix(d, n, gen);
    const double spectral = svd_norm(m);
    const double slack = 1e-12;
    ASSERT_LE(m.norm_2inf(), spectral * (1 + slack));
    ASSERT_LE(spectral, m.frobenius() * (1 + slack));
    ASSERT_LE(m.frobenius(), m.norm_21() * (1 + slack));
    ASSERT_LE(m.norm_21(), m.norm_11() * (1 + slack));
  }
}

TEST(SampleAccessInvariants, NormsAndTreeTotals) {
  skm::SplitMix64 gen(12);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = 1 + skm::uniform_below(gen, 20);
    const std::size_t n = 1 + skm::uniform_below(gen, 40);
    std::vector<double> v(d * n);
    for (double& x : v) x = skm::uniform01(gen) < 0.3 ? 0.0 : 1e3 * skm::standard_normal(gen);
    const auto m = SampleAccessMatrix::build(d, n, v);
    skm::CompensatedSum norm21, norm11, cols_l1;
    for (std::size_t i = 0; i < n; ++i) {
      skm::CompensatedSum sq;
      skm::CompensatedSum l1;
      for (std::size_t l = 0; l < d; ++l) {
        sq.add(v[i * d + l] * v[i * d + l]);
        l1.add(std::abs(v[i * d + l]));
      }
      const double c2 = m.col_norm(i) * m.col_norm(i);
      ASSERT_NEAR(c2, sq.value(), 1e-12 * std::max(1.0, sq.value()));
      ASSERT_NEAR(m.entry_tree(i).total(), sq.value(), 1e-12 * std::max(1.0, sq.value()));
      norm21.add(m.col_norm(i));
      norm11.add(m.col_l1_norm(i));
      cols_l1.add(l1.value());
    }
    ASSERT_NEAR(m.norm_21(), norm21.value(), 1e-12 * std::max(1.0, norm21.value()));
    ASSERT_NEAR(m.norm_11(), norm11.value(), 1e-12 * std::max(1.0, norm11.value()));
    ASSERT_NEAR(m.global_tree().total(), cols_l1.value(), 1e-12 * std::max(1.0, cols_l1.value()));
  }
}

TEST(CumulativeIndex, ZeroWeightsAreNeverFound) {
  const std::vector<double> w = {0.0, 2.0, 0.0, 0.0, 1.0, 0.0};
  const skm::CumulativeIndex idx(w);
  EXPECT_EQ(idx.total(), 3.0);
  EXPECT_EQ(idx.find(0.0), 1u);
  EXPECT_EQ(idx.find(1.999), 1u);
  EXPECT_EQ(idx.find(2.0), 4u);
  EXPECT_EQ(idx.find(2.999), 4u);
  EXPECT_EQ(idx.find(3.0), 4u);
  skm::SplitMix64 gen(3);
  for (int s = 0; s < 100000; ++s) {
    const std::size_t a = idx.find(skm::uniform01(gen) * idx.total());
    ASSERT_TRUE(a == 1 || a == 4);
  }
}

TEST(CumulativeIndex, FindMatchesUpperBoundAcrossSizes) {
  skm::SplitMix64 gen(4);
  for (std::size_t size : {1u, 2u, 7u, 31u, 32u, 33u, 64u}) {
    std::vector<double> w(size);
    for (double& x : w) x = skm::uniform01(gen) < 0.3 ? 0.0 : skm::uniform01(gen);
    w[size / 2] = 1.0;
    const skm::CumulativeIndex idx(w);
    const auto prefix = idx.view().prefix();
    for (int s = 0; s < 2000; ++s) {
      const double u = s % 50 == 0 ? prefix[skm::uniform_below(gen, size)]
                                   : skm::uniform01(gen) * idx.total();
      auto it = std::upper_bound(prefix.begin(), prefix.end(), u);
      if (it == prefix.end()) it = std::lower_bound(prefix.begin(), prefix.end(), prefix.back());
      ASSERT_EQ(idx.find(u), static_cast<std::size_t>(it - prefix.begin())) << "size " << size;
    }
    EXPECT_GT(w[idx.find(idx.total())], 0.0);
  }
}

TEST(CumulativeIndex, WeightsRoundTrip) {
  const std::vector<double> w = {0.5, 0.0, 1.5, 4.0};
  const skm::CumulativeIndex idx(w);
  const skm::CumulativeView view = idx.view();
  for (std::size_t l = 0; l < w.size(); ++l) EXPECT_DOUBLE_EQ(view.weight(l), w[l]);
}

TEST(Rng, CounterModeAndStreams) {
  skm::SplitMix64 a(42);
  skm::SplitMix64 b(42);
  for (int s = 0; s < 100; ++s) ASSERT_EQ(a(), b());
  EXPECT_EQ(a.draws(), 100u);
  EXPECT_NE(skm::derive_key(1, {2, 3}), skm::derive_key(1, {3, 2}));
  EXPECT_NE(skm::trial_key(7, 0), skm::trial_key(7, 1));
  EXPECT_EQ(skm::trial_key(7, 3), 7u ^ skm::mix64(3));
  skm::SplitMix64 g(9);
  for (int s = 0; s < 100000; ++s) {
    const double u = skm::uniform01(g);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(skm::uniform_below(g, 7), 7u);
  }
}
