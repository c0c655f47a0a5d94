#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "kalab/kernels.hpp"
#include "kalab/minors.hpp"
#include "oracles.hpp"

using namespace kalab;

TEST(Combinations, LexicographicOrder) {
  const auto c = combinations(4, 2);
  ASSERT_EQ(c.size(), 6u);
  const std::vector<std::pair<std::size_t, std::size_t>> want{{0, 1}, {0, 2}, {0, 3},
                                                              {1, 2}, {1, 3}, {2, 3}};
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(c[i][0], want[i].first);
    EXPECT_EQ(c[i][1], want[i].second);
  }
  EXPECT_EQ(combinations(32, 3).size(), 4960u);
  EXPECT_TRUE(combinations(2, 3).empty());
}

TEST(ExteriorPower, MatchesBruteForceEnumeration) {
  RngStream rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + rng.below(8);
    const Matrix J = oracle::gaussian(m, 3, rng);
    for (std::size_t k = 1; k <= std::min<std::size_t>(m, 3); ++k) {
      const Matrix got = exterior_power(J, k), want = oracle::brute_minors(J, k);
      ASSERT_EQ(got.rows(), choose(m, k));
      ASSERT_EQ(got.cols(), choose(3, k));
      EXPECT_LT(max_abs_diff(got, want), 1e-12);
    }
  }
  EXPECT_THROW(exterior_power(Matrix(2, 3), 3), std::invalid_argument);
  EXPECT_THROW(exterior_power(Matrix(5, 3), 0), std::invalid_argument);
}

TEST(ExteriorPower, WideInputDimension) {
  RngStream rng(22);
  const Matrix J = oracle::gaussian(5, 4, rng);
  for (std::size_t k = 1; k <= 3; ++k)
    EXPECT_LT(max_abs_diff(exterior_power(J, k), oracle::brute_minors(J, k)), 1e-12);
}

TEST(ExteriorPower, CauchyBinetUnderRotation) {
  // sum of squared k-minors is the sum of principal k-minors of J^T J,
  // which is invariant under J -> R J
  RngStream rng(23);
  const Matrix J = oracle::gaussian(7, 3, rng);
  for (std::size_t k = 1; k <= 3; ++k) {
    auto sumsq = [&](const Matrix& X) {
      const Matrix E = exterior_power(X, k);
      double s = 0.0;
      for (double v : E.data()) s += v * v;
      return s;
    };
    const double ref = sumsq(J);
    for (int i = 0; i < 10; ++i) {
      const Matrix R = sample_orthogonal(7, rng);
      EXPECT_NEAR(sumsq(R * J), ref, 1e-10 * ref);
    }
  }
}

TEST(Kernels, SerialAndParallelAgree) {
  RngStream rng(24);
  std::vector<Matrix> js;
  for (int e = 0; e < 40; ++e) js.push_back(oracle::gaussian(9, 3, rng));
  for (std::size_t k = 1; k <= 3; ++k) {
    const auto a = serial::minor_ensemble(js, k), b = omp::minor_ensemble(js, k);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-13);
  }
  std::vector<Matrix> rots;
  for (int p = 0; p < 12; ++p) rots.push_back(sample_orthogonal(9, rng));
  const auto a = serial::rotation_maxima(js, rots, 3), b = omp::rotation_maxima(js, rots, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t e = 0; e < a.size(); ++e)
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(a[e].own[k], b[e].own[k], 1e-12);
      EXPECT_NEAR(a[e].rotated_mean[k], b[e].rotated_mean[k], 1e-12);
    }
}

TEST(Kernels, ParallelResultIndependentOfThreadCount) {
  RngStream rng(25);
  std::vector<Matrix> js;
  for (int e = 0; e < 64; ++e) js.push_back(oracle::gaussian(12, 3, rng));
  set_worker_count(1);
  const auto one = omp::minor_ensemble(js, 3);
  set_worker_count(4);
  const auto four = omp::minor_ensemble(js, 3);
  set_worker_count(0);
  EXPECT_EQ(one, four);
}

TEST(Kernels, MaxMinorsMatchFullEnumeration) {
  RngStream rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix J = oracle::gaussian(6, 3, rng);
    const auto mx = max_minors(J, 3);
    for (std::size_t k = 1; k <= 3; ++k) {
      const Matrix all = oracle::brute_minors(J, k);
      double top = 0.0;
      for (double v : all.data()) top = std::max(top, v);
      EXPECT_NEAR(mx[k - 1], top, 1e-12);
    }
  }
}

TEST(ZeroRows, DerivedRateMatchesHighPrecisionValues) {
  // 1 - C(m(1-q1), k) / C(m, k) for m = 32, via mpmath
  struct Row {
    double q1;
    std::size_t k;
    double qk;
  };
  const Row rows[] = {{1e-4, 2, 0.00020321548387096774194}, {1e-4, 3, 0.00030986047421935483871},
                      {1e-3, 2, 0.0020312258064516129032},  {1e-3, 3, 0.0030957258322580645161},
                      {1e-2, 2, 0.020219354838709677419},   {1e-2, 3, 0.030670348387096774194}};
  // the log-gamma difference cancels terms near 80, so the error is a few
  // ulps of 80 in absolute terms
  for (const auto& r : rows) EXPECT_NEAR(derive_qk(r.q1, 32, r.k), r.qk, 1e-13);
  EXPECT_EQ(derive_qk(0.01, 32, 1), 0.01);
  EXPECT_EQ(derive_qk(0.9, 4, 3), 1.0);
  EXPECT_THROW(derive_qk(1.0, 4, 2), std::invalid_argument);
}

TEST(ZeroRows, StrictThresholdAndCounts) {
  // 2 examples, m = 3, k = 1; baseline values 1..6 so Q(0.5) = 3.5
  const std::vector<double> base{1, 2, 3, 4, 5, 6};
  const std::vector<double> trained{0, 3.5, 9, 0, 0, 9};
  const auto rep = detect_zero_rows(trained, base, 2, 3, 1, 0.5);
  EXPECT_DOUBLE_EQ(rep.threshold, 3.5);
  EXPECT_TRUE(rep.is_zero(0, 0));
  EXPECT_FALSE(rep.is_zero(0, 1));  // equal to the threshold is not below it
  EXPECT_TRUE(rep.is_zero(1, 1));
  EXPECT_NEAR(rep.zero_percent, 50.0, 1e-12);
  const auto cons = classify_consistent(rep, 0.99);
  ASSERT_EQ(cons.consistent_rows, std::vector<std::size_t>{0});
  EXPECT_NEAR(cons.consistent_percent, 100.0 / 3.0, 1e-12);
  EXPECT_NEAR(cons.inconsistent_percent, 50.0 - 100.0 / 3.0, 1e-12);
  EXPECT_THROW(detect_zero_rows(trained, base, 2, 4, 1, 0.5), std::invalid_argument);
}

TEST(ZeroRows, DependentRowsNeedNonzeroFactors) {
  // m = 3: pair (0,1) zero with both singles alive is dependent; pair (0,2)
  // zero because neuron 2 is dead is not
  const std::vector<double> base1{1, 1, 1}, base2{1, 1, 1}, base3{1};
  const std::vector<double> t1{5, 5, 0}, t2{0, 0, 5}, t3{0};
  const auto s1 = detect_zero_rows(t1, base1, 1, 3, 1, 0.01);
  const auto s2 = detect_zero_rows(t2, base2, 1, 3, 2, 0.01);
  const auto s3 = detect_zero_rows(t3, base3, 1, 3, 3, 0.01);
  const auto dep = classify_dependent(s1, s2, &s3);
  EXPECT_EQ(dep.dependent2, (std::vector<std::uint8_t>{1, 0, 0}));
  EXPECT_NEAR(dep.dependent2_percent, 100.0 / 3.0, 1e-12);
  EXPECT_EQ(dep.dependent3, (std::vector<std::uint8_t>{0}));
  EXPECT_THROW(classify_dependent(s2, s1, nullptr), std::invalid_argument);
}

TEST(ZeroRows, CalibrationNullOnBaseline) {
  // trained == baseline: the flagged fraction is the quantile level itself
  RngStream rng(27);
  std::vector<Matrix> js;
  for (int e = 0; e < 300; ++e) js.push_back(oracle::gaussian(16, 3, rng));
  for (std::size_t k = 1; k <= 3; ++k) {
    const auto ens = MinorEnsemble::from_jacobians(js, k);
    for (double q1 : {1e-3, 1e-2}) {
      const auto rep = detect_zero_rows(ens, ens, q1);
      const double n = static_cast<double>(ens.examples * ens.rows());
      const double se = std::sqrt(rep.qk * (1 - rep.qk) / n);
      EXPECT_NEAR(rep.zero_percent_pooled / 100.0, rep.qk, 3 * se + 1.0 / n);
    }
  }
}

TEST(Spill, RoundTripIsExact) {
  RngStream rng(28);
  std::vector<Matrix> js;
  for (int e = 0; e < 5; ++e) js.push_back(oracle::gaussian(6, 3, rng));
  const auto ens = MinorEnsemble::from_jacobians(js, 2);
  const auto stem = (std::filesystem::temp_directory_path() / "kalab_spill_test").string();
  write_spill(stem, ens);
  const auto back = read_spill(stem);
  EXPECT_EQ(back.values, ens.values);
  EXPECT_EQ(back.k, 2u);
  EXPECT_EQ(back.at(3, 4, 1), ens.at(3, 4, 1));
  std::filesystem::remove(stem + ".bin");
  std::filesystem::remove(stem + ".json");
}
