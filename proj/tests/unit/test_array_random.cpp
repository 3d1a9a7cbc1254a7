#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fakegan/array.hpp"
#include "fakegan/random.hpp"

using namespace fakegan;

TEST(Array, ShapeAndIndexing) {
  Array a({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(a.ndim(), 2u);
  EXPECT_EQ(a.size(), 6u);
  EXPECT_EQ(a.at(1, 2), 6.0);
  EXPECT_EQ(a.row(1)[0], 4.0);
  EXPECT_EQ(shape_string(a.shape()), "[2x3]");
  Array r = a.reshaped({3, 2});
  EXPECT_EQ(r.at(2, 1), 6.0);
  EXPECT_THROW(a.reshaped({4, 2}), DimensionError);
}

TEST(Array, MismatchedDataIsRejected) {
  EXPECT_THROW(Array({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(require_shape(Array({3}), {2}, "x"), DimensionError);
}

TEST(Array, FiniteCheck) {
  Array a({3}, 1.0);
  EXPECT_TRUE(a.all_finite());
  a[1] = std::nan("");
  EXPECT_FALSE(a.all_finite());
}

TEST(Random, DerivedSeedsAreDeterministicAndPathSensitive) {
  EXPECT_EQ(derive_seed(5, {1, 2}), derive_seed(5, {1, 2}));
  EXPECT_NE(derive_seed(5, {1, 2}), derive_seed(5, {2, 1}));
  EXPECT_NE(derive_seed(5, {1}), derive_seed(6, {1}));
  EXPECT_NE(derive_seed(5, {1}), derive_seed(5, {1, 0}));
  Rng a = Rng::stream(9, {3}), b = Rng::stream(9, {3});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Random, UniformStaysInRangeWithCorrectMean) {
  Rng rng(1);
  const int n = 100000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // Mean 1/2, variance 1/12.
  EXPECT_NEAR(sum / n, 0.5, 3 * std::sqrt(1.0 / 12 / n));
}

TEST(Random, NormalMoments) {
  Rng rng(2);
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 3 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 3 * std::sqrt(2.0 / n));
}

TEST(Random, CategoricalFrequenciesMatchWeights) {
  Rng rng(3);
  const std::vector<double> w{0.2, 0.0, 0.5, 0.3};
  std::vector<int> counts(4, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(w)];
  EXPECT_EQ(counts[1], 0);
  for (std::size_t k = 0; k < 4; ++k) {
    const double se = std::sqrt(w[k] * (1 - w[k]) / n);
    EXPECT_NEAR(counts[k] / double(n), w[k], 3 * se + 1e-12) << "category " << k;
  }
}

TEST(Random, CategoricalAcceptsUnnormalizedWeights) {
  Rng rng(4);
  const std::vector<double> w{0.0, 7.0, 0.0};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(rng.categorical(w), 1u);
}

TEST(Random, BelowIsUniformAndRejectsZero) {
  Rng rng(5);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[rng.below(6)];
  const double p = 1.0 / 6, se = std::sqrt(p * (1 - p) / n);
  for (int c : counts) EXPECT_NEAR(c / double(n), p, 3 * se);
  EXPECT_THROW(rng.below(0), ContractError);
}

TEST(Random, ShuffleIsAPermutation) {
  Rng rng(6);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w.begin(), w.end());
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}
