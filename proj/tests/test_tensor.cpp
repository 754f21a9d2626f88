#include <gtest/gtest.h>

#include <stdexcept>

#include "prunekit/gradient_vector.hpp"
#include "prunekit/rng.hpp"
#include "prunekit/tensor.hpp"

using namespace prunekit;

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2);
  t.at2(1, 2) = 5.0;
  EXPECT_DOUBLE_EQ(t.data[5], 5.0);

  Tensor s = Tensor::scalar(3.5);
  EXPECT_TRUE(s.shape.empty());
  EXPECT_EQ(s.numel(), 1u);
  EXPECT_DOUBLE_EQ(s.data[0], 3.5);

  Tensor u({2, 2, 2, 2});
  u.data[u.off4(1, 0, 1, 1)] = 7.0;
  EXPECT_DOUBLE_EQ(u.data[8 + 0 + 2 + 1], 7.0);
}

TEST(Tensor, RejectsBadConstruction) {
  EXPECT_THROW(Tensor({2, 0}), std::invalid_argument);
  EXPECT_THROW(Tensor({-1}), std::invalid_argument);
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), std::invalid_argument);
}

TEST(Rng, ReproducibleStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.uniform(), b.uniform());
    EXPECT_EQ(a.normal(), b.normal());
    EXPECT_EQ(a.bounded(17), b.bounded(17));
  }
  Rng c(43);
  bool differs = false;
  Rng a2(42);
  for (int i = 0; i < 10; ++i) differs |= (a2.uniform() != c.uniform());
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformRangeAndMoments) {
  Rng r(7);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sumsq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 5e-3);
  EXPECT_NEAR(sumsq / n - 0.25, 1.0 / 12.0, 5e-3);
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sumsq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 1e-2);
  EXPECT_NEAR(sumsq / n, 1.0, 2e-2);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(5);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Rng, MixSeedSeparatesStreams) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(9, 3), mix_seed(9, 3));
}

TEST(GradientVector, FlattenRoundTrip) {
  GradientVector v;
  v.parts.push_back(Tensor({2, 2}, {1, 2, 3, 4}));
  v.parts.push_back(Tensor({3}, {5, 6, 7}));
  auto flat = v.flatten();
  ASSERT_EQ(flat.size(), 7u);
  EXPECT_DOUBLE_EQ(flat[4], 5.0);
  for (auto& x : flat) x *= 2.0;
  v.unflatten(flat);
  EXPECT_DOUBLE_EQ(v.parts[0].data[3], 8.0);
  EXPECT_DOUBLE_EQ(v.parts[1].data[2], 14.0);
  EXPECT_THROW(v.unflatten(std::vector<double>(6)), std::invalid_argument);
}

TEST(GradientVector, DotAndNorm) {
  GradientVector a, b;
  a.parts.push_back(Tensor({2}, {3, 4}));
  b.parts.push_back(Tensor({2}, {1, -1}));
  EXPECT_DOUBLE_EQ(dot(a, b), -1.0);
  EXPECT_DOUBLE_EQ(norm2(a), 25.0);
  GradientVector c;
  c.parts.push_back(Tensor({3}, {0, 0, 0}));
  EXPECT_THROW(dot(a, c), std::invalid_argument);
}

TEST(GradientVector, Axpy) {
  GradientVector a, b;
  a.parts.push_back(Tensor({2}, {1, 2}));
  b.parts.push_back(Tensor({2}, {10, 20}));
  a.axpy(0.5, b);
  EXPECT_DOUBLE_EQ(a.parts[0].data[0], 6.0);
  EXPECT_DOUBLE_EQ(a.parts[0].data[1], 12.0);
}
