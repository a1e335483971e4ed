#include <gtest/gtest.h>

#include "convlab/rng.hpp"
#include "convlab/tensor.hpp"

using namespace convlab;

TEST(Tensor, ShapeAndRowMajorIndexing) {
  Tensor<float> t(Shape{2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  t.at({1, 2, 3}) = 5.0f;
  EXPECT_EQ(t[23], 5.0f);
  t.at({0, 1, 0}) = 7.0f;
  EXPECT_EQ(t[4], 7.0f);
}

TEST(Tensor, ZeroExtentRejected) {
  EXPECT_THROW(Tensor<float>(Shape{2, 0, 3}), DimensionError);
}

TEST(Tensor, DataSizeMustMatchShape) {
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
}

TEST(Tensor, AtChecksRankAndRange) {
  Tensor<double> t(Shape{2, 2});
  EXPECT_THROW(t.at({0}), IndexError);
  EXPECT_THROW(t.at({2, 0}), IndexError);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor<float> t(Shape{2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  auto r = t.reshaped({3, 2});
  EXPECT_EQ(r.at({2, 1}), 6.0f);
  EXPECT_THROW(t.reshaped({4, 2}), DimensionError);
}

TEST(Tensor, GradSlotLifecycle) {
  Tensor<float> t(Shape{3}, 1.0f);
  EXPECT_FALSE(t.has_grad());
  EXPECT_THROW(t.grad(), ContractError);
  t.ensure_grad()[1] = 2.0f;
  EXPECT_EQ(t.grad()[1], 2.0f);
  t.zero_grad();
  EXPECT_EQ(t.grad()[1], 0.0f);
  t.drop_grad();
  EXPECT_FALSE(t.has_grad());
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(a.next(), c.next());
}

TEST(Rng, StateRoundTrip) {
  Rng a(7);
  for (int i = 0; i < 10; ++i) a.normal();
  const auto saved = a.state();
  std::vector<double> first;
  for (int i = 0; i < 20; ++i) first.push_back(a.uniform());
  Rng b(0);
  b.set_state(saved);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(b.uniform(), first[i]);
}

TEST(Rng, BelowStaysInRange) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(r.below(7), 7u);
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_EQ(derive_seed(5, "x", 3), derive_seed(5, "x", 3));
}
