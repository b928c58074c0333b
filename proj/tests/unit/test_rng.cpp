#include <gtest/gtest.h>

#include <set>

#include "bridgesampler/rng.hpp"

namespace bridge {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    for (std::uint64_t stream = 0; stream < 1000; ++stream) seen.insert(derive_seed(seed, stream));
  }
  EXPECT_EQ(seen.size(), 4000U);
}

TEST(Rng, SplitDoesNotAdvanceParent) {
  Rng a(9), b(9);
  Rng child = a.split(3);
  (void)child.normal();
  EXPECT_EQ(a.normal(), b.normal());
  EXPECT_EQ(a.split(3).seed(), b.split(3).seed());
  EXPECT_NE(a.split(3).seed(), a.split(4).seed());
}

TEST(Rng, NormalMoments) {
  Rng rng(1);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sum2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

}  // namespace
}  // namespace bridge
