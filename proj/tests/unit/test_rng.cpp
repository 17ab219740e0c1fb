#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "cgof/rng.hpp"

using cgof::Rng;

TEST(Philox, KnownAnswer) {
  // Random123 known-answer vectors for philox4x32-10.
  Rng zero(0, 0);
  EXPECT_EQ(zero(), 0xe169c58d6627e8d5ull);
  EXPECT_EQ(zero(), 0x9b00dbd8bc57ac4cull);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42, 7);
  Rng b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, DistinctStreamsDiffer) {
  Rng a(42, 7);
  Rng b(42, 8);
  Rng c(43, 7);
  int equal_ab = 0;
  int equal_ac = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a();
    equal_ab += x == b();
    equal_ac += x == c();
  }
  EXPECT_EQ(equal_ab, 0);
  EXPECT_EQ(equal_ac, 0);
}

TEST(Rng, DiscardMatchesStepping) {
  for (std::uint64_t skip : {0ull, 1ull, 2ull, 3ull, 17ull, 1000ull}) {
    Rng stepped(9, 3);
    for (std::uint64_t i = 0; i < skip; ++i) stepped();
    Rng jumped(9, 3);
    jumped.discard(skip);
    for (int i = 0; i < 10; ++i) ASSERT_EQ(stepped(), jumped()) << skip;
  }
}

TEST(Rng, UniformMoments) {
  Rng rng(1, 1);
  const int n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform_open();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum_sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sum_sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 2e-3);
}

TEST(Rng, NormalMoments) {
  Rng rng(2, 5);
  const int n = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  double sum_4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
    sum_4 += z * z * z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sum_sq / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(sum_4 / n, 3.0, 0.1);
}

TEST(Rng, BelowIsUniform) {
  Rng rng(3, 3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5.0 * std::sqrt(n / 7.0));
  EXPECT_EQ(rng.below(1), 0u);
}

TEST(StreamIds, DerivationSeparatesTagsAndIndices) {
  using cgof::StreamTag;
  std::set<std::uint64_t> ids;
  for (std::uint64_t base : {0ull, 1ull, 99ull}) {
    for (auto tag : {StreamTag::kData, StreamTag::kEmInit, StreamTag::kMonteCarlo}) {
      for (std::uint64_t i = 0; i < 50; ++i) ids.insert(cgof::derive_stream_id(base, tag, {i}));
    }
  }
  EXPECT_EQ(ids.size(), 3u * 3u * 50u);
  EXPECT_EQ(cgof::derive_stream_id(5, StreamTag::kData, {1, 2}),
            cgof::derive_stream_id(5, StreamTag::kData, {1, 2}));
  EXPECT_NE(cgof::derive_stream_id(5, StreamTag::kData, {1, 2}),
            cgof::derive_stream_id(5, StreamTag::kData, {2, 1}));
  EXPECT_EQ(cgof::hash_string("table2/gaussian/0.80"), cgof::hash_string("table2/gaussian/0.80"));
  EXPECT_NE(cgof::hash_string("a"), cgof::hash_string("b"));
}
