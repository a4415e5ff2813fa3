#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "rlab/rng.hpp"
#include "rlab/stats.hpp"

using namespace rlab;

TEST(Rng, Mix64KnownValues) {
  // First outputs of the reference splitmix64 generator seeded with 0.
  std::uint64_t state = 0;
  auto next = [&] {
    state += 0x9E3779B97F4A7C15ULL;
    return mix64(state);
  };
  EXPECT_EQ(next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(next(), 0x06C45D188009454FULL);
}

TEST(Rng, StreamsAreStatelessAndDistinct) {
  const CounterStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  for (std::uint64_t i = 0; i < 100; ++i) {
    EXPECT_EQ(a.word(i), b.word(i));
  }
  EXPECT_NE(a.word(std::uint64_t{0}), c.word(std::uint64_t{0}));
  EXPECT_NE(a.word(std::uint64_t{0}), d.word(std::uint64_t{0}));
  // Random access agrees with sequential access.
  StreamEngine eng(42, 7);
  for (std::uint64_t i = 0; i < 10; ++i) EXPECT_EQ(eng(), a.word(i));
}

TEST(Rng, SignsAreBalancedAndIndexable) {
  const CounterStream s(1, 2);
  int sum = 0;
  for (u128 i = 1; i <= 100000; ++i) sum += s.sign(i);
  EXPECT_LT(std::abs(sum), 5 * 316);
  const u128 huge = u128{1} << 100;
  EXPECT_EQ(s.sign(huge), s.sign(huge));
  EXPECT_TRUE(s.sign(huge) == 1 || s.sign(huge) == -1);
}

TEST(Rng, WideIndicesDoNotAlias) {
  const CounterStream s(9, 9);
  std::set<std::uint64_t> seen;
  for (unsigned k = 0; k < 64; ++k) seen.insert(s.word(u128{5} + (u128{1} << (64 + k))));
  seen.insert(s.word(u128{5}));
  EXPECT_EQ(seen.size(), 65U);
}

TEST(Stats, CompensatedSumRecoversSmallTerms) {
  std::vector<double> v{1e16, 1.0, -1e16};
  EXPECT_DOUBLE_EQ(compensated_sum(v), 1.0);
}

TEST(Stats, NormalCriticalValues) {
  EXPECT_NEAR(normal_critical_value(0.95), 1.959963985, 1e-8);
  EXPECT_NEAR(normal_critical_value(0.99), 2.575829304, 1e-8);
  EXPECT_THROW(normal_critical_value(1.0), DomainError);
}

TEST(Stats, WilsonInterval) {
  // Reference values from the closed form with z = 1.959964.
  const auto w = wilson_interval(10, 100, 0.95);
  EXPECT_NEAR(w.lo, 0.0552291, 1e-6);
  EXPECT_NEAR(w.hi, 0.1743657, 1e-6);
  const auto zero = wilson_interval(0, 50, 0.99);
  EXPECT_EQ(zero.lo, 0.0);
  EXPECT_GT(zero.hi, 0.0);
  const auto all = wilson_interval(50, 50, 0.99);
  EXPECT_EQ(all.hi, 1.0);
  const auto none = wilson_interval(0, 0, 0.99);
  EXPECT_EQ(none.lo, 0.0);
  EXPECT_EQ(none.hi, 1.0);
}

TEST(Stats, WilsonContainsEstimate) {
  for (std::uint64_t n : {1ULL, 7ULL, 100ULL, 12345ULL}) {
    for (std::uint64_t k = 0; k <= n; k += std::max<std::uint64_t>(1, n / 13)) {
      const auto w = wilson_interval(k, n, 0.99);
      const double p = static_cast<double>(k) / static_cast<double>(n);
      EXPECT_LE(w.lo, p + 1e-15);
      EXPECT_GE(w.hi, p - 1e-15);
    }
  }
}
