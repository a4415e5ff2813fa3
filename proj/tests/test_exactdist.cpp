#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rlab/exactdist.hpp"
#include "rlab/oracle.hpp"

using namespace rlab;
using namespace rlab::dist;

namespace {

std::vector<std::int64_t> random_steps(std::mt19937_64& rng, std::size_t n, std::int64_t lo, std::int64_t hi) {
  std::uniform_int_distribution<std::int64_t> d(lo, hi);
  std::vector<std::int64_t> s(n);
  for (auto& v : s) v = d(rng);
  return s;
}

// Q_r by brute force over candidate left ends x = atom - r and x = atom.
double q_brute(const ExactPmf& p, double r) {
  double best = 0.0;
  for (std::int64_t a : p.support) {
    for (double x : {static_cast<double>(a) - r, static_cast<double>(a), static_cast<double>(a) - r + 1e-9}) {
      double m = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = static_cast<double>(p.support[i]);
        if (x < v && v <= x + r) m += p.probs[i];
      }
      best = std::max(best, m);
    }
  }
  return best;
}

}  // namespace

TEST(ExactDist, SmallLaws) {
  const auto a = walk_pmf(std::vector<std::int64_t>{1, 1});
  EXPECT_EQ(a.support, (std::vector<std::int64_t>{-2, 0, 2}));
  EXPECT_EQ(a.probs, (std::vector<double>{0.25, 0.5, 0.25}));
  const auto b = walk_pmf(std::vector<std::int64_t>{3, 1});
  EXPECT_EQ(b.support, (std::vector<std::int64_t>{-4, -2, 2, 4}));
  for (double p : b.probs) EXPECT_EQ(p, 0.25);
  const auto z = walk_pmf(std::vector<std::int64_t>{0});
  EXPECT_EQ(z.support, (std::vector<std::int64_t>{0}));
  EXPECT_EQ(z.probs, (std::vector<double>{1.0}));
  EXPECT_EQ(z.steps_applied, 1U);
  EXPECT_EQ(walk_pmf(std::vector<std::int64_t>{1, 2, 3}).mass_at(0), 0.25);
}

TEST(ExactDist, NegativeStepRejected) {
  EXPECT_THROW(walk_pmf(std::vector<std::int64_t>{1, -2}), DomainError);
}

TEST(ExactDist, SupportCapReportsStep) {
  try {
    walk_pmf(std::vector<std::int64_t>{1, 10, 100, 1000}, 8);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_NE(std::string(e.what()).find("step 4"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("projected 16"), std::string::npos) << e.what();
  }
  // Lattice-aware projection: 200 unit steps need only 201 atoms.
  EXPECT_NO_THROW(walk_pmf(std::vector<std::int64_t>(200, 1), 201));
}

TEST(ExactDist, MatchesEnumerationExactly) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 16)(rng);
    const auto steps = random_steps(rng, n, 1, 40);
    const auto counts = oracle::enumerate_walk(steps);
    const auto exact = walk_pmf<std::uint64_t>(steps);
    const auto fl = walk_pmf<double>(steps);
    ASSERT_EQ(exact.size(), counts.size());
    std::size_t i = 0;
    for (const auto& [x, c] : counts) {
      ASSERT_EQ(exact.support[i], x);
      ASSERT_EQ(exact.probs[i], c);
      ASSERT_NEAR(fl.probs[i], std::ldexp(static_cast<double>(c), -static_cast<int>(n)), 1e-12);
      ++i;
    }
    EXPECT_EQ(exact.denominator_log2, n);
  }
}

TEST(ExactDist, InvariantsOnRandomWalks) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto steps = random_steps(rng, 25, 0, 60);
    const auto p = walk_pmf(steps);
    EXPECT_NEAR(p.total_mass(), 1.0, 1e-12);
    std::int64_t total = 0;
    for (auto a : steps) total += a;
    for (std::size_t i = 0; i < p.size(); ++i) {
      ASSERT_EQ(p.probs[i], p.probs[p.size() - 1 - i]);
      ASSERT_EQ(p.support[i], -p.support[p.size() - 1 - i]);
      ASSERT_EQ(((p.support[i] - total) % 2 + 2) % 2, 0);
    }
    auto shuffled = steps;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto q = walk_pmf<std::uint64_t>(shuffled);
    const auto r = walk_pmf<std::uint64_t>(steps);
    EXPECT_EQ(q.support, r.support);
    EXPECT_EQ(q.probs, r.probs);
  }
}

TEST(ExactDist, ConcentrationExamples) {
  const auto a = walk_pmf(std::vector<std::int64_t>{1, 1});
  EXPECT_EQ(concentration_q(a, 1.0).result, 0.5);
  EXPECT_EQ(concentration_q(a, 4.0).result, 0.75);
  // Ties between maximizing windows are allowed; the reported one must attain Q.
  const double x = concentration_q(a, 4.0).argmax_x;
  double in = 0.0;
  for (std::size_t i = 0; i < a.support.size(); ++i) {
    const double v = static_cast<double>(a.support[i]);
    if (v > x && v <= x + 4.0) in += a.probability(i);
  }
  EXPECT_EQ(in, 0.75);
  const auto single = walk_pmf(std::vector<std::int64_t>{});
  for (double r : {0.1, 1.0, 17.0}) EXPECT_EQ(concentration_q(single, r).result, 1.0);
  EXPECT_THROW(concentration_q(a, 0.0), DomainError);
  const auto ex = walk_pmf<std::uint64_t>(std::vector<std::int64_t>{1, 1});
  const auto q = concentration_q(ex, 4.0);
  EXPECT_EQ(q.numerator, 3U);
  EXPECT_EQ(q.denominator_log2, 2U);
}

TEST(ExactDist, ConcentrationAgainstBruteForce) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = walk_pmf(random_steps(rng, 9, 0, 12));
    for (double r : {0.5, 1.0, 2.0, 3.5, 7.0, 20.0}) {
      const auto q = concentration_q(p, r);
      ASSERT_NEAR(q.result, q_brute(p, r), 1e-12);
      // The reported window attains the value.
      double m = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = static_cast<double>(p.support[i]);
        if (q.argmax_x < v && v <= q.argmax_x + r) m += p.probs[i];
      }
      ASSERT_NEAR(m, q.result, 1e-12);
    }
    double top = 0.0;
    for (double pr : p.probs) top = std::max(top, pr);
    EXPECT_EQ(concentration_q(p, 1.0).result, top);
  }
}

TEST(ExactDist, WindowSubadditivity) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = walk_pmf(random_steps(rng, 10, 0, 15));
    for (double r : {0.5, 1.0, 2.5}) {
      const double base = concentration_q(p, r).result;
      for (int m = 2; m <= 4; ++m) ASSERT_LE(concentration_q(p, m * r).result, m * base + 1e-12);
    }
  }
}

TEST(ExactDist, PrefixSandwich) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = random_steps(rng, 12, 0, 20);
    auto t = s;
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const auto head = random_steps(rng, m, 0, 20);
    std::copy(head.begin(), head.end(), t.begin());
    const double r = std::uniform_int_distribution<int>(1, 5)(rng);
    const double qs = concentration_q(walk_pmf(s), r).result;
    const double qt = concentration_q(walk_pmf(t), r).result;
    const double f = std::ldexp(1.0, static_cast<int>(m + 1));
    ASSERT_GE(qs, qt / f - 1e-12);
    ASSERT_LE(qs, qt * f + 1e-12);
  }
}

TEST(ExactDist, ProductSandwich) {
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<int> atoms(1, 6);
  std::uniform_int_distribution<std::int64_t> where(-15, 15);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    auto make = [&] {
      std::vector<std::pair<std::int64_t, double>> v;
      for (int i = atoms(rng); i > 0; --i) v.emplace_back(where(rng), w(rng));
      return make_pmf(v);
    };
    const auto a = make(), b = make();
    const auto sum = convolve(a, b);
    EXPECT_NEAR(sum.total_mass(), 1.0, 1e-12);
    for (double r : {0.5, 1.0, 3.0}) {
      const double qa = concentration_q(a, r).result, qb = concentration_q(b, r).result;
      const double q = concentration_q(sum, r).result;
      ASSERT_GE(q, qa * qb / 2.0 - 1e-12);
      ASSERT_LE(q, std::min(qa, qb) + 1e-12);
    }
  }
}

TEST(ExactDist, ModularExamples) {
  const auto a = modular_walk_pmf(std::vector<std::int64_t>{1, 1}, 4);
  EXPECT_EQ(a.probs, (std::vector<double>{0.5, 0.0, 0.5, 0.0}));
  const auto b = modular_walk_pmf(std::vector<std::int64_t>{1}, 3);
  EXPECT_EQ(b.probs, (std::vector<double>{0.0, 0.5, 0.5}));
  const auto c = modular_walk_pmf(std::vector<std::int64_t>(9, 2), 2);
  EXPECT_EQ(c.probs, (std::vector<double>{1.0, 0.0}));
  EXPECT_THROW(modular_walk_pmf(std::vector<std::int64_t>{1}, 1), DomainError);
}

TEST(ExactDist, ModularConsistency) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 20)(rng);
    const std::int64_t m = std::uniform_int_distribution<std::int64_t>(2, 64)(rng);
    const auto steps = random_steps(rng, n, 0, 200);
    const auto reduced = reduce_mod(walk_pmf(steps), m);
    const auto direct = modular_walk_pmf(steps, m);
    const auto spectral = modular_walk_pmf(steps, m, ModularMethod::spectral);
    double mass = 0.0;
    for (std::int64_t r = 0; r < m; ++r) {
      ASSERT_NEAR(reduced.probs[r], direct.probs[r], 1e-10);
      ASSERT_NEAR(spectral.probs[r], direct.probs[r], 1e-10);
      ASSERT_GE(direct.probs[r], 0.0);
      mass += direct.probs[r];
    }
    ASSERT_NEAR(mass, 1.0, 1e-12);
  }
}

TEST(ExactDist, Moments) {
  const auto m = summary_moments(std::vector<double>{1, 2, 3});
  EXPECT_EQ(m.variance, 14.0);
  EXPECT_EQ(m.total, 6.0);
  EXPECT_NEAR(m.l2_norm, std::sqrt(14.0), 1e-15);
  EXPECT_EQ(summary_moments(std::vector<double>{}).variance, 0.0);
  // Blocks 1..3 of the sqrt_block sequence (indices up to n_4 - 1 = 42).
  std::vector<double> steps;
  for (unsigned k = 1; k <= 3; ++k) {
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << (2 * k)) / 2; ++i) {
      steps.push_back(std::ldexp(1.0, static_cast<int>(k)) + (i % 2 == 0 ? 1.0 : -1.0));
    }
  }
  EXPECT_EQ(steps.size(), 42U);
  EXPECT_LE(summary_moments(steps).variance, std::ldexp(1.0, 16));
}

TEST(ExactDist, Tails) {
  const auto a = walk_pmf(std::vector<std::int64_t>{1, 1});
  EXPECT_EQ(tail_prob(a, 2.0), 0.25);
  EXPECT_EQ(tail_prob(a, -1e300), 1.0);
  EXPECT_EQ(tail_prob(a, 2.5), 0.0);
  EXPECT_EQ(abs_tail_prob(a, 1.0), 0.5);
  EXPECT_EQ(ball_prob(a, 0.0), 0.5);
}

TEST(ExactDist, RationalStrings) {
  EXPECT_EQ(rational_string(2, 3), "1/4");
  EXPECT_EQ(rational_string(0, 3), "0");
  EXPECT_EQ(rational_string(4, 2), "1");
  EXPECT_EQ(rational_string(3, 5), "3/32");
}
