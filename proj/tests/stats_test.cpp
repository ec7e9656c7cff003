#include <gtest/gtest.h>

#include <random>
#include <set>

#include "nof1/error.hpp"
#include "nof1/stats.hpp"

using namespace nof1;

TEST(Stats, NormalCdfKnownValues) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.0 / std::sqrt(2.0)), 0.760249, 1e-6);
  EXPECT_NEAR(normal_cdf(kZ975), 0.975, 1e-12);
  EXPECT_NEAR(normal_cdf(-1.0) + normal_cdf(1.0), 1.0, 1e-15);
}

TEST(Stats, DeriveSeedSeparatesStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base = 0; base < 20; ++base) {
    for (std::uint64_t s = 0; s < 50; ++s) seen.insert(derive_seed(base, s));
  }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

// Brute-force pair counting.
double auc_oracle(const std::vector<double>& s, const std::vector<int>& l) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[i] == 1 && l[j] == 0) {
        pairs += 1;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
    }
  }
  return num / pairs;
}

TEST(Stats, AucMatchesPairCountingWithTies) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> score(0, 6), label(0, 1);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < 40; ++i) {
      s.push_back(score(rng));
      l.push_back(label(rng));
    }
    l[0] = 1;
    l[1] = 0;
    EXPECT_NEAR(auc(s, l), auc_oracle(s, l), 1e-12);
  }
}

TEST(Stats, AucExtremes) {
  std::vector<double> s{1, 2, 3, 4};
  std::vector<int> l{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auc(s, l), 1.0);
  std::vector<int> r{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(auc(s, r), 0.0);
}

TEST(Stats, AucNeedsBothClasses) {
  std::vector<double> s{1, 2};
  std::vector<int> l{1, 1};
  EXPECT_THROW(auc(s, l), Error);
}
