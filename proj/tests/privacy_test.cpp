#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <numeric>
#include <random>

#include "nof1/error.hpp"
#include "nof1/privacy.hpp"
#include "nof1/stats.hpp"

using namespace nof1;

TEST(Privacy, NoiseScaleClosedForm) {
  // 2 * sqrt(2 ln(125000)) = 9.6896105...
  EXPECT_NEAR(gaussian_noise_sd(1.0, 1.0, 1e-5), 9.6896105252, 1e-9);
  EXPECT_NEAR(gaussian_noise_sd(2.0, 0.5, 1e-5), 4 * 9.6896105252, 1e-8);
}

TEST(Privacy, EmpiricalNoiseMatchesScale) {
  for (double eps : {0.5, 2.0}) {
    const double expected = gaussian_noise_sd(1.0, eps, 1e-5);
    double s1 = 0, s2 = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      PrivacyBudget b(10.0, 1e-4, 1.0);
      const auto c = clip_and_noise("a", 0.25, {eps, 1e-5}, b, true, derive_seed(9, i));
      const double noise = c.estimate - 0.25;
      s1 += noise;
      s2 += noise * noise;
      EXPECT_DOUBLE_EQ(c.noise_sd, expected);
    }
    const double sd = std::sqrt(s2 / n - (s1 / n) * (s1 / n));
    EXPECT_NEAR(sd / expected, 1.0, 0.05);
  }
}

TEST(Privacy, ClippingBoundsEstimateBeforeNoise) {
  PrivacyBudget b(1.0, 1e-5, 1.0);
  const auto c = clip_and_noise("a", 50.0, {0.5, 1e-6}, b, true, 1);
  PrivacyBudget b2(1.0, 1e-5, 1.0);
  const auto d = clip_and_noise("a", 1.0, {0.5, 1e-6}, b2, true, 1);
  EXPECT_DOUBLE_EQ(c.estimate, d.estimate);
}

TEST(Privacy, BudgetRefusesOverspendWithoutSideEffects) {
  PrivacyBudget b(1.0, 1e-5, 1.0);
  for (int i = 0; i < 10; ++i) b.spend(0.1, 1e-6, i);  // exactly exhausts epsilon and delta
  EXPECT_EQ(b.spent().size(), 10u);
  const auto before = b;
  try {
    b.spend(0.1, 1e-7, 99);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRefused);
    EXPECT_NE(std::string(e.what()).find("privacy budget exhausted"), std::string::npos);
  }
  EXPECT_EQ(b, before);
}

TEST(Privacy, ConsentCheckedBeforeBudget) {
  PrivacyBudget b(0.1, 1e-5, 1.0);
  b.spend(0.1, 1e-6, 0);
  try {
    clip_and_noise("a", 0.0, {0.1, 1e-6}, b, false, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.field(), "consent");
  }
  EXPECT_EQ(b.spent().size(), 1u);
}

TEST(Privacy, BudgetRestoreReplaysLedger) {
  PrivacyBudget b(1.0, 1e-5, 2.0);
  b.spend(0.3, 1e-6, 1);
  b.spend(0.2, 2e-6, 2);
  EXPECT_EQ(PrivacyBudget::restore(1.0, 1e-5, 2.0, b.spent()), b);
  EXPECT_NEAR(b.remaining_epsilon(), 0.5, 1e-15);
}

TEST(Privacy, AggregationWithholdsSmallCohorts) {
  std::vector<Contribution> cs;
  for (int i = 0; i < 10; ++i) cs.push_back({"a", double(i), 1.0, 1, true});
  for (int i = 0; i < 9; ++i) cs.push_back({"b", 1.0, 1.0, 1, true});
  cs.push_back({"b", 100.0, 1.0, 1, false});  // no consent: ignored
  const auto r = aggregate_contributions(cs, 10);
  ASSERT_EQ(r.released.size(), 1u);
  EXPECT_EQ(r.released[0].intervention_id, "a");
  EXPECT_DOUBLE_EQ(r.released[0].mean, 4.5);
  EXPECT_EQ(r.withheld, std::vector<std::string>{"b"});
}

TEST(Privacy, FixedPointEncoding) {
  EXPECT_EQ(encode_fixed(1.5), 1500000);
  EXPECT_EQ(encode_fixed(-0.0000004), 0);
  EXPECT_DOUBLE_EQ(decode_fixed(encode_fixed(-3.25)), -3.25);
  EXPECT_NO_THROW(encode_fixed(kFixedPointLimit));
  EXPECT_THROW(encode_fixed(kFixedPointLimit * 1.01), Error);
  EXPECT_THROW(encode_fixed(NAN), Error);
}

TEST(Privacy, SecureSumIsExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100, 100);
  for (std::size_t n : {1u, 2u, 5u, 16u}) {
    std::vector<std::uint32_t> ids(n);
    std::iota(ids.begin(), ids.end(), 100u);
    std::vector<MaskedShare> shares;
    std::vector<std::int64_t> plain(3, 0);
    for (auto id : ids) {
      std::vector<double> v{u(rng), u(rng), u(rng)};
      for (int i = 0; i < 3; ++i) plain[i] += encode_fixed(v[i]);
      shares.push_back(mask_value(id, v, simulated_peer_seeds(id, ids, 42)));
    }
    const auto sum = unmask_sum(shares);
    EXPECT_EQ(sum.fixed, plain);
  }
}

TEST(Privacy, DropoutIsUnsupported) {
  std::vector<std::uint32_t> ids{1, 2, 3};
  std::vector<MaskedShare> shares;
  for (auto id : ids) {
    std::vector<double> v{1.0};
    shares.push_back(mask_value(id, v, simulated_peer_seeds(id, ids, 7)));
  }
  shares.pop_back();
  try {
    unmask_sum(shares);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupported);
    EXPECT_NE(std::string(e.what()).find("dropout unsupported"), std::string::npos);
  }
}

// A single masked share of a constant should look uniform over 2^64: bucket
// the top 4 bits and compare against the chi-square 99.9% quantile.
TEST(Privacy, MaskedSharesLookUniform) {
  const int bins = 16, n = 16000;
  std::vector<int> counts(bins, 0);
  std::vector<std::uint32_t> ids{1, 2};
  for (int r = 0; r < n; ++r) {
    std::vector<double> v{0.0};
    const auto share = mask_value(1, v, simulated_peer_seeds(1, ids, derive_seed(3, r)));
    ++counts[share.masked[0] >> 60];
  }
  double chi = 0;
  const double expected = double(n) / bins;
  for (int c : counts) chi += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(bins - 1);
  EXPECT_LT(chi, boost::math::quantile(dist, 0.999));
}
