#include <gtest/gtest.h>

#include <numeric>

#include "nof1/error.hpp"
#include "nof1/priors.hpp"
#include "test_util.hpp"

using namespace nof1;

TEST(Priors, CalibratedModelReproducesSigmaAndEfficacy) {
  const auto ranked = rank_candidates(testutil::reference_model(), testutil::alice(), 200000, 1);
  ASSERT_EQ(ranked.size(), 4u);
  const std::vector<std::string> ids{"magnesium", "sleep_regularity", "propranolol",
                                     "caffeine_reduction"};
  const std::vector<double> sigma{0.30, 0.32, 0.15, 0.23};
  const std::vector<double> eff{0.72, 0.68, 0.65, 0.61};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(ranked[i].intervention_id, ids[i]);
    EXPECT_NEAR(*ranked[i].sigma, sigma[i], 0.01) << ids[i];
    EXPECT_NEAR(ranked[i].efficacy, eff[i], 1e-12) << ids[i];
  }
  EXPECT_EQ(ranked[2].risk_tier, 2);
}

TEST(Priors, CovariateShiftsAndMissingCovariate) {
  PriorModel m;
  m.interventions = {{"a", {-1.0, 1.0}, 1, {{"age", -0.1}}}, {"b", {-2.0, 1.0}, 1, {}}};
  PatientProfile p;
  p.patient_id = "p";
  p.covariates["age"] = 20;
  const auto c = predict_candidates(m, p);
  ASSERT_EQ(c[0].intervention_id, "a");  // -1 - 2 = -3 beats -2
  EXPECT_DOUBLE_EQ(c[0].prior_mean, -3.0);

  p.covariates.clear();
  try {
    predict_candidates(m, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
    EXPECT_EQ(e.field(), "covariates.age");
  }
}

TEST(Priors, SdInflationForFlaggedGroup) {
  PriorModel m;
  m.interventions = {{"a", {-1.0, 0.5}, 1, {}}, {"b", {-1.0, 2.0}, 1, {}}};
  m.sd_inflation["underrepresented"] = 1.5;
  PatientProfile p;
  p.covariates["underrepresented"] = 1;
  const auto c = predict_candidates(m, p);
  EXPECT_DOUBLE_EQ(c[0].prior_sd, 0.75);
  EXPECT_DOUBLE_EQ(c[1].prior_sd, 3.0);
}

TEST(Priors, RiskTierOverrideFromProfile) {
  PatientProfile p = testutil::alice();
  p.risk_tiers["magnesium"] = 3;
  const auto c = predict_candidates(testutil::reference_model(), p);
  EXPECT_EQ(c[0].intervention_id, "magnesium");
  EXPECT_EQ(c[0].risk_tier, 3);
}

TEST(Priors, ProbOptimalTwoCandidateClosedForm) {
  for (double dmu : {0.0, 0.7, 2.0}) {
    for (double s : {0.5, 1.5}) {
      std::vector<Normal> c{{0.0, s}, {dmu, 1.0}};
      const auto p = prob_optimal(c, 100000, 9);
      EXPECT_NEAR(p[0], normal_cdf(dmu / std::sqrt(s * s + 1.0)), 0.01);
    }
  }
}

TEST(Priors, ProbOptimalSumsToExactlyOne) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3), v(0.1, 3);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Normal> c;
    const int k = 2 + rep % 6;
    for (int i = 0; i < k; ++i) c.push_back({u(rng), v(rng)});
    const auto p = prob_optimal(c, 1000, rep);
    double sum = 0;
    for (double x : p) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
      sum += x;
    }
    EXPECT_EQ(sum, 1.0);
  }
}

TEST(Priors, ProbOptimalDeterministicAndTiesToLowestIndex) {
  std::vector<Normal> c{{0, 1}, {0.5, 2}, {-0.3, 0.5}};
  EXPECT_EQ(prob_optimal(c, 5000, 4), prob_optimal(c, 5000, 4));
  std::vector<Normal> masses{{1.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  const auto p = prob_optimal_with_point_masses(masses, 1000, 1);
  EXPECT_EQ(p, (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(Priors, ProbOptimalRejectsBadInput) {
  std::vector<Normal> one{{0, 1}};
  EXPECT_THROW(prob_optimal(one, 1000, 1), Error);
  std::vector<Normal> two{{0, 1}, {0, 1}};
  EXPECT_THROW(prob_optimal(two, 999, 1), Error);
  std::vector<Normal> zero{{0, 1}, {0, 0}};
  EXPECT_THROW(prob_optimal(zero, 1000, 1), Error);
  EXPECT_NO_THROW(prob_optimal_with_point_masses(zero, 1000, 1));
}

TEST(Priors, ModelValidation) {
  PriorModel m;
  EXPECT_THROW(m.validate(), Error);
  m.interventions = {{"a", {0, 1}, 1, {}}, {"a", {0, 1}, 1, {}}};
  EXPECT_THROW(m.validate(), Error);
  m.interventions = {{"a", {0, -1}, 1, {}}};
  EXPECT_THROW(m.validate(), Error);
  m.interventions = {{"a", {0, 1}, 4, {}}};
  EXPECT_THROW(m.validate(), Error);
}

TEST(Priors, EfficacyIsClampedAndMonotone) {
  EfficacyTransform t;
  EXPECT_DOUBLE_EQ(t.apply(-100), 1.0);
  EXPECT_DOUBLE_EQ(t.apply(100), 0.0);
  EXPECT_GT(t.apply(-2.2), t.apply(-1.8));
}
