#include <gtest/gtest.h>

#include <cmath>

#include "nof1/error.hpp"
#include "nof1/sim.hpp"

using namespace nof1;
using namespace nof1::sim;

TEST(Sim, PopulationIsDeterministicAndValidated) {
  PopulationSpec spec;
  spec.arms = {{"a", -2.0, 1.0}, {"b", -1.0, 0.5}};
  spec.n_patients = 50;
  spec.seed = 9;
  const auto p1 = sample_population(spec);
  const auto p2 = sample_population(spec);
  ASSERT_EQ(p1.size(), 50u);
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(p1[i].true_effects, p2[i].true_effects);
  spec.seed = 10;
  EXPECT_NE(sample_population(spec)[0].true_effects, p1[0].true_effects);
  spec.adherence = 1.5;
  EXPECT_THROW(sample_population(spec), Error);
}

TEST(Sim, ZeroHeterogeneityGivesIdenticalEffects) {
  PopulationSpec spec;
  spec.arms = {{"a", -2.0, 0.0}};
  spec.n_patients = 10;
  for (const auto& p : sample_population(spec)) EXPECT_DOUBLE_EQ(p.true_effects.at("a"), -2.0);
}

TEST(Sim, BootstrapOfConstantIsDegenerate) {
  const auto iv = bootstrap_mean(std::vector<double>(40, 3.0), 200, 1);
  EXPECT_DOUBLE_EQ(iv.estimate, 3.0);
  EXPECT_DOUBLE_EQ(iv.low, 3.0);
  EXPECT_DOUBLE_EQ(iv.high, 3.0);
}

TEST(Sim, HanleyMcNeilStandardError) {
  // auc 0.5 with 100/100: Q1 = Q2 = 1/3, var = (0.25 + 2 * 99 / 12) / 1e4.
  EXPECT_NEAR(auc_standard_error(0.5, 100, 100), std::sqrt(0.001675), 1e-12);
}

TEST(Sim, OracleAlwaysCorrectAndPoliciesReproducible) {
  auto sc = default_policy_scenario(2.0, 40, 5);
  sc.config.bootstrap_resamples = 100;
  const auto r1 = compare_policies(sc.population, sc.policies, sc.config);
  const auto r2 = compare_policies(sc.population, sc.policies, sc.config);
  ASSERT_EQ(r1.size(), 3u);
  EXPECT_EQ(r1[2].kind, PolicyKind::kOracle);
  EXPECT_DOUBLE_EQ(r1[2].correct_selection_rate.estimate, 1.0);
  EXPECT_EQ(r1[0].trials_run, 0u);
  for (std::size_t k = 0; k < 3; ++k) {
    ASSERT_EQ(r1[k].runs.size(), 40u);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(r1[k].runs[i].selected, r2[k].runs[i].selected);
    EXPECT_GE(r1[k].mean_regret.estimate, -1e-9);
  }
  EXPECT_DOUBLE_EQ(r1[2].mean_regret.estimate, 0.0);
}

TEST(Sim, HomogeneousPopulationHasNoSelectionGap) {
  auto sc = default_policy_scenario(0.0, 30, 2);
  sc.config.bootstrap_resamples = 100;
  const auto r = compare_policies(sc.population, sc.policies, sc.config);
  EXPECT_DOUBLE_EQ(r[0].correct_selection_rate.estimate, 1.0);
  const auto diff = correct_selection_difference(r[1], r[0], 100, 3);
  EXPECT_LE(diff.estimate, 0.0);
}

TEST(Sim, CaseStudyReplicatesAreDeterministic) {
  auto cfg = CaseStudyConfig::defaults();
  cfg.sigma_samples = 2000;
  const auto a = replicate_case_study(cfg, 5, 77);
  const auto b = replicate_case_study(cfg, 5, 77);
  ASSERT_EQ(a.replicates.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a.replicates[i].sequence, b.replicates[i].sequence);
    EXPECT_EQ(a.replicates[i].prob_effect, b.replicates[i].prob_effect);
  }
  EXPECT_EQ(a.replicates[0].decision.kind, DecisionKind::kValidate);
  for (const auto& [arm, q] : a.prob_effect_quantiles) {
    EXPECT_LE(q[0], q[1]);
    EXPECT_LE(q[1], q[2]);
  }
  const double f = a.fraction("magnesium", 0.0, true);
  EXPECT_DOUBLE_EQ(f, 1.0);
}

TEST(Sim, GeneralizabilityWithoutShiftTransfers) {
  GeneralizabilityConfig cfg;
  cfg.n_per_cohort = 600;
  cfg.cohort_shift = 0.0;
  const auto r = generalizability_scenario(cfg, 4);
  EXPECT_GT(r.within_cohort_auc, 0.65);
  EXPECT_NEAR(r.cross_cohort_auc, r.within_cohort_auc, 3 * (r.within_half_width + r.cross_half_width));
  const auto shifted = generalizability_scenario(GeneralizabilityConfig{.n_per_cohort = 600}, 4);
  EXPECT_LT(shifted.cross_cohort_auc, shifted.within_cohort_auc);
}
