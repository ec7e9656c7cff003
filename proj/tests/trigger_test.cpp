#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "nof1/error.hpp"
#include "nof1/trigger.hpp"
#include "test_util.hpp"

using namespace nof1;

namespace {

std::vector<InterventionCandidate> make(const std::vector<std::pair<std::string, double>>& s,
                                        std::vector<int> tiers = {}) {
  std::vector<InterventionCandidate> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    InterventionCandidate c;
    c.intervention_id = s[i].first;
    c.sigma = s[i].second;
    c.risk_tier = i < tiers.size() ? tiers[i] : 1;
    out.push_back(c);
  }
  return out;
}

bool has_flag(const TriggerDecision& d, const std::string& code, const std::string& id = "") {
  return std::any_of(d.flags.begin(), d.flags.end(), [&](const DecisionFlag& f) {
    return f.code == code && (id.empty() || f.intervention_id == id);
  });
}

}  // namespace

TEST(Trigger, ReferenceCandidates) {
  const auto d = decide(testutil::alice_candidates(), TriggerPolicy{}, testutil::alice());
  EXPECT_EQ(d.kind, DecisionKind::kValidate);
  EXPECT_EQ(describe(d), "Validate{magnesium, sleep_regularity}");
  EXPECT_TRUE(d.include_placebo);
  EXPECT_TRUE(has_flag(d, "clinical_oversight_required", "propranolol"));
  EXPECT_TRUE(has_flag(d, "low_reliability"));
}

TEST(Trigger, DirectRecommendation) {
  const auto d = decide(make({{"a", 0.96}, {"b", 0.04}}), TriggerPolicy{}, {});
  EXPECT_EQ(d.kind, DecisionKind::kDirectRecommend);
  EXPECT_EQ(d.recommended, "a");
  EXPECT_FALSE(has_flag(d, "low_reliability"));
}

TEST(Trigger, NoActionWhenNothingReachesTau) {
  const auto d =
      decide(make({{"a", 0.2}, {"b", 0.2}, {"c", 0.2}, {"d", 0.2}, {"e", 0.2}}), {}, {});
  EXPECT_EQ(d.kind, DecisionKind::kNoAction);
  EXPECT_TRUE(has_flag(d, "clinician_review"));
}

TEST(Trigger, Tier3ExcludedAndSigmaRenormalized) {
  const auto d = decide(make({{"a", 0.5}, {"b", 0.3}, {"c", 0.2}}, {3, 1, 1}), {}, {});
  EXPECT_TRUE(has_flag(d, "excluded_by_risk_tier", "a"));
  ASSERT_EQ(d.survivors.size(), 2u);
  EXPECT_NEAR(d.survivors[0].second, 0.6, 1e-12);
  EXPECT_NEAR(d.survivors[1].second, 0.4, 1e-12);
  EXPECT_EQ(describe(d), "Validate{b, c}");
}

TEST(Trigger, ContraindicationExcludes) {
  PatientProfile p;
  p.contraindicated = {"magnesium"};
  const auto d = decide(testutil::alice_candidates(), {}, p);
  EXPECT_TRUE(has_flag(d, "excluded_contraindicated", "magnesium"));
  for (const auto& id : d.validate) EXPECT_NE(id, "magnesium");
}

TEST(Trigger, AllGatedGivesNoAction) {
  const auto d = decide(make({{"a", 0.5}, {"b", 0.5}}, {3, 3}), {}, {});
  EXPECT_EQ(d.kind, DecisionKind::kNoAction);
  EXPECT_TRUE(d.survivors.empty());
}

TEST(Trigger, MaxArmsKeepsHighestSigmaInCandidateOrder) {
  TriggerPolicy pol;
  pol.tau_include = 0.1;
  const auto d = decide(make({{"a", 0.15}, {"b", 0.3}, {"c", 0.25}, {"d", 0.3}}), pol, {});
  EXPECT_EQ(describe(d), "Validate{b, d}");
}

TEST(Trigger, RejectsInvalidInput) {
  EXPECT_THROW(decide({}, {}, {}), Error);
  EXPECT_THROW(decide(make({{"a", 0.5}, {"b", 0.4}}), {}, {}), Error);
  auto c = make({{"a", 0.5}, {"b", 0.5}});
  c[0].sigma.reset();
  EXPECT_THROW(decide(c, {}, {}), Error);
  TriggerPolicy bad;
  bad.tau_include = 0.96;
  EXPECT_THROW(decide(make({{"a", 0.5}, {"b", 0.5}}), bad, {}), Error);
}

// Property: the validation set is a subset of survivors, each with renormalized
// sigma >= tau_include, at most max_arms, and contains the top survivor unless
// a direct recommendation or no-action was returned.
TEST(Trigger, PropertyValidateSetIsConsistent) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> tier(1, 3), k(2, 7);
  for (int rep = 0; rep < 2000; ++rep) {
    const int n = k(rng);
    std::vector<double> w(n);
    double total = 0;
    for (auto& x : w) total += (x = u(rng) * u(rng));
    std::vector<std::pair<std::string, double>> s;
    std::vector<int> tiers;
    double acc = 0;
    for (int i = 0; i < n; ++i) {
      const double v = i + 1 < n ? w[i] / total : 1.0 - acc;
      acc += v;
      s.emplace_back("c" + std::to_string(i), std::max(0.0, v));
      tiers.push_back(tier(rng));
    }
    TriggerPolicy pol;
    pol.tau_include = 0.1 + 0.3 * u(rng);
    const auto d = decide(make(s, tiers), pol, {});
    std::map<std::string, double> surv(d.survivors.begin(), d.survivors.end());
    if (d.kind == DecisionKind::kValidate) {
      EXPECT_LE(d.validate.size(), pol.max_arms_per_trial);
      for (const auto& id : d.validate) {
        ASSERT_TRUE(surv.count(id));
        EXPECT_GE(surv[id], pol.tau_include);
      }
    }
    if (d.kind == DecisionKind::kDirectRecommend) EXPECT_GE(surv[d.recommended], pol.tau_direct);
    for (const auto& [id, sig] : d.survivors) {
      const int t = tiers[std::stoi(id.substr(1))];
      EXPECT_NE(t, 3);
    }
  }
}
