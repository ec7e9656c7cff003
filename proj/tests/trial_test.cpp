#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "nof1/error.hpp"
#include "nof1/trial.hpp"

using namespace nof1;

namespace {

TrialDesign three_arm(std::uint64_t seed = 1) {
  TrialDesign d;
  d.arms = {"a", "b", "placebo"};
  d.n_periods = 6;
  d.period_len_days = 14;
  d.baseline_periods = 1;
  d.seed = seed;
  return d;
}

OutcomeRecord rec(int day, bool event, std::optional<int> pain = std::nullopt,
                  RecordSource src = RecordSource::kSelfReport) {
  OutcomeRecord r;
  r.day = day;
  r.primary_event = event;
  r.pain = pain;
  r.source = src;
  return r;
}

}  // namespace

TEST(Trial, ScheduleBlocksAreBalancedPermutations) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto s = design_trial(three_arm(seed));
    const auto seq = s.intervention_sequence();
    ASSERT_EQ(seq.size(), 6u);
    for (int b = 0; b < 2; ++b) {
      std::multiset<std::string> block(seq.begin() + 3 * b, seq.begin() + 3 * b + 3);
      EXPECT_EQ(block, (std::multiset<std::string>{"a", "b", "placebo"}));
    }
  }
}

TEST(Trial, ScheduleIsSeedDeterministicAndSeedSensitive) {
  EXPECT_EQ(design_trial(three_arm(5)), design_trial(three_arm(5)));
  std::set<std::vector<std::string>> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(design_trial(three_arm(s)).intervention_sequence());
  EXPECT_EQ(seen.size(), 36u);  // all 3! x 3! orders appear
}

TEST(Trial, DaysAreContiguousWithBaselineAndWashout) {
  auto d = three_arm();
  d.washout_days = 3;
  d.baseline_periods = 2;
  const auto s = design_trial(d);
  int expected = 1;
  int washouts = 0;
  for (const auto& p : s.phases) {
    EXPECT_EQ(p.start_day, expected);
    EXPECT_GE(p.end_day, p.start_day);
    expected = p.end_day + 1;
    washouts += p.kind == PhaseKind::kWashout;
  }
  EXPECT_EQ(washouts, 5);
  EXPECT_EQ(s.phases[0].kind, PhaseKind::kBaseline);
  EXPECT_EQ(s.phases[1].kind, PhaseKind::kBaseline);
  EXPECT_EQ(s.last_day(), 2 * 14 + 6 * 14 + 5 * 3);
}

TEST(Trial, DesignValidation) {
  auto d = three_arm();
  d.arms = {"a"};
  try {
    design_trial(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "crossover requires >=2 arms");
  }
  d = three_arm();
  d.n_periods = 4;
  EXPECT_THROW(design_trial(d), Error);
  d = three_arm();
  d.arms = {"a", "a"};
  EXPECT_THROW(design_trial(d), Error);
  d = three_arm();
  d.arms = {"a", "baseline"};
  EXPECT_THROW(design_trial(d), Error);
  d = three_arm();
  d.period_len_days = 0;
  EXPECT_THROW(design_trial(d), Error);
}

TEST(Trial, ReferenceArm) {
  auto d = three_arm();
  EXPECT_EQ(d.reference_arm(), "placebo");
  d.arms = {"a", "b"};
  EXPECT_EQ(d.reference_arm(), "baseline");
}

TEST(Trial, CurrentAssignmentBoundaries) {
  const auto s = design_trial(three_arm(2));
  EXPECT_EQ(current_assignment(s, 1).phase.kind, PhaseKind::kBaseline);
  EXPECT_EQ(current_assignment(s, 14).phase.kind, PhaseKind::kBaseline);
  const auto first = current_assignment(s, 15);
  EXPECT_EQ(first.phase.kind, PhaseKind::kIntervention);
  EXPECT_EQ(first.phase.period_index, 0);
  EXPECT_EQ(current_assignment(s, 28).phase.period_index, 0);
  EXPECT_EQ(current_assignment(s, 29).phase.period_index, 1);
  EXPECT_FALSE(current_assignment(s, s.last_day()).post_trial);
  EXPECT_TRUE(current_assignment(s, s.last_day() + 1).post_trial);
  EXPECT_THROW(current_assignment(s, 0), Error);
}

TEST(Trial, IngestValidatesAndReplacesDuplicates) {
  auto st = start_trial("t", "p", three_arm());
  EXPECT_THROW(ingest_outcome(st, rec(0, false)), Error);
  EXPECT_THROW(ingest_outcome(st, rec(st.schedule.last_day() + 1, false)), Error);
  EXPECT_THROW(ingest_outcome(st, rec(3, false, 11)), Error);
  auto other = rec(3, false);
  other.trial_id = "other";
  EXPECT_THROW(ingest_outcome(st, other), Error);
  EXPECT_TRUE(st.records.empty());

  EXPECT_FALSE(ingest_outcome(st, rec(5, false)).replaced);
  EXPECT_FALSE(ingest_outcome(st, rec(5, true, std::nullopt, RecordSource::kWearable)).replaced);
  EXPECT_FALSE(ingest_outcome(st, rec(2, false)).replaced);
  EXPECT_TRUE(ingest_outcome(st, rec(5, true)).replaced);
  ASSERT_EQ(st.records.size(), 3u);
  EXPECT_EQ(st.records[0].day, 2);
  ASSERT_EQ(st.audit.size(), 1u);
  EXPECT_FALSE(st.audit[0].replaced.primary_event);
  EXPECT_TRUE(st.audit[0].replacement.primary_event);
}

// Oracle for a single rule: the first day whose trailing k-day window (all
// days recorded) has pain >= threshold.
int first_firing_day(const std::vector<int>& pain, int k, int threshold) {
  for (int d = 1; d <= int(pain.size()); ++d) {
    if (d < k) continue;
    bool all = true;
    for (int j = d - k + 1; j <= d; ++j) all = all && pain[j - 1] >= threshold;
    if (all) return d;
  }
  return 0;
}

TEST(Trial, StoppingRuleExhaustiveTraces) {
  for (int k = 1; k <= 4; ++k) {
    for (int len = 1; len <= 6; ++len) {
      for (int mask = 0; mask < (1 << len); ++mask) {
        std::vector<int> pain(len);
        for (int i = 0; i < len; ++i) pain[i] = (mask >> i) & 1 ? 9 : 8;
        auto d = three_arm();
        d.stopping_rules = {{StoppingRule::Metric::kPain, 9.0, k, StoppingRule::Action::kTerminate}};
        auto st = start_trial("t", "p", d);
        const int expect = first_firing_day(pain, k, 9);
        int fired = 0;
        for (int day = 1; day <= len; ++day) {
          if (st.status != TrialStatus::kActive) {
            EXPECT_THROW(ingest_outcome(st, rec(day, false, pain[day - 1])), Error);
            break;
          }
          const auto r = ingest_outcome(st, rec(day, false, pain[day - 1]));
          if (r.verdict.kind == StoppingVerdict::Kind::kStop) fired = day;
        }
        EXPECT_EQ(fired, expect) << "k=" << k << " mask=" << mask << " len=" << len;
        EXPECT_EQ(st.status == TrialStatus::kStopped, expect != 0);
        if (expect) EXPECT_EQ(st.stop_day, expect);
      }
    }
  }
}

TEST(Trial, MissingDayBreaksConsecutiveRun) {
  auto d = three_arm();
  d.stopping_rules = {{StoppingRule::Metric::kPain, 9.0, 2, StoppingRule::Action::kTerminate}};
  auto st = start_trial("t", "p", d);
  ingest_outcome(st, rec(1, false, 9));
  EXPECT_EQ(ingest_outcome(st, rec(3, false, 9)).verdict.kind, StoppingVerdict::Kind::kContinue);
  EXPECT_EQ(ingest_outcome(st, rec(4, false, 10)).verdict.kind, StoppingVerdict::Kind::kStop);
}

TEST(Trial, SourcesCombineByWorstPain) {
  auto d = three_arm();
  d.stopping_rules = {{StoppingRule::Metric::kPain, 9.0, 2, StoppingRule::Action::kTerminate}};
  auto st = start_trial("t", "p", d);
  ingest_outcome(st, rec(1, false, 9, RecordSource::kWearable));
  ingest_outcome(st, rec(1, false, 2));
  EXPECT_EQ(ingest_outcome(st, rec(2, false, 9)).verdict.kind, StoppingVerdict::Kind::kStop);
}

TEST(Trial, TerminateTakesPrecedenceOverAlert) {
  auto d = three_arm();
  d.stopping_rules = {{StoppingRule::Metric::kPrimaryEvent, 1.0, 1, StoppingRule::Action::kAlert},
                      {StoppingRule::Metric::kPain, 9.0, 1, StoppingRule::Action::kTerminate}};
  auto st = start_trial("t", "p", d);
  EXPECT_EQ(ingest_outcome(st, rec(1, true, 3)).verdict.kind, StoppingVerdict::Kind::kAlert);
  EXPECT_EQ(st.alerts.size(), 1u);
  EXPECT_EQ(ingest_outcome(st, rec(2, true, 9)).verdict.kind, StoppingVerdict::Kind::kStop);
  EXPECT_EQ(st.status, TrialStatus::kStopped);
}

TEST(Trial, CompletionIsExplicitAndFinal) {
  auto st = start_trial("t", "p", three_arm());
  complete_trial(st);
  EXPECT_EQ(st.status, TrialStatus::kCompleted);
  EXPECT_THROW(complete_trial(st), Error);
  EXPECT_THROW(ingest_outcome(st, rec(1, false)), Error);
}

TEST(Trial, PeriodSummaryCountsEventsAndMissingDays) {
  auto d = three_arm(3);
  auto st = start_trial("t", "p", d);
  // Baseline: 14 days, 7 events. First period: days 15..28, 10 observed, 3 events.
  for (int day = 1; day <= 14; ++day) ingest_outcome(st, rec(day, day % 2 == 0, 4));
  for (int day = 15; day <= 24; ++day) ingest_outcome(st, rec(day, day <= 17, 6));
  const auto s = period_summary(st);
  ASSERT_EQ(s.size(), 7u);
  EXPECT_TRUE(s[0].is_baseline);
  EXPECT_EQ(s[0].event_days, 7);
  EXPECT_EQ(s[0].n_observed, 14);
  EXPECT_DOUBLE_EQ(*s[0].mean_pain, 4.0);
  EXPECT_EQ(s[1].arm, st.schedule.intervention_sequence()[0]);
  EXPECT_EQ(s[1].event_days, 3);
  EXPECT_EQ(s[1].n_observed, 10);
  EXPECT_FALSE(s[1].previous_arm.has_value());
  EXPECT_EQ(*s[2].previous_arm, s[1].arm);
  EXPECT_EQ(s[2].n_observed, 0);
}

TEST(Trial, AdaptiveWarmStartThenPendingSlots) {
  auto d = three_arm(4);
  d.adaptive = true;
  d.n_periods = 5;
  auto st = start_trial("t", "p", d);
  const auto seq = st.schedule.intervention_sequence();
  EXPECT_EQ(std::multiset<std::string>(seq.begin(), seq.begin() + 3),
            (std::multiset<std::string>{"a", "b", "placebo"}));
  EXPECT_EQ(seq[3], "");
  EXPECT_EQ(seq[4], "");
  EXPECT_THROW(assign_pending_period(st, "zzz"), Error);
  assign_pending_period(st, "b");
  EXPECT_EQ(st.schedule.intervention_sequence()[3], "b");
  // The next pending slot starts on day 15 + 4*14; a record inside it blocks assignment.
  ingest_outcome(st, rec(15 + 4 * 14, false));
  EXPECT_THROW(assign_pending_period(st, "a"), Error);
}
