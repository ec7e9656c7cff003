#include "nof1/trial.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "nof1/error.hpp"

namespace nof1 {

void StoppingRule::validate() const {
  require(consecutive_days >= 1, ErrorCode::kInvalidArgument,
          "stopping rule needs consecutive_days >= 1", "stopping_rules.consecutive_days");
  require(std::isfinite(threshold), ErrorCode::kInvalidArgument,
          "stopping threshold is not finite", "stopping_rules.threshold");
}

std::string StoppingRule::describe() const {
  std::string metric_name = metric == Metric::kPain ? "pain" : "primary_event";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", threshold);
  return metric_name + " >= " + buf + " on " + std::to_string(consecutive_days) +
         " consecutive days";
}

void TrialDesign::validate() const {
  require(arms.size() >= 2, ErrorCode::kInvalidArgument, "crossover requires >=2 arms", "arms");
  std::set<std::string> unique(arms.begin(), arms.end());
  require(unique.size() == arms.size(), ErrorCode::kInvalidArgument, "duplicate arm", "arms");
  for (const auto& a : arms) {
    require(!a.empty() && a != kBaselineArm, ErrorCode::kInvalidArgument,
            "arm ids must be non-empty and not 'baseline'", "arms");
  }
  const int k = static_cast<int>(arms.size());
  require(n_periods >= k, ErrorCode::kInvalidArgument,
          "n_periods must be at least the number of arms", "n_periods");
  require(adaptive || n_periods % k == 0, ErrorCode::kInvalidArgument,
          "n_periods must be divisible by the number of arms", "n_periods");
  require(period_len_days >= 1, ErrorCode::kInvalidArgument, "period_len_days must be >= 1",
          "period_len_days");
  require(baseline_periods >= 0, ErrorCode::kInvalidArgument, "baseline_periods must be >= 0",
          "baseline_periods");
  require(washout_days >= 0, ErrorCode::kInvalidArgument, "washout_days must be >= 0",
          "washout_days");
  for (const auto& r : stopping_rules) r.validate();
}

bool TrialDesign::has_placebo() const {
  return std::find(arms.begin(), arms.end(), placebo_id) != arms.end();
}

std::string TrialDesign::reference_arm() const {
  return has_placebo() ? placebo_id : std::string(kBaselineArm);
}

std::string_view phase_kind_name(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::kBaseline: return "baseline";
    case PhaseKind::kWashout: return "washout";
    case PhaseKind::kIntervention: return "intervention";
  }
  return "baseline";
}

std::string_view record_source_name(RecordSource source) {
  return source == RecordSource::kSelfReport ? "self_report" : "wearable";
}

std::string_view trial_status_name(TrialStatus status) {
  switch (status) {
    case TrialStatus::kActive: return "active";
    case TrialStatus::kStopped: return "stopped";
    case TrialStatus::kCompleted: return "completed";
  }
  return "active";
}

std::vector<std::string> Schedule::intervention_sequence() const {
  std::vector<std::string> seq;
  for (const auto& p : phases) {
    if (p.kind == PhaseKind::kIntervention) seq.push_back(p.arm);
  }
  return seq;
}

Schedule design_trial(const TrialDesign& design) {
  design.validate();
  const int k = static_cast<int>(design.arms.size());
  const int len = design.period_len_days;

  std::vector<std::string> order;
  order.reserve(design.n_periods);
  std::mt19937_64 rng(design.seed);
  const int blocks = design.adaptive ? 1 : design.n_periods / k;
  for (int b = 0; b < blocks; ++b) {
    std::vector<std::string> block = design.arms;
    std::shuffle(block.begin(), block.end(), rng);
    order.insert(order.end(), block.begin(), block.end());
  }
  // Adaptive slots after the warm-start block are filled during the trial.
  order.resize(design.n_periods);

  Schedule s;
  int day = 1;
  for (int b = 0; b < design.baseline_periods; ++b) {
    s.phases.push_back({PhaseKind::kBaseline, {}, day, day + len - 1, -1});
    day += len;
  }
  for (int p = 0; p < design.n_periods; ++p) {
    if (p > 0 && design.washout_days > 0) {
      s.phases.push_back({PhaseKind::kWashout, {}, day, day + design.washout_days - 1, -1});
      day += design.washout_days;
    }
    s.phases.push_back({PhaseKind::kIntervention, order[p], day, day + len - 1, p});
    day += len;
  }
  return s;
}

Assignment current_assignment(const Schedule& schedule, int day) {
  require(day >= 1, ErrorCode::kInvalidArgument, "day must be >= 1", "day");
  auto it = std::lower_bound(schedule.phases.begin(), schedule.phases.end(), day,
                             [](const Phase& p, int d) { return p.end_day < d; });
  if (it == schedule.phases.end()) return {true, {}};
  return {false, *it};
}

TrialState start_trial(std::string trial_id, std::string patient_id, TrialDesign design) {
  TrialState st;
  st.schedule = design_trial(design);
  st.trial_id = std::move(trial_id);
  st.patient_id = std::move(patient_id);
  st.design = std::move(design);
  return st;
}

void validate_record(const TrialState& state, const OutcomeRecord& record) {
  require(record.trial_id.empty() || record.trial_id == state.trial_id, ErrorCode::kValidation,
          "record belongs to a different trial", "record.trial_id");
  require(record.day >= 1 && record.day <= state.schedule.last_day(), ErrorCode::kValidation,
          "day " + std::to_string(record.day) + " is outside the trial's day range 1.." +
              std::to_string(state.schedule.last_day()),
          "record.day");
  if (record.pain) {
    require(*record.pain >= 0 && *record.pain <= 10, ErrorCode::kValidation,
            "pain must be within 0-10", "record.pain");
  }
  if (record.disability) {
    require(*record.disability >= 0, ErrorCode::kValidation, "disability must be >= 0",
            "record.disability");
  }
}

namespace {

bool record_less(const OutcomeRecord& a, const OutcomeRecord& b) {
  if (a.day != b.day) return a.day < b.day;
  return a.source < b.source;
}

// Per-day metric value, combining sources: worst pain, any event.
std::optional<double> day_metric(const TrialState& state, int day, StoppingRule::Metric metric) {
  std::optional<double> value;
  auto lo = std::lower_bound(state.records.begin(), state.records.end(), day,
                             [](const OutcomeRecord& r, int d) { return r.day < d; });
  for (auto it = lo; it != state.records.end() && it->day == day; ++it) {
    std::optional<double> v;
    if (metric == StoppingRule::Metric::kPain) {
      if (it->pain) v = *it->pain;
    } else {
      v = it->primary_event ? 1.0 : 0.0;
    }
    if (v && (!value || *v > *value)) value = v;
  }
  return value;
}

bool rule_fires(const TrialState& state, const StoppingRule& rule, int latest_day) {
  if (latest_day - rule.consecutive_days + 1 < 1) return false;
  for (int d = latest_day - rule.consecutive_days + 1; d <= latest_day; ++d) {
    auto v = day_metric(state, d, rule.metric);
    if (!v || *v < rule.threshold) return false;
  }
  return true;
}

}  // namespace

StoppingVerdict check_stopping(const TrialState& state) {
  if (state.records.empty()) return {};
  const int latest = state.records.back().day;
  StoppingVerdict alert;
  for (const auto& rule : state.design.stopping_rules) {
    if (!rule_fires(state, rule, latest)) continue;
    if (rule.action == StoppingRule::Action::kTerminate) {
      return {StoppingVerdict::Kind::kStop, rule.describe(), latest};
    }
    if (alert.kind == StoppingVerdict::Kind::kContinue) {
      alert = {StoppingVerdict::Kind::kAlert, rule.describe(), latest};
    }
  }
  return alert;
}

IngestResult ingest_outcome(TrialState& state, OutcomeRecord record) {
  require(state.status == TrialStatus::kActive, ErrorCode::kFailedPrecondition,
          "trial '" + state.trial_id + "' is " + std::string(trial_status_name(state.status)),
          "trial.status");
  validate_record(state, record);
  record.trial_id = state.trial_id;

  IngestResult result;
  auto it = std::lower_bound(state.records.begin(), state.records.end(), record, record_less);
  if (it != state.records.end() && it->day == record.day && it->source == record.source) {
    state.audit.push_back({*it, record});
    *it = std::move(record);
    result.replaced = true;
  } else {
    state.records.insert(it, std::move(record));
  }

  result.verdict = check_stopping(state);
  if (result.verdict.kind == StoppingVerdict::Kind::kStop) {
    state.status = TrialStatus::kStopped;
    state.stop_reason = result.verdict.reason;
    state.stop_day = result.verdict.day;
  } else if (result.verdict.kind == StoppingVerdict::Kind::kAlert) {
    state.alerts.push_back({result.verdict.day, result.verdict.reason});
  }
  return result;
}

void complete_trial(TrialState& state) {
  require(state.status == TrialStatus::kActive, ErrorCode::kFailedPrecondition,
          "only an active trial can be completed", "trial.status");
  state.status = TrialStatus::kCompleted;
}

std::optional<int> next_pending_period(const TrialState& state) {
  for (std::size_t i = 0; i < state.schedule.phases.size(); ++i) {
    const auto& p = state.schedule.phases[i];
    if (p.kind == PhaseKind::kIntervention && p.arm.empty()) return static_cast<int>(i);
  }
  return std::nullopt;
}

void assign_pending_period(TrialState& state, const std::string& arm) {
  require(state.status == TrialStatus::kActive, ErrorCode::kFailedPrecondition,
          "trial is not active", "trial.status");
  require(std::find(state.design.arms.begin(), state.design.arms.end(), arm) !=
              state.design.arms.end(),
          ErrorCode::kInvalidArgument, "unknown arm '" + arm + "'", "arm");
  auto idx = next_pending_period(state);
  require(idx.has_value(), ErrorCode::kFailedPrecondition, "no pending adaptive period",
          "schedule");
  auto& phase = state.schedule.phases[*idx];
  const bool started = !state.records.empty() && state.records.back().day >= phase.start_day;
  require(!started, ErrorCode::kFailedPrecondition,
          "pending period has already started", "schedule");
  phase.arm = arm;
}

std::vector<PeriodSummary> period_summary(const TrialState& state) {
  std::vector<PeriodSummary> baseline, intervention;
  std::optional<std::string> previous;
  for (const auto& phase : state.schedule.phases) {
    if (phase.kind == PhaseKind::kWashout) continue;
    if (phase.kind == PhaseKind::kIntervention && phase.arm.empty()) continue;

    PeriodSummary s;
    s.is_baseline = phase.kind == PhaseKind::kBaseline;
    s.arm = s.is_baseline ? std::string(kBaselineArm) : phase.arm;
    s.period_index = phase.period_index;
    s.start_day = phase.start_day;
    s.end_day = phase.end_day;
    s.period_len = phase.end_day - phase.start_day + 1;

    std::map<int, std::pair<bool, std::optional<int>>> days;  // event, worst pain
    auto lo = std::lower_bound(state.records.begin(), state.records.end(), phase.start_day,
                               [](const OutcomeRecord& r, int d) { return r.day < d; });
    for (auto it = lo; it != state.records.end() && it->day <= phase.end_day; ++it) {
      auto& [event, pain] = days[it->day];
      event = event || it->primary_event;
      if (it->pain && (!pain || *it->pain > *pain)) pain = it->pain;
    }
    double pain_sum = 0.0;
    int pain_n = 0;
    for (const auto& [day, v] : days) {
      s.event_days += v.first ? 1 : 0;
      if (v.second) {
        pain_sum += *v.second;
        ++pain_n;
      }
    }
    s.n_observed = static_cast<int>(days.size());
    if (pain_n > 0) s.mean_pain = pain_sum / pain_n;

    if (s.is_baseline) {
      baseline.push_back(std::move(s));
    } else {
      s.previous_arm = previous;
      previous = s.arm;
      intervention.push_back(std::move(s));
    }
  }
  baseline.insert(baseline.end(), intervention.begin(), intervention.end());
  return baseline;
}

}  // namespace nof1
