#pragma once

// Block-randomized N-of-1 crossover trials: schedule design, daily outcome
// ingestion, stopping rules and per-period summaries.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nof1 {

struct StoppingRule {
  enum class Metric { kPain, kPrimaryEvent };
  enum class Action { kTerminate, kAlert };

  Metric metric = Metric::kPain;
  double threshold = 9.0;
  int consecutive_days = 3;
  Action action = Action::kTerminate;

  void validate() const;
  std::string describe() const;
};

struct TrialDesign {
  std::vector<std::string> arms;  // placebo listed explicitly when present
  int n_periods = 6;
  int period_len_days = 14;
  int baseline_periods = 1;
  int washout_days = 0;
  bool adaptive = false;
  std::uint64_t seed = 0;
  std::vector<StoppingRule> stopping_rules;
  std::string placebo_id = "placebo";

  void validate() const;
  bool has_placebo() const;
  // Effects are measured against placebo when it is an arm, else baseline.
  std::string reference_arm() const;
};

inline constexpr const char* kBaselineArm = "baseline";

enum class PhaseKind { kBaseline, kWashout, kIntervention };

std::string_view phase_kind_name(PhaseKind kind);

struct Phase {
  PhaseKind kind = PhaseKind::kBaseline;
  std::string arm;      // intervention arm; empty while an adaptive slot is pending
  int start_day = 1;    // inclusive
  int end_day = 1;      // inclusive
  int period_index = -1;  // 0-based index among intervention periods

  friend bool operator==(const Phase&, const Phase&) = default;
};

struct Schedule {
  std::vector<Phase> phases;

  int last_day() const { return phases.empty() ? 0 : phases.back().end_day; }
  std::vector<std::string> intervention_sequence() const;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

Schedule design_trial(const TrialDesign& design);

struct Assignment {
  bool post_trial = false;
  Phase phase;  // meaningful only when !post_trial
};

Assignment current_assignment(const Schedule& schedule, int day);

enum class RecordSource { kSelfReport, kWearable };

std::string_view record_source_name(RecordSource source);

struct OutcomeRecord {
  std::string trial_id;
  int day = 1;
  bool primary_event = false;
  std::optional<int> pain;        // 0-10
  std::optional<int> disability;  // secondary, unscaled
  std::optional<bool> medication_use;
  RecordSource source = RecordSource::kSelfReport;

  friend bool operator==(const OutcomeRecord&, const OutcomeRecord&) = default;
};

struct AuditEntry {
  OutcomeRecord replaced;
  OutcomeRecord replacement;

  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

struct StoppingVerdict {
  enum class Kind { kContinue, kStop, kAlert };
  Kind kind = Kind::kContinue;
  std::string reason;
  int day = 0;

  friend bool operator==(const StoppingVerdict&, const StoppingVerdict&) = default;
};

struct ProviderAlert {
  int day = 0;
  std::string reason;

  friend bool operator==(const ProviderAlert&, const ProviderAlert&) = default;
};

enum class TrialStatus { kActive, kStopped, kCompleted };

std::string_view trial_status_name(TrialStatus status);

struct TrialState {
  std::string trial_id;
  std::string patient_id;
  TrialDesign design;
  Schedule schedule;
  std::vector<OutcomeRecord> records;  // sorted by (day, source)
  std::vector<AuditEntry> audit;
  std::vector<ProviderAlert> alerts;
  TrialStatus status = TrialStatus::kActive;
  std::string stop_reason;
  int stop_day = 0;
};

TrialState start_trial(std::string trial_id, std::string patient_id, TrialDesign design);

void validate_record(const TrialState& state, const OutcomeRecord& record);

struct IngestResult {
  StoppingVerdict verdict;
  bool replaced = false;
};

// Appends (or replaces, for a repeated day/source) and evaluates stopping
// rules. A terminate verdict moves the trial to stopped.
IngestResult ingest_outcome(TrialState& state, OutcomeRecord record);

// Pure: evaluates every rule against the latest recorded day. Terminate
// verdicts take precedence over alerts.
StoppingVerdict check_stopping(const TrialState& state);

void complete_trial(TrialState& state);

// Fills the next pending adaptive slot. Fails if none is pending or if the
// slot has already started receiving records.
void assign_pending_period(TrialState& state, const std::string& arm);
std::optional<int> next_pending_period(const TrialState& state);

struct PeriodSummary {
  std::string arm;  // kBaselineArm for baseline phases
  bool is_baseline = false;
  int period_index = -1;
  int start_day = 0;
  int end_day = 0;
  int period_len = 0;
  int event_days = 0;
  std::optional<double> mean_pain;
  int n_observed = 0;
  std::optional<std::string> previous_arm;

  friend bool operator==(const PeriodSummary&, const PeriodSummary&) = default;
};

// Baseline phases first, then intervention periods in schedule order. Pending
// adaptive slots are omitted. Missing days are not imputed.
std::vector<PeriodSummary> period_summary(const TrialState& state);

}  // namespace nof1
