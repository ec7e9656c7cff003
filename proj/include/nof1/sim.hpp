#pragma once

// Virtual-patient simulation: policy comparison (population-prior-only vs.
// hybrid prior + N-of-1 vs. oracle), case-study replication and the
// within- vs cross-cohort generalizability scenario.
//
// Every entry point is a pure function of (config, seed).

#include <cstdint>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nof1/inference.hpp"
#include "nof1/priors.hpp"
#include "nof1/trial.hpp"
#include "nof1/trigger.hpp"

namespace nof1::sim {

struct VirtualPatient {
  std::size_t index = 0;
  std::map<std::string, double> true_effects;  // event-days/period vs. baseline
  double baseline_rate = 5.6;  // event-days per period without treatment
  double residual_sd = 0.0;    // extra between-period jitter of the event rate
  double adherence = 1.0;      // per-day probability the assigned arm is taken
  std::string cohort = "A";

  void validate(int period_len) const;
  double effect(const std::string& arm, const std::string& placebo_id) const;
  // Expected event-days per period when assigned `arm` (placebo/baseline: 0 effect).
  double expected_events(const std::string& arm, int period_len,
                         const std::string& placebo_id = "placebo") const;
};

struct ArmPopulation {
  std::string id;
  double mean_effect = 0.0;
  double heterogeneity_sd = 0.0;
};

struct CohortSpec {
  std::string tag = "A";
  std::map<std::string, double> offsets;  // per-arm mean shift
};

struct PopulationSpec {
  std::vector<ArmPopulation> arms;
  std::vector<CohortSpec> cohorts{CohortSpec{}};  // patients assigned round-robin
  std::size_t n_patients = 1000;
  double baseline_rate = 7.0;
  double residual_sd = 0.0;
  double adherence = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<VirtualPatient> sample_population(const PopulationSpec& spec, int period_len = 14);

enum class PolicyKind { kLfmOnly, kHybrid, kOracle };

std::string_view policy_name(PolicyKind kind);

struct Policy {
  PolicyKind kind = PolicyKind::kHybrid;
  TriggerPolicy trigger;      // hybrid only
  TrialDesign design;         // hybrid template; arms are filled per patient
};

struct SimConfig {
  PriorModel model;
  PatientProfile profile;     // covariates shared by all virtual patients
  std::size_t sigma_samples = 10000;
  int horizon_periods = 26;   // periods over which outcomes are accounted
  std::size_t bootstrap_resamples = 1000;
};

struct PolicyRun {
  std::string selected;
  std::string true_best;
  bool correct = false;
  double realized_outcome = 0.0;    // expected event-days/period under `selected`
  double cumulative_outcome = 0.0;  // over the horizon, trial periods included
  bool trial_run = false;
  int periods_spent = 0;            // trial periods (baseline, washout included)
  std::vector<double> trace;        // expected event-days per horizon period
  std::optional<TriggerDecision> decision;
  std::optional<PosteriorState> posterior;
};

// The true best arm among the model's interventions (lowest effect).
std::string true_best_arm(const VirtualPatient& patient, const PriorModel& model);

PolicyRun run_policy(const VirtualPatient& patient, const Policy& policy, const SimConfig& config,
                     std::uint64_t seed);

struct Interval {
  double estimate = 0.0;
  double low = 0.0;
  double high = 0.0;
};

struct PolicyResult {
  PolicyKind kind = PolicyKind::kHybrid;
  Interval correct_selection_rate;
  Interval mean_realized_outcome;
  Interval mean_regret;  // cumulative horizon outcome minus the oracle's
  std::size_t trials_run = 0;
  long total_periods_spent = 0;
  std::vector<PolicyRun> runs;  // one per patient, population order
};

// Percentile bootstrap of the mean of `values`.
Interval bootstrap_mean(const std::vector<double>& values, std::size_t resamples,
                        std::uint64_t seed);

std::vector<PolicyResult> compare_policies(const PopulationSpec& spec,
                                           const std::vector<Policy>& policies,
                                           const SimConfig& config);

// Paired bootstrap of mean(correct_a - correct_b) over the same patients.
Interval correct_selection_difference(const PolicyResult& a, const PolicyResult& b,
                                      std::size_t resamples, std::uint64_t seed);

// Prior model centred on the population means, prior sd = max(het sd, floor).
PriorModel population_prior_model(const PopulationSpec& spec, double sigma_y,
                                  double sd_floor = 0.1);

// Three-arm population (means -2.0, -1.7, -1.4 event-days per period,
// shared heterogeneity sd) with lfm-only, hybrid and oracle policies over a
// 1 + 6 x 14-day design, sigma_y 1.5.
struct PolicyScenario {
  PopulationSpec population;
  SimConfig config;
  std::vector<Policy> policies;  // lfm_only, hybrid, oracle
};

PolicyScenario default_policy_scenario(double heterogeneity_sd, std::size_t n_patients,
                                       std::uint64_t seed);

// --- case study ------------------------------------------------------------

struct CaseStudyConfig {
  PriorModel model;                         // calibrated reference priors
  PatientProfile profile;
  std::map<std::string, double> true_effects;
  double baseline_rate = 5.6;               // 12 migraine days/month over 14 days
  TriggerPolicy trigger;
  TrialDesign design;                       // arms filled from the trigger decision
  double delta_per_month = 2.0;
  std::size_t sigma_samples = 100000;

  static CaseStudyConfig defaults();
};

struct CaseStudyReplicate {
  TriggerDecision decision;
  std::vector<std::string> sequence;
  std::map<std::string, double> prob_effect;    // P(reduction >= delta/month)
  std::map<std::string, double> prob_optimal;   // posterior
  std::map<std::string, double> prior_sigma;    // pre-trial
};

struct CaseStudyResult {
  std::vector<CaseStudyReplicate> replicates;
  // Per-arm quantiles (5%, 50%, 95%) of prob_effect across replicates.
  std::map<std::string, std::array<double, 3>> prob_effect_quantiles;
  double fraction(const std::string& arm, double threshold, bool at_least) const;
};

CaseStudyResult replicate_case_study(const CaseStudyConfig& config, std::size_t n_replicates,
                                     std::uint64_t seed);

// --- generalizability ------------------------------------------------------

struct GeneralizabilityConfig {
  std::size_t n_per_cohort = 2000;
  double mean_effect = -2.0;
  double heterogeneity_sd = 1.0;
  double responder_threshold = -2.0;  // responder iff true effect <= threshold
  double confounder_strength = 2.0;   // effect of the confounder in cohort A
  double confounder_offset = 3.0;     // mean of the confounder in cohort B at full shift
  double cohort_shift = 1.0;          // 0: B identical to A; 1: confounder inert in B
  double causal_weight = 0.0;         // effect of the observed causal covariate
  double proxy_noise = 0.5;           // noise of the confounder proxy feature
  int n_noise_features = 3;
  double wide_ci_half_width = 0.1;
};

struct GeneralizabilityResult {
  double within_cohort_auc = 0.5;
  double cross_cohort_auc = 0.5;
  double within_half_width = 0.0;  // Hanley-McNeil 95% half-widths
  double cross_half_width = 0.0;
  std::vector<std::string> flags;
};

GeneralizabilityResult generalizability_scenario(const GeneralizabilityConfig& config,
                                                 std::uint64_t seed);

// Hanley-McNeil standard error of an AUC.
double auc_standard_error(double auc, std::size_t n_pos, std::size_t n_neg);

}  // namespace nof1::sim
