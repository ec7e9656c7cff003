#pragma once

// Bayesian updating of individual treatment effects from N-of-1 period
// summaries, starting from population priors.
//
// Observation model for every intervention period with observed days:
//   y_p = event_days_p * len_p / n_obs_p
//   y_p ~ Normal(reference_level + effect[arm_p] (+ gamma * carry_p),
//                sigma_y^2 * len_p / n_obs_p)
// with effect[reference] = 0. Effects carry the population priors, the
// reference level a diffuse prior, gamma (optional) Normal(0, sigma_y^2).
// sigma_y is known, so the posterior is the exact Gaussian of this linear model.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nof1/priors.hpp"
#include "nof1/stats.hpp"
#include "nof1/trial.hpp"

namespace nof1 {

struct ArmPrior {
  std::string arm;
  Normal prior;
};

// Effect priors for every non-reference arm of `design`, taken from the
// patient's predicted candidates. Fails if an arm has no candidate.
std::vector<ArmPrior> arm_priors(const std::vector<InterventionCandidate>& candidates,
                                 const TrialDesign& design);

struct ArmPosterior {
  std::string arm;
  Normal effect;
  int n_periods_used = 0;

  friend bool operator==(const ArmPosterior&, const ArmPosterior&) = default;
};

struct PosteriorState {
  std::string reference_arm;
  std::vector<ArmPosterior> arms;  // non-reference arms, prior order
  Normal reference_level;
  int reference_periods_used = 0;
  double sigma_y = 1.0;
  int period_len_days = 14;
  std::optional<Normal> carryover;

  // Posterior effect of `arm`; the reference arm is the point mass at 0.
  Normal effect(const std::string& arm) const;
  bool has_arm(const std::string& arm) const;

  friend bool operator==(const PosteriorState&, const PosteriorState&) = default;
};

struct UpdateOptions {
  // Overrides the default diffuse reference prior. sd == 0 pins the level.
  std::optional<Normal> reference_prior;
  bool carryover = false;
};

inline constexpr double kReferencePriorScale = 10.0;  // reference sd = 10 * sigma_y

PosteriorState update_posterior(const std::vector<ArmPrior>& priors,
                                const std::string& reference_arm, double sigma_y,
                                const std::vector<PeriodSummary>& summaries,
                                int period_len_days, const UpdateOptions& options = {});

struct EffectQuery {
  enum class Unit { kPerPeriod, kPerMonth };
  std::string arm;
  double delta = 2.0;  // improvement threshold, event-days
  Unit unit = Unit::kPerMonth;
};

inline constexpr double kDaysPerMonth = 30.0;

double delta_per_period(const EffectQuery& query, int period_len_days);

// P(effect <= -delta_period) under the arm's posterior.
double prob_effect_at_least(const PosteriorState& posterior, const EffectQuery& query);

struct ArmProbability {
  std::string arm;
  double probability = 0.0;
};

// Probability of being optimal over all non-reference arms plus the reference
// arm (listed last, effect fixed at 0).
std::vector<ArmProbability> posterior_prob_optimal(const PosteriorState& posterior,
                                                   std::size_t samples, std::uint64_t seed);

std::string thompson_next_arm(const PosteriorState& posterior, std::uint64_t seed);

// Updates the posterior from the trial's current data and fills the next
// pending adaptive slot with a Thompson draw. Returns the assigned arm.
std::string thompson_assign_next(TrialState& state, const std::vector<ArmPrior>& priors,
                                 double sigma_y, std::uint64_t seed);

struct CarryoverFit {
  Normal gamma;
  PosteriorState posterior;
};

// Adds a shared additive carryover term for periods that follow an active
// (non-reference) arm. Needs >= n_arms + 2 fully observed periods and at
// least one arm switch.
CarryoverFit fit_carryover(const std::vector<ArmPrior>& priors, const std::string& reference_arm,
                           double sigma_y, const std::vector<PeriodSummary>& summaries,
                           int period_len_days, std::size_t n_arms);

// Convenience: priors, reference and period length taken from the trial.
PosteriorState posterior_for_trial(const TrialState& state, const std::vector<ArmPrior>& priors,
                                   double sigma_y, const UpdateOptions& options = {});

struct ReportOptions {
  std::vector<double> deltas_per_month{2.0};
  std::size_t prob_optimal_samples = 100000;
  std::uint64_t seed = 0;
};

struct ArmReport {
  std::string arm;
  bool is_reference = false;
  Normal effect;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double prob_optimal = 0.0;
  std::vector<std::pair<double, double>> prob_effect;  // (delta per month, probability)
  int n_periods = 0;
};

struct PeriodReport {
  PeriodSummary summary;
  int missing_days = 0;
};

struct TrialReport {
  std::string trial_id;
  std::string patient_id;
  std::string status;
  std::string stop_reason;
  int stop_day = 0;
  std::string reference_arm;
  double sigma_y = 0.0;
  int period_len_days = 0;
  std::vector<ArmReport> arms;
  std::vector<std::string> sequence_followed;
  std::vector<PeriodReport> periods;
  int total_missing_days = 0;
  std::vector<ProviderAlert> alerts;
  std::optional<Normal> carryover;
};

TrialReport generate_report(const PosteriorState& posterior, const TrialState& state,
                            const ReportOptions& options = {});

}  // namespace nof1
