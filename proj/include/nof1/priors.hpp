#pragma once

// Surrogate population prior model. Stands in for a population-trained
// foundation model: maps a patient profile to per-intervention effect priors
// and ranks them by predicted efficacy and probability of being optimal.
//
// Effect scale throughout: change in primary-outcome event-days per period
// relative to placebo/baseline. Negative values are improvements.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "nof1/stats.hpp"

namespace nof1 {

struct PatientProfile {
  std::string patient_id;
  // Categorical covariates are encoded as 0/1 indicators (e.g. "sex_female").
  std::map<std::string, double> covariates;
  std::set<std::string> contraindicated;
  // Per-patient risk-tier overrides keyed by intervention id.
  std::map<std::string, int> risk_tiers;
  bool consent_aggregate = false;
  // Raw records of a local-only patient never leave the device-mode process.
  bool local_only = true;

  void validate() const;
};

// Efficacy score = clamp(intercept + slope * prior_mean, 0, 1). The slope is
// negative for the usual "lower is better" outcome scale.
struct EfficacyTransform {
  double intercept = 0.5;
  double slope = -0.1;

  double apply(double prior_mean) const;
};

struct InterventionPrior {
  std::string id;
  Normal effect;
  int risk_tier = 1;
  std::map<std::string, double> coefficients;  // covariate name -> shift
};

struct PriorModel {
  std::vector<InterventionPrior> interventions;
  double sigma_y = 1.5;  // residual sd of period event-day counts
  EfficacyTransform efficacy;
  // Multiplicative prior-sd inflation applied when the named indicator
  // covariate is non-zero (elevated uncertainty for underrepresented groups).
  std::map<std::string, double> sd_inflation;

  void validate() const;
  const InterventionPrior* find(const std::string& id) const;
};

struct InterventionCandidate {
  std::string intervention_id;
  double prior_mean = 0.0;
  double prior_sd = 1.0;
  double efficacy = 0.0;
  std::optional<double> sigma;  // probability of being optimal
  int risk_tier = 1;

  Normal prior() const { return {prior_mean, prior_sd}; }
};

// Candidates ordered by efficacy, descending (model order breaks ties).
std::vector<InterventionCandidate> predict_candidates(const PriorModel& model,
                                                      const PatientProfile& profile);

inline constexpr std::size_t kMinProbOptimalSamples = 1000;

// Monte Carlo probability that each candidate has the minimum effect.
// Ties go to the lowest index. The returned values sum to exactly 1.
std::vector<double> prob_optimal(std::span<const Normal> candidates,
                                 std::size_t samples, std::uint64_t seed);

// Same estimator, but sd == 0 is allowed and treated as a point mass. Used for
// posteriors that include the reference arm (effect fixed at 0).
std::vector<double> prob_optimal_with_point_masses(std::span<const Normal> candidates,
                                                   std::size_t samples,
                                                   std::uint64_t seed);

// predict_candidates followed by prob_optimal over the candidate priors.
std::vector<InterventionCandidate> rank_candidates(const PriorModel& model,
                                                   const PatientProfile& profile,
                                                   std::size_t samples,
                                                   std::uint64_t seed);

}  // namespace nof1
