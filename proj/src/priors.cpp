#include "nof1/priors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nof1/error.hpp"

namespace nof1 {

void PatientProfile::validate() const {
  if (auto it = covariates.find("baseline_rate"); it != covariates.end()) {
    require(it->second >= 0.0, ErrorCode::kValidation,
            "baseline outcome rate must be non-negative", "covariates.baseline_rate");
  }
  for (const auto& [name, value] : covariates) {
    require(std::isfinite(value), ErrorCode::kValidation,
            "covariate '" + name + "' is not finite", "covariates." + name);
  }
  for (const auto& [id, tier] : risk_tiers) {
    require(tier >= 1 && tier <= 3, ErrorCode::kValidation,
            "risk tier for '" + id + "' must be 1, 2 or 3", "risk_tiers." + id);
  }
}

double EfficacyTransform::apply(double prior_mean) const {
  return std::clamp(intercept + slope * prior_mean, 0.0, 1.0);
}

void PriorModel::validate() const {
  require(!interventions.empty(), ErrorCode::kInvalidArgument,
          "prior model has no interventions", "interventions");
  require(sigma_y > 0.0 && std::isfinite(sigma_y), ErrorCode::kInvalidArgument,
          "sigma_y must be positive", "sigma_y");
  require(efficacy.slope != 0.0 && std::isfinite(efficacy.slope), ErrorCode::kInvalidArgument,
          "efficacy transform must be strictly monotone", "efficacy.slope");
  std::set<std::string> seen;
  for (const auto& iv : interventions) {
    require(!iv.id.empty(), ErrorCode::kInvalidArgument, "intervention id is empty",
            "interventions.id");
    require(seen.insert(iv.id).second, ErrorCode::kInvalidArgument,
            "duplicate intervention '" + iv.id + "'", "interventions." + iv.id);
    require(iv.effect.sd > 0.0 && std::isfinite(iv.effect.sd), ErrorCode::kInvalidArgument,
            "prior sd for '" + iv.id + "' must be positive", "interventions." + iv.id + ".sd");
    require(std::isfinite(iv.effect.mean), ErrorCode::kInvalidArgument,
            "prior mean for '" + iv.id + "' is not finite", "interventions." + iv.id + ".mean");
    require(iv.risk_tier >= 1 && iv.risk_tier <= 3, ErrorCode::kInvalidArgument,
            "risk tier for '" + iv.id + "' must be 1, 2 or 3",
            "interventions." + iv.id + ".risk_tier");
  }
  for (const auto& [flag, factor] : sd_inflation) {
    require(factor > 0.0 && std::isfinite(factor), ErrorCode::kInvalidArgument,
            "sd inflation factor for '" + flag + "' must be positive", "sd_inflation." + flag);
  }
}

const InterventionPrior* PriorModel::find(const std::string& id) const {
  for (const auto& iv : interventions) {
    if (iv.id == id) return &iv;
  }
  return nullptr;
}

std::vector<InterventionCandidate> predict_candidates(const PriorModel& model,
                                                      const PatientProfile& profile) {
  model.validate();
  profile.validate();

  double inflation = 1.0;
  for (const auto& [flag, factor] : model.sd_inflation) {
    auto it = profile.covariates.find(flag);
    if (it != profile.covariates.end() && it->second != 0.0) inflation *= factor;
  }

  std::vector<InterventionCandidate> out;
  out.reserve(model.interventions.size());
  for (const auto& iv : model.interventions) {
    double mean = iv.effect.mean;
    for (const auto& [name, coef] : iv.coefficients) {
      auto it = profile.covariates.find(name);
      if (it == profile.covariates.end()) {
        fail(ErrorCode::kValidation,
             "profile is missing covariate '" + name + "' required by '" + iv.id + "'",
             "covariates." + name);
      }
      mean += coef * it->second;
    }
    InterventionCandidate c;
    c.intervention_id = iv.id;
    c.prior_mean = mean;
    c.prior_sd = iv.effect.sd * inflation;
    c.efficacy = model.efficacy.apply(mean);
    auto tier = profile.risk_tiers.find(iv.id);
    c.risk_tier = tier != profile.risk_tiers.end() ? tier->second : iv.risk_tier;
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.efficacy > b.efficacy;
  });
  return out;
}

namespace {

std::vector<double> monte_carlo_argmin(std::span<const Normal> candidates,
                                       std::size_t samples, std::uint64_t seed) {
  const std::size_t k = candidates.size();
  std::vector<std::size_t> wins(k, 0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t best = 0;
    double best_value = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double v = candidates[i].mean + candidates[i].sd * z(rng);
      if (i == 0 || v < best_value) {
        best = i;
        best_value = v;
      }
    }
    ++wins[best];
  }

  std::vector<double> sigma(k);
  double assigned = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    sigma[i] = static_cast<double>(wins[i]) / static_cast<double>(samples);
    assigned += sigma[i];
  }
  // The last share absorbs rounding so the sequential sum is exactly 1.
  sigma[k - 1] = std::max(0.0, 1.0 - assigned);
  return sigma;
}

void check_inputs(std::span<const Normal> candidates, std::size_t samples, bool allow_zero_sd) {
  require(candidates.size() >= 2, ErrorCode::kInvalidArgument,
          "probability of being optimal needs at least 2 candidates", "candidates");
  require(samples >= kMinProbOptimalSamples, ErrorCode::kInvalidArgument,
          "at least 1000 Monte Carlo samples are required", "samples");
  for (const auto& c : candidates) {
    require(std::isfinite(c.mean), ErrorCode::kInvalidArgument, "candidate mean is not finite",
            "candidates.mean");
    const bool sd_ok = allow_zero_sd ? c.sd >= 0.0 : c.sd > 0.0;
    require(sd_ok && std::isfinite(c.sd), ErrorCode::kInvalidArgument,
            "candidate sd must be positive", "candidates.sd");
  }
}

}  // namespace

std::vector<double> prob_optimal(std::span<const Normal> candidates, std::size_t samples,
                                 std::uint64_t seed) {
  check_inputs(candidates, samples, false);
  return monte_carlo_argmin(candidates, samples, seed);
}

std::vector<double> prob_optimal_with_point_masses(std::span<const Normal> candidates,
                                                   std::size_t samples, std::uint64_t seed) {
  check_inputs(candidates, samples, true);
  return monte_carlo_argmin(candidates, samples, seed);
}

std::vector<InterventionCandidate> rank_candidates(const PriorModel& model,
                                                   const PatientProfile& profile,
                                                   std::size_t samples, std::uint64_t seed) {
  auto candidates = predict_candidates(model, profile);
  if (candidates.size() == 1) {
    candidates.front().sigma = 1.0;
    return candidates;
  }
  std::vector<Normal> priors;
  priors.reserve(candidates.size());
  for (const auto& c : candidates) priors.push_back(c.prior());
  const auto sigma = prob_optimal(priors, samples, seed);
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].sigma = sigma[i];
  return candidates;
}

}  // namespace nof1
