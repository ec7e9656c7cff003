#include "nof1/trigger.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nof1/error.hpp"

namespace nof1 {

void TriggerPolicy::validate() const {
  require(tau_include > 0.0 && tau_include < tau_direct && tau_direct <= 1.0,
          ErrorCode::kInvalidArgument, "thresholds must satisfy 0 < tau_include < tau_direct <= 1",
          "policy.tau_include");
  require(max_arms_per_trial >= 2, ErrorCode::kInvalidArgument,
          "max_arms_per_trial must be at least 2", "policy.max_arms_per_trial");
}

std::string_view decision_kind_name(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::kDirectRecommend: return "direct_recommend";
    case DecisionKind::kValidate: return "validate";
    case DecisionKind::kNoAction: return "no_action";
  }
  return "no_action";
}

RiskGateResult gate_risk(const std::string& intervention_id, int risk_tier,
                         const TriggerPolicy& /*policy*/) {
  switch (risk_tier) {
    case 1:
      return {true, std::nullopt, {}};
    case 2:
      return {true,
              DecisionFlag{"clinical_oversight_required", intervention_id,
                           "tier 2: N-of-1 only with healthcare provider oversight"},
              {}};
    case 3:
      return {false, std::nullopt,
              "tier 3: hypothesis only, RCT evidence required; no self-experimentation"};
    default:
      fail(ErrorCode::kInvalidArgument, "unknown risk tier " + std::to_string(risk_tier),
           "risk_tier");
  }
}

ContraindicationResult check_contraindications(const std::string& intervention_id,
                                               const PatientProfile& profile) {
  if (profile.contraindicated.contains(intervention_id)) return {false, {intervention_id}};
  return {};
}

TriggerDecision decide(const std::vector<InterventionCandidate>& candidates,
                       const TriggerPolicy& policy, const PatientProfile& profile) {
  require(!candidates.empty(), ErrorCode::kInvalidArgument, "no candidates to decide on",
          "candidates");
  policy.validate();

  double total = 0.0;
  for (const auto& c : candidates) {
    require(c.sigma.has_value(), ErrorCode::kInvalidArgument,
            "candidate '" + c.intervention_id + "' has no sigma", "candidates.sigma");
    require(*c.sigma >= 0.0 && *c.sigma <= 1.0, ErrorCode::kInvalidArgument,
            "sigma must lie in [0, 1]", "candidates.sigma");
    total += *c.sigma;
  }
  require(std::abs(total - 1.0) <= 1e-6, ErrorCode::kInvalidArgument,
          "candidate sigmas must sum to 1", "candidates.sigma");

  TriggerDecision out;

  struct Survivor {
    std::size_t rank;
    const InterventionCandidate* c;
  };
  std::vector<Survivor> survivors;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    auto gate = gate_risk(c.intervention_id, c.risk_tier, policy);
    if (!gate.allowed) {
      out.flags.push_back({"excluded_by_risk_tier", c.intervention_id, gate.reason});
      continue;
    }
    auto contra = check_contraindications(c.intervention_id, profile);
    if (!contra.ok) {
      out.flags.push_back({"excluded_contraindicated", c.intervention_id,
                           "listed in the patient's contraindications"});
      continue;
    }
    if (gate.flag) out.flags.push_back(*gate.flag);
    survivors.push_back({i, &c});
  }

  double survivor_mass = 0.0;
  for (const auto& s : survivors) survivor_mass += *s.c->sigma;
  for (const auto& s : survivors) {
    const double renorm = survivor_mass > 0.0 ? *s.c->sigma / survivor_mass
                                              : 1.0 / static_cast<double>(survivors.size());
    out.survivors.emplace_back(s.c->intervention_id, renorm);
  }

  if (survivors.empty()) {
    out.kind = DecisionKind::kNoAction;
    out.flags.push_back({"clinician_review", "", "no candidate passed the safety gates"});
    return out;
  }

  // Stable: earlier (higher-ranked) candidates win sigma ties.
  std::vector<std::size_t> by_sigma(survivors.size());
  std::iota(by_sigma.begin(), by_sigma.end(), 0);
  std::stable_sort(by_sigma.begin(), by_sigma.end(), [&](std::size_t a, std::size_t b) {
    return out.survivors[a].second > out.survivors[b].second;
  });
  const double top_sigma = out.survivors[by_sigma.front()].second;

  if (top_sigma < 2.0 * policy.tau_include) {
    out.flags.push_back({"low_reliability", out.survivors[by_sigma.front()].first,
                         "top probability of being optimal is below twice the inclusion "
                         "threshold; review recommended"});
  }

  if (top_sigma >= policy.tau_direct) {
    out.kind = DecisionKind::kDirectRecommend;
    out.recommended = out.survivors[by_sigma.front()].first;
    return out;
  }

  std::vector<std::size_t> chosen;
  for (std::size_t idx : by_sigma) {
    if (out.survivors[idx].second < policy.tau_include) break;
    if (chosen.size() == policy.max_arms_per_trial) break;
    chosen.push_back(idx);
  }
  if (chosen.empty()) {
    out.kind = DecisionKind::kNoAction;
    out.flags.push_back({"clinician_review", "",
                         "no candidate reaches the inclusion threshold"});
    return out;
  }
  std::sort(chosen.begin(), chosen.end());
  out.kind = DecisionKind::kValidate;
  out.include_placebo = policy.include_placebo;
  for (std::size_t idx : chosen) out.validate.push_back(out.survivors[idx].first);
  return out;
}

std::string describe(const TriggerDecision& decision) {
  switch (decision.kind) {
    case DecisionKind::kDirectRecommend:
      return "DirectRecommend{" + decision.recommended + "}";
    case DecisionKind::kNoAction:
      return "NoAction";
    case DecisionKind::kValidate: {
      std::string s = "Validate{";
      for (std::size_t i = 0; i < decision.validate.size(); ++i) {
        if (i) s += ", ";
        s += decision.validate[i];
      }
      return s + "}";
    }
  }
  return {};
}

}  // namespace nof1
