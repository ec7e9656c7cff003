#pragma once

// Uncertainty-triggered validation policy: turns ranked candidates into a
// direct recommendation, an N-of-1 validation set, or a no-action flag.

#include <optional>
#include <string>
#include <vector>

#include "nof1/priors.hpp"

namespace nof1 {

struct TriggerPolicy {
  double tau_include = 0.25;  // sigma needed to enter a validation trial
  double tau_direct = 0.95;   // sigma needed to recommend without a trial
  std::size_t max_arms_per_trial = 2;  // active arms; placebo is extra
  bool include_placebo = true;
  std::string placebo_id = "placebo";

  void validate() const;
};

struct DecisionFlag {
  std::string code;  // e.g. "clinician_review", "clinical_oversight_required"
  std::string intervention_id;  // empty for decision-level flags
  std::string note;

  friend bool operator==(const DecisionFlag&, const DecisionFlag&) = default;
};

enum class DecisionKind { kDirectRecommend, kValidate, kNoAction };

std::string_view decision_kind_name(DecisionKind kind);

struct TriggerDecision {
  DecisionKind kind = DecisionKind::kNoAction;
  std::string recommended;              // kDirectRecommend only
  std::vector<std::string> validate;    // kValidate only, in candidate order
  bool include_placebo = false;
  std::vector<DecisionFlag> flags;
  // Survivors of the safety gates with sigma renormalized over survivors.
  std::vector<std::pair<std::string, double>> survivors;
};

struct RiskGateResult {
  bool allowed = false;
  std::optional<DecisionFlag> flag;  // oversight note for tier 2
  std::string reason;                // denial reason for tier 3
};

// Tier 1: allow. Tier 2: allow with clinical oversight. Tier 3: deny.
RiskGateResult gate_risk(const std::string& intervention_id, int risk_tier,
                         const TriggerPolicy& policy);

struct ContraindicationResult {
  bool ok = true;
  std::vector<std::string> violations;
};

// Exact, case-sensitive match against the profile's contraindication list.
ContraindicationResult check_contraindications(const std::string& intervention_id,
                                               const PatientProfile& profile);

TriggerDecision decide(const std::vector<InterventionCandidate>& candidates,
                       const TriggerPolicy& policy, const PatientProfile& profile);

// Renders e.g. "Validate{magnesium, sleep_regularity}".
std::string describe(const TriggerDecision& decision);

}  // namespace nof1
