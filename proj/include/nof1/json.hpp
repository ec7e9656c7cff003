#pragma once

// JSON wire format for every domain type. Top-level payloads carry
// "schema_version"; decoding failures surface as nof1::Error(kValidation).

#include <nlohmann/json.hpp>

#include "nof1/error.hpp"
#include "nof1/inference.hpp"
#include "nof1/priors.hpp"
#include "nof1/privacy.hpp"
#include "nof1/trial.hpp"
#include "nof1/trigger.hpp"

namespace nof1 {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Adds schema_version to an object payload.
Json versioned(Json payload);

// Parses text, mapping parse errors to kValidation.
Json parse_json(std::string_view text);
Json load_json_file(const std::string& path);

// Decodes with `from_json`, mapping library exceptions to kValidation.
template <class T>
T decode(const Json& j) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kValidation, e.what());
  }
}

void to_json(Json& j, const Normal& v);
void from_json(const Json& j, Normal& v);

void to_json(Json& j, const PatientProfile& v);
void from_json(const Json& j, PatientProfile& v);
void to_json(Json& j, const PriorModel& v);
void from_json(const Json& j, PriorModel& v);
void to_json(Json& j, const InterventionCandidate& v);
void from_json(const Json& j, InterventionCandidate& v);

void to_json(Json& j, const TriggerPolicy& v);
void from_json(const Json& j, TriggerPolicy& v);
void to_json(Json& j, const DecisionFlag& v);
void to_json(Json& j, const TriggerDecision& v);

void to_json(Json& j, const StoppingRule& v);
void from_json(const Json& j, StoppingRule& v);
void to_json(Json& j, const TrialDesign& v);
void from_json(const Json& j, TrialDesign& v);
void to_json(Json& j, const Phase& v);
void from_json(const Json& j, Phase& v);
void to_json(Json& j, const Schedule& v);
void from_json(const Json& j, Schedule& v);
void to_json(Json& j, const OutcomeRecord& v);
void from_json(const Json& j, OutcomeRecord& v);
void to_json(Json& j, const StoppingVerdict& v);
void to_json(Json& j, const ProviderAlert& v);
void from_json(const Json& j, ProviderAlert& v);
void to_json(Json& j, const AuditEntry& v);
void from_json(const Json& j, AuditEntry& v);
void to_json(Json& j, const TrialState& v);
void from_json(const Json& j, TrialState& v);
void to_json(Json& j, const PeriodSummary& v);

void to_json(Json& j, const ArmPosterior& v);
void to_json(Json& j, const PosteriorState& v);
void to_json(Json& j, const TrialReport& v);

void to_json(Json& j, const BudgetSpend& v);
void from_json(const Json& j, BudgetSpend& v);
void to_json(Json& j, const PrivacyBudget& v);
void from_json(const Json& j, PrivacyBudget& v);
void to_json(Json& j, const Contribution& v);
void from_json(const Json& j, Contribution& v);
void to_json(Json& j, const AggregateResult& v);
void to_json(Json& j, const MaskedShare& v);
void from_json(const Json& j, MaskedShare& v);

// Tab-separated per-arm table with a header row.
std::string report_table(const TrialReport& report);
// Tab-separated period table with a header row.
std::string period_table(const std::vector<PeriodSummary>& summaries);

}  // namespace nof1
