#include "nof1/json.hpp"

#include <fstream>
#include <sstream>

#include "nof1/error.hpp"

namespace nof1 {

Json versioned(Json payload) {
  payload["schema_version"] = kSchemaVersion;
  return payload;
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kValidation, std::string("malformed JSON: ") + e.what());
  }
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kNotFound, "cannot open '" + path + "'", "path");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str());
}

namespace {

template <class T>
void opt_to(Json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? Json(*v) : Json(nullptr);
}

template <class T>
std::optional<T> opt_from(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

void to_json(Json& j, const Normal& v) { j = Json{{"mean", v.mean}, {"sd", v.sd}}; }
void from_json(const Json& j, Normal& v) {
  v.mean = j.at("mean").get<double>();
  v.sd = j.at("sd").get<double>();
}

// --- priors ---

void to_json(Json& j, const PatientProfile& v) {
  j = Json{{"patient_id", v.patient_id},
           {"covariates", v.covariates},
           {"contraindicated", v.contraindicated},
           {"risk_tiers", v.risk_tiers},
           {"consent_aggregate", v.consent_aggregate},
           {"local_only", v.local_only}};
}
void from_json(const Json& j, PatientProfile& v) {
  v.patient_id = j.at("patient_id").get<std::string>();
  v.covariates = j.value("covariates", std::map<std::string, double>{});
  v.contraindicated = j.value("contraindicated", std::set<std::string>{});
  v.risk_tiers = j.value("risk_tiers", std::map<std::string, int>{});
  v.consent_aggregate = j.value("consent_aggregate", false);
  v.local_only = j.value("local_only", true);
}

void to_json(Json& j, const PriorModel& v) {
  Json ivs = Json::array();
  for (const auto& iv : v.interventions) {
    ivs.push_back({{"id", iv.id},
                   {"mean", iv.effect.mean},
                   {"sd", iv.effect.sd},
                   {"risk_tier", iv.risk_tier},
                   {"coefficients", iv.coefficients}});
  }
  j = Json{{"interventions", ivs},
           {"sigma_y", v.sigma_y},
           {"efficacy", {{"intercept", v.efficacy.intercept}, {"slope", v.efficacy.slope}}},
           {"sd_inflation", v.sd_inflation}};
}
void from_json(const Json& j, PriorModel& v) {
  v.interventions.clear();
  for (const auto& iv : j.at("interventions")) {
    InterventionPrior p;
    p.id = iv.at("id").get<std::string>();
    p.effect = {iv.at("mean").get<double>(), iv.at("sd").get<double>()};
    p.risk_tier = iv.value("risk_tier", 1);
    p.coefficients = iv.value("coefficients", std::map<std::string, double>{});
    v.interventions.push_back(std::move(p));
  }
  v.sigma_y = j.at("sigma_y").get<double>();
  if (auto it = j.find("efficacy"); it != j.end()) {
    v.efficacy.intercept = it->at("intercept").get<double>();
    v.efficacy.slope = it->at("slope").get<double>();
  }
  v.sd_inflation = j.value("sd_inflation", std::map<std::string, double>{});
}

void to_json(Json& j, const InterventionCandidate& v) {
  j = Json{{"intervention_id", v.intervention_id}, {"prior_mean", v.prior_mean},
           {"prior_sd", v.prior_sd},               {"efficacy", v.efficacy},
           {"risk_tier", v.risk_tier}};
  opt_to(j, "sigma", v.sigma);
}
void from_json(const Json& j, InterventionCandidate& v) {
  v.intervention_id = j.at("intervention_id").get<std::string>();
  v.prior_mean = j.value("prior_mean", 0.0);
  v.prior_sd = j.value("prior_sd", 1.0);
  v.efficacy = j.value("efficacy", 0.0);
  v.risk_tier = j.value("risk_tier", 1);
  v.sigma = opt_from<double>(j, "sigma");
}

// --- trigger ---

void to_json(Json& j, const TriggerPolicy& v) {
  j = Json{{"tau_include", v.tau_include},
           {"tau_direct", v.tau_direct},
           {"max_arms_per_trial", v.max_arms_per_trial},
           {"include_placebo", v.include_placebo},
           {"placebo_id", v.placebo_id}};
}
void from_json(const Json& j, TriggerPolicy& v) {
  TriggerPolicy d;
  v.tau_include = j.value("tau_include", d.tau_include);
  v.tau_direct = j.value("tau_direct", d.tau_direct);
  v.max_arms_per_trial = j.value("max_arms_per_trial", d.max_arms_per_trial);
  v.include_placebo = j.value("include_placebo", d.include_placebo);
  v.placebo_id = j.value("placebo_id", d.placebo_id);
}

void to_json(Json& j, const DecisionFlag& v) {
  j = Json{{"code", v.code}, {"intervention_id", v.intervention_id}, {"note", v.note}};
}

void to_json(Json& j, const TriggerDecision& v) {
  Json survivors = Json::array();
  for (const auto& [id, s] : v.survivors) {
    survivors.push_back({{"intervention_id", id}, {"sigma", s}});
  }
  j = Json{{"kind", decision_kind_name(v.kind)},
           {"summary", describe(v)},
           {"recommended", v.recommended},
           {"validate", v.validate},
           {"include_placebo", v.include_placebo},
           {"flags", v.flags},
           {"survivors", survivors}};
}

// --- trial ---

void to_json(Json& j, const StoppingRule& v) {
  j = Json{{"metric", v.metric == StoppingRule::Metric::kPain ? "pain" : "primary_event"},
           {"threshold", v.threshold},
           {"consecutive_days", v.consecutive_days},
           {"action", v.action == StoppingRule::Action::kTerminate ? "terminate" : "alert"}};
}
void from_json(const Json& j, StoppingRule& v) {
  const auto metric = j.at("metric").get<std::string>();
  if (metric == "pain") {
    v.metric = StoppingRule::Metric::kPain;
  } else if (metric == "primary_event") {
    v.metric = StoppingRule::Metric::kPrimaryEvent;
  } else {
    fail(ErrorCode::kValidation, "unknown stopping metric '" + metric + "'",
         "stopping_rules.metric");
  }
  v.threshold = j.at("threshold").get<double>();
  v.consecutive_days = j.at("consecutive_days").get<int>();
  const auto action = j.value("action", std::string("terminate"));
  if (action == "terminate") {
    v.action = StoppingRule::Action::kTerminate;
  } else if (action == "alert") {
    v.action = StoppingRule::Action::kAlert;
  } else {
    fail(ErrorCode::kValidation, "unknown stopping action '" + action + "'",
         "stopping_rules.action");
  }
}

void to_json(Json& j, const TrialDesign& v) {
  j = Json{{"arms", v.arms},
           {"n_periods", v.n_periods},
           {"period_len_days", v.period_len_days},
           {"baseline_periods", v.baseline_periods},
           {"washout_days", v.washout_days},
           {"adaptive", v.adaptive},
           {"seed", v.seed},
           {"stopping_rules", v.stopping_rules},
           {"placebo_id", v.placebo_id}};
}
void from_json(const Json& j, TrialDesign& v) {
  TrialDesign d;
  v.arms = j.at("arms").get<std::vector<std::string>>();
  v.n_periods = j.value("n_periods", d.n_periods);
  v.period_len_days = j.value("period_len_days", d.period_len_days);
  v.baseline_periods = j.value("baseline_periods", d.baseline_periods);
  v.washout_days = j.value("washout_days", d.washout_days);
  v.adaptive = j.value("adaptive", d.adaptive);
  v.seed = j.value("seed", d.seed);
  v.stopping_rules = j.value("stopping_rules", std::vector<StoppingRule>{});
  v.placebo_id = j.value("placebo_id", d.placebo_id);
}

void to_json(Json& j, const Phase& v) {
  j = Json{{"kind", phase_kind_name(v.kind)},
           {"arm", v.arm},
           {"start_day", v.start_day},
           {"end_day", v.end_day},
           {"period_index", v.period_index}};
}
void from_json(const Json& j, Phase& v) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "baseline") {
    v.kind = PhaseKind::kBaseline;
  } else if (kind == "washout") {
    v.kind = PhaseKind::kWashout;
  } else if (kind == "intervention") {
    v.kind = PhaseKind::kIntervention;
  } else {
    fail(ErrorCode::kValidation, "unknown phase kind '" + kind + "'", "phases.kind");
  }
  v.arm = j.value("arm", std::string());
  v.start_day = j.at("start_day").get<int>();
  v.end_day = j.at("end_day").get<int>();
  v.period_index = j.value("period_index", -1);
}

void to_json(Json& j, const Schedule& v) { j = Json{{"phases", v.phases}}; }
void from_json(const Json& j, Schedule& v) {
  v.phases = j.at("phases").get<std::vector<Phase>>();
}

void to_json(Json& j, const OutcomeRecord& v) {
  j = Json{{"trial_id", v.trial_id},
           {"day", v.day},
           {"primary_event", v.primary_event},
           {"source", record_source_name(v.source)}};
  opt_to(j, "pain", v.pain);
  opt_to(j, "disability", v.disability);
  opt_to(j, "medication_use", v.medication_use);
}
void from_json(const Json& j, OutcomeRecord& v) {
  v.trial_id = j.value("trial_id", std::string());
  v.day = j.at("day").get<int>();
  v.primary_event = j.at("primary_event").get<bool>();
  v.pain = opt_from<int>(j, "pain");
  v.disability = opt_from<int>(j, "disability");
  v.medication_use = opt_from<bool>(j, "medication_use");
  const auto source = j.value("source", std::string("self_report"));
  if (source == "self_report") {
    v.source = RecordSource::kSelfReport;
  } else if (source == "wearable") {
    v.source = RecordSource::kWearable;
  } else {
    fail(ErrorCode::kValidation, "unknown record source '" + source + "'", "record.source");
  }
}

void to_json(Json& j, const StoppingVerdict& v) {
  const char* kind = v.kind == StoppingVerdict::Kind::kContinue ? "continue"
                     : v.kind == StoppingVerdict::Kind::kStop   ? "stop"
                                                                : "alert";
  j = Json{{"verdict", kind}, {"reason", v.reason}, {"day", v.day}};
}

void to_json(Json& j, const ProviderAlert& v) { j = Json{{"day", v.day}, {"reason", v.reason}}; }
void from_json(const Json& j, ProviderAlert& v) {
  v.day = j.at("day").get<int>();
  v.reason = j.at("reason").get<std::string>();
}

void to_json(Json& j, const AuditEntry& v) {
  j = Json{{"replaced", v.replaced}, {"replacement", v.replacement}};
}
void from_json(const Json& j, AuditEntry& v) {
  v.replaced = j.at("replaced").get<OutcomeRecord>();
  v.replacement = j.at("replacement").get<OutcomeRecord>();
}

void to_json(Json& j, const TrialState& v) {
  j = Json{{"trial_id", v.trial_id},   {"patient_id", v.patient_id},
           {"design", v.design},       {"schedule", v.schedule},
           {"records", v.records},     {"audit", v.audit},
           {"alerts", v.alerts},       {"status", trial_status_name(v.status)},
           {"stop_reason", v.stop_reason}, {"stop_day", v.stop_day}};
}
void from_json(const Json& j, TrialState& v) {
  v.trial_id = j.at("trial_id").get<std::string>();
  v.patient_id = j.at("patient_id").get<std::string>();
  v.design = j.at("design").get<TrialDesign>();
  v.schedule = j.at("schedule").get<Schedule>();
  v.records = j.at("records").get<std::vector<OutcomeRecord>>();
  v.audit = j.at("audit").get<std::vector<AuditEntry>>();
  v.alerts = j.at("alerts").get<std::vector<ProviderAlert>>();
  const auto status = j.at("status").get<std::string>();
  v.status = status == "active"    ? TrialStatus::kActive
             : status == "stopped" ? TrialStatus::kStopped
                                   : TrialStatus::kCompleted;
  v.stop_reason = j.at("stop_reason").get<std::string>();
  v.stop_day = j.at("stop_day").get<int>();
}

void to_json(Json& j, const PeriodSummary& v) {
  j = Json{{"arm", v.arm},
           {"is_baseline", v.is_baseline},
           {"period_index", v.period_index},
           {"start_day", v.start_day},
           {"end_day", v.end_day},
           {"period_len", v.period_len},
           {"event_days", v.event_days},
           {"n_observed", v.n_observed}};
  opt_to(j, "mean_pain", v.mean_pain);
  opt_to(j, "previous_arm", v.previous_arm);
}

// --- inference ---

void to_json(Json& j, const ArmPosterior& v) {
  j = Json{{"arm", v.arm}, {"effect", v.effect}, {"n_periods_used", v.n_periods_used}};
}

void to_json(Json& j, const PosteriorState& v) {
  j = Json{{"reference_arm", v.reference_arm},
           {"arms", v.arms},
           {"reference_level", v.reference_level},
           {"reference_periods_used", v.reference_periods_used},
           {"sigma_y", v.sigma_y},
           {"period_len_days", v.period_len_days}};
  opt_to(j, "carryover", v.carryover);
}

void to_json(Json& j, const TrialReport& v) {
  Json arms = Json::array();
  for (const auto& a : v.arms) {
    Json pe = Json::array();
    for (const auto& [delta, p] : a.prob_effect) {
      pe.push_back({{"delta_per_month", delta}, {"probability", p}});
    }
    arms.push_back({{"arm", a.arm},
                    {"is_reference", a.is_reference},
                    {"effect_mean", a.effect.mean},
                    {"effect_sd", a.effect.sd},
                    {"ci95_low", a.ci_low},
                    {"ci95_high", a.ci_high},
                    {"prob_optimal", a.prob_optimal},
                    {"prob_effect_at_least", pe},
                    {"n_periods", a.n_periods}});
  }
  Json periods = Json::array();
  for (const auto& p : v.periods) {
    Json pj = p.summary;
    pj["missing_days"] = p.missing_days;
    periods.push_back(std::move(pj));
  }
  j = Json{{"trial_id", v.trial_id},
           {"patient_id", v.patient_id},
           {"status", v.status},
           {"stop_reason", v.stop_reason},
           {"stop_day", v.stop_day},
           {"reference_arm", v.reference_arm},
           {"sigma_y", v.sigma_y},
           {"period_len_days", v.period_len_days},
           {"arms", arms},
           {"sequence_followed", v.sequence_followed},
           {"periods", periods},
           {"total_missing_days", v.total_missing_days},
           {"alerts", v.alerts}};
  opt_to(j, "carryover", v.carryover);
}

// --- privacy ---

void to_json(Json& j, const BudgetSpend& v) {
  j = Json{{"epsilon", v.epsilon}, {"delta", v.delta}, {"timestamp", v.timestamp}};
}
void from_json(const Json& j, BudgetSpend& v) {
  v.epsilon = j.at("epsilon").get<double>();
  v.delta = j.at("delta").get<double>();
  v.timestamp = j.value("timestamp", std::int64_t{0});
}

void to_json(Json& j, const PrivacyBudget& v) {
  j = Json{{"epsilon", v.epsilon()},
           {"delta", v.delta()},
           {"clip", v.clip()},
           {"spent", v.spent()},
           {"remaining_epsilon", v.remaining_epsilon()},
           {"remaining_delta", v.remaining_delta()}};
}
void from_json(const Json& j, PrivacyBudget& v) {
  v = PrivacyBudget::restore(j.at("epsilon").get<double>(), j.at("delta").get<double>(),
                             j.at("clip").get<double>(),
                             j.value("spent", std::vector<BudgetSpend>{}));
}

void to_json(Json& j, const Contribution& v) {
  j = Json{{"intervention_id", v.intervention_id},
           {"estimate", v.estimate},
           {"noise_sd", v.noise_sd},
           {"count", v.count},
           {"consent", v.consent}};
}
void from_json(const Json& j, Contribution& v) {
  v.intervention_id = j.at("intervention_id").get<std::string>();
  v.estimate = j.at("estimate").get<double>();
  v.noise_sd = j.at("noise_sd").get<double>();
  v.count = j.value("count", 1);
  v.consent = j.at("consent").get<bool>();
}

void to_json(Json& j, const AggregateResult& v) {
  Json rel = Json::array();
  for (const auto& r : v.released) {
    rel.push_back({{"intervention_id", r.intervention_id}, {"mean", r.mean}, {"count", r.count}});
  }
  j = Json{{"released", rel}, {"withheld", v.withheld}};
}

void to_json(Json& j, const MaskedShare& v) {
  j = Json{{"client_id", v.client_id}, {"masked", v.masked}, {"peers", v.peers}};
}
void from_json(const Json& j, MaskedShare& v) {
  v.client_id = j.at("client_id").get<std::uint32_t>();
  v.masked = j.at("masked").get<std::vector<std::uint64_t>>();
  v.peers = j.at("peers").get<std::vector<std::uint32_t>>();
}

// --- tables ---

namespace {
std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}
}  // namespace

std::string report_table(const TrialReport& report) {
  std::ostringstream out;
  out << "arm\teffect_mean\teffect_sd\tci95_low\tci95_high\tprob_optimal";
  if (!report.arms.empty()) {
    for (const auto& [delta, p] : report.arms.front().prob_effect) {
      out << "\tp_reduction_ge_" << delta << "_per_month";
    }
  }
  out << "\tn_periods\n";
  for (const auto& a : report.arms) {
    out << a.arm << '\t' << fmt(a.effect.mean) << '\t' << fmt(a.effect.sd) << '\t'
        << fmt(a.ci_low) << '\t' << fmt(a.ci_high) << '\t' << fmt(a.prob_optimal);
    for (const auto& [delta, p] : a.prob_effect) out << '\t' << fmt(p);
    out << '\t' << a.n_periods << '\n';
  }
  return out.str();
}

std::string period_table(const std::vector<PeriodSummary>& summaries) {
  std::ostringstream out;
  out << "period\tarm\tstart_day\tend_day\tevent_days\tn_observed\tmean_pain\tprevious_arm\n";
  for (const auto& s : summaries) {
    out << (s.is_baseline ? std::string("B") : std::to_string(s.period_index + 1)) << '\t'
        << s.arm << '\t' << s.start_day << '\t' << s.end_day << '\t' << s.event_days << '\t'
        << s.n_observed << '\t' << (s.mean_pain ? fmt(*s.mean_pain) : std::string("NA")) << '\t'
        << s.previous_arm.value_or("none") << '\n';
  }
  return out.str();
}

}  // namespace nof1
