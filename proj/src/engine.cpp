#include "nof1/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

#include "nof1/stats.hpp"

namespace nof1 {

namespace fs = std::filesystem;

std::string_view service_mode_name(ServiceMode mode) {
  return mode == ServiceMode::kDevice ? "device" : "aggregate";
}

ServiceMode parse_service_mode(std::string_view text) {
  if (text == "device") return ServiceMode::kDevice;
  if (text == "aggregate") return ServiceMode::kAggregate;
  fail(ErrorCode::kValidation, "mode must be 'device' or 'aggregate'", "mode");
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const Json& j, const fs::path& base_dir) {
  ServiceConfig c;
  try {
    if (j.contains("mode")) c.mode = parse_service_mode(j.at("mode").get<std::string>());
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    if (j.contains("data_dir")) c.data_dir = resolve(j.at("data_dir").get<std::string>(), base_dir);
    if (j.contains("prior_model")) {
      const auto& pm = j.at("prior_model");
      c.model = pm.is_string()
                    ? decode<PriorModel>(load_json_file(resolve(pm.get<std::string>(), base_dir)))
                    : decode<PriorModel>(pm);
    }
    if (j.contains("trigger_policy")) c.policy = decode<TriggerPolicy>(j.at("trigger_policy"));
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      c.budget_epsilon = b.value("epsilon", c.budget_epsilon);
      c.budget_delta = b.value("delta", c.budget_delta);
      c.budget_clip = b.value("clip", c.budget_clip);
    }
    c.k_min = j.value("k_min", c.k_min);
    c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
    if (j.contains("encryption_key")) {
      c.encryption_key = resolve(j.at("encryption_key").get<std::string>(), base_dir);
    }
    c.api_token = j.value("api_token", c.api_token);
    c.rank_samples = j.value("rank_samples", c.rank_samples);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kValidation, std::string("invalid config: ") + e.what(), "config");
  }
  if (const char* dir = std::getenv("NOF1_DATA_DIR"); dir != nullptr && *dir != '\0') {
    c.data_dir = dir;
  }
  require(c.port > 0 && c.port < 65536, ErrorCode::kValidation, "port out of range", "port");
  require(c.k_min >= 1, ErrorCode::kValidation, "k_min must be >= 1", "k_min");
  require(c.rank_samples >= kMinProbOptimalSamples, ErrorCode::kValidation,
          "rank_samples must be >= 1000", "rank_samples");
  PrivacyBudget(c.budget_epsilon, c.budget_delta, c.budget_clip);  // validates
  c.policy.validate();
  if (!c.model.interventions.empty()) c.model.validate();
  return c;
}

ServiceConfig load_service_config(const fs::path& path) {
  return ServiceConfig::from_json(load_json_file(path.string()), path.parent_path());
}

// --- state serialization ----------------------------------------------------

Json state_to_json(const EngineState& s) {
  Json patients = Json::object();
  for (const auto& [id, p] : s.patients) patients[id] = p;
  Json trials = Json::object();
  for (const auto& [id, t] : s.trials) trials[id] = t;
  Json budgets = Json::object();
  for (const auto& [id, b] : s.budgets) budgets[id] = b;
  Json idem = Json::object();
  for (const auto& [id, keys] : s.idempotency) idem[id] = keys;
  return Json{{"patients", patients},     {"trials", trials},
              {"budgets", budgets},       {"idempotency", idem},
              {"outbox", s.outbox},       {"contributions", s.contributions},
              {"last_seq", s.last_seq}};
}

EngineState state_from_json(const Json& j) {
  EngineState s;
  try {
    for (const auto& [id, p] : j.at("patients").items()) s.patients[id] = p.get<PatientProfile>();
    for (const auto& [id, t] : j.at("trials").items()) s.trials[id] = t.get<TrialState>();
    for (const auto& [id, b] : j.at("budgets").items()) s.budgets[id] = b.get<PrivacyBudget>();
    for (const auto& [id, keys] : j.at("idempotency").items()) {
      for (const auto& [k, v] : keys.items()) s.idempotency[id][k] = v;
    }
    s.outbox = j.at("outbox").get<std::vector<Json>>();
    s.contributions = j.at("contributions").get<std::vector<Contribution>>();
    s.last_seq = j.at("last_seq").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptLog, std::string("corrupt snapshot: ") + e.what(), "snapshot");
  }
  return s;
}

// --- engine -------------------------------------------------------------------

namespace {

const char* kLogFile = "events.log";
const char* kSnapshotFile = "snapshot.json";

std::string blinded_label(const TrialDesign& design, const std::string& arm) {
  for (std::size_t i = 0; i < design.arms.size(); ++i) {
    if (design.arms[i] == arm) return std::string("Plan ") + static_cast<char>('A' + i);
  }
  return "Plan ?";
}

}  // namespace

// Staged result of a command: `logged` is the normalized command that goes to
// the log, `commit` installs the new entity state.
struct Engine::Pending {
  Json response;
  Json logged;
  std::string entity;
  std::string entity_id;
  std::function<void(EngineState&)> commit;
};

Engine::Engine(ServiceConfig config, Clock clock)
    : config_(std::move(config)), clock_(clock ? std::move(clock) : Clock(system_clock_ms)) {
  fs::create_directories(config_.data_dir);
  if (config_.encryption_key) key_ = load_or_create_key(*config_.encryption_key);

  const fs::path snap = config_.data_dir / kSnapshotFile;
  if (fs::exists(snap)) {
    Json j;
    try {
      j = load_json_file(snap.string());
    } catch (const Error& e) {
      fail(ErrorCode::kCorruptLog, std::string("corrupt snapshot: ") + e.what(), "snapshot");
    }
    Json body;
    if (j.contains("sealed")) {
      require(key_.has_value(), ErrorCode::kFailedPrecondition,
              "snapshot is sealed but no encryption key is configured", "encryption_key");
      const auto plain = open(from_base64(j.at("sealed").get<std::string>()), *key_);
      body = parse_json(std::string(plain.begin(), plain.end()));
    } else {
      body = j.value("state", Json());
      require(j.contains("crc32c") && crc32c(body.dump()) == j.at("crc32c").get<std::uint32_t>(),
              ErrorCode::kCorruptLog, "corrupt snapshot: checksum mismatch", "snapshot");
    }
    state_ = state_from_json(body);
  }

  log_ = std::make_unique<EventLog>(config_.data_dir / kLogFile);
  require(log_->last_seq() >= state_.last_seq, ErrorCode::kCorruptLog,
          "corrupt event log: snapshot at seq " + std::to_string(state_.last_seq) +
              " is ahead of the log",
          "event_log");
  for (const auto& entry : log_->read_all()) {
    if (entry.seq <= state_.last_seq) continue;
    try {
      auto pending = apply(entry.payload, entry.ts, entry.seq, true);
      pending.commit(state_);
      state_.last_seq = entry.seq;
    } catch (const Error& e) {
      fail(ErrorCode::kCorruptLog,
           "corrupt event log: replay failed at seq " + std::to_string(entry.seq) + ": " +
               e.what(),
           "event_log");
    }
  }
}

void Engine::require_mode(ServiceMode mode, const char* what) const {
  if (config_.mode != mode) {
    fail(ErrorCode::kUnsupported,
         std::string(what) + " is not available in " +
             std::string(service_mode_name(config_.mode)) + " mode",
         "mode");
  }
}

Json Engine::execute(const std::string& entity, const std::string& entity_id, Json command) {
  std::unique_lock lock(mu_);
  // Idempotent replays of an outcome answer from the stored response.
  if (command.value("type", "") == "ingest_outcome" && command.contains("idempotency_key")) {
    const auto tid = command.at("trial_id").get<std::string>();
    const auto key = command.at("idempotency_key").get<std::string>();
    if (auto t = state_.idempotency.find(tid); t != state_.idempotency.end()) {
      if (auto r = t->second.find(key); r != t->second.end()) {
        Json out = r->second;
        out["idempotent_replay"] = true;
        return out;
      }
    }
  }
  const std::int64_t ts = clock_();
  const std::uint64_t seq = state_.last_seq + 1;
  auto pending = apply(command, ts, seq, false);
  const auto entry = log_->append(ts, pending.entity.empty() ? entity : pending.entity,
                                  pending.entity_id.empty() ? entity_id : pending.entity_id,
                                  pending.logged);
  pending.commit(state_);
  state_.last_seq = entry.seq;
  if (config_.snapshot_every > 0 && entry.seq % config_.snapshot_every == 0) persist_snapshot();
  pending.response["seq"] = entry.seq;
  return pending.response;
}

void Engine::persist_snapshot() {
  const Json body = state_to_json(state_);
  Json j{{"last_seq", state_.last_seq}};
  if (key_) {
    const std::string text = body.dump();
    j["sealed"] = to_base64(seal({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()},
                                 *key_));
  } else {
    j["state"] = body;
    j["crc32c"] = crc32c(body.dump());
  }
  const fs::path target = config_.data_dir / kSnapshotFile;
  const fs::path tmp = config_.data_dir / "snapshot.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump();
    require(static_cast<bool>(out), ErrorCode::kInternal, "snapshot write failed", "snapshot");
  }
  fs::rename(tmp, target);
}

Engine::Pending Engine::apply(const Json& command, std::int64_t ts, std::uint64_t seq,
                             bool replaying) {
  const auto type = command.value("type", std::string());
  Pending p;
  p.logged = command;
  try {
    if (type == "register_patient") {
      require_mode(ServiceMode::kDevice, "patient registration");
      auto profile = command.at("profile").get<PatientProfile>();
      profile.validate();
      const bool is_new = !state_.patients.count(profile.patient_id);
      p.entity = "patient";
      p.entity_id = profile.patient_id;
      p.response = Json{{"patient", profile}, {"created", is_new}};
      PrivacyBudget budget(config_.budget_epsilon, config_.budget_delta, config_.budget_clip);
      p.commit = [profile, is_new, budget](EngineState& s) {
        if (is_new) s.budgets[profile.patient_id] = budget;
        s.patients[profile.patient_id] = profile;
      };
    } else if (type == "create_trial") {
      require_mode(ServiceMode::kDevice, "trial creation");
      auto trial_id = command.value("trial_id", std::string());
      if (trial_id.empty()) trial_id = "trial-" + std::to_string(seq);
      const auto patient_id = command.at("patient_id").get<std::string>();
      require(state_.patients.count(patient_id) > 0, ErrorCode::kNotFound,
              "unknown patient '" + patient_id + "'", "patient_id");
      require(!state_.trials.count(trial_id), ErrorCode::kFailedPrecondition,
              "trial '" + trial_id + "' already exists", "trial_id");
      const auto design = command.at("design").get<TrialDesign>();
      auto trial = start_trial(trial_id, patient_id, design);
      if (!replaying) {
        trial_priors(trial);  // every active arm needs a population prior
        const auto& profile = state_.patients.at(patient_id);
        for (const auto& c : predict_candidates(config_.model, profile)) {
          if (std::find(design.arms.begin(), design.arms.end(), c.intervention_id) ==
              design.arms.end()) {
            continue;
          }
          require(check_contraindications(c.intervention_id, profile).ok,
                  ErrorCode::kRefused, "'" + c.intervention_id + "' is contraindicated", "arms");
          require(c.risk_tier != 3, ErrorCode::kRefused,
                  "'" + c.intervention_id + "' is risk tier 3 and cannot be self-tested", "arms");
        }
      }
      p.logged["trial_id"] = trial_id;
      p.entity = "trial";
      p.entity_id = trial_id;
      p.response = Json{{"trial_id", trial_id},
                        {"patient_id", patient_id},
                        {"design", trial.design},
                        {"schedule", trial.schedule},
                        {"reference_arm", trial.design.reference_arm()}};
      p.commit = [trial = std::move(trial)](EngineState& s) { s.trials[trial.trial_id] = trial; };
    } else if (type == "ingest_outcome") {
      require_mode(ServiceMode::kDevice, "outcome ingestion");
      const auto trial_id = command.at("trial_id").get<std::string>();
      OutcomeRecord record;
      if (command.contains("sealed_record")) {
        require(key_.has_value(), ErrorCode::kFailedPrecondition,
                "sealed record but no encryption key is configured", "encryption_key");
        record = decrypt_record(from_base64(command.at("sealed_record").get<std::string>()), *key_);
      } else {
        record = command.at("record").get<OutcomeRecord>();
      }
      if (record.trial_id.empty()) record.trial_id = trial_id;
      require(record.trial_id == trial_id, ErrorCode::kValidation,
              "record trial_id does not match the trial", "trial_id");
      auto t = trial(trial_id);
      const auto result = ingest_outcome(t, record);
      p.entity = "trial";
      p.entity_id = trial_id;
      Json verdict{{"kind", result.verdict.kind == StoppingVerdict::Kind::kContinue ? "continue"
                            : result.verdict.kind == StoppingVerdict::Kind::kStop ? "stop"
                                                                                  : "alert"},
                   {"reason", result.verdict.reason},
                   {"day", result.verdict.day}};
      p.response = Json{{"trial_id", trial_id},
                        {"day", record.day},
                        {"accepted", true},
                        {"replaced", result.replaced},
                        {"verdict", verdict},
                        {"status", trial_status_name(t.status)}};
      if (key_) {
        p.logged.erase("record");
        p.logged["sealed_record"] = to_base64(encrypt_record(record, *key_));
      }
      std::optional<std::string> idem;
      if (command.contains("idempotency_key")) {
        idem = command.at("idempotency_key").get<std::string>();
      }
      p.commit = [t = std::move(t), idem, response = p.response](EngineState& s) {
        if (idem) s.idempotency[t.trial_id][*idem] = response;
        s.trials[t.trial_id] = t;
      };
    } else if (type == "complete_trial") {
      require_mode(ServiceMode::kDevice, "trial completion");
      const auto trial_id = command.at("trial_id").get<std::string>();
      auto t = trial(trial_id);
      nof1::complete_trial(t);
      p.entity = "trial";
      p.entity_id = trial_id;
      p.response = Json{{"trial_id", trial_id}, {"status", trial_status_name(t.status)}};
      p.commit = [t = std::move(t)](EngineState& s) { s.trials[t.trial_id] = t; };
    } else if (type == "assign_adaptive") {
      require_mode(ServiceMode::kDevice, "adaptive assignment");
      const auto trial_id = command.at("trial_id").get<std::string>();
      std::uint64_t seed = command.contains("seed") ? command.at("seed").get<std::uint64_t>()
                                                    : derive_seed(config_.seed, seq);
      p.logged["seed"] = seed;
      auto t = trial(trial_id);
      const auto slot = next_pending_period(t);
      std::string arm;
      if (replaying && command.contains("arm")) {
        arm = command.at("arm").get<std::string>();
        assign_pending_period(t, arm);
      } else {
        arm = thompson_assign_next(t, trial_priors(t), config_.model.sigma_y, seed);
      }
      p.logged["arm"] = arm;
      p.entity = "trial";
      p.entity_id = trial_id;
      p.response = Json{{"trial_id", trial_id}, {"period_index", slot.value_or(-1)}, {"arm", arm}};
      p.commit = [t = std::move(t)](EngineState& s) { s.trials[t.trial_id] = t; };
    } else if (type == "contribute") {
      require_mode(ServiceMode::kDevice, "privacy contribution");
      const auto patient_id = command.at("patient_id").get<std::string>();
      const auto trial_id = command.at("trial_id").get<std::string>();
      const auto arm = command.at("arm").get<std::string>();
      const BudgetRequest request{command.at("epsilon").get<double>(),
                                  command.at("delta").get<double>()};
      const bool consent = command.at("consent").get<bool>();
      std::uint64_t seed = command.contains("seed") ? command.at("seed").get<std::uint64_t>()
                                                    : derive_seed(config_.seed, seq);
      p.logged["seed"] = seed;
      const auto pit = state_.patients.find(patient_id);
      require(pit != state_.patients.end(), ErrorCode::kNotFound,
              "unknown patient '" + patient_id + "'", "patient_id");
      if (!pit->second.consent_aggregate || !consent) {
        fail(ErrorCode::kRefused, "no consent for aggregate contribution", "consent");
      }
      auto budget = state_.budgets.at(patient_id);
      Contribution contribution;
      if (replaying && command.contains("contribution")) {
        contribution = command.at("contribution").get<Contribution>();
        budget.spend(request.epsilon, request.delta, ts);
      } else {
        const auto& t = trial(trial_id);
        require(t.patient_id == patient_id, ErrorCode::kValidation,
                "trial belongs to another patient", "trial_id");
        require(arm != t.design.reference_arm(), ErrorCode::kValidation,
                "'" + arm + "' is the reference arm", "arm");
        const auto post = trial_posterior(t);
        require(post.has_arm(arm), ErrorCode::kValidation,
                "arm '" + arm + "' has no effect estimate in this trial", "arm");
        contribution = clip_and_noise(arm, post.effect(arm).mean, request, budget, true, seed, ts);
      }
      p.logged["contribution"] = contribution;
      p.entity = "budget";
      p.entity_id = patient_id;
      const Json outgoing = versioned(Json{{"contribution", contribution}});
      p.response = Json{{"contribution", contribution},
                        {"budget", budget},
                        {"queued_for_aggregator", true}};
      p.commit = [patient_id, budget, outgoing](EngineState& s) {
        s.budgets[patient_id] = budget;
        s.outbox.push_back(outgoing);
      };
    } else if (type == "add_contributions") {
      require_mode(ServiceMode::kAggregate, "contribution intake");
      auto contributions = command.at("contributions").get<std::vector<Contribution>>();
      for (const auto& c : contributions) {
        require(!c.intervention_id.empty(), ErrorCode::kValidation,
                "contribution needs an intervention_id", "intervention_id");
        require(c.count >= 1, ErrorCode::kValidation, "count must be >= 1", "count");
      }
      std::size_t accepted = 0;
      for (const auto& c : contributions) accepted += c.consent ? 1 : 0;
      p.entity = "contribution";
      p.entity_id = std::to_string(seq);
      p.response = Json{{"received", contributions.size()}, {"accepted", accepted}};
      p.commit = [contributions = std::move(contributions)](EngineState& s) {
        for (const auto& c : contributions) {
          if (c.consent) s.contributions.push_back(c);
        }
      };
    } else {
      fail(ErrorCode::kValidation, "unknown command type '" + type + "'", "type");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kValidation, e.what());
  }
  return p;
}

// --- commands ---------------------------------------------------------------------

Json Engine::register_patient(const PatientProfile& profile) {
  return execute("patient", profile.patient_id,
                 Json{{"type", "register_patient"}, {"profile", profile}});
}

Json Engine::create_trial(const std::string& trial_id, const std::string& patient_id,
                          const TrialDesign& design) {
  return execute("trial", trial_id,
                 Json{{"type", "create_trial"},
                      {"trial_id", trial_id},
                      {"patient_id", patient_id},
                      {"design", design}});
}

Json Engine::ingest(const std::string& trial_id, const OutcomeRecord& record,
                    const std::optional<std::string>& idempotency_key) {
  Json cmd{{"type", "ingest_outcome"}, {"trial_id", trial_id}, {"record", record}};
  if (idempotency_key) {
    require(!idempotency_key->empty(), ErrorCode::kValidation, "empty idempotency key",
            "idempotency_key");
    cmd["idempotency_key"] = *idempotency_key;
  }
  return execute("trial", trial_id, std::move(cmd));
}

Json Engine::complete_trial(const std::string& trial_id) {
  return execute("trial", trial_id, Json{{"type", "complete_trial"}, {"trial_id", trial_id}});
}

Json Engine::assign_adaptive(const std::string& trial_id, std::optional<std::uint64_t> seed) {
  Json cmd{{"type", "assign_adaptive"}, {"trial_id", trial_id}};
  if (seed) cmd["seed"] = *seed;
  return execute("trial", trial_id, std::move(cmd));
}

Json Engine::contribute(const std::string& patient_id, const std::string& trial_id,
                        const std::string& arm, const BudgetRequest& request, bool consent,
                        std::optional<std::uint64_t> seed) {
  Json cmd{{"type", "contribute"}, {"patient_id", patient_id}, {"trial_id", trial_id},
           {"arm", arm},           {"epsilon", request.epsilon}, {"delta", request.delta},
           {"consent", consent}};
  if (seed) cmd["seed"] = *seed;
  return execute("budget", patient_id, std::move(cmd));
}

Json Engine::add_contributions(const std::vector<Contribution>& contributions) {
  return execute("contribution", "",
                 Json{{"type", "add_contributions"}, {"contributions", contributions}});
}

// --- queries -----------------------------------------------------------------------

const TrialState& Engine::trial(const std::string& trial_id) const {
  const auto it = state_.trials.find(trial_id);
  require(it != state_.trials.end(), ErrorCode::kNotFound, "unknown trial '" + trial_id + "'",
          "trial_id");
  return it->second;
}

std::vector<ArmPrior> Engine::trial_priors(const TrialState& t) const {
  require(!config_.model.interventions.empty(), ErrorCode::kFailedPrecondition,
          "no prior model configured", "prior_model");
  const auto pit = state_.patients.find(t.patient_id);
  require(pit != state_.patients.end(), ErrorCode::kNotFound,
          "unknown patient '" + t.patient_id + "'", "patient_id");
  return arm_priors(predict_candidates(config_.model, pit->second), t.design);
}

PosteriorState Engine::trial_posterior(const TrialState& t) const {
  return posterior_for_trial(t, trial_priors(t), config_.model.sigma_y);
}

Json Engine::rank(const PatientProfile& profile, std::size_t samples, std::uint64_t seed) const {
  require_mode(ServiceMode::kDevice, "ranking");
  require(!config_.model.interventions.empty(), ErrorCode::kFailedPrecondition,
          "no prior model configured", "prior_model");
  return versioned(Json{{"patient_id", profile.patient_id},
                        {"candidates", rank_candidates(config_.model, profile, samples, seed)},
                        {"samples", samples},
                        {"seed", seed}});
}

Json Engine::rank_patient(const std::string& patient_id, std::size_t samples,
                          std::uint64_t seed) const {
  return rank(patient(patient_id), samples, seed);
}

Json Engine::decide(const std::vector<InterventionCandidate>& candidates,
                    const TriggerPolicy& policy, const PatientProfile& profile) const {
  require_mode(ServiceMode::kDevice, "trigger decisions");
  const auto d = nof1::decide(candidates, policy, profile);
  Json out = d;
  out["summary"] = describe(d);
  return versioned(std::move(out));
}

PatientProfile Engine::patient(const std::string& patient_id) const {
  std::shared_lock lock(mu_);
  const auto it = state_.patients.find(patient_id);
  require(it != state_.patients.end(), ErrorCode::kNotFound,
          "unknown patient '" + patient_id + "'", "patient_id");
  return it->second;
}

Json Engine::assignment(const std::string& trial_id, int day) const {
  std::shared_lock lock(mu_);
  const auto& t = trial(trial_id);
  require(day >= 1, ErrorCode::kValidation, "day must be >= 1", "day");
  const auto a = current_assignment(t.schedule, day);
  Json out{{"trial_id", trial_id}, {"day", day}, {"post_trial", a.post_trial},
           {"status", trial_status_name(t.status)}};
  if (!a.post_trial) {
    out["phase"] = phase_kind_name(a.phase.kind);
    out["period_index"] = a.phase.period_index;
    out["start_day"] = a.phase.start_day;
    out["end_day"] = a.phase.end_day;
    if (a.phase.kind == PhaseKind::kIntervention) {
      out["pending"] = a.phase.arm.empty();
      out["label"] = a.phase.arm.empty() ? "pending" : blinded_label(t.design, a.phase.arm);
      out["arm"] = a.phase.arm;
    }
  }
  return versioned(std::move(out));
}

Json Engine::trial_view(const std::string& trial_id) const {
  std::shared_lock lock(mu_);
  const auto& t = trial(trial_id);
  return versioned(Json{{"trial_id", t.trial_id},
                        {"patient_id", t.patient_id},
                        {"design", t.design},
                        {"schedule", t.schedule},
                        {"status", trial_status_name(t.status)},
                        {"stop_reason", t.stop_reason},
                        {"stop_day", t.stop_day},
                        {"alerts", t.alerts},
                        {"n_records", t.records.size()},
                        {"periods", period_summary(t)}});
}

Json Engine::posterior(const std::string& trial_id) const {
  std::shared_lock lock(mu_);
  const auto& t = trial(trial_id);
  const auto post = trial_posterior(t);
  Json out = post;
  out["trial_id"] = trial_id;
  out["prob_optimal"] = Json::array();
  for (const auto& ap : posterior_prob_optimal(post, config_.rank_samples, config_.seed)) {
    out["prob_optimal"].push_back({{"arm", ap.arm}, {"probability", ap.probability}});
  }
  return versioned(std::move(out));
}

Json Engine::report(const std::string& trial_id) const {
  std::shared_lock lock(mu_);
  const auto& t = trial(trial_id);
  ReportOptions opts;
  opts.prob_optimal_samples = config_.rank_samples;
  opts.seed = config_.seed;
  return versioned(generate_report(trial_posterior(t), t, opts));
}

std::string Engine::report_tsv(const std::string& trial_id) const {
  std::shared_lock lock(mu_);
  const auto& t = trial(trial_id);
  ReportOptions opts;
  opts.prob_optimal_samples = config_.rank_samples;
  opts.seed = config_.seed;
  return report_table(generate_report(trial_posterior(t), t, opts));
}

Json Engine::budget(const std::string& patient_id) const {
  std::shared_lock lock(mu_);
  const auto it = state_.budgets.find(patient_id);
  require(it != state_.budgets.end(), ErrorCode::kNotFound,
          "unknown patient '" + patient_id + "'", "patient_id");
  return versioned(Json{{"patient_id", patient_id}, {"budget", it->second}});
}

Json Engine::aggregate_prior() const {
  std::shared_lock lock(mu_);
  require_mode(ServiceMode::kAggregate, "the aggregated prior");
  const auto agg = aggregate_contributions(state_.contributions, config_.k_min);
  Json ivs = Json::array();
  for (const auto& iv : config_.model.interventions) {
    Json e{{"id", iv.id}, {"population_mean", iv.effect.mean}, {"population_sd", iv.effect.sd}};
    ivs.push_back(std::move(e));
  }
  Json out = agg;
  out["k_min"] = config_.k_min;
  out["n_contributions"] = state_.contributions.size();
  out["population_prior"] = ivs;
  return versioned(std::move(out));
}

std::vector<Json> Engine::outbox() const {
  std::shared_lock lock(mu_);
  return state_.outbox;
}

Json Engine::state_json() const {
  std::shared_lock lock(mu_);
  return state_to_json(state_);
}

EngineState Engine::snapshot_state() const {
  std::shared_lock lock(mu_);
  return state_;
}

// --- errors ------------------------------------------------------------------------

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kValidation:
      return 400;
    case ErrorCode::kAuthentication:
      return 401;
    case ErrorCode::kRefused:
      return 403;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kFailedPrecondition:
      return 409;
    case ErrorCode::kUnsupported:
      return 501;
    case ErrorCode::kCorruptLog:
    case ErrorCode::kInternal:
      return 500;
  }
  return 500;
}

Json error_payload(const Error& e) {
  Json err{{"code", error_code_name(e.code())},
           {"message", e.what()},
           {"field", e.field().empty() ? Json() : Json(e.field())}};
  return versioned(Json{{"error", err}});
}

}  // namespace nof1
