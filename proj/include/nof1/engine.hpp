#pragma once

// Event-sourced trial engine behind the CLI and the HTTP API. Every state
// change is a command that is validated, applied and appended to the event
// log; startup rebuilds state from the latest snapshot plus log replay.
//
// Two run modes share the binary: device mode owns patients, trials and the
// privacy budget; aggregate mode only accepts anonymized contributions and
// serves the aggregated prior.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "nof1/event_log.hpp"
#include "nof1/json.hpp"
#include "nof1/local_store.hpp"

namespace nof1 {

enum class ServiceMode { kDevice, kAggregate };

std::string_view service_mode_name(ServiceMode mode);
ServiceMode parse_service_mode(std::string_view text);

struct ServiceConfig {
  ServiceMode mode = ServiceMode::kDevice;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "nof1-data";
  PriorModel model;
  TriggerPolicy policy;
  double budget_epsilon = 1.0;
  double budget_delta = 1e-5;
  double budget_clip = 1.0;
  std::size_t k_min = kMinCohort;
  std::size_t snapshot_every = 100;  // 0 disables snapshots
  std::optional<std::filesystem::path> encryption_key;  // seals records at rest
  std::string api_token;             // empty: no token check
  std::size_t rank_samples = 100000;
  std::uint64_t seed = 0;

  // Relative paths inside `j` resolve against `base_dir`. NOF1_DATA_DIR, when
  // set, overrides data_dir.
  static ServiceConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
};

ServiceConfig load_service_config(const std::filesystem::path& path);

struct EngineState {
  std::map<std::string, PatientProfile> patients;
  std::map<std::string, TrialState> trials;
  std::map<std::string, PrivacyBudget> budgets;
  // trial id -> idempotency key -> original response
  std::map<std::string, std::map<std::string, Json>> idempotency;
  std::vector<Json> outbox;                // device: payloads bound for the aggregator
  std::vector<Contribution> contributions;  // aggregate: received contributions
  std::uint64_t last_seq = 0;
};

Json state_to_json(const EngineState& s);
EngineState state_from_json(const Json& j);

class Engine {
 public:
  using Clock = std::function<std::int64_t()>;

  explicit Engine(ServiceConfig config, Clock clock = {});

  const ServiceConfig& config() const { return config_; }
  ServiceMode mode() const { return config_.mode; }

  // --- commands (logged) ---
  Json register_patient(const PatientProfile& profile);
  Json create_trial(const std::string& trial_id, const std::string& patient_id,
                    const TrialDesign& design);
  Json ingest(const std::string& trial_id, const OutcomeRecord& record,
              const std::optional<std::string>& idempotency_key = std::nullopt);
  Json complete_trial(const std::string& trial_id);
  Json assign_adaptive(const std::string& trial_id, std::optional<std::uint64_t> seed = {});
  Json contribute(const std::string& patient_id, const std::string& trial_id,
                  const std::string& arm, const BudgetRequest& request, bool consent,
                  std::optional<std::uint64_t> seed = {});
  Json add_contributions(const std::vector<Contribution>& contributions);

  // --- queries ---
  Json rank(const PatientProfile& profile, std::size_t samples, std::uint64_t seed) const;
  Json rank_patient(const std::string& patient_id, std::size_t samples, std::uint64_t seed) const;
  Json decide(const std::vector<InterventionCandidate>& candidates, const TriggerPolicy& policy,
              const PatientProfile& profile) const;
  Json assignment(const std::string& trial_id, int day) const;
  Json trial_view(const std::string& trial_id) const;
  Json posterior(const std::string& trial_id) const;
  Json report(const std::string& trial_id) const;
  std::string report_tsv(const std::string& trial_id) const;
  Json budget(const std::string& patient_id) const;
  Json aggregate_prior() const;
  std::vector<Json> outbox() const;

  PatientProfile patient(const std::string& patient_id) const;
  Json state_json() const;
  EngineState snapshot_state() const;

 private:
  Json execute(const std::string& entity, const std::string& entity_id, Json command);
  struct Pending;
  // Replay trusts recorded results (assigned arm, noised contribution) rather
  // than recomputing them against the current prior model.
  Pending apply(const Json& command, std::int64_t ts, std::uint64_t seq, bool replaying);
  void persist_snapshot();
  void require_mode(ServiceMode mode, const char* what) const;

  std::vector<ArmPrior> trial_priors(const TrialState& trial) const;
  PosteriorState trial_posterior(const TrialState& trial) const;
  const TrialState& trial(const std::string& trial_id) const;

  ServiceConfig config_;
  Clock clock_;
  std::optional<Key256> key_;
  std::unique_ptr<EventLog> log_;
  mutable std::shared_mutex mu_;
  EngineState state_;
};

// Maps an engine error code to an HTTP status.
int http_status_for(ErrorCode code);
Json error_payload(const Error& e);

}  // namespace nof1
