// nof1: command-line front end for ranking, trigger decisions, trial
// management, inference, simulation and the HTTP service.
//
// Exit codes: 0 success, 1 invalid input or usage, 2 internal failure.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <optional>

#include "nof1/engine.hpp"
#include "nof1/server.hpp"
#include "nof1/sim.hpp"

using namespace nof1;

namespace {

struct Globals {
  std::string config_path;
  std::string mode;
  std::string data_dir;
  std::string model_path;
  std::optional<std::uint64_t> seed;
};

ServiceConfig build_config(const Globals& g) {
  ServiceConfig c = g.config_path.empty() ? ServiceConfig::from_json(Json::object())
                                          : load_service_config(g.config_path);
  if (!g.mode.empty()) c.mode = parse_service_mode(g.mode);
  if (!g.data_dir.empty()) c.data_dir = g.data_dir;
  if (!g.model_path.empty()) {
    c.model = decode<PriorModel>(load_json_file(g.model_path));
    c.model.validate();
  }
  if (g.seed) c.seed = *g.seed;
  return c;
}

void print(const Json& j) { std::cout << j.dump(2) << '\n'; }

Json simulate(const std::string& scenario, std::size_t replicates, std::size_t patients,
              double heterogeneity, std::uint64_t seed) {
  if (scenario == "case_study") {
    const auto r = sim::replicate_case_study(sim::CaseStudyConfig::defaults(), replicates, seed);
    Json q = Json::object();
    for (const auto& [arm, v] : r.prob_effect_quantiles) {
      q[arm] = {{"p05", v[0]}, {"p50", v[1]}, {"p95", v[2]}};
    }
    return versioned(Json{
        {"scenario", scenario},
        {"replicates", replicates},
        {"seed", seed},
        {"decision", describe(r.replicates.front().decision)},
        {"prob_effect_quantiles", q},
        {"fraction_magnesium_at_least_0_8", r.fraction("magnesium", 0.8, true)},
        {"fraction_placebo_below_0_5", r.fraction("placebo", 0.5, false)}});
  }
  if (scenario == "policy") {
    const auto s = sim::default_policy_scenario(heterogeneity, patients, seed);
    const auto results = sim::compare_policies(s.population, s.policies, s.config);
    Json out = Json::array();
    for (const auto& r : results) {
      out.push_back({{"policy", sim::policy_name(r.kind)},
                     {"correct_selection_rate", r.correct_selection_rate.estimate},
                     {"ci95", {r.correct_selection_rate.low, r.correct_selection_rate.high}},
                     {"mean_regret", r.mean_regret.estimate},
                     {"trials_run", r.trials_run}});
    }
    const auto d = sim::correct_selection_difference(results[1], results[0], 1000,
                                                     derive_seed(seed, 1));
    return versioned(Json{{"scenario", scenario},
                          {"patients", patients},
                          {"heterogeneity_sd", heterogeneity},
                          {"seed", seed},
                          {"policies", out},
                          {"hybrid_minus_lfm", {{"estimate", d.estimate},
                                                {"ci95", {d.low, d.high}}}}});
  }
  if (scenario == "generalizability") {
    const auto r = sim::generalizability_scenario(sim::GeneralizabilityConfig{}, seed);
    return versioned(Json{{"scenario", scenario},
                          {"seed", seed},
                          {"within_cohort_auc", r.within_cohort_auc},
                          {"cross_cohort_auc", r.cross_cohort_auc},
                          {"within_half_width", r.within_half_width},
                          {"cross_half_width", r.cross_half_width},
                          {"flags", r.flags}});
  }
  fail(ErrorCode::kValidation, "unknown scenario '" + scenario + "'", "scenario");
}

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Population-prior ranking and N-of-1 trial engine"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Service config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--mode", g.mode, "device | aggregate");
  app.add_option("--data-dir", g.data_dir, "Event log and snapshot directory");
  app.add_option("--model", g.model_path, "Prior model (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed");

  std::function<int()> action;

  auto* rank = app.add_subcommand("rank", "Rank interventions for a patient profile");
  std::string profile_path;
  std::size_t samples = 100000;
  rank->add_option("--profile", profile_path)->required()->check(CLI::ExistingFile);
  rank->add_option("--samples", samples);
  rank->callback([&] {
    action = [&] {
      const auto cfg = build_config(g);
      const auto profile = decode<PatientProfile>(load_json_file(profile_path));
      profile.validate();
      require(!cfg.model.interventions.empty(), ErrorCode::kValidation,
              "a prior model is required (--model or config)", "model");
      print(versioned(Json{{"patient_id", profile.patient_id},
                           {"candidates",
                            rank_candidates(cfg.model, profile, samples, cfg.seed)}}));
      return 0;
    };
  });

  auto* decide_cmd = app.add_subcommand("decide", "Trigger decision from ranked candidates");
  std::string candidates_path, policy_path;
  std::optional<double> tau_include, tau_direct;
  std::optional<std::size_t> max_arms;
  bool no_placebo = false;
  decide_cmd->add_option("--candidates", candidates_path)->check(CLI::ExistingFile);
  decide_cmd->add_option("--profile", profile_path)->check(CLI::ExistingFile);
  decide_cmd->add_option("--policy", policy_path)->check(CLI::ExistingFile);
  decide_cmd->add_option("--tau-include", tau_include);
  decide_cmd->add_option("--tau-direct", tau_direct);
  decide_cmd->add_option("--max-arms", max_arms);
  decide_cmd->add_flag("--no-placebo", no_placebo);
  decide_cmd->add_option("--samples", samples);
  decide_cmd->callback([&] {
    action = [&] {
      const auto cfg = build_config(g);
      TriggerPolicy policy = policy_path.empty() ? cfg.policy
                                                 : decode<TriggerPolicy>(load_json_file(policy_path));
      if (tau_include) policy.tau_include = *tau_include;
      if (tau_direct) policy.tau_direct = *tau_direct;
      if (max_arms) policy.max_arms_per_trial = *max_arms;
      if (no_placebo) policy.include_placebo = false;
      policy.validate();
      PatientProfile profile;
      if (!profile_path.empty()) profile = decode<PatientProfile>(load_json_file(profile_path));
      std::vector<InterventionCandidate> candidates;
      if (!candidates_path.empty()) {
        auto j = load_json_file(candidates_path);
        if (j.is_object() && j.contains("candidates")) j = j.at("candidates");
        candidates = decode<std::vector<InterventionCandidate>>(j);
      } else {
        require(!profile_path.empty(), ErrorCode::kValidation,
                "need --candidates or --profile", "candidates");
        require(!cfg.model.interventions.empty(), ErrorCode::kValidation,
                "a prior model is required (--model or config)", "model");
        candidates = rank_candidates(cfg.model, profile, samples, cfg.seed);
      }
      const auto d = decide(candidates, policy, profile);
      Json out = d;
      out["summary"] = describe(d);
      print(versioned(std::move(out)));
      return 0;
    };
  });

  auto* design_cmd = app.add_subcommand("design", "Generate a trial schedule");
  std::string design_path;
  std::vector<std::string> arms;
  TrialDesign design_opts;
  design_cmd->add_option("--design", design_path)->check(CLI::ExistingFile);
  design_cmd->add_option("--arms", arms)->delimiter(',');
  design_cmd->add_option("--periods", design_opts.n_periods);
  design_cmd->add_option("--period-len", design_opts.period_len_days);
  design_cmd->add_option("--baseline", design_opts.baseline_periods);
  design_cmd->add_option("--washout", design_opts.washout_days);
  design_cmd->add_flag("--adaptive", design_opts.adaptive);
  design_cmd->callback([&] {
    action = [&] {
      TrialDesign d = design_opts;
      if (!design_path.empty()) d = decode<TrialDesign>(load_json_file(design_path));
      if (!arms.empty()) d.arms = arms;
      if (g.seed) d.seed = *g.seed;
      const auto schedule = design_trial(d);
      print(versioned(Json{{"design", d}, {"schedule", schedule}}));
      return 0;
    };
  });

  auto* reg = app.add_subcommand("register", "Register a patient profile");
  reg->add_option("--profile", profile_path)->required()->check(CLI::ExistingFile);
  reg->callback([&] {
    action = [&] {
      Engine engine(build_config(g));
      print(versioned(engine.register_patient(decode<PatientProfile>(load_json_file(profile_path)))));
      return 0;
    };
  });

  auto* create = app.add_subcommand("create-trial", "Start a trial for a registered patient");
  std::string patient_id, trial_id;
  create->add_option("--patient", patient_id)->required();
  create->add_option("--design", design_path)->required()->check(CLI::ExistingFile);
  create->add_option("--trial", trial_id);
  create->callback([&] {
    action = [&] {
      Engine engine(build_config(g));
      print(versioned(engine.create_trial(trial_id, patient_id,
                                          decode<TrialDesign>(load_json_file(design_path)))));
      return 0;
    };
  });

  auto* ingest = app.add_subcommand("ingest", "Ingest outcome records into a trial");
  std::string record_path, idempotency_key, source = "self_report";
  std::optional<int> day, pain;
  bool event = false;
  ingest->add_option("--trial", trial_id)->required();
  ingest->add_option("--record", record_path, "Record or array of records (JSON)")
      ->check(CLI::ExistingFile);
  ingest->add_option("--day", day);
  ingest->add_flag("--event", event, "A primary event occurred that day");
  ingest->add_option("--pain", pain);
  ingest->add_option("--source", source);
  ingest->add_option("--idempotency-key", idempotency_key);
  ingest->callback([&] {
    action = [&] {
      Engine engine(build_config(g));
      std::vector<OutcomeRecord> records;
      if (!record_path.empty()) {
        auto j = load_json_file(record_path);
        if (j.is_array()) {
          records = decode<std::vector<OutcomeRecord>>(j);
        } else {
          records.push_back(decode<OutcomeRecord>(j));
        }
      } else {
        require(day.has_value(), ErrorCode::kValidation, "need --record or --day", "day");
        Json r{{"day", *day}, {"primary_event", event}, {"source", source}};
        if (pain) r["pain"] = *pain;
        records.push_back(decode<OutcomeRecord>(r));
      }
      Json out = Json::array();
      for (std::size_t i = 0; i < records.size(); ++i) {
        std::optional<std::string> key;
        if (!idempotency_key.empty()) {
          key = records.size() == 1 ? idempotency_key : idempotency_key + "-" + std::to_string(i);
        }
        out.push_back(engine.ingest(trial_id, records[i], key));
      }
      print(versioned(Json{{"results", out}}));
      return 0;
    };
  });

  auto* complete = app.add_subcommand("complete", "Mark a trial completed");
  complete->add_option("--trial", trial_id)->required();
  complete->callback([&] {
    action = [&] {
      Engine engine(build_config(g));
      print(versioned(engine.complete_trial(trial_id)));
      return 0;
    };
  });

  auto* posterior = app.add_subcommand("posterior", "Posterior effects for a trial");
  posterior->add_option("--trial", trial_id)->required();
  posterior->callback([&] {
    action = [&] {
      Engine engine(build_config(g));
      print(engine.posterior(trial_id));
      return 0;
    };
  });

  auto* report = app.add_subcommand("report", "Final report for a finished trial");
  std::string format = "json";
  report->add_option("--trial", trial_id)->required();
  report->add_option("--format", format)->check(CLI::IsMember({"json", "tsv"}));
  report->callback([&] {
    action = [&] {
      Engine engine(build_config(g));
      if (format == "tsv") {
        std::cout << engine.report_tsv(trial_id);
      } else {
        print(engine.report(trial_id));
      }
      return 0;
    };
  });

  auto* simulate_cmd = app.add_subcommand("simulate", "Run a virtual-patient scenario");
  std::string scenario = "case_study";
  std::size_t replicates = 200, patients = 2000;
  double heterogeneity = 2.0;
  simulate_cmd->add_option("--scenario", scenario)
      ->check(CLI::IsMember({"case_study", "policy", "generalizability"}));
  simulate_cmd->add_option("--replicates", replicates)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--patients", patients)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--heterogeneity", heterogeneity)->check(CLI::NonNegativeNumber);
  simulate_cmd->callback([&] {
    action = [&] {
      print(simulate(scenario, replicates, patients, heterogeneity, g.seed.value_or(0)));
      return 0;
    };
  });

  auto* contribute = app.add_subcommand("privacy-contribute",
                                        "Queue a DP-noised effect estimate for the aggregator");
  std::string arm;
  BudgetRequest request;
  bool consent = false;
  contribute->add_option("--patient", patient_id)->required();
  contribute->add_option("--trial", trial_id)->required();
  contribute->add_option("--arm", arm)->required();
  contribute->add_option("--epsilon", request.epsilon);
  contribute->add_option("--delta", request.delta);
  contribute->add_flag("--consent", consent);
  contribute->callback([&] {
    action = [&] {
      Engine engine(build_config(g));
      print(versioned(engine.contribute(patient_id, trial_id, arm, request, consent, g.seed)));
      return 0;
    };
  });

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::optional<std::string> host;
  std::optional<int> port;
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->callback([&] {
    action = [&] {
      auto cfg = build_config(g);
      if (host) cfg.host = *host;
      if (port) cfg.port = *port;
      Engine engine(cfg);
      HttpServer server(engine);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int bound = server.bind(cfg.host, cfg.port);
      require(bound > 0, ErrorCode::kInternal, "cannot bind " + cfg.host, "port");
      std::cerr << "nof1 " << service_mode_name(cfg.mode) << " mode listening on " << cfg.host
                << ':' << bound << '\n';
      server.serve();
      g_server = nullptr;
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    return action ? action() : 1;
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]";
    if (!e.field().empty()) std::cerr << " (" << e.field() << ")";
    std::cerr << ": " << e.what() << '\n';
    return e.code() == ErrorCode::kInternal || e.code() == ErrorCode::kCorruptLog ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
}
