#include "nof1/sim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "nof1/error.hpp"
#include "nof1/stats.hpp"

namespace nof1::sim {

void VirtualPatient::validate(int period_len) const {
  require(baseline_rate >= 0.0 && baseline_rate <= period_len, ErrorCode::kInvalidArgument,
          "baseline rate must lie in [0, period_len]", "baseline_rate");
  require(adherence > 0.0 && adherence <= 1.0, ErrorCode::kInvalidArgument,
          "adherence must lie in (0, 1]", "adherence");
  require(residual_sd >= 0.0, ErrorCode::kInvalidArgument, "residual sd must be >= 0",
          "residual_sd");
}

double VirtualPatient::effect(const std::string& arm, const std::string& placebo_id) const {
  if (arm == placebo_id || arm == kBaselineArm || arm.empty()) return 0.0;
  auto it = true_effects.find(arm);
  require(it != true_effects.end(), ErrorCode::kInvalidArgument,
          "virtual patient has no true effect for '" + arm + "'", "arm");
  return it->second;
}

double VirtualPatient::expected_events(const std::string& arm, int period_len,
                                       const std::string& placebo_id) const {
  const double len = period_len;
  const double treated = std::clamp((baseline_rate + effect(arm, placebo_id)) / len, 0.0, 1.0);
  const double untreated = std::clamp(baseline_rate / len, 0.0, 1.0);
  return len * (adherence * treated + (1.0 - adherence) * untreated);
}

void PopulationSpec::validate() const {
  require(!arms.empty(), ErrorCode::kInvalidArgument, "population has no arms", "arms");
  require(!cohorts.empty(), ErrorCode::kInvalidArgument, "population has no cohorts", "cohorts");
  for (const auto& a : arms) {
    require(a.heterogeneity_sd >= 0.0, ErrorCode::kInvalidArgument,
            "heterogeneity sd must be >= 0", "arms.heterogeneity_sd");
  }
}

std::vector<VirtualPatient> sample_population(const PopulationSpec& spec, int period_len) {
  spec.validate();
  std::vector<VirtualPatient> out;
  out.reserve(spec.n_patients);
  for (std::size_t i = 0; i < spec.n_patients; ++i) {
    std::mt19937_64 rng(derive_seed(spec.seed, i));
    std::normal_distribution<double> z(0.0, 1.0);
    const auto& cohort = spec.cohorts[i % spec.cohorts.size()];
    VirtualPatient p;
    p.index = i;
    p.cohort = cohort.tag;
    p.baseline_rate = spec.baseline_rate;
    p.residual_sd = spec.residual_sd;
    p.adherence = spec.adherence;
    for (const auto& arm : spec.arms) {
      double mean = arm.mean_effect;
      if (auto it = cohort.offsets.find(arm.id); it != cohort.offsets.end()) mean += it->second;
      const double draw = z(rng);
      p.true_effects[arm.id] = arm.heterogeneity_sd > 0.0 ? mean + arm.heterogeneity_sd * draw : mean;
    }
    p.validate(period_len);
    out.push_back(std::move(p));
  }
  return out;
}

std::string_view policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kLfmOnly: return "lfm_only";
    case PolicyKind::kHybrid: return "hybrid";
    case PolicyKind::kOracle: return "oracle";
  }
  return "hybrid";
}

std::string true_best_arm(const VirtualPatient& patient, const PriorModel& model) {
  std::string best;
  double best_effect = 0.0;
  for (const auto& iv : model.interventions) {
    const double e = patient.effect(iv.id, "");
    if (best.empty() || e < best_effect) {
      best = iv.id;
      best_effect = e;
    }
  }
  return best;
}

namespace {

// Runs a trial on simulated daily diaries and returns the final state.
TrialState simulate_trial(const VirtualPatient& patient, const TrialDesign& design,
                          const std::vector<ArmPrior>& priors, double sigma_y,
                          std::uint64_t seed) {
  TrialState state = start_trial("sim-" + std::to_string(patient.index),
                                 "vp-" + std::to_string(patient.index), design);
  std::mt19937_64 rng(derive_seed(seed, 1));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const double len = design.period_len_days;

  for (std::size_t i = 0; i < state.schedule.phases.size(); ++i) {
    if (state.status != TrialStatus::kActive) break;
    if (state.schedule.phases[i].kind == PhaseKind::kIntervention &&
        state.schedule.phases[i].arm.empty()) {
      thompson_assign_next(state, priors, sigma_y,
                           derive_seed(seed, 1000 + state.schedule.phases[i].period_index));
    }
    const Phase phase = state.schedule.phases[i];
    const double effect =
        phase.kind == PhaseKind::kIntervention ? patient.effect(phase.arm, design.placebo_id) : 0.0;
    const double jitter = patient.residual_sd > 0.0 ? patient.residual_sd * z(rng) : 0.0;
    for (int day = phase.start_day; day <= phase.end_day; ++day) {
      const bool adherent = u(rng) < patient.adherence;
      const double p =
          std::clamp((patient.baseline_rate + (adherent ? effect : 0.0) + jitter) / len, 0.0, 1.0);
      OutcomeRecord rec;
      rec.day = day;
      rec.primary_event = u(rng) < p;
      rec.pain = rec.primary_event ? 4 + static_cast<int>(u(rng) * 5.0) : 0;
      ingest_outcome(state, rec);
      if (state.status != TrialStatus::kActive) break;
    }
  }
  if (state.status == TrialStatus::kActive) complete_trial(state);
  return state;
}

}  // namespace

PolicyRun run_policy(const VirtualPatient& patient, const Policy& policy, const SimConfig& config,
                     std::uint64_t seed) {
  const int len = policy.design.period_len_days;
  const std::string& placebo = policy.design.placebo_id;
  auto candidates = predict_candidates(config.model, config.profile);

  PolicyRun run;
  run.true_best = true_best_arm(patient, config.model);

  switch (policy.kind) {
    case PolicyKind::kOracle:
      run.selected = run.true_best;
      break;
    case PolicyKind::kLfmOnly:
      run.selected = candidates.front().intervention_id;
      break;
    case PolicyKind::kHybrid: {
      if (candidates.size() >= 2) {
        std::vector<Normal> priors;
        for (const auto& c : candidates) priors.push_back(c.prior());
        const auto sigma = prob_optimal(priors, config.sigma_samples, derive_seed(seed, 11));
        for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].sigma = sigma[i];
      } else {
        candidates.front().sigma = 1.0;
      }
      run.decision = decide(candidates, policy.trigger, config.profile);
      const auto& d = *run.decision;
      if (d.kind == DecisionKind::kDirectRecommend) {
        run.selected = d.recommended;
      } else if (d.kind == DecisionKind::kNoAction) {
        run.selected = candidates.front().intervention_id;
      } else {
        TrialDesign design = policy.design;
        design.arms = d.validate;
        if (d.include_placebo) design.arms.push_back(policy.trigger.placebo_id);
        design.placebo_id = policy.trigger.placebo_id;
        const int k = static_cast<int>(design.arms.size());
        if (k < 2) {
          // A lone active arm without placebo is compared against baseline only.
          design.arms.push_back(policy.trigger.placebo_id);
        }
        const int arms = static_cast<int>(design.arms.size());
        if (!design.adaptive) design.n_periods = (design.n_periods + arms - 1) / arms * arms;
        design.n_periods = std::max(design.n_periods, arms);
        design.seed = derive_seed(seed, 12);

        const auto priors = arm_priors(candidates, design);
        const auto state = simulate_trial(patient, design, priors, config.model.sigma_y, seed);
        run.posterior = posterior_for_trial(state, priors, config.model.sigma_y);
        const auto probs =
            posterior_prob_optimal(*run.posterior, config.sigma_samples, derive_seed(seed, 13));
        double best = -1.0;
        for (const auto& p : probs) {
          const bool eligible =
              std::find(d.validate.begin(), d.validate.end(), p.arm) != d.validate.end();
          if (eligible && p.probability > best) {
            best = p.probability;
            run.selected = p.arm;
          }
        }

        run.trial_run = true;
        int washout_days = 0;
        for (const auto& phase : state.schedule.phases) {
          if (phase.kind == PhaseKind::kWashout) {
            washout_days += phase.end_day - phase.start_day + 1;
            run.trace.push_back(patient.baseline_rate * (phase.end_day - phase.start_day + 1) / len);
            continue;
          }
          const std::string arm = phase.kind == PhaseKind::kBaseline ? placebo : phase.arm;
          run.trace.push_back(patient.expected_events(arm, len, placebo));
        }
        run.periods_spent =
            design.baseline_periods + design.n_periods + (washout_days + len - 1) / len;
      }
      break;
    }
  }

  run.correct = run.selected == run.true_best;
  run.realized_outcome = patient.expected_events(run.selected, len, placebo);
  const int remaining = std::max(0, config.horizon_periods - run.periods_spent);
  for (int i = 0; i < remaining; ++i) run.trace.push_back(run.realized_outcome);
  for (double x : run.trace) run.cumulative_outcome += x;
  return run;
}

Interval bootstrap_mean(const std::vector<double>& values, std::size_t resamples,
                        std::uint64_t seed) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "bootstrap needs data", "values");
  Interval out;
  for (double v : values) out.estimate += v;
  out.estimate /= static_cast<double>(values.size());

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[pick(rng)];
    m = s / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1)));
    return means[std::min(idx, resamples - 1)];
  };
  out.low = at(0.025);
  out.high = at(0.975);
  return out;
}

std::vector<PolicyResult> compare_policies(const PopulationSpec& spec,
                                           const std::vector<Policy>& policies,
                                           const SimConfig& config) {
  require(policies.size() >= 2, ErrorCode::kInvalidArgument,
          "comparison needs at least 2 policies", "policies");
  const int len = policies.front().design.period_len_days;
  const auto patients = sample_population(spec, len);

  std::vector<double> oracle_cumulative;
  {
    Policy oracle{PolicyKind::kOracle, {}, policies.front().design};
    for (const auto& p : patients) {
      oracle_cumulative.push_back(
          run_policy(p, oracle, config, derive_seed(spec.seed + 1, p.index)).cumulative_outcome);
    }
  }

  std::vector<PolicyResult> results;
  for (std::size_t k = 0; k < policies.size(); ++k) {
    PolicyResult r;
    r.kind = policies[k].kind;
    std::vector<double> correct, realized, regret;
    for (const auto& p : patients) {
      // Common random numbers across policies for paired comparisons.
      auto run = run_policy(p, policies[k], config, derive_seed(spec.seed + 1, p.index));
      correct.push_back(run.correct ? 1.0 : 0.0);
      realized.push_back(run.realized_outcome);
      regret.push_back(run.cumulative_outcome - oracle_cumulative[p.index]);
      if (run.trial_run) ++r.trials_run;
      r.total_periods_spent += run.periods_spent;
      r.runs.push_back(std::move(run));
    }
    const auto bs = derive_seed(spec.seed + 2, k);
    r.correct_selection_rate = bootstrap_mean(correct, config.bootstrap_resamples, bs);
    r.mean_realized_outcome = bootstrap_mean(realized, config.bootstrap_resamples, bs + 1);
    r.mean_regret = bootstrap_mean(regret, config.bootstrap_resamples, bs + 2);
    results.push_back(std::move(r));
  }
  return results;
}

Interval correct_selection_difference(const PolicyResult& a, const PolicyResult& b,
                                      std::size_t resamples, std::uint64_t seed) {
  require(a.runs.size() == b.runs.size(), ErrorCode::kInvalidArgument,
          "policy results cover different populations", "results");
  std::vector<double> diff;
  diff.reserve(a.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    diff.push_back((a.runs[i].correct ? 1.0 : 0.0) - (b.runs[i].correct ? 1.0 : 0.0));
  }
  return bootstrap_mean(diff, resamples, seed);
}

PriorModel population_prior_model(const PopulationSpec& spec, double sigma_y, double sd_floor) {
  PriorModel m;
  m.sigma_y = sigma_y;
  for (const auto& a : spec.arms) {
    m.interventions.push_back({a.id, {a.mean_effect, std::max(a.heterogeneity_sd, sd_floor)}, 1, {}});
  }
  return m;
}

// --- case study ---

CaseStudyConfig CaseStudyConfig::defaults() {
  CaseStudyConfig c;
  // Prior sds chosen so that the Monte Carlo probabilities of being optimal
  // come out at 0.30 / 0.32 / 0.15 / 0.23, and the efficacy map gives
  // 0.72 / 0.68 / 0.65 / 0.61.
  c.model.sigma_y = 1.5;
  c.model.efficacy = {0.5, -0.1};
  c.model.interventions = {
      {"magnesium", {-2.2, 1.0}, 1, {}},
      {"sleep_regularity", {-1.8, 2.33}, 1, {}},
      {"propranolol", {-1.5, 1.25}, 2, {}},
      {"caffeine_reduction", {-1.1, 2.55}, 1, {}},
  };
  c.profile.patient_id = "alice";
  c.profile.consent_aggregate = true;
  c.true_effects = {{"magnesium", -3.0},
                    {"sleep_regularity", -1.5},
                    {"propranolol", -1.0},
                    {"caffeine_reduction", -0.5}};
  c.design.n_periods = 6;
  c.design.period_len_days = 14;
  c.design.baseline_periods = 1;
  c.design.washout_days = 0;
  return c;
}

double CaseStudyResult::fraction(const std::string& arm, double threshold, bool at_least) const {
  if (replicates.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : replicates) {
    auto it = r.prob_effect.find(arm);
    if (it == r.prob_effect.end()) continue;
    if (at_least ? it->second >= threshold : it->second < threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(replicates.size());
}

CaseStudyResult replicate_case_study(const CaseStudyConfig& config, std::size_t n_replicates,
                                     std::uint64_t seed) {
  CaseStudyResult out;
  VirtualPatient alice;
  alice.true_effects = config.true_effects;
  alice.baseline_rate = config.baseline_rate;
  alice.validate(config.design.period_len_days);

  for (std::size_t r = 0; r < n_replicates; ++r) {
    const std::uint64_t rs = derive_seed(seed, r);
    CaseStudyReplicate rep;
    const auto candidates =
        rank_candidates(config.model, config.profile, config.sigma_samples, derive_seed(rs, 1));
    for (const auto& c : candidates) rep.prior_sigma[c.intervention_id] = *c.sigma;
    rep.decision = decide(candidates, config.trigger, config.profile);
    if (rep.decision.kind == DecisionKind::kValidate) {
      TrialDesign design = config.design;
      design.arms = rep.decision.validate;
      if (rep.decision.include_placebo) design.arms.push_back(config.trigger.placebo_id);
      design.placebo_id = config.trigger.placebo_id;
      design.seed = derive_seed(rs, 2);
      const auto priors = arm_priors(candidates, design);
      const auto state = simulate_trial(alice, design, priors, config.model.sigma_y, rs);
      rep.sequence = state.schedule.intervention_sequence();
      const auto posterior = posterior_for_trial(state, priors, config.model.sigma_y);
      for (const auto& arm : design.arms) {
        rep.prob_effect[arm] = prob_effect_at_least(
            posterior, {arm, config.delta_per_month, EffectQuery::Unit::kPerMonth});
      }
      for (const auto& p : posterior_prob_optimal(posterior, 10000, derive_seed(rs, 3))) {
        rep.prob_optimal[p.arm] = p.probability;
      }
    }
    out.replicates.push_back(std::move(rep));
  }

  std::map<std::string, std::vector<double>> per_arm;
  for (const auto& r : out.replicates) {
    for (const auto& [arm, p] : r.prob_effect) per_arm[arm].push_back(p);
  }
  for (auto& [arm, v] : per_arm) {
    std::sort(v.begin(), v.end());
    auto q = [&](double f) {
      return v[static_cast<std::size_t>(std::floor(f * static_cast<double>(v.size() - 1)))];
    };
    out.prob_effect_quantiles[arm] = {q(0.05), q(0.5), q(0.95)};
  }
  return out;
}

// --- generalizability ---

double auc_standard_error(double auc, std::size_t n_pos, std::size_t n_neg) {
  const double q1 = auc / (2.0 - auc);
  const double q2 = 2.0 * auc * auc / (1.0 + auc);
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  const double var = (auc * (1.0 - auc) + (np - 1.0) * (q1 - auc * auc) +
                      (nn - 1.0) * (q2 - auc * auc)) / (np * nn);
  return std::sqrt(std::max(0.0, var));
}

namespace {

struct CohortData {
  Eigen::MatrixXd features;  // intercept column first
  std::vector<int> responder;
};

CohortData draw_cohort(const GeneralizabilityConfig& c, bool cohort_b, std::size_t n,
                       std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  const int dims = 3 + c.n_noise_features;  // 1, causal, proxy, noise...
  CohortData d{Eigen::MatrixXd(static_cast<Eigen::Index>(n), dims), std::vector<int>(n)};
  const double offset = cohort_b ? c.cohort_shift * c.confounder_offset : 0.0;
  const double strength = cohort_b ? (1.0 - c.cohort_shift) * c.confounder_strength
                                   : c.confounder_strength;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double u = offset + z(rng);
    const double causal = z(rng);
    const double effect = c.mean_effect + c.causal_weight * causal + strength * (u - offset) +
                          c.heterogeneity_sd * z(rng);
    d.features(row, 0) = 1.0;
    d.features(row, 1) = causal;
    d.features(row, 2) = u + c.proxy_noise * z(rng);
    for (int k = 0; k < c.n_noise_features; ++k) d.features(row, 3 + k) = z(rng);
    d.responder[i] = effect <= c.responder_threshold ? 1 : 0;
  }
  return d;
}

std::pair<double, double> scored_auc(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  std::size_t pos = 0;
  for (int l : labels) pos += l != 0 ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return {0.5, 1.0};
  std::vector<double> s(scores.data(), scores.data() + scores.size());
  const double a = auc(s, labels);
  return {a, kZ975 * auc_standard_error(a, pos, neg)};
}

}  // namespace

GeneralizabilityResult generalizability_scenario(const GeneralizabilityConfig& config,
                                                 std::uint64_t seed) {
  require(config.n_per_cohort >= 4, ErrorCode::kInvalidArgument,
          "need at least 4 patients per cohort", "n_per_cohort");
  require(config.cohort_shift >= 0.0 && config.cohort_shift <= 1.0, ErrorCode::kInvalidArgument,
          "cohort_shift must lie in [0, 1]", "cohort_shift");
  std::mt19937_64 rng(seed);
  const auto a = draw_cohort(config, false, config.n_per_cohort, rng);
  const auto b = draw_cohort(config, true, config.n_per_cohort, rng);

  const auto n_train = static_cast<Eigen::Index>(config.n_per_cohort / 2);
  const auto n_test = static_cast<Eigen::Index>(config.n_per_cohort) - n_train;
  const Eigen::MatrixXd x_train = a.features.topRows(n_train);
  Eigen::VectorXd y_train(n_train);
  for (Eigen::Index i = 0; i < n_train; ++i) y_train(i) = a.responder[static_cast<std::size_t>(i)];
  // Linear probability score by least squares.
  const Eigen::VectorXd beta = x_train.colPivHouseholderQr().solve(y_train);

  const std::vector<int> a_test_labels(a.responder.begin() + n_train, a.responder.end());
  const auto [within, within_hw] = scored_auc(a.features.bottomRows(n_test) * beta, a_test_labels);
  const auto [cross, cross_hw] = scored_auc(b.features * beta, b.responder);

  GeneralizabilityResult r;
  r.within_cohort_auc = within;
  r.cross_cohort_auc = cross;
  r.within_half_width = within_hw;
  r.cross_half_width = cross_hw;
  if (within_hw > config.wide_ci_half_width || cross_hw > config.wide_ci_half_width) {
    r.flags.push_back("wide confidence interval");
  }
  return r;
}

}  // namespace nof1::sim

namespace nof1::sim {

PolicyScenario default_policy_scenario(double heterogeneity_sd, std::size_t n_patients,
                                       std::uint64_t seed) {
  PolicyScenario s;
  s.population.arms = {{"A", -2.0, heterogeneity_sd},
                       {"B", -1.7, heterogeneity_sd},
                       {"C", -1.4, heterogeneity_sd}};
  s.population.n_patients = n_patients;
  s.population.baseline_rate = 7.0;
  s.population.seed = seed;
  s.config.model = population_prior_model(s.population, 1.5);
  s.config.profile.patient_id = "virtual";
  Policy hybrid;
  hybrid.kind = PolicyKind::kHybrid;
  hybrid.design.n_periods = 6;
  hybrid.design.period_len_days = 14;
  hybrid.design.baseline_periods = 1;
  Policy lfm = hybrid;
  lfm.kind = PolicyKind::kLfmOnly;
  Policy oracle = hybrid;
  oracle.kind = PolicyKind::kOracle;
  s.policies = {lfm, hybrid, oracle};
  return s;
}

}  // namespace nof1::sim
