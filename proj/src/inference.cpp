#include "nof1/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "nof1/error.hpp"
#include "nof1/priors.hpp"

namespace nof1 {

Normal PosteriorState::effect(const std::string& arm) const {
  if (arm == reference_arm) return {0.0, 0.0};
  for (const auto& a : arms) {
    if (a.arm == arm) return a.effect;
  }
  fail(ErrorCode::kNotFound, "arm '" + arm + "' is not in the posterior", "arm");
}

bool PosteriorState::has_arm(const std::string& arm) const {
  if (arm == reference_arm) return true;
  return std::any_of(arms.begin(), arms.end(), [&](const auto& a) { return a.arm == arm; });
}

std::vector<ArmPrior> arm_priors(const std::vector<InterventionCandidate>& candidates,
                                 const TrialDesign& design) {
  const std::string reference = design.reference_arm();
  std::vector<ArmPrior> out;
  for (const auto& arm : design.arms) {
    if (arm == reference) continue;
    auto it = std::find_if(candidates.begin(), candidates.end(),
                           [&](const auto& c) { return c.intervention_id == arm; });
    require(it != candidates.end(), ErrorCode::kInvalidArgument,
            "no prior for arm '" + arm + "'", "arms");
    out.push_back({arm, it->prior()});
  }
  return out;
}

namespace {

struct Observation {
  double y;
  double variance;
  int arm;  // index into priors, -1 for the reference
  bool carry;
};

}  // namespace

PosteriorState update_posterior(const std::vector<ArmPrior>& priors,
                                const std::string& reference_arm, double sigma_y,
                                const std::vector<PeriodSummary>& summaries,
                                int period_len_days, const UpdateOptions& options) {
  require(sigma_y > 0.0 && std::isfinite(sigma_y), ErrorCode::kInvalidArgument,
          "sigma_y must be positive", "sigma_y");
  require(period_len_days >= 1, ErrorCode::kInvalidArgument, "period length must be >= 1",
          "period_len_days");
  for (const auto& p : priors) {
    require(p.arm != reference_arm, ErrorCode::kInvalidArgument,
            "the reference arm cannot carry an effect prior", "priors");
    require(p.prior.sd > 0.0, ErrorCode::kInvalidArgument,
            "prior sd for '" + p.arm + "' must be positive", "priors");
  }
  if (options.reference_prior) {
    require(options.reference_prior->sd >= 0.0, ErrorCode::kInvalidArgument,
            "reference prior sd must be >= 0", "reference_prior");
  }

  auto arm_index = [&](const std::string& arm) -> int {
    if (arm == reference_arm) return -1;
    for (std::size_t i = 0; i < priors.size(); ++i) {
      if (priors[i].arm == arm) return static_cast<int>(i);
    }
    fail(ErrorCode::kInvalidArgument, "summary references unknown arm '" + arm + "'",
         "summaries.arm");
  };

  const bool baseline_is_reference = reference_arm == kBaselineArm;
  std::vector<Observation> obs;
  std::vector<int> used(priors.size(), 0);
  int reference_used = 0;
  double baseline_sum = 0.0, all_sum = 0.0;
  int baseline_n = 0;
  for (const auto& s : summaries) {
    const int idx = s.is_baseline ? -1 : arm_index(s.arm);
    if (s.n_observed <= 0) continue;
    const double scale = static_cast<double>(s.period_len) / s.n_observed;
    const double y = s.event_days * scale;
    if (s.is_baseline) {
      baseline_sum += y;
      ++baseline_n;
      if (!baseline_is_reference) continue;
    }
    all_sum += y;
    const bool carry = !s.is_baseline && s.previous_arm && *s.previous_arm != reference_arm;
    obs.push_back({y, sigma_y * sigma_y * scale, idx, carry});
    if (idx < 0) {
      ++reference_used;
    } else {
      ++used[idx];
    }
  }

  PosteriorState out;
  out.reference_arm = reference_arm;
  out.sigma_y = sigma_y;
  out.period_len_days = period_len_days;

  Normal ref_prior{0.0, kReferencePriorScale * sigma_y};
  if (options.reference_prior) {
    ref_prior = *options.reference_prior;
  } else if (baseline_n > 0) {
    ref_prior.mean = baseline_sum / baseline_n;
  } else if (!obs.empty()) {
    ref_prior.mean = all_sum / static_cast<double>(obs.size());
  }
  const Normal gamma_prior{0.0, sigma_y};

  if (obs.empty()) {
    for (const auto& p : priors) out.arms.push_back({p.arm, p.prior, 0});
    out.reference_level = ref_prior;
    if (options.carryover) out.carryover = gamma_prior;
    return out;
  }

  const bool ref_fixed = ref_prior.sd == 0.0;
  const int k = static_cast<int>(priors.size());
  const int ref_col = ref_fixed ? -1 : 0;
  const int effect0 = ref_fixed ? 0 : 1;
  const int gamma_col = options.carryover ? effect0 + k : -1;
  const int dim = effect0 + k + (options.carryover ? 1 : 0);

  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  auto add_prior = [&](int col, const Normal& n) {
    const double prec = 1.0 / (n.sd * n.sd);
    precision(col, col) += prec;
    rhs(col) += prec * n.mean;
  };
  if (!ref_fixed) add_prior(ref_col, ref_prior);
  for (int i = 0; i < k; ++i) add_prior(effect0 + i, priors[i].prior);
  if (options.carryover) add_prior(gamma_col, gamma_prior);

  for (const auto& o : obs) {
    std::vector<int> cols;
    if (!ref_fixed) cols.push_back(ref_col);
    if (o.arm >= 0) cols.push_back(effect0 + o.arm);
    if (options.carryover && o.carry) cols.push_back(gamma_col);
    const double w = 1.0 / o.variance;
    const double y = ref_fixed ? o.y - ref_prior.mean : o.y;
    for (int a : cols) {
      rhs(a) += w * y;
      for (int b : cols) precision(a, b) += w;
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  require(llt.info() == Eigen::Success, ErrorCode::kInternal,
          "posterior precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(rhs);
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(dim, dim));

  out.reference_level =
      ref_fixed ? ref_prior : Normal{mean(ref_col), std::sqrt(cov(ref_col, ref_col))};
  out.reference_periods_used = reference_used;
  for (int i = 0; i < k; ++i) {
    const int c = effect0 + i;
    out.arms.push_back({priors[i].arm, {mean(c), std::sqrt(cov(c, c))}, used[i]});
  }
  if (options.carryover) {
    out.carryover = Normal{mean(gamma_col), std::sqrt(cov(gamma_col, gamma_col))};
  }
  return out;
}

double delta_per_period(const EffectQuery& query, int period_len_days) {
  if (query.unit == EffectQuery::Unit::kPerPeriod) return query.delta;
  return query.delta * static_cast<double>(period_len_days) / kDaysPerMonth;
}

double prob_effect_at_least(const PosteriorState& posterior, const EffectQuery& query) {
  require(std::isfinite(query.delta), ErrorCode::kInvalidArgument, "delta must be finite",
          "delta");
  const Normal e = posterior.effect(query.arm);
  const double bound = -delta_per_period(query, posterior.period_len_days);
  if (e.sd == 0.0) return e.mean <= bound ? 1.0 : 0.0;
  return normal_cdf((bound - e.mean) / e.sd);
}

std::vector<ArmProbability> posterior_prob_optimal(const PosteriorState& posterior,
                                                   std::size_t samples, std::uint64_t seed) {
  std::vector<Normal> dists;
  std::vector<ArmProbability> out;
  for (const auto& a : posterior.arms) {
    dists.push_back(a.effect);
    out.push_back({a.arm, 0.0});
  }
  dists.push_back({0.0, 0.0});
  out.push_back({posterior.reference_arm, 0.0});
  const auto sigma = prob_optimal_with_point_masses(dists, samples, seed);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].probability = sigma[i];
  return out;
}

std::string thompson_next_arm(const PosteriorState& posterior, std::uint64_t seed) {
  require(!posterior.arms.empty(), ErrorCode::kInvalidArgument,
          "Thompson sampling needs at least 2 arms", "arms");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::string best;
  double best_value = 0.0;
  for (const auto& a : posterior.arms) {
    const double v = a.effect.mean + a.effect.sd * z(rng);
    if (best.empty() || v < best_value) {
      best = a.arm;
      best_value = v;
    }
  }
  // Reference arm: point mass at 0, drawn last.
  if (0.0 < best_value) best = posterior.reference_arm;
  return best;
}

PosteriorState posterior_for_trial(const TrialState& state, const std::vector<ArmPrior>& priors,
                                   double sigma_y, const UpdateOptions& options) {
  return update_posterior(priors, state.design.reference_arm(), sigma_y, period_summary(state),
                          state.design.period_len_days, options);
}

std::string thompson_assign_next(TrialState& state, const std::vector<ArmPrior>& priors,
                                 double sigma_y, std::uint64_t seed) {
  const auto posterior = posterior_for_trial(state, priors, sigma_y);
  const std::string arm = thompson_next_arm(posterior, seed);
  assign_pending_period(state, arm);
  return arm;
}

CarryoverFit fit_carryover(const std::vector<ArmPrior>& priors, const std::string& reference_arm,
                           double sigma_y, const std::vector<PeriodSummary>& summaries,
                           int period_len_days, std::size_t n_arms) {
  std::size_t full = 0;
  bool transition = false;
  for (const auto& s : summaries) {
    if (s.is_baseline) continue;
    if (s.n_observed == s.period_len) ++full;
    if (s.previous_arm && *s.previous_arm != s.arm) transition = true;
  }
  require(full >= n_arms + 2 && transition, ErrorCode::kFailedPrecondition,
          "carryover unidentifiable: need at least " + std::to_string(n_arms + 2) +
              " fully observed periods and one arm switch",
          "summaries");
  UpdateOptions opt;
  opt.carryover = true;
  CarryoverFit fit;
  fit.posterior = update_posterior(priors, reference_arm, sigma_y, summaries, period_len_days, opt);
  fit.gamma = *fit.posterior.carryover;
  return fit;
}

TrialReport generate_report(const PosteriorState& posterior, const TrialState& state,
                            const ReportOptions& options) {
  require(state.status != TrialStatus::kActive, ErrorCode::kFailedPrecondition,
          "report requires a completed or stopped trial", "trial.status");

  TrialReport r;
  r.trial_id = state.trial_id;
  r.patient_id = state.patient_id;
  r.status = std::string(trial_status_name(state.status));
  r.stop_reason = state.stop_reason;
  r.stop_day = state.stop_day;
  r.reference_arm = posterior.reference_arm;
  r.sigma_y = posterior.sigma_y;
  r.period_len_days = posterior.period_len_days;
  r.carryover = posterior.carryover;
  r.alerts = state.alerts;

  const auto sigma = posterior_prob_optimal(posterior, options.prob_optimal_samples, options.seed);
  auto arm_report = [&](const std::string& arm, bool is_ref, int n) {
    ArmReport a;
    a.arm = arm;
    a.is_reference = is_ref;
    a.effect = posterior.effect(arm);
    a.ci_low = a.effect.mean - kZ975 * a.effect.sd;
    a.ci_high = a.effect.mean + kZ975 * a.effect.sd;
    for (const auto& s : sigma) {
      if (s.arm == arm) a.prob_optimal = s.probability;
    }
    for (double d : options.deltas_per_month) {
      a.prob_effect.emplace_back(
          d, prob_effect_at_least(posterior, {arm, d, EffectQuery::Unit::kPerMonth}));
    }
    a.n_periods = n;
    return a;
  };
  for (const auto& a : posterior.arms) r.arms.push_back(arm_report(a.arm, false, a.n_periods_used));
  r.arms.push_back(arm_report(posterior.reference_arm, true, posterior.reference_periods_used));

  const int last_recorded = state.records.empty() ? 0 : state.records.back().day;
  const int horizon = state.status == TrialStatus::kStopped ? state.stop_day : last_recorded;
  for (auto& s : period_summary(state)) {
    if (s.start_day > horizon) continue;
    if (!s.is_baseline) r.sequence_followed.push_back(s.arm);
    const int elapsed = std::min(s.end_day, horizon) - s.start_day + 1;
    PeriodReport p{s, elapsed - s.n_observed};
    r.total_missing_days += p.missing_days;
    r.periods.push_back(std::move(p));
  }
  return r;
}

}  // namespace nof1
