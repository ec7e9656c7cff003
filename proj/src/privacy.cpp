#include "nof1/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "nof1/error.hpp"
#include "nof1/stats.hpp"

namespace nof1 {

namespace {
// Slack for summing many small epsilons (e.g. ten spends of 0.1).
constexpr double kLedgerSlack = 1e-12;
}  // namespace

PrivacyBudget::PrivacyBudget(double epsilon, double delta, double clip)
    : epsilon_(epsilon), delta_(delta), clip_(clip) {
  require(epsilon > 0.0 && std::isfinite(epsilon), ErrorCode::kInvalidArgument,
          "budget epsilon must be positive", "budget.epsilon");
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument,
          "budget delta must lie in (0, 1)", "budget.delta");
  require(clip > 0.0 && std::isfinite(clip), ErrorCode::kInvalidArgument,
          "clip bound must be positive", "budget.clip");
}

PrivacyBudget PrivacyBudget::restore(double epsilon, double delta, double clip,
                                     std::vector<BudgetSpend> spent) {
  PrivacyBudget b(epsilon, delta, clip);
  for (const auto& s : spent) b.spend(s.epsilon, s.delta, s.timestamp);
  return b;
}

double PrivacyBudget::spent_epsilon() const {
  double s = 0.0;
  for (const auto& x : spent_) s += x.epsilon;
  return s;
}

double PrivacyBudget::spent_delta() const {
  double s = 0.0;
  for (const auto& x : spent_) s += x.delta;
  return s;
}

bool PrivacyBudget::can_spend(double epsilon, double delta) const {
  return spent_epsilon() + epsilon <= epsilon_ * (1.0 + kLedgerSlack) &&
         spent_delta() + delta <= delta_ * (1.0 + kLedgerSlack);
}

void PrivacyBudget::spend(double epsilon, double delta, std::int64_t timestamp) {
  require(epsilon > 0.0 && std::isfinite(epsilon), ErrorCode::kInvalidArgument,
          "requested epsilon must be positive", "request.epsilon");
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument,
          "requested delta must lie in (0, 1)", "request.delta");
  if (!can_spend(epsilon, delta)) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "privacy budget exhausted: remaining epsilon=%.6g delta=%.6g", 
                  std::max(0.0, remaining_epsilon()), std::max(0.0, remaining_delta()));
    fail(ErrorCode::kRefused, buf, "budget");
  }
  spent_.push_back({epsilon, delta, timestamp});
}

double gaussian_noise_sd(double clip, double epsilon, double delta) {
  const double sensitivity = 2.0 * clip;
  return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

double clip_estimate(double estimate, double clip) { return std::clamp(estimate, -clip, clip); }

Contribution clip_and_noise(const std::string& intervention_id, double estimate,
                            const BudgetRequest& request, PrivacyBudget& budget, bool consent,
                            std::uint64_t seed, std::int64_t timestamp) {
  require(consent, ErrorCode::kRefused, "contribution refused: no consent to aggregate",
          "consent");
  require(std::isfinite(estimate), ErrorCode::kInvalidArgument, "estimate is not finite",
          "estimate");
  budget.spend(request.epsilon, request.delta, timestamp);

  Contribution c;
  c.intervention_id = intervention_id;
  c.noise_sd = gaussian_noise_sd(budget.clip(), request.epsilon, request.delta);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, c.noise_sd);
  c.estimate = clip_estimate(estimate, budget.clip()) + noise(rng);
  c.consent = true;
  return c;
}

AggregateResult aggregate_contributions(std::span<const Contribution> contributions,
                                        std::size_t k_min) {
  std::map<std::string, std::pair<double, std::size_t>> groups;
  for (const auto& c : contributions) {
    if (!c.consent) continue;
    auto& [sum, n] = groups[c.intervention_id];
    sum += c.estimate * c.count;
    n += static_cast<std::size_t>(c.count);
  }
  AggregateResult out;
  for (const auto& [id, g] : groups) {
    if (g.second < k_min) {
      out.withheld.push_back(id);
    } else {
      out.released.push_back({id, g.first / static_cast<double>(g.second), g.second});
    }
  }
  return out;
}

std::int64_t encode_fixed(double value) {
  require(std::isfinite(value) && std::abs(value) <= kFixedPointLimit,
          ErrorCode::kInvalidArgument, "value outside the fixed-point encoding range", "value");
  return static_cast<std::int64_t>(std::llround(value * kFixedPointScale));
}

double decode_fixed(std::int64_t fixed) { return static_cast<double>(fixed) / kFixedPointScale; }

std::vector<std::uint64_t> pair_mask(std::uint64_t pair_seed, std::size_t dim) {
  std::mt19937_64 prg(pair_seed);
  std::vector<std::uint64_t> m(dim);
  for (auto& x : m) x = prg();
  return m;
}

MaskedShare mask_value(std::uint32_t client_id, std::span<const double> values,
                       const std::map<std::uint32_t, std::uint64_t>& peer_seeds) {
  MaskedShare share;
  share.client_id = client_id;
  share.masked.reserve(values.size());
  for (double v : values) share.masked.push_back(static_cast<std::uint64_t>(encode_fixed(v)));
  for (const auto& [peer, seed] : peer_seeds) {
    require(peer != client_id, ErrorCode::kInvalidArgument, "client cannot pair with itself",
            "peer_seeds");
    const auto mask = pair_mask(seed, values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      // Unsigned arithmetic wraps mod 2^64.
      if (client_id < peer) {
        share.masked[i] += mask[i];
      } else {
        share.masked[i] -= mask[i];
      }
    }
    share.peers.push_back(peer);
  }
  return share;
}

UnmaskedSum unmask_sum(std::span<const MaskedShare> shares) {
  require(!shares.empty(), ErrorCode::kInvalidArgument, "no shares to unmask", "shares");
  std::set<std::uint32_t> present;
  for (const auto& s : shares) {
    require(present.insert(s.client_id).second, ErrorCode::kInvalidArgument,
            "duplicate share for client " + std::to_string(s.client_id), "shares");
  }
  const std::size_t dim = shares.front().masked.size();
  for (const auto& s : shares) {
    require(s.masked.size() == dim, ErrorCode::kInvalidArgument,
            "shares have different dimensions", "shares");
    for (auto peer : s.peers) {
      require(present.contains(peer), ErrorCode::kUnsupported,
              "dropout unsupported: missing share from client " + std::to_string(peer),
              "shares");
    }
    require(s.peers.size() + 1 == shares.size(), ErrorCode::kUnsupported,
            "dropout unsupported: share roster does not match the round", "shares");
  }

  std::vector<std::uint64_t> acc(dim, 0);
  for (const auto& s : shares) {
    for (std::size_t i = 0; i < dim; ++i) acc[i] += s.masked[i];
  }
  UnmaskedSum out;
  for (auto a : acc) {
    const auto f = static_cast<std::int64_t>(a);
    out.fixed.push_back(f);
    out.values.push_back(decode_fixed(f));
  }
  return out;
}

std::map<std::uint32_t, std::uint64_t> simulated_peer_seeds(
    std::uint32_t client_id, std::span<const std::uint32_t> clients, std::uint64_t round_seed) {
  std::map<std::uint32_t, std::uint64_t> seeds;
  for (auto peer : clients) {
    if (peer == client_id) continue;
    const std::uint64_t lo = std::min(client_id, peer);
    const std::uint64_t hi = std::max(client_id, peer);
    seeds[peer] = derive_seed(round_seed, (lo << 32) | hi);
  }
  return seeds;
}

}  // namespace nof1
