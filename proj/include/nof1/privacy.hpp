#pragma once

// Privacy layer: (epsilon, delta)-DP contributions of individual effect
// estimates with a sequential-composition budget ledger, k-anonymous
// aggregation, and additive-mask secure aggregation.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace nof1 {

struct BudgetSpend {
  double epsilon = 0.0;
  double delta = 0.0;
  std::int64_t timestamp = 0;

  friend bool operator==(const BudgetSpend&, const BudgetSpend&) = default;
};

// Basic sequential composition: the sums of spent epsilons and deltas never
// exceed the totals.
class PrivacyBudget {
 public:
  PrivacyBudget() = default;
  PrivacyBudget(double epsilon, double delta, double clip);

  double epsilon() const { return epsilon_; }
  double delta() const { return delta_; }
  double clip() const { return clip_; }
  const std::vector<BudgetSpend>& spent() const { return spent_; }

  double spent_epsilon() const;
  double spent_delta() const;
  double remaining_epsilon() const { return epsilon_ - spent_epsilon(); }
  double remaining_delta() const { return delta_ - spent_delta(); }

  bool can_spend(double epsilon, double delta) const;
  // Throws kRefused without touching the ledger when over budget.
  void spend(double epsilon, double delta, std::int64_t timestamp);

  // Rebuilds a budget from persisted state (replay).
  static PrivacyBudget restore(double epsilon, double delta, double clip,
                               std::vector<BudgetSpend> spent);

  friend bool operator==(const PrivacyBudget&, const PrivacyBudget&) = default;

 private:
  double epsilon_ = 1.0;
  double delta_ = 1e-5;
  double clip_ = 1.0;
  std::vector<BudgetSpend> spent_;
};

struct BudgetRequest {
  double epsilon = 0.1;
  double delta = 1e-6;
};

struct Contribution {
  std::string intervention_id;
  double estimate = 0.0;  // clipped to [-C, C], then noised
  double noise_sd = 0.0;
  int count = 1;
  bool consent = false;

  friend bool operator==(const Contribution&, const Contribution&) = default;
};

// Gaussian mechanism with sensitivity 2C (replace-one adjacency on [-C, C]).
double gaussian_noise_sd(double clip, double epsilon, double delta);

double clip_estimate(double estimate, double clip);

Contribution clip_and_noise(const std::string& intervention_id, double estimate,
                            const BudgetRequest& request, PrivacyBudget& budget, bool consent,
                            std::uint64_t seed, std::int64_t timestamp = 0);

inline constexpr std::size_t kMinCohort = 10;

struct InterventionAggregate {
  std::string intervention_id;
  double mean = 0.0;
  std::size_t count = 0;

  friend bool operator==(const InterventionAggregate&, const InterventionAggregate&) = default;
};

struct AggregateResult {
  std::vector<InterventionAggregate> released;  // sorted by intervention id
  std::vector<std::string> withheld;            // below k_min
};

// Contributions without consent are ignored.
AggregateResult aggregate_contributions(std::span<const Contribution> contributions,
                                        std::size_t k_min = kMinCohort);

// --- Secure aggregation ---------------------------------------------------

inline constexpr double kFixedPointScale = 1e6;
inline constexpr double kFixedPointLimit = 2147483648.0 / kFixedPointScale;  // 2^31 / s

std::int64_t encode_fixed(double value);
double decode_fixed(std::int64_t fixed);

struct MaskedShare {
  std::uint32_t client_id = 0;
  std::vector<std::uint64_t> masked;  // fixed-point values plus masks, mod 2^64
  std::vector<std::uint32_t> peers;   // every other client in the round

  friend bool operator==(const MaskedShare&, const MaskedShare&) = default;
};

// Pairwise mask for (i, j), i < j: client i adds it, client j subtracts it.
std::vector<std::uint64_t> pair_mask(std::uint64_t pair_seed, std::size_t dim);

MaskedShare mask_value(std::uint32_t client_id, std::span<const double> values,
                       const std::map<std::uint32_t, std::uint64_t>& peer_seeds);

struct UnmaskedSum {
  std::vector<std::int64_t> fixed;
  std::vector<double> values;
};

// Requires the share of every client named as a peer; a missing share aborts
// with kUnsupported ("dropout unsupported").
UnmaskedSum unmask_sum(std::span<const MaskedShare> shares);

// In-process stand-in for the out-of-band seed exchange: one seed per pair.
std::map<std::uint32_t, std::uint64_t> simulated_peer_seeds(
    std::uint32_t client_id, std::span<const std::uint32_t> clients, std::uint64_t round_seed);

}  // namespace nof1
