#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace nof1 {

// Univariate Gaussian on the effect scale.
struct Normal {
  double mean = 0.0;
  double sd = 1.0;

  friend bool operator==(const Normal&, const Normal&) = default;
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Two-sided 95% standard normal quantile.
inline constexpr double kZ975 = 1.959963984540054;

// Mixes a base seed with a stream index so that per-patient / per-replicate
// generators are independent of iteration order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Mann-Whitney AUC of `scores` for binary `labels`, ties counted as one half.
double auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace nof1
