#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "benchgauge/error.hpp"

namespace bg::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw ContractError("mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (divisor n-1); 0 for a single value.
inline double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Quantile with linear interpolation between order statistics
/// (the "type 7" rule used by numpy and R by default).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ContractError("quantile of empty sample");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, q);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

/// Average ranks (1-based, ascending); tied values share the mean of their
/// positions.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && xs[order[j]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

/// Competition ranks, higher value is better: best gets 1 and tied values
/// share the smallest rank of their group ("1224" ranking).
inline std::vector<int> competition_ranks(std::span<const double> xs) {
  std::vector<int> ranks(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    int better = 0;
    for (double other : xs) better += other > xs[i] ? 1 : 0;
    ranks[i] = better + 1;
  }
  return ranks;
}

}  // namespace bg::stats
