#pragma once

// Brute-force reference implementations used only by the tests. They follow
// the textbook definitions directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

namespace oracle {

/// (wins + 0.5 * ties) / (P * N) over every positive/negative pair.
inline double auroc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, ties = 0.0, pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 1) pos += 1; else neg += 1;
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      if (s[i] > s[j]) wins += 1;
      else if (s[i] == s[j]) ties += 1;
    }
  }
  return (wins + 0.5 * ties) / (pos * neg);
}

/// Sum over distinct thresholds t (descending) of
/// (recall(t) - recall(previous t)) * precision(t), where everything with
/// score >= t is predicted positive.
inline double ap_thresholds(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double total_pos = 0;
  for (int v : y) total_pos += v;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0, predicted = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) {
        predicted += 1;
        tp += y[i];
      }
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

/// Kendall tau-a: (concordant - discordant) / C(n,2).
inline double kendall_tau_a(const std::vector<double>& x, const std::vector<double>& y) {
  double c = 0, d = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = (x[i] - x[j]) * (y[i] - y[j]);
      if (p > 0) c += 1;
      if (p < 0) d += 1;
    }
  }
  return (c - d) / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

/// Cyclic Jacobi eigenvalue iteration on a dense symmetric matrix stored
/// row-major. Returns eigenvalues sorted descending.
inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

/// Deterministic LCG so fixtures do not depend on the library's generator.
class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : state_(seed * 2862933555777941757ULL + 3037000493ULL) {}
  std::uint64_t next() {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return state_ >> 11;
  }
  double uniform() { return static_cast<double>(next()) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * uniform());
  }

 private:
  std::uint64_t state_;
};

}  // namespace oracle
