#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "benchgauge/dataio.hpp"
#include "benchgauge/metrics.hpp"
#include "benchgauge/parallel.hpp"
#include "benchgauge/rng.hpp"
#include "benchgauge/stats.hpp"

namespace bg {

struct ConfigScorePair {
  std::string config_id;
  double cv_score = 0.0;
  double test_score = 0.0;
};

struct AssociationReport {
  std::size_t n_configs = 0;
  double pearson = 0.0;
  double spearman = 0.0;
  double kendall_tau = 0.0;
  double discordance_rate = 0.0;
  /// k -> |top-k by CV ∩ top-k by test| for k in {1, 3, 5}, k capped at n.
  std::map<int, int> topk_overlap;
  std::string best_cv_config;
  std::string best_test_config;
  /// Test rank of the CV winner.
  int best_cv_test_rank = 0;
  /// CV rank of the test winner.
  int best_test_cv_rank = 0;
  double median_abs_rank_shift = 0.0;
  std::vector<int> cv_ranks;
  std::vector<int> test_ranks;
};

namespace detail {

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double mx = stats::mean(x);
  const double my = stats::mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedMetricError("correlation of a constant score vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline int sign(double v) { return (v > 0.0) - (v < 0.0); }

/// Kendall tau-b with tie correction on either axis.
inline double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  std::int64_t concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int sx = sign(x[i] - x[j]);
      const int sy = sign(y[i] - y[j]);
      if (sx == 0) ++ties_x;
      if (sy == 0) ++ties_y;
      if (sx * sy > 0) ++concordant;
      if (sx * sy < 0) ++discordant;
    }
  }
  const auto pairs = static_cast<std::int64_t>(n * (n - 1) / 2);
  const double denom = std::sqrt(static_cast<double>(pairs - ties_x) * static_cast<double>(pairs - ties_y));
  if (denom == 0.0) throw UndefinedMetricError("Kendall tau of a constant score vector");
  return static_cast<double>(concordant - discordant) / denom;
}

/// Indices ordered best first: score descending, then config id ascending.
inline std::vector<std::size_t> leaderboard_order(std::span<const double> scores,
                                                  const std::vector<std::string>& ids) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  return order;
}

}  // namespace detail

inline AssociationReport rank_association(const std::vector<ConfigScorePair>& pairs) {
  const std::size_t n = pairs.size();
  if (n < 3) throw ContractError("rank association needs at least 3 configs");
  std::vector<double> cv(n), test(n);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(pairs[i].cv_score) || !std::isfinite(pairs[i].test_score)) {
      throw SchemaError("non-finite score for config '" + pairs[i].config_id + "'");
    }
    cv[i] = pairs[i].cv_score;
    test[i] = pairs[i].test_score;
    ids[i] = pairs[i].config_id;
  }

  AssociationReport r;
  r.n_configs = n;
  r.pearson = detail::pearson(cv, test);
  const auto rcv = stats::average_ranks(cv);
  const auto rtest = stats::average_ranks(test);
  r.spearman = detail::pearson(rcv, rtest);
  r.kendall_tau = detail::kendall_tau_b(cv, test);

  std::int64_t reversed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((cv[i] - cv[j]) * (test[i] - test[j]) < 0.0) ++reversed;
    }
  }
  r.discordance_rate = static_cast<double>(reversed) / static_cast<double>(n * (n - 1) / 2);

  r.cv_ranks = stats::competition_ranks(cv);
  r.test_ranks = stats::competition_ranks(test);

  const auto cv_order = detail::leaderboard_order(cv, ids);
  const auto test_order = detail::leaderboard_order(test, ids);
  for (int k : {1, 3, 5}) {
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
    std::vector<std::size_t> a(cv_order.begin(), cv_order.begin() + static_cast<std::ptrdiff_t>(kk));
    std::vector<std::size_t> b(test_order.begin(), test_order.begin() + static_cast<std::ptrdiff_t>(kk));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::size_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    r.topk_overlap[k] = static_cast<int>(both.size());
  }
  r.best_cv_config = ids[cv_order.front()];
  r.best_test_config = ids[test_order.front()];
  r.best_cv_test_rank = r.test_ranks[cv_order.front()];
  r.best_test_cv_rank = r.cv_ranks[test_order.front()];

  std::vector<double> shifts(n);
  for (std::size_t i = 0; i < n; ++i) shifts[i] = std::abs(r.cv_ranks[i] - r.test_ranks[i]);
  r.median_abs_rank_shift = stats::median(std::move(shifts));
  return r;
}

/// Test-set scores for several configurations over one shared subject set.
struct ConfigSubjectMatrix {
  std::vector<std::string> config_ids;
  std::vector<std::string> subject_ids;
  /// One label per subject, shared by every config.
  std::vector<int> labels;
  /// scores[c][s]: probability of config c for subject s.
  std::vector<std::vector<double>> scores;

  void validate() const {
    if (config_ids.empty()) throw ContractError("no configs");
    if (subject_ids.empty()) throw ContractError("empty subject set");
    if (labels.size() != subject_ids.size()) throw SchemaError("labels do not match subjects");
    if (scores.size() != config_ids.size()) throw SchemaError("score rows do not match configs");
    for (const auto& row : scores) {
      if (row.size() != subject_ids.size()) throw SchemaError("score row length differs from subject count");
    }
  }
};

/// Builds the matrix from a prediction table with config_id on every row.
/// Several rows for one (config, subject) are averaged. Every config must
/// cover the same subjects with the same labels.
inline ConfigSubjectMatrix build_config_matrix(const PredictionTable& table) {
  std::map<std::string, PredictionTable> by_config;
  for (const auto& r : table) {
    if (!r.config_id) throw SchemaError("prediction row for '" + r.subject_id + "' lacks config_id");
    by_config[*r.config_id].push_back(r);
  }
  ConfigSubjectMatrix m;
  std::map<std::string, int> label_of;
  for (const auto& [config, rows] : by_config) {
    const SubjectTable pooled = pool_to_subject(rows);
    std::map<std::string, std::pair<double, int>> sorted;
    for (const auto& s : pooled) sorted.emplace(s.subject_id, std::make_pair(s.score, s.label));
    if (m.config_ids.empty()) {
      for (const auto& [id, v] : sorted) {
        m.subject_ids.push_back(id);
        m.labels.push_back(v.second);
        label_of[id] = v.second;
      }
    } else if (sorted.size() != m.subject_ids.size()) {
      throw IntegrityError("config '" + config + "' covers a different subject set");
    }
    std::vector<double> row;
    row.reserve(sorted.size());
    for (const auto& [id, v] : sorted) {
      const auto it = label_of.find(id);
      if (it == label_of.end()) throw IntegrityError("config '" + config + "' covers a different subject set");
      if (it->second != v.second) throw IntegrityError("subject '" + id + "' labelled differently across configs");
      row.push_back(v.first);
    }
    m.config_ids.push_back(config);
    m.scores.push_back(std::move(row));
  }
  return m;
}

struct RankDistribution {
  std::string config_id;
  /// Fraction of replicates in which this config holds rank 1 (ties share it).
  double p_rank1 = 0.0;
  int rank_lo = 0;
  int rank_hi = 0;
  double mean_rank = 0.0;
  /// histogram[r-1] = number of replicates at rank r.
  std::vector<int> histogram;
};

struct BootstrapRankReport {
  std::vector<RankDistribution> configs;
  int replicates = 0;
  std::uint64_t seed = 0;
  /// Resamples discarded for lacking a class and drawn again.
  std::int64_t redraws = 0;

  const RankDistribution& at(const std::string& config_id) const {
    for (const auto& c : configs) {
      if (c.config_id == config_id) return c;
    }
    throw ContractError("no config '" + config_id + "' in bootstrap report");
  }
};

/// Macro-F1 at the default 0.5 rule for every config on the full test set.
inline std::vector<double> test_macro_f1(const ConfigSubjectMatrix& m) {
  m.validate();
  std::vector<double> out;
  out.reserve(m.config_ids.size());
  for (const auto& row : m.scores) out.push_back(macro_f1_at(ScoredLabels(row, m.labels), kDefaultThreshold));
  return out;
}

/// Paired subject bootstrap of leaderboard ranks. Every replicate draws one
/// resample of subjects (with replacement) shared by all configs, scores each
/// config by macro-F1 at 0.5 and ranks them with competition ranking.
/// Replicate r draws from its own substream of `seed`, so the report is
/// identical for any thread count. Output is ordered by config id.
inline BootstrapRankReport bootstrap_rank_audit(const ConfigSubjectMatrix& m, int replicates,
                                                std::uint64_t seed) {
  m.validate();
  if (replicates < 1) throw ContractError("replicates must be >= 1");
  const std::size_t nc = m.config_ids.size();
  const std::size_t ns = m.subject_ids.size();
  const auto n_pos = std::count(m.labels.begin(), m.labels.end(), 1);
  if (n_pos == 0 || n_pos == static_cast<std::ptrdiff_t>(ns)) {
    throw ContractError("bootstrap rank audit needs both classes among subjects");
  }

  std::vector<std::size_t> order(nc);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return m.config_ids[a] < m.config_ids[b]; });

  std::vector<std::vector<int>> pred(nc);
  for (std::size_t k = 0; k < nc; ++k) pred[k] = binarize_scores(m.scores[order[k]], kDefaultThreshold);

  constexpr int kMaxAttempts = 100000;
  const auto reps = static_cast<std::size_t>(replicates);
  std::vector<int> ranks(reps * nc);
  std::vector<std::int64_t> redraws(reps, 0);
  parallel_for(reps, [&](std::size_t r) {
    Rng rng(seed, r);
    std::vector<int> weight(ns);
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxAttempts) throw ContractError("could not draw a two-class resample");
      std::fill(weight.begin(), weight.end(), 0);
      std::size_t pos = 0;
      for (std::size_t i = 0; i < ns; ++i) {
        const auto s = static_cast<std::size_t>(rng.below(ns));
        ++weight[s];
        pos += static_cast<std::size_t>(m.labels[s]);
      }
      if (pos > 0 && pos < ns) break;
      ++redraws[r];
    }
    std::vector<double> metric(nc);
    for (std::size_t k = 0; k < nc; ++k) {
      ConfusionCounts c;
      for (std::size_t s = 0; s < ns; ++s) {
        if (weight[s] == 0) continue;
        const int y = m.labels[s];
        const int p = pred[k][s];
        auto& cell = y == 1 ? (p == 1 ? c.tp : c.fn) : (p == 1 ? c.fp : c.tn);
        cell += weight[s];
      }
      metric[k] = classification_metrics(c).macro_f1;
    }
    const auto rk = stats::competition_ranks(metric);
    std::copy(rk.begin(), rk.end(), ranks.begin() + static_cast<std::ptrdiff_t>(r * nc));
  });

  BootstrapRankReport report;
  report.replicates = replicates;
  report.seed = seed;
  report.redraws = std::accumulate(redraws.begin(), redraws.end(), std::int64_t{0});
  report.configs.reserve(nc);
  for (std::size_t k = 0; k < nc; ++k) {
    RankDistribution d;
    d.config_id = m.config_ids[order[k]];
    d.histogram.assign(nc, 0);
    std::vector<double> values(reps);
    double sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const int rank = ranks[r * nc + k];
      ++d.histogram[static_cast<std::size_t>(rank - 1)];
      values[r] = rank;
      sum += rank;
    }
    std::sort(values.begin(), values.end());
    d.p_rank1 = static_cast<double>(d.histogram[0]) / static_cast<double>(reps);
    d.mean_rank = sum / static_cast<double>(reps);
    d.rank_lo = static_cast<int>(std::floor(stats::quantile_sorted(values, 0.025)));
    d.rank_hi = static_cast<int>(std::ceil(stats::quantile_sorted(values, 0.975)));
    report.configs.push_back(std::move(d));
  }
  return report;
}

/// Everything needed for the leaderboard-instability summary table.
struct LeaderboardAudit {
  AssociationReport association;
  BootstrapRankReport bootstrap;
  std::vector<ConfigScorePair> pairs;
  /// Bootstrap distribution of the config that wins on the full test set.
  RankDistribution test_best;
};

/// Joins CV scores with the per-subject test matrix, measures rank
/// association and bootstraps the test leaderboard.
inline LeaderboardAudit leaderboard_audit(const std::map<std::string, double>& cv_scores,
                                          const ConfigSubjectMatrix& test, int replicates,
                                          std::uint64_t seed) {
  const auto test_scores = test_macro_f1(test);
  LeaderboardAudit audit;
  for (std::size_t c = 0; c < test.config_ids.size(); ++c) {
    const auto it = cv_scores.find(test.config_ids[c]);
    if (it == cv_scores.end()) throw IntegrityError("config '" + test.config_ids[c] + "' has no CV score");
    audit.pairs.push_back({test.config_ids[c], it->second, test_scores[c]});
  }
  if (cv_scores.size() != test.config_ids.size()) {
    throw IntegrityError("CV file lists configs that have no test predictions");
  }
  audit.association = rank_association(audit.pairs);
  audit.bootstrap = bootstrap_rank_audit(test, replicates, seed);
  audit.test_best = audit.bootstrap.at(audit.association.best_test_config);
  return audit;
}

}  // namespace bg
