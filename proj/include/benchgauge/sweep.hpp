#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "benchgauge/dataio.hpp"
#include "benchgauge/lint.hpp"
#include "benchgauge/metrics.hpp"
#include "benchgauge/parallel.hpp"
#include "benchgauge/reflearn.hpp"
#include "benchgauge/rng.hpp"

namespace bg {

inline const std::vector<std::string>& default_bundles() {
  static const std::vector<std::string> bundles{"A", "V", "T", "A+V", "T+A", "T+V", "T+A+V", "A+V+T+L"};
  return bundles;
}

inline const std::vector<std::int64_t>& default_sweep_seeds() {
  static const std::vector<std::int64_t> seeds{13, 23, 37};
  return seeds;
}

inline const std::vector<std::int64_t>& default_stress_seeds() {
  static const std::vector<std::int64_t> seeds{13, 23, 37, 42, 79};
  return seeds;
}

struct SweepGrid {
  std::vector<std::string> bundles = default_bundles();
  std::vector<Pooler> poolers{Pooler::mean, Pooler::meanstd};
  std::vector<LearnerSpec> learners;
};

struct SweepSplit {
  std::vector<std::string> dev_subjects;
  std::vector<std::string> test_subjects;
};

struct SweepConfigResult {
  std::string config_id;
  std::string bundle;
  Pooler pooler = Pooler::mean;
  std::string learner;
  /// Mean fold macro-F1 at 0.5, averaged over seeds.
  double cv_score = 0.0;
  std::vector<double> cv_score_per_seed;
  /// Test probability per subject, averaged over folds and then seeds.
  std::vector<double> test_scores;
};

struct SweepResult {
  std::vector<std::string> test_subjects;
  /// Copied for reporting only; never used while fitting.
  std::vector<int> test_labels;
  std::vector<SweepConfigResult> configs;
  std::vector<std::int64_t> seeds_used;
  int folds = 5;

  /// Per-subject test predictions in the prediction-file schema.
  PredictionTable test_predictions() const {
    PredictionTable t;
    for (const auto& c : configs) {
      for (std::size_t s = 0; s < test_subjects.size(); ++s) {
        PredictionRecord r;
        r.subject_id = test_subjects[s];
        r.label = test_labels[s];
        r.score = c.test_scores[s];
        r.config_id = c.config_id;
        r.split = Split::test;
        t.push_back(std::move(r));
      }
    }
    return t;
  }

  std::map<std::string, double> cv_scores() const {
    std::map<std::string, double> out;
    for (const auto& c : configs) out.emplace(c.config_id, c.cv_score);
    return out;
  }
};

inline std::vector<std::string> split_bundle(const std::string& bundle) {
  std::vector<std::string> blocks;
  std::size_t start = 0;
  while (true) {
    const auto plus = bundle.find('+', start);
    blocks.push_back(bundle.substr(start, plus - start));
    if (blocks.back().empty()) throw ContractError("malformed bundle '" + bundle + "'");
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  return blocks;
}

inline std::string sweep_config_id(const std::string& bundle, Pooler pooler, const std::string& learner) {
  return bundle + "|" + std::string(to_string(pooler)) + "|" + learner;
}

namespace detail {

inline Eigen::MatrixXd bundle_matrix(const PooledFeatures& pooled, const std::vector<std::string>& blocks,
                                     const std::vector<std::size_t>& rows) {
  Eigen::Index width = 0;
  for (const auto& b : blocks) width += static_cast<Eigen::Index>(pooled.block_dim(b));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), width);
  Eigen::Index col = 0;
  for (const auto& b : blocks) {
    const auto& vecs = pooled.blocks.at(b);
    const auto dim = static_cast<Eigen::Index>(pooled.block_dim(b));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (Eigen::Index j = 0; j < dim; ++j) x(static_cast<Eigen::Index>(r), col + j) = vecs[rows[r]][static_cast<std::size_t>(j)];
    }
    col += dim;
  }
  return x;
}

}  // namespace detail

/// Stratified k-fold CV on the development subjects for every (bundle,
/// pooler, learner, seed). Fold models also score the test subjects; test
/// probabilities are averaged over folds, then over seeds (seeds processed in
/// ascending order). Test labels are never read during fitting.
inline SweepResult run_sweep(const FeatureTable& features, const SweepSplit& split, const SweepGrid& grid,
                             std::vector<std::int64_t> seeds, int folds = 5) {
  if (grid.bundles.empty() || grid.poolers.empty() || grid.learners.empty()) throw ContractError("empty sweep grid");
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  if (seeds.empty()) throw ContractError("sweep needs at least one seed");

  SplitManifest manifest;
  for (const auto& s : split.dev_subjects) manifest.push_back({s, Split::dev, std::nullopt, std::string("sweep")});
  for (const auto& s : split.test_subjects) manifest.push_back({s, Split::test, std::nullopt, std::string("sweep")});
  const LintReport lint = lint_subject_disjoint(manifest);
  if (!lint.clean()) {
    throw IntegrityError("subject leakage between dev and test: '" + lint.violations.front().subject_id + "'");
  }

  std::map<Pooler, PooledFeatures> pooled;
  for (const auto p : grid.poolers) pooled.emplace(p, pool_features(features, p));
  const PooledFeatures& any = pooled.begin()->second;
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < any.subject_ids.size(); ++i) row_of.emplace(any.subject_ids[i], i);
  auto rows_for = [&](const std::vector<std::string>& ids) {
    std::vector<std::size_t> rows;
    for (const auto& id : ids) {
      const auto it = row_of.find(id);
      if (it == row_of.end()) throw IntegrityError("subject '" + id + "' has no feature rows");
      rows.push_back(it->second);
    }
    return rows;
  };
  const auto dev_rows = rows_for(split.dev_subjects);
  const auto test_rows = rows_for(split.test_subjects);
  std::vector<int> dev_labels;
  for (const auto r : dev_rows) dev_labels.push_back(any.labels[r]);

  for (const auto& bundle : grid.bundles) {
    for (const auto& b : split_bundle(bundle)) {
      if (!any.blocks.count(b)) throw ContractError("bundle '" + bundle + "' needs missing block '" + b + "'");
    }
  }

  std::map<std::int64_t, std::vector<int>> fold_of;
  for (const auto s : seeds) fold_of.emplace(s, stratified_folds(dev_labels, folds, static_cast<std::uint64_t>(s)));

  SweepResult result;
  result.test_subjects = split.test_subjects;
  for (const auto r : test_rows) result.test_labels.push_back(any.labels[r]);
  result.seeds_used = seeds;
  result.folds = folds;

  for (const auto& bundle : grid.bundles) {
    for (const auto p : grid.poolers) {
      for (const auto& l : grid.learners) {
        SweepConfigResult c;
        c.config_id = sweep_config_id(bundle, p, l.name);
        c.bundle = bundle;
        c.pooler = p;
        c.learner = l.name;
        result.configs.push_back(std::move(c));
      }
    }
  }
  const std::size_t n_seeds = seeds.size();
  const std::size_t n_units = result.configs.size() * n_seeds;
  std::vector<double> unit_cv(n_units);
  std::vector<std::vector<double>> unit_test(n_units);

  parallel_for(n_units, [&](std::size_t u) {
    const std::size_t ci = u / n_seeds;
    const std::size_t si = u % n_seeds;
    const auto& cfg = result.configs[ci];
    const auto& learner = grid.learners[ci % grid.learners.size()];
    const auto& pf = pooled.at(cfg.pooler);
    const auto blocks = split_bundle(cfg.bundle);
    const Eigen::MatrixXd x_dev = detail::bundle_matrix(pf, blocks, dev_rows);
    const Eigen::MatrixXd x_test = detail::bundle_matrix(pf, blocks, test_rows);
    const auto& fold = fold_of.at(seeds[si]);

    double f1_sum = 0.0;
    Eigen::VectorXd test_sum = Eigen::VectorXd::Zero(x_test.rows());
    for (int f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> tr, va;
      for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? va : tr).push_back(static_cast<Eigen::Index>(i));
      const Eigen::MatrixXd x_tr = x_dev(tr, Eigen::all);
      const Eigen::MatrixXd x_va = x_dev(va, Eigen::all);
      std::vector<int> y_tr, y_va;
      for (auto i : tr) y_tr.push_back(dev_labels[static_cast<std::size_t>(i)]);
      for (auto i : va) y_va.push_back(dev_labels[static_cast<std::size_t>(i)]);
      const ProbabilityModel model = learner.fit(x_tr, y_tr);
      const Eigen::VectorXd p_va = model(x_va).cwiseMax(0.0).cwiseMin(1.0);
      std::vector<double> pv(p_va.data(), p_va.data() + p_va.size());
      f1_sum += macro_f1_at(ScoredLabels(std::move(pv), std::move(y_va)), kDefaultThreshold);
      if (x_test.rows() > 0) test_sum += model(x_test);
    }
    unit_cv[u] = f1_sum / folds;
    const Eigen::VectorXd avg = test_sum / static_cast<double>(folds);
    unit_test[u].assign(avg.data(), avg.data() + avg.size());
  });

  for (std::size_t ci = 0; ci < result.configs.size(); ++ci) {
    auto& cfg = result.configs[ci];
    cfg.test_scores.assign(result.test_subjects.size(), 0.0);
    double cv = 0.0;
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const std::size_t u = ci * n_seeds + si;
      cfg.cv_score_per_seed.push_back(unit_cv[u]);
      cv += unit_cv[u];
      for (std::size_t s = 0; s < cfg.test_scores.size(); ++s) cfg.test_scores[s] += unit_test[u][s];
    }
    cfg.cv_score = cv / static_cast<double>(n_seeds);
    for (auto& v : cfg.test_scores) v = std::clamp(v / static_cast<double>(n_seeds), 0.0, 1.0);
  }
  return result;
}

struct SynthBlock {
  std::string name;
  /// Distance between class means in units of the per-dimension noise sd.
  double separation = 1.0;
};

struct SynthSpec {
  std::size_t n_subjects = 150;
  double prevalence = 0.3;
  double turns_mean = 8.0;
  std::vector<SynthBlock> blocks{{"A", 1.0}, {"V", 1.0}, {"T", 1.0}, {"L", 1.0}};
  /// Dimensionality of every block; one file carries one width.
  std::size_t dims = 8;
  double subject_sd = 1.0;
  double turn_sd = 1.0;
  std::uint64_t seed = 13;
};

/// Gaussian multi-block corpus. Each subject gets a Bernoulli label, a turn
/// count of 1 + Poisson(turns_mean - 1), and per block a subject offset
/// N(0, subject_sd^2) per dimension. Turn vectors add N(0, turn_sd^2) noise
/// and +-separation/2 along the block's unit diagonal by class.
inline FeatureTable synth_corpus(const SynthSpec& spec) {
  if (!(spec.prevalence > 0.0 && spec.prevalence < 1.0)) throw ContractError("prevalence must lie in (0,1)");
  if (spec.n_subjects < 2) throw ContractError("synthetic corpus needs at least 2 subjects");
  if (!(spec.turns_mean >= 1.0)) throw ContractError("turns_mean must be >= 1");
  if (spec.dims < 1) throw ContractError("dims must be >= 1");
  if (spec.blocks.empty()) throw ContractError("at least one block required");
  if (!(spec.subject_sd >= 0.0) || !(spec.turn_sd > 0.0)) throw ContractError("noise sds must be non-negative (turn_sd positive)");
  std::set<std::string> names;
  for (const auto& b : spec.blocks) {
    if (b.name.empty() || !names.insert(b.name).second) throw ContractError("block names must be unique and non-empty");
    if (!std::isfinite(b.separation)) throw ContractError("separation must be finite");
  }

  Rng rng(spec.seed);
  const double unit = 1.0 / std::sqrt(static_cast<double>(spec.dims));
  const int width = static_cast<int>(std::to_string(spec.n_subjects).size());
  FeatureTable table;
  std::size_t positives = 0;
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    std::string id = std::to_string(s + 1);
    id = "S" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0') + id;
    const int label = rng.uniform() < spec.prevalence ? 1 : 0;
    positives += static_cast<std::size_t>(label);
    const std::size_t turns = 1 + rng.poisson(spec.turns_mean - 1.0);
    std::vector<std::vector<double>> offset(spec.blocks.size(), std::vector<double>(spec.dims));
    for (auto& o : offset) {
      for (auto& v : o) v = rng.normal(0.0, spec.subject_sd);
    }
    for (std::size_t t = 0; t < turns; ++t) {
      for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        FeatureRecord r;
        r.subject_id = id;
        r.turn_id = "t" + std::to_string(t + 1);
        r.label = label;
        r.modality_block = spec.blocks[b].name;
        r.features.resize(spec.dims);
        const double shift = (label == 1 ? 0.5 : -0.5) * spec.blocks[b].separation * unit;
        for (std::size_t j = 0; j < spec.dims; ++j) r.features[j] = shift + offset[b][j] + rng.normal(0.0, spec.turn_sd);
        table.push_back(std::move(r));
      }
    }
  }
  if (positives == 0 || positives == spec.n_subjects) {
    throw ContractError("synthetic corpus drew a single class; change seed, size or prevalence");
  }
  return table;
}

/// Stratified dev/test partition of the subjects in a feature table.
inline SweepSplit split_dev_test(const FeatureTable& features, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ContractError("test fraction must lie in (0,1)");
  std::vector<std::string> ids[2];
  std::map<std::string, int> label_of;
  for (const auto& r : features) {
    const auto [it, fresh] = label_of.emplace(r.subject_id, r.label);
    if (fresh) {
      ids[r.label].push_back(r.subject_id);
    } else if (it->second != r.label) {
      throw IntegrityError("conflicting labels for subject '" + r.subject_id + "'");
    }
  }
  SweepSplit split;
  for (int cls = 0; cls < 2; ++cls) {
    auto& v = ids[cls];
    std::sort(v.begin(), v.end());
    Rng rng(seed, 100 + static_cast<std::uint64_t>(cls));
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(v.size())));
    for (std::size_t i = 0; i < v.size(); ++i) (i < n_test ? split.test_subjects : split.dev_subjects).push_back(v[i]);
  }
  std::sort(split.dev_subjects.begin(), split.dev_subjects.end());
  std::sort(split.test_subjects.begin(), split.test_subjects.end());
  return split;
}

}  // namespace bg
