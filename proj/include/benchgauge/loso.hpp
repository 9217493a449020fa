#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "benchgauge/dataio.hpp"
#include "benchgauge/metrics.hpp"
#include "benchgauge/parallel.hpp"
#include "benchgauge/stats.hpp"

namespace bg {

struct LosoFold {
  std::string held_out;
  std::vector<std::string> training;
};

struct LosoFoldPlan {
  std::vector<LosoFold> folds;

  /// The plan as a split manifest, one fold scope per held-out subject.
  SplitManifest to_manifest(const std::string& probe_id = "loso") const {
    SplitManifest m;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto fold = static_cast<std::int64_t>(f);
      m.push_back({folds[f].held_out, Split::test, fold, probe_id});
      for (const auto& s : folds[f].training) m.push_back({s, Split::train, fold, probe_id});
    }
    return m;
  }
};

struct CutoffStats {
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct LosoReport {
  ConfusionCounts pooled_confusion;
  MetricBundle metrics;
  double auroc = 0.0;
  double ap = 0.0;
  /// Selected cutoff per fold, in fold (sorted subject id) order.
  std::vector<double> cutoffs;
  CutoffStats cutoff_stats;
  std::vector<std::string> warnings;
};

inline LosoFoldPlan loso_folds(std::vector<std::string> subject_ids) {
  std::sort(subject_ids.begin(), subject_ids.end());
  if (std::adjacent_find(subject_ids.begin(), subject_ids.end()) != subject_ids.end()) {
    throw ContractError("duplicate subject ids in LOSO plan");
  }
  if (subject_ids.size() < 3) throw ContractError("LOSO needs at least 3 subjects");
  LosoFoldPlan plan;
  plan.folds.reserve(subject_ids.size());
  for (std::size_t i = 0; i < subject_ids.size(); ++i) {
    LosoFold fold{subject_ids[i], {}};
    fold.training.reserve(subject_ids.size() - 1);
    for (std::size_t j = 0; j < subject_ids.size(); ++j) {
      if (j != i) fold.training.push_back(subject_ids[j]);
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

struct CutoffChoice {
  double cutoff = kDefaultThreshold;
  double macro_f1 = 0.0;
  bool degenerate = false;
};

/// Picks the decision cutoff that maximizes training macro-F1. Candidates are
/// 0, 1 and the midpoints between consecutive distinct scores. Ties go to the
/// candidate nearest 0.5, then to the smaller cutoff. A single-class training
/// set falls back to 0.5 and is marked degenerate.
inline CutoffChoice select_cutoff_detailed(const ScoredLabels& train) {
  if (train.positives() == 0 || train.negatives() == 0) {
    return {kDefaultThreshold, 0.0, true};
  }
  std::vector<double> distinct(train.scores().begin(), train.scores().end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates{0.0};
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    candidates.push_back((distinct[i] + distinct[i + 1]) / 2.0);
  }
  candidates.push_back(1.0);

  // Counts of positives/negatives scoring >= each candidate, via one sorted
  // pass instead of re-thresholding per candidate.
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto scores = train.scores();
  const auto labels = train.labels();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto total_pos = static_cast<std::int64_t>(train.positives());
  const auto total_neg = static_cast<std::int64_t>(train.negatives());

  CutoffChoice best{kDefaultThreshold, -1.0, false};
  std::size_t k = 0;
  std::int64_t pred_pos_true = 0;
  std::int64_t pred_pos_false = 0;
  for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
    const double c = *it;
    while (k < order.size() && scores[order[k]] >= c) {
      (labels[order[k]] == 1 ? pred_pos_true : pred_pos_false) += 1;
      ++k;
    }
    const ConfusionCounts cc{total_neg - pred_pos_false, pred_pos_false, total_pos - pred_pos_true,
                             pred_pos_true};
    const double f1 = classification_metrics(cc).macro_f1;
    const bool better =
        f1 > best.macro_f1 ||
        (f1 == best.macro_f1 && (std::abs(c - 0.5) < std::abs(best.cutoff - 0.5) ||
                                 (std::abs(c - 0.5) == std::abs(best.cutoff - 0.5) && c < best.cutoff)));
    if (better) best = {c, f1, false};
  }
  return best;
}

inline double select_cutoff(const ScoredLabels& train) { return select_cutoff_detailed(train).cutoff; }

/// Leave-one-subject-out evaluation of precomputed subject scores. Each fold
/// selects its cutoff from the training subjects only and applies it to the
/// held-out subject; decisions are pooled into one confusion matrix.
inline LosoReport run_loso(const SubjectTable& subjects) {
  std::vector<std::string> ids;
  ids.reserve(subjects.size());
  for (const auto& s : subjects) ids.push_back(s.subject_id);
  const LosoFoldPlan plan = loso_folds(ids);

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < subjects.size(); ++i) index.emplace(subjects[i].subject_id, i);

  const ScoredLabels all = to_scored(subjects);
  if (all.positives() == 0 || all.negatives() == 0) {
    throw ContractError("LOSO needs both classes among subjects");
  }

  const std::size_t n = plan.folds.size();
  std::vector<CutoffChoice> choice(n);
  std::vector<int> decision(n);
  std::vector<int> truth(n);
  parallel_for(n, [&](std::size_t f) {
    const auto& fold = plan.folds[f];
    std::vector<double> s;
    std::vector<int> y;
    s.reserve(fold.training.size());
    y.reserve(fold.training.size());
    for (const auto& id : fold.training) {
      const auto& row = subjects[index.at(id)];
      s.push_back(row.score);
      y.push_back(row.label);
    }
    choice[f] = select_cutoff_detailed(ScoredLabels(std::move(s), std::move(y)));
    const auto& held = subjects[index.at(fold.held_out)];
    decision[f] = held.score >= choice[f].cutoff ? 1 : 0;
    truth[f] = held.label;
  });

  LosoReport report;
  report.pooled_confusion = confusion(truth, decision);
  report.metrics = classification_metrics(report.pooled_confusion);
  report.auroc = auroc(all);
  report.ap = average_precision(all);
  report.cutoffs.reserve(n);
  for (std::size_t f = 0; f < n; ++f) {
    report.cutoffs.push_back(choice[f].cutoff);
    if (choice[f].degenerate) {
      report.warnings.push_back("fold '" + plan.folds[f].held_out +
                                "': single-class training set, cutoff 0.5 used");
    }
  }
  report.cutoff_stats.mean = stats::mean(report.cutoffs);
  report.cutoff_stats.sd = stats::sample_sd(report.cutoffs);
  report.cutoff_stats.median = stats::median(report.cutoffs);
  report.cutoff_stats.min = *std::min_element(report.cutoffs.begin(), report.cutoffs.end());
  report.cutoff_stats.max = *std::max_element(report.cutoffs.begin(), report.cutoffs.end());
  return report;
}

}  // namespace bg
