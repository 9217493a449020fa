#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "benchgauge/error.hpp"

// Subject-level binary classification metrics. Everything is computed in
// double precision; rounding happens only when a report is rendered.

namespace bg {

struct ConfusionCounts {
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tp = 0;

  std::int64_t total() const noexcept { return tn + fp + fn + tp; }
  std::int64_t positives() const noexcept { return tp + fn; }
  std::int64_t negatives() const noexcept { return tn + fp; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    tp += o.tp;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct MetricBundle {
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double f1_pos = 0.0;
  double f1_neg = 0.0;
};

/// Scores in [0,1] with aligned binary labels. Validated on construction.
class ScoredLabels {
 public:
  ScoredLabels() = default;
  ScoredLabels(std::vector<double> scores, std::vector<int> labels)
      : scores_(std::move(scores)), labels_(std::move(labels)) {
    if (scores_.size() != labels_.size()) {
      throw SchemaError("scores and labels differ in length (" +
                        std::to_string(scores_.size()) + " vs " +
                        std::to_string(labels_.size()) + ")");
    }
    for (std::size_t i = 0; i < scores_.size(); ++i) {
      const double s = scores_[i];
      if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
        throw SchemaError("score out of range at index " + std::to_string(i));
      }
      if (labels_[i] != 0 && labels_[i] != 1) {
        throw SchemaError("non-binary label at index " + std::to_string(i));
      }
    }
  }

  std::span<const double> scores() const noexcept { return scores_; }
  std::span<const int> labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return scores_.size(); }

  std::size_t positives() const noexcept {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), 1));
  }
  std::size_t negatives() const noexcept { return size() - positives(); }

 private:
  std::vector<double> scores_;
  std::vector<int> labels_;
};

inline ConfusionCounts confusion(std::span<const int> labels, std::span<const int> preds) {
  if (labels.size() != preds.size()) {
    throw SchemaError("labels and predictions differ in length");
  }
  if (labels.empty()) throw SchemaError("confusion of empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = preds[i];
    if ((y != 0 && y != 1) || (p != 0 && p != 1)) {
      throw SchemaError("non-binary value at index " + std::to_string(i));
    }
    if (y == 1) {
      (p == 1 ? c.tp : c.fn) += 1;
    } else {
      (p == 1 ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

inline MetricBundle classification_metrics(const ConfusionCounts& c) {
  if (c.tn < 0 || c.fp < 0 || c.fn < 0 || c.tp < 0) {
    throw SchemaError("negative confusion count");
  }
  if (c.positives() < 1) throw UndefinedMetricError("no positive-class rows");
  if (c.negatives() < 1) throw UndefinedMetricError("no negative-class rows");
  const auto d = [](std::int64_t v) { return static_cast<double>(v); };
  MetricBundle m;
  m.f1_pos = 2.0 * d(c.tp) / (2.0 * d(c.tp) + d(c.fp) + d(c.fn));
  m.f1_neg = 2.0 * d(c.tn) / (2.0 * d(c.tn) + d(c.fn) + d(c.fp));
  m.macro_f1 = (m.f1_pos + m.f1_neg) / 2.0;
  m.accuracy = d(c.tp + c.tn) / d(c.total());
  m.balanced_accuracy = (d(c.tp) / d(c.positives()) + d(c.tn) / d(c.negatives())) / 2.0;
  return m;
}

/// 1 where score >= threshold.
inline std::vector<int> binarize_scores(std::span<const double> scores, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw SchemaError("threshold outside [0,1]");
  }
  std::vector<int> out(scores.size());
  std::transform(scores.begin(), scores.end(), out.begin(),
                 [threshold](double s) { return s >= threshold ? 1 : 0; });
  return out;
}

/// Default source decision rule: positive iff score >= 0.5.
inline constexpr double kDefaultThreshold = 0.5;

/// Macro-F1 of the thresholded scores against the labels.
inline double macro_f1_at(const ScoredLabels& data, double threshold) {
  const auto preds = binarize_scores(data.scores(), threshold);
  return classification_metrics(confusion(data.labels(), preds)).macro_f1;
}

/// Mann-Whitney AUROC: (wins + ties/2) / (P * N). Computed from tie-averaged
/// rank sums using integer arithmetic on doubled ranks, so the result is the
/// exact pair count ratio.
inline double auroc(const ScoredLabels& data) {
  const std::size_t pos = data.positives();
  const std::size_t neg = data.negatives();
  if (pos == 0 || neg == 0) {
    throw UndefinedMetricError("AUROC needs both classes");
  }
  const auto scores = data.scores();
  const auto labels = data.labels();
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum over positives of doubled 1-based average rank.
  std::uint64_t rank_sum_x2 = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t rank_x2 = (i + 1) + j;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum_x2 += rank_x2;
    }
    i = j;
  }
  // 2U = 2R - P(P+1) counts each win as 2 and each tie as 1.
  const std::uint64_t u_x2 = rank_sum_x2 - pos * (pos + 1);
  return (static_cast<double>(u_x2) / 2.0) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

/// Step-wise average precision over descending score blocks. Tied scores
/// form one block and enter the curve together, which makes the value
/// independent of row order.
inline double average_precision(const ScoredLabels& data) {
  const std::size_t pos = data.positives();
  if (pos == 0) throw UndefinedMetricError("average precision needs a positive row");
  const auto scores = data.scores();
  const auto labels = data.labels();
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t block_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      block_pos += labels[order[j]] == 1 ? 1 : 0;
      ++j;
    }
    tp += block_pos;
    if (block_pos > 0) {
      const double recall_step = static_cast<double>(block_pos) / static_cast<double>(pos);
      const double precision = static_cast<double>(tp) / static_cast<double>(j);
      ap += recall_step * precision;
    }
    i = j;
  }
  return ap;
}

}  // namespace bg
