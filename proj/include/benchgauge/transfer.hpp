#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "benchgauge/dataio.hpp"
#include "benchgauge/metrics.hpp"

// Zero-shot external scoring. The only decision rule is the frozen source
// rule (score >= 0.5); nothing is fitted on a target.

namespace bg {

/// A target corpus: per-subject scores plus either direct binary labels or
/// integer severities to be cut at clinical thresholds.
struct TransferTarget {
  std::string name;
  std::vector<std::string> subject_ids;
  std::vector<double> scores;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<std::int64_t>> severities;
};

struct TransferRow {
  std::string target;
  std::optional<std::int64_t> cutoff;
  std::size_t n = 0;
  std::optional<double> macro_f1;
  std::optional<double> auroc;
};

struct TransferReport {
  std::vector<TransferRow> rows;
  std::vector<std::string> flags;
};

inline TransferTarget target_from_subjects(std::string name, const SubjectTable& subjects) {
  TransferTarget t{std::move(name), {}, {}, std::vector<int>{}, std::nullopt};
  for (const auto& s : subjects) {
    t.subject_ids.push_back(s.subject_id);
    t.scores.push_back(s.score);
    t.labels->push_back(s.label);
  }
  return t;
}

/// Pairs subject scores with severities by subject id; any label column in
/// the scores is ignored. Subjects missing from either side are errors.
inline TransferTarget target_from_severity(std::string name, const SubjectTable& subjects,
                                           const std::vector<SeverityRow>& severity) {
  std::unordered_map<std::string, std::int64_t> sev;
  for (const auto& s : severity) sev.emplace(s.subject_id, s.severity);
  if (sev.size() != subjects.size()) {
    throw IntegrityError("target '" + name + "': severity file and predictions cover different subjects");
  }
  TransferTarget t{std::move(name), {}, {}, std::nullopt, std::vector<std::int64_t>{}};
  for (const auto& s : subjects) {
    const auto it = sev.find(s.subject_id);
    if (it == sev.end()) throw IntegrityError("target '" + t.name + "': no severity for '" + s.subject_id + "'");
    t.subject_ids.push_back(s.subject_id);
    t.scores.push_back(s.score);
    t.severities->push_back(it->second);
  }
  return t;
}

namespace detail {

inline TransferRow score_row(const std::string& target, std::optional<std::int64_t> cutoff,
                             const std::vector<int>& predictions, const std::vector<double>& scores,
                             const std::vector<int>& labels, std::vector<std::string>& flags) {
  TransferRow row{target, cutoff, labels.size(), std::nullopt, std::nullopt};
  const std::string where = cutoff ? target + " (>= " + std::to_string(*cutoff) + ")" : target;
  const ConfusionCounts c = confusion(labels, predictions);
  if (c.positives() > 0 && c.negatives() > 0) {
    row.macro_f1 = classification_metrics(c).macro_f1;
    row.auroc = auroc(ScoredLabels(scores, labels));
  } else {
    flags.push_back(where + ": single-class labels, macro-F1 and AUROC undefined");
  }
  return row;
}

}  // namespace detail

/// One row per (target, cutoff). Predictions are formed from scores before
/// labels are looked at. `cutoffs` applies to severity targets only.
inline TransferReport zero_shot_report(const std::vector<TransferTarget>& targets,
                                       const std::vector<std::int64_t>& cutoffs = {}) {
  TransferReport report;
  for (const auto& t : targets) {
    if (t.scores.size() < 2) throw ContractError("target '" + t.name + "' needs at least 2 subjects");
    if (t.subject_ids.size() != t.scores.size()) throw SchemaError("target '" + t.name + "': ids and scores differ");
    const std::vector<int> predictions = binarize_scores(t.scores, kDefaultThreshold);
    if (t.severities) {
      if (cutoffs.empty()) throw ContractError("target '" + t.name + "' has severities but no cutoffs");
      if (t.severities->size() != t.scores.size()) throw SchemaError("target '" + t.name + "': severities and scores differ");
      for (const auto cut : cutoffs) {
        const auto labels = binarize_severity(*t.severities, cut);
        report.rows.push_back(detail::score_row(t.name, cut, predictions, t.scores, labels, report.flags));
      }
    } else if (t.labels) {
      if (t.labels->size() != t.scores.size()) throw SchemaError("target '" + t.name + "': labels and scores differ");
      report.rows.push_back(detail::score_row(t.name, std::nullopt, predictions, t.scores, *t.labels, report.flags));
    } else {
      throw ContractError("target '" + t.name + "' has neither labels nor severities");
    }
  }
  return report;
}

}  // namespace bg
