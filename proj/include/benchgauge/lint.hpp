#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "benchgauge/dataio.hpp"

// Subject-disjointness checks. Findings are reported, never thrown; the CLI
// decides what a dirty report means for its exit code.

namespace bg {

struct LintViolation {
  std::string rule_id;
  std::string subject_id;
  std::vector<std::string> locations;

  friend bool operator==(const LintViolation&, const LintViolation&) = default;
};

struct LintReport {
  std::vector<LintViolation> violations;

  bool clean() const noexcept { return violations.empty(); }
};

namespace lint_rules {
inline constexpr const char* kSubjectOverlap = "subject_overlap";
inline constexpr const char* kLabelConflict = "label_conflict";
inline constexpr const char* kTurnLeak = "turn_leak";
}  // namespace lint_rules

namespace detail {

// train and dev both feed model fitting or selection, so both sit on the
// training side of a disjointness check.
inline bool training_side(Split s) { return s != Split::test; }

inline std::string scope_label(const std::optional<std::string>& probe, const std::optional<std::int64_t>& fold) {
  std::string out;
  if (probe) out += *probe;
  out += "/fold=";
  out += fold ? std::to_string(*fold) : "-";
  return out;
}

}  // namespace detail

/// Flags (a) a subject on both the training and test side of one
/// (probe_id, fold) scope, (b) one subject under several labels in the
/// predictions, and (c) one subject's prediction rows split across training
/// and test within a (config_id, seed, fold) scope.
inline LintReport lint_subject_disjoint(const SplitManifest& manifest,
                                        const PredictionTable* predictions = nullptr) {
  LintReport report;

  using Scope = std::tuple<std::optional<std::string>, std::optional<std::int64_t>>;
  struct Sides {
    std::vector<std::string> train;
    std::vector<std::string> test;
  };
  std::map<Scope, std::map<std::string, Sides>> scopes;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& e = manifest[i];
    auto& sides = scopes[{e.probe_id, e.fold}][e.subject_id];
    const std::string where = "manifest row " + std::to_string(i + 1) + " (" +
                              std::string(to_string(e.split)) + ", " +
                              detail::scope_label(e.probe_id, e.fold) + ")";
    (detail::training_side(e.split) ? sides.train : sides.test).push_back(where);
  }
  for (const auto& [scope, subjects] : scopes) {
    for (const auto& [subject, sides] : subjects) {
      if (sides.train.empty() || sides.test.empty()) continue;
      LintViolation v{lint_rules::kSubjectOverlap, subject, sides.train};
      v.locations.insert(v.locations.end(), sides.test.begin(), sides.test.end());
      report.violations.push_back(std::move(v));
    }
  }

  if (predictions != nullptr) {
    std::map<std::string, std::map<int, std::vector<std::string>>> labels;
    using RowScope = std::tuple<std::optional<std::string>, std::optional<std::int64_t>, std::optional<std::int64_t>>;
    std::map<RowScope, std::map<std::string, Sides>> row_scopes;
    for (std::size_t i = 0; i < predictions->size(); ++i) {
      const auto& r = (*predictions)[i];
      const std::string where = "prediction row " + std::to_string(i + 1);
      labels[r.subject_id][r.label].push_back(where);
      if (r.split) {
        auto& sides = row_scopes[{r.config_id, r.seed, r.fold}][r.subject_id];
        (detail::training_side(*r.split) ? sides.train : sides.test).push_back(where);
      }
    }
    for (const auto& [subject, by_label] : labels) {
      if (by_label.size() < 2) continue;
      LintViolation v{lint_rules::kLabelConflict, subject, {}};
      for (const auto& [label, rows] : by_label) {
        v.locations.push_back("label " + std::to_string(label) + ": " + rows.front() +
                              (rows.size() > 1 ? " (+" + std::to_string(rows.size() - 1) + " more)" : ""));
      }
      report.violations.push_back(std::move(v));
    }
    for (const auto& [scope, subjects] : row_scopes) {
      for (const auto& [subject, sides] : subjects) {
        if (sides.train.empty() || sides.test.empty()) continue;
        LintViolation v{lint_rules::kTurnLeak, subject, sides.train};
        v.locations.insert(v.locations.end(), sides.test.begin(), sides.test.end());
        report.violations.push_back(std::move(v));
      }
    }
  }
  return report;
}

}  // namespace bg
