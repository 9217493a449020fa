#pragma once

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "benchgauge/csv.hpp"
#include "benchgauge/lint.hpp"
#include "benchgauge/loso.hpp"
#include "benchgauge/rankaudit.hpp"
#include "benchgauge/stress.hpp"
#include "benchgauge/sweep.hpp"
#include "benchgauge/transfer.hpp"

// Report serialisation. JSON output is canonical: keys sorted, two-space
// indentation, every floating-point value printed with six decimals. Same
// report in, same bytes out.

namespace bg::report {

using nlohmann::json;

inline std::string fixed(double v, int decimals) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s(buf);
  // -0.000000 and 0.000000 must not differ.
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

/// Escapes pipes so ids like "A|mean|learner" stay in one Markdown cell.
inline std::string cell(const std::string& text) {
  std::string out;
  for (char ch : text) {
    if (ch == '|') out += '\\';
    out += ch;
  }
  return out;
}

namespace detail {

inline void write_string(std::ostream& out, const std::string& s) { out << json(s).dump(); }

inline void write(std::ostream& out, const json& j, int depth) {
  const std::string pad(static_cast<std::size_t>(depth + 1) * 2, ' ');
  const std::string close(static_cast<std::size_t>(depth) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out << ",\n";
        first = false;
        out << pad;
        write_string(out, it.key());
        out << ": ";
        write(out, it.value(), depth + 1);
      }
      out << '\n' << close << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      out << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out << ",\n";
        out << pad;
        write(out, j[i], depth + 1);
      }
      out << '\n' << close << ']';
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out << "null";
      } else {
        out << fixed(v, 6);
      }
      return;
    }
    default:
      out << j.dump();
  }
}

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

/// Canonical JSON text with a trailing newline.
inline std::string canonical_json(const json& j) {
  std::ostringstream out;
  detail::write(out, j, 0);
  out << '\n';
  return out.str();
}

inline json to_json(const ConfusionCounts& c) { return {{"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}, {"tp", c.tp}}; }

inline json to_json(const MetricBundle& m) {
  return {{"macro_f1", m.macro_f1},
          {"accuracy", m.accuracy},
          {"balanced_accuracy", m.balanced_accuracy},
          {"f1_pos", m.f1_pos},
          {"f1_neg", m.f1_neg}};
}

struct NamedLoso {
  std::string config;
  std::size_t n_subjects = 0;
  LosoReport report;
};

inline json to_json(const NamedLoso& l) {
  const auto& r = l.report;
  json j = to_json(r.metrics);
  j["config"] = l.config;
  j["n_subjects"] = l.n_subjects;
  j["confusion"] = to_json(r.pooled_confusion);
  j["auroc"] = r.auroc;
  j["ap"] = r.ap;
  j["cutoffs"] = r.cutoffs;
  j["cutoff_stats"] = {{"mean", r.cutoff_stats.mean},
                       {"sd", r.cutoff_stats.sd},
                       {"median", r.cutoff_stats.median},
                       {"min", r.cutoff_stats.min},
                       {"max", r.cutoff_stats.max}};
  j["warnings"] = r.warnings;
  return j;
}

inline json to_json(const std::vector<NamedLoso>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(to_json(r));
  return {{"loso", arr}};
}

/// Config / Macro-F1 / AUROC / AP / TN / FP / FN / TP.
inline std::string markdown(const std::vector<NamedLoso>& rows) {
  std::ostringstream out;
  out << "| Config | Macro-F1 | AUROC | AP | TN / FP / FN / TP |\n";
  out << "|---|---|---|---|---|\n";
  for (const auto& l : rows) {
    const auto& r = l.report;
    const auto& c = r.pooled_confusion;
    out << "| " << cell(l.config) << " | " << fixed(r.metrics.macro_f1, 3) << " | " << fixed(r.auroc, 3) << " | "
        << fixed(r.ap, 3) << " | " << c.tn << " / " << c.fp << " / " << c.fn << " / " << c.tp << " |\n";
  }
  return out.str();
}

inline json to_json(const RankDistribution& d) {
  return {{"p_rank1", d.p_rank1},
          {"rank_interval_95", {d.rank_lo, d.rank_hi}},
          {"mean_rank", d.mean_rank},
          {"rank_histogram", d.histogram}};
}

inline json to_json(const BootstrapRankReport& b) {
  json configs = json::object();
  for (const auto& c : b.configs) configs[c.config_id] = to_json(c);
  return {{"replicates", b.replicates}, {"seed", b.seed}, {"redraws", b.redraws}, {"configs", configs}};
}

inline json to_json(const AssociationReport& a) {
  json topk = json::object();
  for (const auto& [k, v] : a.topk_overlap) topk["top" + std::to_string(k)] = v;
  return {{"n_configs", a.n_configs},
          {"pearson", a.pearson},
          {"spearman", a.spearman},
          {"kendall_tau", a.kendall_tau},
          {"discordance_rate", a.discordance_rate},
          {"topk_overlap", topk},
          {"best_cv_config", a.best_cv_config},
          {"best_test_config", a.best_test_config},
          {"best_cv_test_rank", a.best_cv_test_rank},
          {"best_test_cv_rank", a.best_test_cv_rank},
          {"median_abs_rank_shift", a.median_abs_rank_shift}};
}

/// Leaderboard audit: one summary entry per Markdown table row, plus the full
/// association and bootstrap detail.
inline json to_json(const LeaderboardAudit& audit) {
  const auto& a = audit.association;
  json summary = {
      {"pearson_correlation_cv_vs_test", a.pearson},
      {"spearman_correlation_cv_vs_test", a.spearman},
      {"kendall_tau", a.kendall_tau},
      {"discordance_rate", a.discordance_rate},
      {"best_cv_config_test_rank", a.best_cv_test_rank},
      {"best_test_config_cv_rank", a.best_test_cv_rank},
      {"top1_overlap", a.topk_overlap.at(1)},
      {"top3_overlap", a.topk_overlap.at(3)},
      {"top5_overlap", a.topk_overlap.at(5)},
      {"median_abs_rank_shift", a.median_abs_rank_shift},
      {"bootstrap_p_rank1_test_best", audit.test_best.p_rank1},
      {"bootstrap_rank_range_95_test_best", {audit.test_best.rank_lo, audit.test_best.rank_hi}},
  };
  json pairs = json::array();
  for (const auto& p : audit.pairs) {
    pairs.push_back({{"config_id", p.config_id}, {"cv_score", p.cv_score}, {"test_score", p.test_score}});
  }
  return {{"summary", summary}, {"association", to_json(a)}, {"bootstrap", to_json(audit.bootstrap)}, {"pairs", pairs}};
}

inline std::string markdown(const LeaderboardAudit& audit) {
  const auto& a = audit.association;
  std::ostringstream out;
  out << "| Statistic | Value |\n|---|---|\n";
  out << "| Pearson correlation (CV vs official test) | " << fixed(a.pearson, 4) << " |\n";
  out << "| Spearman correlation (CV vs official test) | " << fixed(a.spearman, 4) << " |\n";
  out << "| Kendall tau | " << fixed(a.kendall_tau, 4) << " |\n";
  out << "| Discordance rate | " << fixed(a.discordance_rate, 4) << " |\n";
  out << "| Best-CV config test rank | " << a.best_cv_test_rank << " |\n";
  out << "| Best-test config CV rank | " << a.best_test_cv_rank << " |\n";
  out << "| Top-3 overlap | " << a.topk_overlap.at(3) << " |\n";
  out << "| Top-5 overlap | " << a.topk_overlap.at(5) << " |\n";
  out << "| Median absolute rank shift | " << fixed(a.median_abs_rank_shift, 1) << " |\n";
  out << "| Bootstrap p(rank-1) of test-best config | " << fixed(audit.test_best.p_rank1, 3) << " |\n";
  out << "| Bootstrap 95% rank range of test-best config | " << audit.test_best.rank_lo << "-"
      << audit.test_best.rank_hi << " |\n";
  return out.str();
}

inline std::string transfer_label(const TransferRow& r) {
  return r.cutoff ? r.target + " \xE2\x89\xA5 " + std::to_string(*r.cutoff) : r.target;
}

inline json to_json(const TransferReport& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"target", r.target},
                    {"cutoff", r.cutoff ? json(*r.cutoff) : json(nullptr)},
                    {"n", r.n},
                    {"macro_f1", detail::optional_number(r.macro_f1)},
                    {"auroc", detail::optional_number(r.auroc)}});
  }
  return {{"rows", rows}, {"flags", t.flags}, {"threshold", kDefaultThreshold}};
}

/// Dataset / N / Macro-F1 / AUROC.
inline std::string markdown(const TransferReport& t) {
  std::ostringstream out;
  out << "| Dataset | N | Macro-F1 | AUROC |\n|---|---|---|---|\n";
  for (const auto& r : t.rows) {
    out << "| " << cell(transfer_label(r)) << " | " << r.n << " | " << (r.macro_f1 ? fixed(*r.macro_f1, 3) : "undefined")
        << " | " << (r.auroc ? fixed(*r.auroc, 3) : "undefined") << " |\n";
  }
  return out.str();
}

inline json to_json(const ShiftEstimate& e) {
  return {{"n", e.n}, {"mean", e.mean}, {"ci_low", e.ci_low}, {"ci_high", e.ci_high}, {"replicates", e.replicates}, {"level", e.level}};
}

inline json to_json(const StressRun& run, const StressOptions& options) {
  json retained = json::array();
  for (const auto& p : run.slices.pairs) {
    retained.push_back({{"subject_id", p.subject_id},
                        {"heavy_speech_s", p.heavy_speech_s},
                        {"neutral_speech_s", p.neutral_speech_s},
                        {"heavy_chunks", p.heavy_chunks},
                        {"neutral_chunks", p.neutral_chunks}});
  }
  json dropped = json::array();
  for (const auto& d : run.slices.dropped) dropped.push_back({{"subject_id", d.subject_id}, {"reason", d.reason}});

  json per_seed = json::array();
  for (const auto& s : run.per_seed) {
    json shifts = json::object();
    for (const auto& [m, e] : s.shifts) shifts[m] = to_json(e);
    json entry = {{"seed", s.seed}, {"shifts", shifts}};
    entry["gap"] = s.gap ? json{{"n", s.gap->n}, {"mean", s.gap->mean}, {"p", s.gap->p}} : json(nullptr);
    per_seed.push_back(entry);
  }

  json modalities = json::object();
  for (const auto& [m, ms] : run.summary.modalities) {
    modalities[m] = {{"mean_shift", ms.mean_shift},
                     {"seed_sd", ms.seed_sd},
                     {"ci_low", ms.ci_low},
                     {"ci_high", ms.ci_high},
                     {"seeds_positive", ms.seeds_positive},
                     {"seeds_ci_excludes_zero", ms.seeds_ci_excludes_zero}};
  }
  json gap = nullptr;
  if (run.summary.gap) {
    const auto& g = *run.summary.gap;
    gap = {{"mean", g.mean}, {"seed_sd", g.seed_sd}, {"seeds_positive", g.seeds_positive}, {"per_seed_mean", g.per_seed_mean}, {"per_seed_p", g.per_seed_p}};
    if (options.gap_modalities) gap["modalities"] = {options.gap_modalities->first, options.gap_modalities->second};
  }
  json settings = {{"bootstrap_replicates", options.bootstrap_replicates},
                   {"permutation_assignments", options.permutation_assignments},
                   {"sided", options.sided == Sided::one ? "one" : "two"},
                   {"level", options.level},
                   {"heavy_topics", options.rules.heavy},
                   {"neutral_topics", options.rules.neutral},
                   {"mid_topics", options.rules.mid},
                   {"min_speech_s", options.rules.min_speech_s}};
  return {{"slices", {{"retained", retained}, {"dropped", dropped}}},
          {"per_seed", per_seed},
          {"summary", {{"seeds", run.summary.seeds}, {"modalities", modalities}, {"gap", gap}}},
          {"settings", settings}};
}

inline std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

/// One column per modality shift, then the gap, then a prose summary; each
/// value is "mean (sd x)" across seeds.
inline std::string markdown(const StressRun& run, const StressOptions& options) {
  const auto& s = run.summary;
  const std::size_t n = s.seeds.size();
  std::ostringstream head, rule, row;
  std::ostringstream note;
  head << '|';
  rule << '|';
  row << '|';
  bool first_note = true;
  auto add_note = [&](const std::string& text) {
    note << (first_note ? "" : "; ") << text;
    first_note = false;
  };
  for (const auto& [m, ms] : s.modalities) {
    head << ' ' << capitalize(m) << " shift |";
    rule << "---|";
    row << ' ' << fixed(ms.mean_shift, 3) << " (sd " << fixed(ms.seed_sd, 3) << ") |";
    add_note(capitalize(m) + " > 0 in " + std::to_string(ms.seeds_positive) + "/" + std::to_string(n) +
             " seeds; " + m + " CI excludes 0 in " + std::to_string(ms.seeds_ci_excludes_zero) + "/" + std::to_string(n));
  }
  if (s.gap && options.gap_modalities) {
    const auto& g = *s.gap;
    head << ' ' << capitalize(options.gap_modalities->first) << " - " << options.gap_modalities->second << " gap |";
    rule << "---|";
    row << ' ' << fixed(g.mean, 3) << " (sd " << fixed(g.seed_sd, 3) << ") |";
    add_note("gap > 0 in " + std::to_string(g.seeds_positive) + "/" + std::to_string(n));
    std::string ps;
    for (std::size_t i = 0; i < g.per_seed_p.size(); ++i) ps += (i ? ", " : "") + fixed(g.per_seed_p[i], 4);
    add_note("p = " + ps);
  }
  head << " Multi-seed summary |\n";
  rule << "---|\n";
  row << ' ' << note.str() << " |\n";
  return head.str() + rule.str() + row.str();
}

/// Bar data: modality, mean_shift, ci_low, ci_high.
inline std::string figure_csv(const StressSummary& s) {
  std::ostringstream out;
  out << "modality,mean_shift,ci_low,ci_high\n";
  for (const auto& [m, ms] : s.modalities) {
    out << csv::quote(m) << ',' << fixed(ms.mean_shift, 6) << ',' << fixed(ms.ci_low, 6) << ',' << fixed(ms.ci_high, 6) << '\n';
  }
  return out.str();
}

inline json to_json(const LintReport& r) {
  json v = json::array();
  for (const auto& x : r.violations) v.push_back({{"rule_id", x.rule_id}, {"subject_id", x.subject_id}, {"locations", x.locations}});
  return {{"clean", r.clean()}, {"violations", v}};
}

inline std::string markdown(const LintReport& r) {
  std::ostringstream out;
  out << "| Rule | Subject | Locations |\n|---|---|---|\n";
  for (const auto& x : r.violations) {
    std::string loc;
    for (std::size_t i = 0; i < x.locations.size(); ++i) loc += (i ? "; " : "") + x.locations[i];
    out << "| " << x.rule_id << " | " << cell(x.subject_id) << " | " << cell(loc) << " |\n";
  }
  return out.str();
}

/// config_id, cv_score
inline std::string sweep_cv_csv(const SweepResult& r) {
  std::ostringstream out;
  out << "config_id,cv_score\n";
  for (const auto& c : r.configs) out << csv::quote(c.config_id) << ',' << csv::format_double(c.cv_score) << '\n';
  return out.str();
}

inline json to_json(const SweepResult& r) {
  json configs = json::array();
  for (const auto& c : r.configs) {
    configs.push_back({{"config_id", c.config_id},
                       {"bundle", c.bundle},
                       {"pooler", std::string(to_string(c.pooler))},
                       {"learner", c.learner},
                       {"cv_score", c.cv_score},
                       {"cv_score_per_seed", c.cv_score_per_seed}});
  }
  return {{"configs", configs}, {"seeds_used", r.seeds_used}, {"folds", r.folds}, {"n_test_subjects", r.test_subjects.size()}};
}

inline std::string markdown(const SweepResult& r) {
  std::ostringstream out;
  out << "| Config | CV macro-F1 |\n|---|---|\n";
  for (const auto& c : r.configs) out << "| " << cell(c.config_id) << " | " << fixed(c.cv_score, 3) << " |\n";
  return out.str();
}

inline std::string csv_table(const std::vector<NamedLoso>& rows) {
  std::ostringstream out;
  out << "config,n,macro_f1,accuracy,balanced_accuracy,auroc,ap,tn,fp,fn,tp,cutoff_mean,cutoff_sd\n";
  for (const auto& l : rows) {
    const auto& r = l.report;
    const auto& c = r.pooled_confusion;
    out << csv::quote(l.config) << ',' << l.n_subjects << ',' << fixed(r.metrics.macro_f1, 6) << ','
        << fixed(r.metrics.accuracy, 6) << ',' << fixed(r.metrics.balanced_accuracy, 6) << ',' << fixed(r.auroc, 6)
        << ',' << fixed(r.ap, 6) << ',' << c.tn << ',' << c.fp << ',' << c.fn << ',' << c.tp << ','
        << fixed(r.cutoff_stats.mean, 6) << ',' << fixed(r.cutoff_stats.sd, 6) << '\n';
  }
  return out.str();
}

inline std::string csv_table(const LeaderboardAudit& audit) {
  std::ostringstream out;
  out << "config_id,cv_score,test_score,cv_rank,test_rank,p_rank1,rank_lo,rank_hi\n";
  for (std::size_t i = 0; i < audit.pairs.size(); ++i) {
    const auto& p = audit.pairs[i];
    const auto& d = audit.bootstrap.at(p.config_id);
    out << csv::quote(p.config_id) << ',' << fixed(p.cv_score, 6) << ',' << fixed(p.test_score, 6) << ','
        << audit.association.cv_ranks[i] << ',' << audit.association.test_ranks[i] << ',' << fixed(d.p_rank1, 6)
        << ',' << d.rank_lo << ',' << d.rank_hi << '\n';
  }
  return out.str();
}

inline std::string csv_table(const TransferReport& t) {
  std::ostringstream out;
  out << "target,cutoff,n,macro_f1,auroc\n";
  for (const auto& r : t.rows) {
    out << csv::quote(r.target) << ',' << (r.cutoff ? std::to_string(*r.cutoff) : "") << ',' << r.n << ','
        << (r.macro_f1 ? fixed(*r.macro_f1, 6) : "") << ',' << (r.auroc ? fixed(*r.auroc, 6) : "") << '\n';
  }
  return out.str();
}

inline std::string csv_table(const LintReport& r) {
  std::ostringstream out;
  out << "rule_id,subject_id,locations\n";
  for (const auto& x : r.violations) {
    std::string loc;
    for (std::size_t i = 0; i < x.locations.size(); ++i) loc += (i ? "; " : "") + x.locations[i];
    out << csv::quote(x.rule_id) << ',' << csv::quote(x.subject_id) << ',' << csv::quote(loc) << '\n';
  }
  return out.str();
}

}  // namespace bg::report
