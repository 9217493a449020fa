#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "benchgauge/benchgauge.hpp"

// Command-line front end. Exit codes: 0 success, 1 schema or contract error
// (one-line diagnostic), 2 lint found violations, 64 usage error.

namespace bg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitLintDirty = 2;
inline constexpr int kExitUsage = 64;

/// Failure tied to an input file.
class FileError : public Error {
 public:
  FileError(const std::string& path, const std::string& what) : Error(path + ": " + what) {}
};

/// Writes `content` to a sibling temp file and renames it over `path`, so a
/// failed run never leaves a partial output behind.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.empty()) throw ContractError("empty output path");
  std::random_device rd;
  const auto tmp = path.string() + ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError(path.string(), "cannot open for writing");
    out << content;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw FileError(path.string(), "write failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw FileError(path.string(), "rename failed: " + ec.message());
  }
}

inline Format format_for(const std::string& path) {
  return std::filesystem::path(path).extension() == ".jsonl" ? Format::jsonl : Format::csv;
}

/// Opens `path` and runs `loader(stream, format)`, prefixing any error with
/// the file name.
template <typename Loader>
auto load_file(const std::string& path, Loader&& loader) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "cannot open");
  try {
    return loader(in, format_for(path));
  } catch (const FileError&) {
    throw;
  } catch (const Error& e) {
    throw FileError(path, e.what());
  }
}

/// Output files are collected first and written only after every
/// computation succeeded.
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  void add(const std::string& path, std::string content) {
    if (!path.empty()) files.emplace_back(path, std::move(content));
  }
  void commit() const {
    for (const auto& [path, content] : files) write_atomic(path, content);
  }
};

enum class OutFormat { json, markdown, csv };

inline const std::map<std::string, OutFormat>& out_formats() {
  static const std::map<std::string, OutFormat> m{{"json", OutFormat::json}, {"markdown", OutFormat::markdown}, {"csv", OutFormat::csv}};
  return m;
}

template <typename Report>
std::string render(const Report& r, OutFormat f) {
  switch (f) {
    case OutFormat::json: return report::canonical_json(report::to_json(r));
    case OutFormat::markdown: return report::markdown(r);
    case OutFormat::csv: return report::csv_table(r);
  }
  return {};
}

/// key=value lines; values are comma lists. Blank lines and '#' comments
/// are skipped.
inline std::map<std::string, std::vector<std::string>> parse_grid(std::istream& in) {
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError("grid line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    std::vector<std::string> values;
    std::stringstream ss(line.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) values.push_back(item);
    }
    static const std::set<std::string> known{"bundles", "poolers", "learners", "seeds", "folds"};
    if (!known.count(key)) throw SchemaError("grid line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    out[key] = values;
  }
  return out;
}

namespace detail {

inline std::pair<std::string, std::string> split_named(const std::string& spec, const char* flag) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ContractError(std::string(flag) + " expects NAME=PATH, got '" + spec + "'");
  }
  return {spec.substr(0, eq), spec.substr(eq + 1)};
}

inline std::set<int> int_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace detail

/// Parses argv (argv[0] is the program name), runs the subcommand and writes
/// its artifacts. Diagnostics go to `err`.
inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  CLI::App app{"Subject-level benchmark audit toolkit", "bg"};
  app.require_subcommand(1);

  std::string out_path;
  std::string format_name = "json";
  auto add_output = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--out", out_path, "Report path");
    if (required) opt->required();
    sub->add_option("--format", format_name, "json, markdown or csv")
        ->check(CLI::IsMember({"json", "markdown", "csv"}));
  };

  // loso
  std::string loso_preds;
  std::string loso_config;
  auto* loso = app.add_subcommand("loso", "Leave-one-subject-out evaluation with nested cutoff selection");
  loso->add_option("--preds", loso_preds, "Prediction file (csv or jsonl)")->required();
  loso->add_option("--config", loso_config, "Only evaluate this config_id");
  add_output(loso, true);

  // rank
  std::string rank_cv, rank_test;
  int rank_boot = 4000;
  std::uint64_t rank_seed = 13;
  auto* rank = app.add_subcommand("rank", "CV-vs-test rank association and subject-bootstrap rank audit");
  rank->add_option("--cv", rank_cv, "config_id,cv_score file")->required();
  rank->add_option("--test", rank_test, "Per-subject test predictions with config_id")->required();
  rank->add_option("--bootstrap", rank_boot, "Subject bootstrap replicates")->check(CLI::PositiveNumber);
  rank->add_option("--seed", rank_seed, "Bootstrap seed");
  add_output(rank, true);

  // transfer
  std::vector<std::string> transfer_targets, transfer_severity;
  std::vector<std::int64_t> transfer_cutoffs;
  auto* transfer = app.add_subcommand("transfer", "Zero-shot scoring under the fixed 0.5 rule");
  transfer->add_option("--target", transfer_targets, "NAME=PREDICTIONS (repeatable)")->required();
  transfer->add_option("--severity", transfer_severity, "NAME=SEVERITY file for a target (repeatable)");
  transfer->add_option("--cutoffs", transfer_cutoffs, "Severity cutoffs, e.g. 8,17,24")->delimiter(',');
  add_output(transfer, true);

  // stress
  std::string stress_ann, stress_preds, stress_figure, stress_sided = "two";
  int stress_boot = 5000, stress_perm = 5000;
  std::vector<std::int64_t> stress_seeds;
  std::vector<std::string> stress_gap{"text", "audio"};
  std::vector<int> heavy{2, 3}, neutral{0}, mid{1};
  double min_speech = 10.0;
  std::optional<double> min_conf;
  std::vector<std::string> relevance;
  auto* stress = app.add_subcommand("stress", "Paired heavy/neutral stress test");
  stress->add_option("--annotations", stress_ann, "Chunk annotation file")->required();
  stress->add_option("--preds", stress_preds, "Per-band predictions keyed by subject, band, modality, seed")->required();
  stress->add_option("--boot", stress_boot, "Participant bootstrap replicates")->check(CLI::PositiveNumber);
  stress->add_option("--perm", stress_perm, "Sign-flip assignments")->check(CLI::PositiveNumber);
  stress->add_option("--seeds", stress_seeds, "Seeds to analyse")->delimiter(',');
  stress->add_option("--sided", stress_sided, "one or two")->check(CLI::IsMember({"one", "two"}));
  stress->add_option("--gap", stress_gap, "Gap modalities FIRST,SECOND")->delimiter(',')->expected(2);
  stress->add_option("--heavy", heavy, "Topic scores of the heavy band")->delimiter(',');
  stress->add_option("--neutral", neutral, "Topic scores of the neutral band")->delimiter(',');
  stress->add_option("--mid", mid, "Topic scores excluded as mid")->delimiter(',');
  stress->add_option("--min-speech", min_speech, "Minimum participant speech per band, seconds");
  stress->add_option("--min-confidence", min_conf, "Ignore chunks below this annotator confidence");
  stress->add_option("--self-relevance", relevance, "Keep only these self_relevance values")->delimiter(',');
  stress->add_option("--figure", stress_figure, "Figure data CSV path");
  add_output(stress, true);

  // sweep
  std::string sweep_features, sweep_manifest, sweep_grid, sweep_cv_out, sweep_test_out;
  std::vector<std::int64_t> sweep_seeds;
  auto* sweep = app.add_subcommand("sweep", "Reference-learner grid over bundles, poolers and learners");
  sweep->add_option("--features", sweep_features, "Feature file")->required();
  sweep->add_option("--manifest", sweep_manifest, "subject_id,split manifest (dev/train vs test)")->required();
  sweep->add_option("--grid", sweep_grid, "Grid file of key=value lists");
  sweep->add_option("--seeds", sweep_seeds, "Seeds (overrides the grid)")->delimiter(',');
  sweep->add_option("--out-cv", sweep_cv_out, "config_id,cv_score output")->required();
  sweep->add_option("--out-test", sweep_test_out, "Per-subject test prediction output")->required();
  add_output(sweep, false);

  // lint
  std::string lint_manifest, lint_preds;
  auto* lint = app.add_subcommand("lint", "Subject-disjointness checks");
  lint->add_option("--manifest", lint_manifest, "Split manifest")->required();
  lint->add_option("--preds", lint_preds, "Prediction file with split column");
  add_output(lint, false);

  // synth
  std::size_t synth_n = 150;
  double synth_prev = 0.3, synth_turns = 8.0, synth_test_fraction = 0.25;
  std::size_t synth_dims = 8;
  std::uint64_t synth_seed = 13;
  std::vector<std::string> synth_blocks{"A=1", "V=1", "T=1", "L=1"};
  std::string synth_manifest;
  auto* synth = app.add_subcommand("synth", "Synthetic multi-block feature corpus");
  synth->add_option("--subjects", synth_n, "Number of subjects");
  synth->add_option("--prevalence", synth_prev, "Positive-class probability");
  synth->add_option("--turns", synth_turns, "Mean turns per subject");
  synth->add_option("--blocks", synth_blocks, "NAME=SEPARATION list")->delimiter(',');
  synth->add_option("--dims", synth_dims, "Dimensionality of every block");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--manifest-out", synth_manifest, "Also write a stratified dev/test manifest");
  synth->add_option("--test-fraction", synth_test_fraction, "Test share for --manifest-out");
  synth->add_option("--out", out_path, "Feature file")->required();

  std::vector<const char*> cargv;
  std::vector<std::string> owned = args;
  if (owned.empty()) owned.emplace_back("bg");
  for (const auto& a : owned) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "bg: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  const OutFormat fmt = out_formats().at(format_name);
  Outputs outputs;
  int code = kExitOk;
  try {
    if (*loso) {
      const auto preds = load_file(loso_preds, [](std::istream& in, Format f) { return load_predictions(in, f); });
      std::map<std::string, PredictionTable> groups;
      for (const auto& r : preds) {
        const std::string cfg = r.config_id.value_or("all");
        if (!loso_config.empty() && cfg != loso_config) continue;
        groups[cfg].push_back(r);
      }
      if (groups.empty()) throw FileError(loso_preds, "no rows for config '" + loso_config + "'");
      std::vector<report::NamedLoso> rows;
      for (const auto& [cfg, table] : groups) {
        const SubjectTable subjects = pool_to_subject(table);
        rows.push_back({cfg, subjects.size(), run_loso(subjects)});
        for (const auto& w : rows.back().report.warnings) err << "bg: warning: " << cfg << ": " << w << "\n";
      }
      outputs.add(out_path, render(rows, fmt));
    } else if (*rank) {
      const auto cv = load_file(rank_cv, [](std::istream& in, Format f) { return load_cv_scores(in, f); });
      const auto test = load_file(rank_test, [](std::istream& in, Format f) { return load_predictions(in, f); });
      ConfigSubjectMatrix matrix;
      try {
        matrix = build_config_matrix(test);
      } catch (const Error& e) {
        throw FileError(rank_test, e.what());
      }
      const auto audit = leaderboard_audit(cv, matrix, rank_boot, rank_seed);
      outputs.add(out_path, render(audit, fmt));
    } else if (*transfer) {
      std::map<std::string, std::string> severity_path;
      for (const auto& s : transfer_severity) {
        const auto [name, path] = detail::split_named(s, "--severity");
        severity_path[name] = path;
      }
      std::vector<TransferTarget> targets;
      for (const auto& t : transfer_targets) {
        const auto [name, path] = detail::split_named(t, "--target");
        const auto preds = load_file(path, [](std::istream& in, Format f) { return load_predictions(in, f); });
        SubjectTable subjects;
        if (const auto it = severity_path.find(name); it != severity_path.end()) {
          // Labels come from severities; prediction-file labels may disagree across rows.
          PredictionTable relabeled = preds;
          for (auto& r : relabeled) r.label = 0;
          subjects = pool_to_subject(relabeled);
          const auto sev = load_file(it->second, [](std::istream& in, Format f) { return load_severity(in, f); });
          targets.push_back(target_from_severity(name, subjects, sev));
          severity_path.erase(it);
        } else {
          try {
            subjects = pool_to_subject(preds);
          } catch (const Error& e) {
            throw FileError(path, e.what());
          }
          targets.push_back(target_from_subjects(name, subjects));
        }
      }
      if (!severity_path.empty()) throw ContractError("--severity for unknown target '" + severity_path.begin()->first + "'");
      outputs.add(out_path, render(zero_shot_report(targets, transfer_cutoffs), fmt));
    } else if (*stress) {
      const auto ann = load_file(stress_ann, [](std::istream& in, Format f) { return load_annotations(in, f); });
      const auto preds = load_file(stress_preds, [](std::istream& in, Format f) { return load_predictions(in, f); });
      StressOptions opt;
      opt.rules.heavy = detail::int_set(heavy);
      opt.rules.neutral = detail::int_set(neutral);
      opt.rules.mid = detail::int_set(mid);
      opt.rules.min_speech_s = min_speech;
      opt.rules.min_confidence = min_conf;
      if (!relevance.empty()) {
        std::set<SelfRelevance> keep;
        for (const auto& r : relevance) {
          if (r == "self") keep.insert(SelfRelevance::self);
          else if (r == "other") keep.insert(SelfRelevance::other);
          else if (r == "generic") keep.insert(SelfRelevance::generic);
          else if (r == "negated") keep.insert(SelfRelevance::negated);
          else throw ContractError("unknown self_relevance '" + r + "'");
        }
        opt.rules.self_relevance = keep;
      }
      opt.bootstrap_replicates = stress_boot;
      opt.permutation_assignments = stress_perm;
      opt.seeds = stress_seeds;
      opt.gap_modalities = std::make_pair(stress_gap.at(0), stress_gap.at(1));
      opt.sided = parse_sided(stress_sided);
      const StressRun run = run_stress(ann, preds, opt);
      std::string body;
      switch (fmt) {
        case OutFormat::json: body = report::canonical_json(report::to_json(run, opt)); break;
        case OutFormat::markdown: body = report::markdown(run, opt); break;
        case OutFormat::csv: body = report::figure_csv(run.summary); break;
      }
      outputs.add(out_path, body);
      outputs.add(stress_figure, report::figure_csv(run.summary));
    } else if (*sweep) {
      const auto features = load_file(sweep_features, [](std::istream& in, Format f) { return load_features(in, f); });
      const auto manifest = load_file(sweep_manifest, [](std::istream& in, Format f) { return load_manifest(in, f); });
      SweepSplit split;
      for (const auto& e : manifest) (e.split == Split::test ? split.test_subjects : split.dev_subjects).push_back(e.subject_id);
      SweepGrid grid;
      std::vector<std::string> learners{"logreg_pca64_c01", "logreg_pca128_c1"};
      std::vector<std::int64_t> seeds = default_sweep_seeds();
      int folds = 5;
      if (!sweep_grid.empty()) {
        const auto g = load_file(sweep_grid, [](std::istream& in, Format) { return parse_grid(in); });
        if (g.count("bundles")) grid.bundles = g.at("bundles");
        if (g.count("poolers")) {
          grid.poolers.clear();
          for (const auto& p : g.at("poolers")) grid.poolers.push_back(parse_pooler(p));
        }
        if (g.count("learners")) learners = g.at("learners");
        if (g.count("seeds")) {
          seeds.clear();
          for (const auto& s : g.at("seeds")) seeds.push_back(std::stoll(s));
        }
        if (g.count("folds")) folds = std::stoi(g.at("folds").at(0));
      }
      if (!sweep_seeds.empty()) seeds = sweep_seeds;
      for (const auto& l : learners) grid.learners.push_back(make_learner(l));
      const SweepResult result = run_sweep(features, split, grid, seeds, folds);
      outputs.add(sweep_cv_out, report::sweep_cv_csv(result));
      std::ostringstream test_csv;
      write_predictions(test_csv, result.test_predictions(), Format::csv);
      outputs.add(sweep_test_out, test_csv.str());
      if (!out_path.empty()) {
        outputs.add(out_path, fmt == OutFormat::markdown ? report::markdown(result)
                              : fmt == OutFormat::csv    ? report::sweep_cv_csv(result)
                                                         : report::canonical_json(report::to_json(result)));
      }
    } else if (*lint) {
      const auto manifest = load_file(lint_manifest, [](std::istream& in, Format f) { return load_manifest(in, f); });
      std::optional<PredictionTable> preds;
      if (!lint_preds.empty()) {
        preds = load_file(lint_preds, [](std::istream& in, Format f) { return load_predictions(in, f); });
      }
      const LintReport r = lint_subject_disjoint(manifest, preds ? &*preds : nullptr);
      if (out_path.empty()) {
        out << render(r, fmt);
      } else {
        outputs.add(out_path, render(r, fmt));
      }
      if (!r.clean()) {
        err << "bg: lint: " << r.violations.size() << " violation(s); first: " << r.violations.front().rule_id
            << " for subject '" << r.violations.front().subject_id << "'\n";
        code = kExitLintDirty;
      }
    } else if (*synth) {
      SynthSpec spec;
      spec.n_subjects = synth_n;
      spec.prevalence = synth_prev;
      spec.turns_mean = synth_turns;
      spec.dims = synth_dims;
      spec.seed = synth_seed;
      spec.blocks.clear();
      for (const auto& b : synth_blocks) {
        const auto [name, sep] = detail::split_named(b, "--blocks");
        const auto v = csv::parse_double(sep);
        if (!v) throw ContractError("--blocks separation '" + sep + "' is not a number");
        spec.blocks.push_back({name, *v});
      }
      const FeatureTable table = synth_corpus(spec);
      std::ostringstream body;
      write_features(body, table, format_for(out_path));
      outputs.add(out_path, body.str());
      if (!synth_manifest.empty()) {
        const SweepSplit split = split_dev_test(table, synth_test_fraction, synth_seed);
        SplitManifest m;
        for (const auto& s : split.dev_subjects) m.push_back({s, Split::dev, std::nullopt, std::nullopt});
        for (const auto& s : split.test_subjects) m.push_back({s, Split::test, std::nullopt, std::nullopt});
        std::ostringstream mbody;
        write_manifest(mbody, m);
        outputs.add(synth_manifest, mbody.str());
      }
    }
    outputs.commit();
  } catch (const Error& e) {
    err << "bg: error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "bg: error: " << e.what() << "\n";
    return kExitError;
  }
  return code;
}

}  // namespace bg::cli
