// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "benchgauge/benchgauge.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Check metrics_reproduction() {
  Check c;
  struct Row {
    bg::ConfusionCounts cc;
    double macro_f1;
  };
  const Row rows[] = {{{138, 51, 28, 58}, 0.686}, {{141, 48, 43, 43}, 0.621}, {{155, 34, 32, 54}, 0.723}};
  for (const auto& r : rows) {
    const auto m = bg::classification_metrics(r.cc);
    c.expect(near(m.macro_f1, r.macro_f1, 5e-4), "macro-F1 " + num(m.macro_f1) + " vs " + num(r.macro_f1));
  }
  const auto first = bg::classification_metrics(rows[0].cc);
  c.expect(near(first.accuracy, 0.713, 5e-4), "accuracy " + num(first.accuracy));
  c.expect(near(first.balanced_accuracy, 0.702, 5e-4), "balanced accuracy " + num(first.balanced_accuracy));
  return c;
}

Check ranking_oracles() {
  Check c;
  oracle::Lcg rng(1);
  for (int trial = 0; trial < 1000 && c.ok; ++trial) {
    const std::size_t n = 2 + rng.below(199);
    const std::size_t levels = trial % 3 == 0 ? 5 + rng.below(10) : 0;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = levels ? static_cast<double>(rng.below(levels)) / static_cast<double>(levels - 1) : rng.uniform();
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    const bg::ScoredLabels data(s, y);
    const double a = bg::auroc(data);
    const double ao = oracle::auroc_pairs(s, y);
    c.expect(a == ao, "trial " + std::to_string(trial) + ": auroc " + num(a) + " vs " + num(ao));
    const double ap = bg::average_precision(data);
    const double apo = oracle::ap_thresholds(s, y);
    c.expect(near(ap, apo, 1e-12), "trial " + std::to_string(trial) + ": AP " + num(ap) + " vs " + num(apo));
  }
  return c;
}

bg::SubjectTable subject_table(const std::vector<double>& s, const std::vector<int>& y) {
  bg::SubjectTable t;
  for (std::size_t i = 0; i < s.size(); ++i) t.push_back({"P" + std::to_string(100 + i), y[i], s[i]});
  return t;
}

Check loso_poisoning() {
  Check c;
  oracle::Lcg rng(3);
  for (int trial = 0; trial < 5 && c.ok; ++trial) {
    std::vector<double> s(40);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
      y[i] = i % 3 == 0;
      s[i] = std::clamp(0.4 + 0.2 * y[i] + 0.2 * rng.normal(), 0.0, 1.0);
    }
    const auto subjects = subject_table(s, y);
    const auto base = bg::run_loso(subjects);
    for (std::size_t f = 0; f < subjects.size(); ++f) {
      for (double poison : {0.0, 1.0, rng.uniform()}) {
        auto p = subjects;
        p[f].score = poison;
        const auto r = bg::run_loso(p);
        c.expect(r.cutoffs[f] == base.cutoffs[f], "fold " + std::to_string(f) + " cutoff moved");
      }
    }
  }
  // Separable fixtures: the class gap exceeds the spacing at each class boundary.
  for (int trial = 0; trial < 20 && c.ok; ++trial) {
    const std::size_t np = 3 + rng.below(15), nn = 3 + rng.below(25);
    std::vector<double> s;
    std::vector<int> y;
    const double step = 0.2 / static_cast<double>(std::max(np, nn));
    for (std::size_t i = 0; i < np; ++i) {
      s.push_back(0.6 + step * static_cast<double>(i));
      y.push_back(1);
    }
    for (std::size_t i = 0; i < nn; ++i) {
      s.push_back(0.4 - step * static_cast<double>(i));
      y.push_back(0);
    }
    const auto r = bg::run_loso(subject_table(s, y));
    c.expect(r.metrics.macro_f1 == 1.0, "separable fixture macro-F1 " + num(r.metrics.macro_f1));
  }
  const double cut = bg::select_cutoff(bg::ScoredLabels({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}));
  c.expect(cut == 0.5, "tie-break cutoff " + num(cut));
  return c;
}

std::vector<bg::ConfigScorePair> pairs_of(const std::vector<double>& cv, const std::vector<double>& test) {
  std::vector<bg::ConfigScorePair> out;
  for (std::size_t i = 0; i < cv.size(); ++i) out.push_back({"c" + std::to_string(i), cv[i], test[i]});
  return out;
}

Check rank_identities() {
  Check c;
  // Evenly spaced so the reversal is linear and Pearson reaches -1 too.
  const std::vector<double> up{0.50, 0.54, 0.58, 0.62, 0.66, 0.70};
  const std::vector<double> down(up.rbegin(), up.rend());
  const auto id = bg::rank_association(pairs_of(up, up));
  c.expect(near(id.pearson, 1, 1e-12) && near(id.spearman, 1, 1e-12) && id.kendall_tau == 1.0, "identity correlations");
  c.expect(id.discordance_rate == 0.0, "identity discordance");
  const auto rev = bg::rank_association(pairs_of(up, down));
  c.expect(near(rev.pearson, -1, 1e-12) && near(rev.spearman, -1, 1e-12) && rev.kendall_tau == -1.0, "reversal correlations");
  c.expect(rev.discordance_rate == 1.0, "reversal discordance");
  oracle::Lcg rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 3 + rng.below(60);
    std::vector<double> cv(n), test(n);
    for (std::size_t i = 0; i < n; ++i) {
      cv[i] = rng.uniform() + 1e-9 * static_cast<double>(i);
      test[i] = rng.uniform() + 1e-9 * static_cast<double>(i);
    }
    const auto r = bg::rank_association(pairs_of(cv, test));
    c.expect(near(r.discordance_rate, (1 - r.kendall_tau) / 2, 1e-15), "trial " + std::to_string(trial));
  }
  return c;
}

bg::ConfigSubjectMatrix audit_matrix(std::size_t configs, std::size_t subjects, std::uint64_t seed) {
  oracle::Lcg rng(seed);
  bg::ConfigSubjectMatrix m;
  for (std::size_t s = 0; s < subjects; ++s) {
    m.subject_ids.push_back("S" + std::to_string(1000 + s));
    m.labels.push_back(rng.uniform() < 0.35 ? 1 : 0);
  }
  for (std::size_t k = 0; k < configs; ++k) {
    m.config_ids.push_back("cfg" + std::to_string(10 + k));
    std::vector<double> row;
    const double signal = 0.05 + 0.01 * static_cast<double>(k);
    for (std::size_t s = 0; s < subjects; ++s) {
      row.push_back(std::clamp(0.5 + (m.labels[s] ? signal : -signal) + 0.2 * rng.normal(), 0.0, 1.0));
    }
    m.scores.push_back(row);
  }
  return m;
}

Check bootstrap_audit() {
  Check c;
  bg::ConfigSubjectMatrix dom;
  for (int s = 0; s < 50; ++s) {
    dom.subject_ids.push_back("S" + std::to_string(s));
    dom.labels.push_back(s % 4 == 0);
  }
  dom.config_ids = {"perfect", "noisy", "copy"};
  std::vector<double> perfect, noisy;
  for (int s = 0; s < 50; ++s) {
    perfect.push_back(dom.labels[s] ? 0.9 : 0.1);
    noisy.push_back(s % 5 == 1 ? 0.9 : (dom.labels[s] ? 0.8 : 0.2));
  }
  dom.scores = {perfect, noisy, noisy};
  const auto r = bg::bootstrap_rank_audit(dom, 1000, 13);
  const auto& best = r.at("perfect");
  c.expect(best.p_rank1 == 1.0 && best.rank_lo == 1 && best.rank_hi == 1, "dominant config not always first");
  c.expect(r.at("noisy").histogram == r.at("copy").histogram, "duplicated configs differ");

  const auto m = audit_matrix(20, 100, 5);
  const auto start = std::chrono::steady_clock::now();
  setenv("BG_THREADS", "1", 1);
  const auto a = bg::report::canonical_json(bg::report::to_json(bg::bootstrap_rank_audit(m, 4000, 13)));
  setenv("BG_THREADS", "4", 1);
  const auto b = bg::report::canonical_json(bg::report::to_json(bg::bootstrap_rank_audit(m, 4000, 13)));
  const auto b2 = bg::report::canonical_json(bg::report::to_json(bg::bootstrap_rank_audit(m, 4000, 13)));
  unsetenv("BG_THREADS");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(a == b && b == b2, "reports differ across reruns or thread counts");
  c.expect(secs / 3 < 60, "one 4000-replicate audit took " + num(secs / 3) + " s");
  return c;
}

Check permutation_calibration() {
  Check c;
  oracle::Lcg rng(6);
  int rejected = 0;
  for (int k = 0; k < 500; ++k) {
    std::vector<double> g(30);
    for (auto& x : g) x = 0.1 * rng.normal();
    rejected += bg::signflip_gap_test(g, 2000, static_cast<std::uint64_t>(1000 + k)).p <= 0.05;
  }
  const double rate = rejected / 500.0;
  c.expect(rate >= 0.03 && rate <= 0.07, "null rejection rate " + num(rate));
  std::vector<double> pos;
  for (int i = 0; i < 12; ++i) pos.push_back(0.05 + 0.01 * i);
  const double p = bg::signflip_exhaustive(pos, bg::Sided::one).p;
  c.expect(p == 1.0 / 4096.0, "exhaustive p " + num(p));
  return c;
}

Check planted_stress_recovery() {
  Check c;
  const auto& seeds = bg::default_stress_seeds();
  const auto f = fixture::planted_stress(132, {{"text", 0.422}, {"audio", -0.004}}, seeds, 0.1, 2024);
  const auto run = bg::run_stress(f.annotations, f.predictions);
  c.expect(run.slices.pairs.size() == 132, "retained pairs " + std::to_string(run.slices.pairs.size()));
  int text_excl = 0, audio_cross = 0, gap_ok = 0;
  for (const auto& s : run.per_seed) {
    const auto& t = s.shifts.at("text");
    const auto& a = s.shifts.at("audio");
    text_excl += t.ci_low > 0 || t.ci_high < 0;
    audio_cross += a.ci_low <= 0 && a.ci_high >= 0;
    gap_ok += s.gap && s.gap->mean > 0 && s.gap->p <= 0.001;
  }
  c.expect(text_excl == 5, "text CI excludes zero in " + std::to_string(text_excl) + "/5 seeds");
  c.expect(audio_cross >= 4, "audio CI crosses zero in " + std::to_string(audio_cross) + "/5 seeds");
  c.expect(gap_ok == 5, "gap positive with p <= 0.001 in " + std::to_string(gap_ok) + "/5 seeds");
  return c;
}

bg::ChunkAnnotation chunk(std::string subject, std::string id, double a, double b, int topic) {
  bg::ChunkAnnotation x;
  x.subject_id = std::move(subject);
  x.chunk_id = std::move(id);
  x.start_s = a;
  x.end_s = b;
  x.topic_score = topic;
  return x;
}

Check slice_rules() {
  Check c;
  const auto s = bg::build_paired_slices({chunk("A", "h", 0, 9.9, 3), chunk("A", "n", 10, 40, 0),
                                          chunk("B", "h", 0, 20, 2), chunk("B", "n", 20, 29.9, 0),
                                          chunk("C", "h", 0, 15, 3), chunk("C", "m", 15, 90, 1), chunk("C", "n", 90, 95, 0),
                                          chunk("D", "h", 0, 10, 3), chunk("D", "m", 10, 20, 1), chunk("D", "n", 20, 30, 0)});
  std::set<std::string> kept, dropped;
  for (const auto& p : s.pairs) {
    kept.insert(p.subject_id);
    for (const auto& ids : {p.heavy_chunks, p.neutral_chunks}) {
      for (const auto& id : ids) c.expect(id != "m", "mid chunk counted for " + p.subject_id);
    }
  }
  for (const auto& d : s.dropped) dropped.insert(d.subject_id);
  c.expect(kept == std::set<std::string>{"D"}, "kept set");
  c.expect(dropped == std::set<std::string>{"A", "B", "C"}, "dropped set");

  oracle::Lcg rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<bg::ChunkAnnotation> ann;
    std::set<std::string> all;
    for (int subj = 0; subj < 15; ++subj) {
      const std::string id = "S" + std::to_string(subj);
      all.insert(id);
      double t = 0;
      for (std::size_t k = 0, n = 1 + rng.below(8); k < n; ++k) {
        const double len = 0.5 + 9.0 * rng.uniform();
        ann.push_back(chunk(id, std::to_string(k), t, t + len, static_cast<int>(rng.below(4))));
        t += len;
      }
    }
    const auto r = bg::build_paired_slices(ann);
    std::multiset<std::string> seen;
    for (const auto& p : r.pairs) seen.insert(p.subject_id);
    for (const auto& d : r.dropped) seen.insert(d.subject_id);
    c.expect(seen == std::multiset<std::string>(all.begin(), all.end()), "partition trial " + std::to_string(trial));
  }
  return c;
}

Check learner_numerics() {
  Check c;
  oracle::Lcg rng(9);
  const Eigen::Index n = 60, d = 7;
  Eigen::MatrixXd x(n, d);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal() * (1 + 0.5 * static_cast<double>(j));
    y[static_cast<std::size_t>(i)] = x(i, 0) + rng.normal() > 0;
  }
  Eigen::VectorXd w(d);
  for (auto& v : w) v = 0.3 * rng.normal();
  const double b = 0.2, cc = 0.5, h = 1e-5;
  const auto g = bg::logreg_gradient(x, y, cc, w, b);
  for (Eigen::Index j = 0; j <= d; ++j) {
    Eigen::VectorXd wp = w, wm = w;
    double bp = b, bm = b;
    if (j < d) {
      wp(j) += h;
      wm(j) -= h;
    } else {
      bp += h;
      bm -= h;
    }
    const double fd = (bg::logreg_objective(x, y, cc, wp, bp) - bg::logreg_objective(x, y, cc, wm, bm)) / (2 * h);
    const double rel = std::abs(fd - g(j)) / std::max(1.0, std::abs(g(j)));
    c.expect(rel <= 1e-6, "gradient coord " + std::to_string(j) + " rel err " + num(rel));
  }
  const auto pca = bg::pca_fit(x, 5);
  const double ortho = (pca.components * pca.components.transpose() - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff();
  c.expect(ortho <= 1e-8, "orthonormality error " + num(ortho));
  const auto full = bg::pca_fit(x, d);
  const double recon = (full.inverse_transform(full.transform(x)) - x).cwiseAbs().maxCoeff();
  c.expect(recon <= 1e-8, "reconstruction error " + num(recon));
  return c;
}

Check end_to_end_sweep() {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  const auto features = bg::synth_corpus(bg::SynthSpec{});
  const auto split = bg::split_dev_test(features, 0.25, 13);
  bg::SweepGrid grid;
  grid.learners = {bg::make_learner("logreg_pca64_c01"), bg::make_learner("logreg_pca128_c1")};
  const auto result = bg::run_sweep(features, split, grid, bg::default_sweep_seeds());
  c.expect(result.configs.size() == 32, "config count " + std::to_string(result.configs.size()));
  const auto matrix = bg::build_config_matrix(result.test_predictions());
  const auto audit = bg::leaderboard_audit(result.cv_scores(), matrix, 4000, 13);
  const auto j = bg::report::to_json(audit);
  for (const char* key : {"pearson_correlation_cv_vs_test", "spearman_correlation_cv_vs_test", "kendall_tau",
                          "discordance_rate", "best_cv_config_test_rank", "best_test_config_cv_rank", "top3_overlap",
                          "top5_overlap", "median_abs_rank_shift", "bootstrap_p_rank1_test_best",
                          "bootstrap_rank_range_95_test_best"}) {
    c.expect(j.contains("summary") && j["summary"].contains(key), std::string("missing statistic ") + key);
  }
  const auto md = bg::report::markdown(audit);
  c.expect(md.find("Kendall tau") != std::string::npos, "markdown table lacks Kendall tau row");

  std::set<std::string> test(split.test_subjects.begin(), split.test_subjects.end());
  auto poisoned = features;
  for (auto& r : poisoned) {
    if (test.count(r.subject_id)) r.label = 1 - r.label;
  }
  const auto again = bg::run_sweep(poisoned, split, grid, bg::default_sweep_seeds());
  for (std::size_t k = 0; k < result.configs.size(); ++k) {
    c.expect(again.configs[k].test_scores == result.configs[k].test_scores,
             "test-label poisoning moved scores of " + result.configs[k].config_id);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs / 2 < 300, "sweep took " + num(secs / 2) + " s");
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"metrics reproduce the reported confusion-matrix rows", metrics_reproduction},
      {"AUROC and AP equal their brute-force oracles", ranking_oracles},
      {"LOSO cutoffs ignore held-out poisoning", loso_poisoning},
      {"rank-association identities", rank_identities},
      {"bootstrap rank audit dominance, duplicates and determinism", bootstrap_audit},
      {"sign-flip calibration and exhaustive p", permutation_calibration},
      {"planted stress shifts recovered", planted_stress_recovery},
      {"slice rules", slice_rules},
      {"reference learner numerics", learner_numerics},
      {"end-to-end sweep into leaderboard audit", end_to_end_sweep},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2zu %s: %s (%.1f s)%s%s\n", i + 1, c.ok ? "PASS" : "FAIL", criteria[i].first.c_str(), secs,
                c.ok ? "" : ": ", c.detail.c_str());
    std::fflush(stdout);
    failed += !c.ok;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
