#include "benchgauge/sweep.hpp"

#include <cstdlib>

#include <gtest/gtest.h>

#include "benchgauge/rankaudit.hpp"

namespace bg {
namespace {

SweepGrid small_grid() {
  SweepGrid g;
  g.bundles = {"A", "T+A"};
  g.learners = {make_learner("logreg_pca4_c01"), make_learner("logreg_pca8_c1")};
  return g;
}

SynthSpec small_spec(double separation) {
  SynthSpec s;
  s.n_subjects = 80;
  s.prevalence = 0.4;
  s.turns_mean = 4;
  s.dims = 6;
  s.blocks = {{"A", separation}, {"T", separation}};
  return s;
}

TEST(SynthCorpus, ShapeAndDeterminism) {
  const auto spec = small_spec(1.0);
  const auto a = synth_corpus(spec);
  EXPECT_EQ(a, synth_corpus(spec));
  std::set<std::string> subjects;
  for (const auto& r : a) {
    subjects.insert(r.subject_id);
    EXPECT_EQ(r.features.size(), 6u);
  }
  EXPECT_EQ(subjects.size(), 80u);
  EXPECT_EQ(*subjects.begin(), "S01");
  auto other = spec;
  other.seed = 14;
  EXPECT_NE(a, synth_corpus(other));
}

TEST(SplitDevTest, StratifiedAndDisjoint) {
  const auto f = synth_corpus(small_spec(1.0));
  const auto s = split_dev_test(f, 0.25, 13);
  std::set<std::string> dev(s.dev_subjects.begin(), s.dev_subjects.end());
  for (const auto& t : s.test_subjects) EXPECT_FALSE(dev.count(t));
  EXPECT_EQ(s.dev_subjects.size() + s.test_subjects.size(), 80u);
  EXPECT_NEAR(static_cast<double>(s.test_subjects.size()), 20.0, 1.0);
}

TEST(RunSweep, ConfigCountAndIds) {
  const auto f = synth_corpus(small_spec(1.0));
  const auto r = run_sweep(f, split_dev_test(f, 0.25, 13), small_grid(), {13, 23});
  EXPECT_EQ(r.configs.size(), 2u * 2u * 2u);
  EXPECT_EQ(r.configs.front().config_id, "A|mean|logreg_pca4_c01");
  EXPECT_EQ(r.cv_scores().size(), 8u);
  EXPECT_EQ(r.test_predictions().size(), 8u * r.test_subjects.size());
  for (const auto& c : r.configs) {
    EXPECT_EQ(c.cv_score_per_seed.size(), 2u);
    EXPECT_NEAR(c.cv_score, (c.cv_score_per_seed[0] + c.cv_score_per_seed[1]) / 2, 1e-15);
  }
}

TEST(RunSweep, SeparableDataScoresHigh) {
  const auto f = synth_corpus(small_spec(8.0));
  const auto r = run_sweep(f, split_dev_test(f, 0.25, 13), small_grid(), {13});
  for (const auto& c : r.configs) EXPECT_GE(c.cv_score, 0.9) << c.config_id;
}

TEST(RunSweep, NullAndStrongSignal) {
  auto spec = small_spec(0.0);
  spec.n_subjects = 120;
  const auto null = synth_corpus(spec);
  spec.blocks = {{"A", 4.0}, {"T", 4.0}};
  const auto strong = synth_corpus(spec);
  auto grid = small_grid();
  grid.bundles = {"T+A"};
  grid.poolers = {Pooler::mean};
  grid.learners = {make_learner("logreg_pca8_c1")};
  auto auroc_of = [&](const FeatureTable& f) {
    const auto r = run_sweep(f, split_dev_test(f, 0.5, 1), grid, {13});
    return auroc(ScoredLabels(r.configs[0].test_scores, r.test_labels));
  };
  EXPECT_NEAR(auroc_of(null), 0.5, 0.2);
  EXPECT_GE(auroc_of(strong), 0.85);
}

TEST(RunSweep, SeedOrderAndDuplicatesIrrelevant) {
  const auto f = synth_corpus(small_spec(1.0));
  const auto split = split_dev_test(f, 0.25, 13);
  const auto a = run_sweep(f, split, small_grid(), {13, 23, 37});
  const auto b = run_sweep(f, split, small_grid(), {37, 13, 23, 13});
  ASSERT_EQ(a.configs.size(), b.configs.size());
  for (std::size_t i = 0; i < a.configs.size(); ++i) {
    EXPECT_EQ(a.configs[i].test_scores, b.configs[i].test_scores);
    EXPECT_EQ(a.configs[i].cv_score, b.configs[i].cv_score);
  }
}

TEST(RunSweep, DeterministicAcrossThreadCounts) {
  const auto f = synth_corpus(small_spec(1.0));
  const auto split = split_dev_test(f, 0.25, 13);
  setenv("BG_THREADS", "1", 1);
  const auto a = run_sweep(f, split, small_grid(), {13, 23});
  setenv("BG_THREADS", "4", 1);
  const auto b = run_sweep(f, split, small_grid(), {13, 23});
  unsetenv("BG_THREADS");
  for (std::size_t i = 0; i < a.configs.size(); ++i) EXPECT_EQ(a.configs[i].test_scores, b.configs[i].test_scores);
}

TEST(RunSweep, TestLabelsNeverInfluenceScores) {
  const auto f = synth_corpus(small_spec(1.0));
  const auto split = split_dev_test(f, 0.25, 13);
  const std::set<std::string> test(split.test_subjects.begin(), split.test_subjects.end());
  auto poisoned = f;
  for (auto& r : poisoned) {
    if (test.count(r.subject_id)) r.label = 1 - r.label;
  }
  const auto a = run_sweep(f, split, small_grid(), {13});
  const auto b = run_sweep(poisoned, split, small_grid(), {13});
  for (std::size_t i = 0; i < a.configs.size(); ++i) {
    EXPECT_EQ(a.configs[i].test_scores, b.configs[i].test_scores);
    EXPECT_EQ(a.configs[i].cv_score, b.configs[i].cv_score);
  }
}

TEST(RunSweep, LeakageRejected) {
  const auto f = synth_corpus(small_spec(1.0));
  auto split = split_dev_test(f, 0.25, 13);
  split.test_subjects.push_back(split.dev_subjects.front());
  EXPECT_THROW(run_sweep(f, split, small_grid(), {13}), IntegrityError);
}

TEST(RunSweep, MissingBlockRejected) {
  const auto f = synth_corpus(small_spec(1.0));
  auto grid = small_grid();
  grid.bundles = {"A+V"};
  EXPECT_THROW(run_sweep(f, split_dev_test(f, 0.25, 13), grid, {13}), ContractError);
}

TEST(RunSweep, FeedsLeaderboardAudit) {
  const auto f = synth_corpus(small_spec(1.5));
  const auto r = run_sweep(f, split_dev_test(f, 0.3, 13), small_grid(), {13});
  const auto m = build_config_matrix(r.test_predictions());
  EXPECT_EQ(m.config_ids.size(), 8u);
  const auto audit = leaderboard_audit(r.cv_scores(), m, 200, 13);
  EXPECT_EQ(audit.association.n_configs, 8u);
}

TEST(SplitBundle, Parses) {
  EXPECT_EQ(split_bundle("T+A+V"), (std::vector<std::string>{"T", "A", "V"}));
  EXPECT_THROW(split_bundle("T++A"), ContractError);
  EXPECT_THROW(split_bundle("+T"), ContractError);
}

}  // namespace
}  // namespace bg
