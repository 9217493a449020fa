// Synthetic corpus -> reference-learner sweep -> leaderboard audit, printed
// as Markdown.

#include <iostream>

#include "benchgauge/benchgauge.hpp"

int main(int argc, char** argv) {
  bg::SynthSpec spec;
  if (argc > 1) spec.seed = std::stoull(argv[1]);
  const auto features = bg::synth_corpus(spec);
  const auto split = bg::split_dev_test(features, 0.25, spec.seed);

  bg::SweepGrid grid;
  grid.learners = {bg::make_learner("logreg_pca64_c01"), bg::make_learner("logreg_pca128_c1")};
  const auto sweep = bg::run_sweep(features, split, grid, bg::default_sweep_seeds());

  const auto audit = bg::leaderboard_audit(sweep.cv_scores(), bg::build_config_matrix(sweep.test_predictions()), 4000, 13);
  std::cout << bg::report::markdown(audit);
  return 0;
}
