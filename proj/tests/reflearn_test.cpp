#include "benchgauge/reflearn.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace bg {
namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double scale = 1.0) {
  oracle::Lcg rng(seed);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = scale * rng.normal() * (1.0 + 0.3 * static_cast<double>(j));
  return x;
}

std::vector<int> noisy_labels(const Eigen::MatrixXd& x, std::uint64_t seed) {
  oracle::Lcg rng(seed);
  std::vector<int> y(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + 0.8 * rng.normal() > 0 ? 1 : 0;
  return y;
}

TEST(Logreg, GradientMatchesCentralDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = random_matrix(40, 6, seed);
    const auto y = noisy_labels(x, seed + 100);
    oracle::Lcg rng(seed);
    Eigen::VectorXd w(6);
    for (auto& v : w) v = rng.normal();
    const double b = rng.normal();
    const double c = 0.1 + rng.uniform();
    const auto g = logreg_gradient(x, y, c, w, b);
    const double h = 1e-5;
    for (Eigen::Index j = 0; j <= 6; ++j) {
      Eigen::VectorXd wp = w, wm = w;
      double bp = b, bm = b;
      if (j < 6) {
        wp(j) += h;
        wm(j) -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd = (logreg_objective(x, y, c, wp, bp) - logreg_objective(x, y, c, wm, bm)) / (2 * h);
      EXPECT_LE(std::abs(fd - g(j)), 1e-6 * std::max(1.0, std::abs(g(j)))) << "seed " << seed << " coord " << j;
    }
  }
}

TEST(Logreg, ObjectiveKnownValue) {
  Eigen::MatrixXd x(2, 1);
  x << 1.0, -1.0;
  const std::vector<int> y{1, 0};
  Eigen::VectorXd w(1);
  w << 2.0;
  // Two margins of 2 and |w|^2/(2c) = 4/2.
  EXPECT_NEAR(logreg_objective(x, y, 1.0, w, 0.0), 2 * std::log1p(std::exp(-2.0)) + 2.0, 1e-14);
}

TEST(Logreg, TrainingConvergesAndObjectiveNeverRises) {
  const auto x = random_matrix(120, 5, 7);
  const auto y = noisy_labels(x, 8);
  std::vector<double> trace;
  LogregOptions opt;
  opt.trace = &trace;
  const auto m = logreg_train(x, y, 1.0, opt);
  EXPECT_LE(m.gradient_norm, 1e-6);
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LT(trace[i], trace[i - 1]);
  EXPECT_GT(m.weights(0), 0.0);
}

TEST(Logreg, StrongerRegularisationShrinksWeights) {
  const auto x = random_matrix(100, 4, 3);
  const auto y = noisy_labels(x, 4);
  double prev = std::numeric_limits<double>::infinity();
  for (double c : {100.0, 1.0, 0.1, 0.01, 0.001}) {
    const double norm = logreg_train(x, y, c).weights.norm();
    EXPECT_LT(norm, prev) << "c " << c;
    prev = norm;
  }
}

TEST(Logreg, SymmetricDataGivesZeroBias) {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  const std::vector<int> y{0, 0, 1, 0, 1, 1};
  const auto m = logreg_train(x, y, 1.0);
  EXPECT_NEAR(m.bias, 0.0, 1e-8);
  const auto p = m.predict_proba(x);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(p(i) + p(5 - i), 1.0, 1e-8);
}

TEST(Logreg, Errors) {
  const auto x = random_matrix(4, 2, 1);
  EXPECT_THROW(logreg_train(x, std::vector<int>{1, 1, 1, 1}, 1.0), ContractError);
  EXPECT_THROW(logreg_train(x, std::vector<int>{1, 0, 1}, 1.0), SchemaError);
  EXPECT_THROW(logreg_train(x, std::vector<int>{1, 0, 1, 2}, 1.0), SchemaError);
  EXPECT_THROW(logreg_train(x, std::vector<int>{1, 0, 1, 0}, 0.0), ContractError);
}

std::vector<std::vector<double>> covariance(const Eigen::MatrixXd& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / static_cast<double>(n);
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        c[a][b] += (x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) - mean[a]) *
                   (x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) - mean[b]) / static_cast<double>(n - 1);
  return c;
}

TEST(Pca, EigenvaluesMatchJacobiOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto x = random_matrix(50, 7, seed);
    const auto model = pca_fit(x, 7);
    const auto expected = oracle::jacobi_eigenvalues(covariance(x));
    for (Eigen::Index i = 0; i < 7; ++i) {
      EXPECT_NEAR(model.explained_variance(i), expected[static_cast<std::size_t>(i)], 1e-10);
    }
  }
}

TEST(Pca, ComponentsOrthonormalAndSigned) {
  const auto x = random_matrix(80, 10, 11);
  const auto model = pca_fit(x, 6);
  const Eigen::MatrixXd gram = model.components * model.components.transpose();
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index i = 0; i < 6; ++i) {
    Eigen::Index arg = 0;
    model.components.row(i).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(model.components(i, arg), 0.0);
    if (i > 0) {
      EXPECT_LE(model.explained_variance(i), model.explained_variance(i - 1));
    }
  }
}

TEST(Pca, FullRankReconstructionIsIdentity) {
  const auto x = random_matrix(30, 8, 12, 5.0);
  const auto model = pca_fit(x, 8);
  const Eigen::MatrixXd back = model.inverse_transform(model.transform(x));
  EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, ProjectedVarianceMatchesEigenvalues) {
  const auto x = random_matrix(200, 5, 13);
  const auto model = pca_fit(x, 3);
  const Eigen::MatrixXd z = model.transform(x);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double var = (z.col(i).array() - z.col(i).mean()).square().sum() / 199.0;
    EXPECT_NEAR(var, model.explained_variance(i), 1e-9);
  }
}

TEST(Pca, Errors) {
  const auto x = random_matrix(5, 8, 1);
  EXPECT_THROW(pca_fit(x, 5), ContractError);
  EXPECT_THROW(pca_fit(x, 0), ContractError);
  EXPECT_NO_THROW(pca_fit(x, 4));
}

TEST(StratifiedFolds, BalancedAndDeterministic) {
  std::vector<int> y;
  for (int i = 0; i < 53; ++i) y.push_back(i % 4 == 0 ? 1 : 0);
  const auto a = stratified_folds(y, 5, 13);
  EXPECT_EQ(a, stratified_folds(y, 5, 13));
  EXPECT_NE(a, stratified_folds(y, 5, 14));
  std::vector<int> total(5, 0), pos(5, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    ASSERT_GE(a[i], 0);
    ASSERT_LT(a[i], 5);
    ++total[static_cast<std::size_t>(a[i])];
    pos[static_cast<std::size_t>(a[i])] += y[i];
  }
  const auto [pmin, pmax] = std::minmax_element(pos.begin(), pos.end());
  const auto [tmin, tmax] = std::minmax_element(total.begin(), total.end());
  EXPECT_LE(*pmax - *pmin, 1);
  EXPECT_LE(*tmax - *tmin, 1);
}

TEST(StratifiedFolds, SmallClassRejected) {
  const std::vector<int> y{1, 1, 0, 0, 0, 0, 0, 0};
  try {
    stratified_folds(y, 3, 1);
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(LearnerNames, Parse) {
  EXPECT_EQ(parse_logreg_name("logreg_pca64_c01").pca_dims, 64);
  EXPECT_DOUBLE_EQ(parse_logreg_name("logreg_pca64_c01").c, 0.1);
  EXPECT_DOUBLE_EQ(parse_logreg_name("logreg_pca128_c1").c, 1.0);
  EXPECT_DOUBLE_EQ(parse_logreg_name("logreg_pca8_c001").c, 0.01);
  EXPECT_DOUBLE_EQ(parse_logreg_name("logreg_pca8_c10").c, 10.0);
  EXPECT_THROW(parse_logreg_name("logreg_pcaX_c1"), ContractError);
  EXPECT_THROW(parse_logreg_name("logreg_pca8"), ContractError);
  EXPECT_THROW(make_learner("svm_rbf"), ContractError);
}

TEST(LearnerNames, ClampsPcaDimensions) {
  const auto x = random_matrix(20, 6, 5);
  const auto y = noisy_labels(x, 6);
  const auto learner = make_learner("logreg_pca128_c1");
  const auto model = learner.fit(x, y);
  const Eigen::VectorXd p = model(x);
  ASSERT_EQ(p.size(), 20);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    EXPECT_GE(p(i), 0.0);
    EXPECT_LE(p(i), 1.0);
  }
}

}  // namespace
}  // namespace bg
