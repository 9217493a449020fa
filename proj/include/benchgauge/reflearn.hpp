#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "benchgauge/error.hpp"
#include "benchgauge/rng.hpp"

// Reference learner: PCA projection followed by L2-regularised logistic
// regression, plus the stratified fold generator the sweep uses.

namespace bg {

struct PcaModel {
  Eigen::VectorXd mean;
  /// k x d, one orthonormal principal direction per row.
  Eigen::MatrixXd components;
  /// Variance along each component, non-increasing.
  Eigen::VectorXd explained_variance;

  Eigen::Index k() const noexcept { return components.rows(); }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()) * components.transpose();
  }
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& z) const {
    return (z * components).rowwise() + mean.transpose();
  }
};

/// Top-k principal directions of the mean-centred data from a symmetric
/// eigen-decomposition of the sample covariance (divisor n-1). Each
/// component is signed so its largest-magnitude entry is positive.
inline PcaModel pca_fit(const Eigen::MatrixXd& x, Eigen::Index k) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw ContractError("PCA needs at least 2 rows");
  if (k < 1 || k > std::min(n - 1, d)) {
    throw ContractError("PCA k=" + std::to_string(k) + " outside [1, " + std::to_string(std::min(n - 1, d)) + "]");
  }
  if (!x.allFinite()) throw SchemaError("PCA input contains NaN or Inf");

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ContractError("PCA eigen-decomposition failed");

  // Eigenvalues come back ascending.
  model.components.resize(k, d);
  model.explained_variance.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index src = d - 1 - i;
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.components.row(i) = v.transpose();
    model.explained_variance(i) = std::max(0.0, solver.eigenvalues()(src));
  }
  return model;
}

struct LogregModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double c = 1.0;
  int iterations = 0;
  double gradient_norm = 0.0;

  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const {
    const Eigen::VectorXd z = (x * weights).array() + bias;
    return z.unaryExpr([](double t) { return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); });
  }
};

namespace detail {

inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

inline double sigmoid(double t) {
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

inline void check_logreg_inputs(const Eigen::MatrixXd& x, std::span<const int> y, double c) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw SchemaError("logreg: rows and labels differ");
  if (!(c > 0.0) || !std::isfinite(c)) throw ContractError("logreg: c must be positive");
  for (int v : y) {
    if (v != 0 && v != 1) throw SchemaError("logreg: labels must be binary");
  }
}

}  // namespace detail

/// sum_i log(1 + exp(-s_i (w.x_i + b))) + |w|^2 / (2c), with s_i = +-1.
inline double logreg_objective(const Eigen::MatrixXd& x, std::span<const int> y, double c,
                               const Eigen::VectorXd& w, double b) {
  const Eigen::VectorXd z = (x * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    loss += detail::softplus(-s * z(i));
  }
  return loss + w.squaredNorm() / (2.0 * c);
}

/// Gradient of logreg_objective; the last entry is d/db.
inline Eigen::VectorXd logreg_gradient(const Eigen::MatrixXd& x, std::span<const int> y, double c,
                                       const Eigen::VectorXd& w, double b) {
  const Eigen::VectorXd z = (x * w).array() + b;
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    r(i) = -s * detail::sigmoid(-s * z(i));
  }
  Eigen::VectorXd g(w.size() + 1);
  g.head(w.size()) = x.transpose() * r + w / c;
  g(w.size()) = r.sum();
  return g;
}

struct LogregOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 1000;
  /// Objective value after each accepted iteration, starting with the
  /// initial point, when non-null.
  std::vector<double>* trace = nullptr;
};

/// Damped Newton with Armijo backtracking. Stops at gradient norm <= tol,
/// after max_iterations, or when no step decreases the objective further.
inline LogregModel logreg_train(const Eigen::MatrixXd& x, std::span<const int> y, double c,
                                const LogregOptions& options = {}) {
  detail::check_logreg_inputs(x, y, c);
  const auto pos = std::count(y.begin(), y.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size())) throw ContractError("logreg: both classes required");

  const Eigen::Index d = x.cols();
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd xa(n, d + 1);
  xa.leftCols(d) = x;
  xa.col(d).setOnes();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  auto objective = [&](const Eigen::VectorXd& t) { return logreg_objective(x, y, c, t.head(d), t(d)); };
  double f = objective(theta);
  if (options.trace) options.trace->assign(1, f);

  LogregModel model;
  model.c = c;
  int it = 0;
  Eigen::VectorXd g = logreg_gradient(x, y, c, theta.head(d), theta(d));
  for (; it < options.max_iterations && g.norm() > options.gradient_tolerance; ++it) {
    const Eigen::VectorXd z = xa * theta;
    Eigen::VectorXd curvature(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = detail::sigmoid(z(i));
      curvature(i) = p * (1.0 - p);
    }
    Eigen::MatrixXd h = xa.transpose() * curvature.asDiagonal() * xa;
    h.diagonal().head(d).array() += 1.0 / c;
    // Tiny ridge keeps the bias direction solvable when curvature vanishes.
    h.diagonal().array() += 1e-12;
    Eigen::VectorXd step = -h.ldlt().solve(g);
    if (!step.allFinite() || step.dot(g) >= 0.0) step = -g;

    double t = 1.0;
    bool accepted = false;
    const double slope = step.dot(g);
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Eigen::VectorXd candidate = theta + t * step;
      const double fc = objective(candidate);
      if (fc < f && fc <= f + 1e-4 * t * slope) {
        theta = candidate;
        f = fc;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (options.trace) options.trace->push_back(f);
    g = logreg_gradient(x, y, c, theta.head(d), theta(d));
  }
  model.weights = theta.head(d);
  model.bias = theta(d);
  model.iterations = it;
  model.gradient_norm = g.norm();
  if (!model.weights.allFinite() || !std::isfinite(model.bias)) throw ContractError("logreg: non-finite parameters");
  return model;
}

/// Fold index in [0, k) per row. Within each class rows are shuffled with
/// a seeded stream and dealt round-robin; the second class continues the
/// deal where the first stopped so fold totals stay balanced too.
inline std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ContractError("stratified folds need k >= 2");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw SchemaError("stratified folds: labels must be binary");
    by_class[labels[i]].push_back(i);
  }
  for (int cls = 0; cls < 2; ++cls) {
    if (by_class[cls].size() < static_cast<std::size_t>(k)) {
      throw ContractError("class " + std::to_string(cls) + " has " + std::to_string(by_class[cls].size()) +
                          " members, fewer than k=" + std::to_string(k));
    }
  }
  std::vector<int> fold(labels.size(), -1);
  std::size_t dealt = 0;
  for (int cls = 0; cls < 2; ++cls) {
    auto& idx = by_class[cls];
    Rng rng(seed, static_cast<std::uint64_t>(cls));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    for (const std::size_t row : idx) fold[row] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
  }
  return fold;
}

/// A fitted model mapping feature rows to positive-class probabilities.
using ProbabilityModel = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// Pluggable learner: fit on (X, y) and return a probability model. Only the
/// PCA + logistic regression family ships; other learners plug in here.
using Learner = std::function<ProbabilityModel(const Eigen::MatrixXd&, std::span<const int>)>;

struct LearnerSpec {
  std::string name;
  Learner fit;
};

struct LogregPcaParams {
  Eigen::Index pca_dims = 0;
  double c = 1.0;
};

/// Parses "logreg_pca{K}_c{C}". C digits with a leading zero read as a
/// decimal fraction: c01 -> 0.1, c001 -> 0.01, c1 -> 1, c10 -> 10.
inline LogregPcaParams parse_logreg_name(std::string_view name) {
  constexpr std::string_view prefix = "logreg_pca";
  auto fail = [&] { return ContractError("learner '" + std::string(name) + "' is not of the form logreg_pca{K}_c{C}"); };
  if (name.substr(0, prefix.size()) != prefix) throw fail();
  const std::string_view rest = name.substr(prefix.size());
  const auto sep = rest.find("_c");
  if (sep == std::string_view::npos || sep == 0 || sep + 2 >= rest.size()) throw fail();
  const std::string_view kdigits = rest.substr(0, sep);
  const std::string_view cdigits = rest.substr(sep + 2);
  auto all_digits = [](std::string_view s) { return std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; }); };
  if (!all_digits(kdigits) || !all_digits(cdigits)) throw fail();
  LogregPcaParams p;
  p.pca_dims = std::stol(std::string(kdigits));
  if (p.pca_dims < 1) throw fail();
  if (cdigits.size() > 1 && cdigits.front() == '0') {
    p.c = std::stod("0." + std::string(cdigits.substr(1)));
  } else {
    p.c = std::stod(std::string(cdigits));
  }
  if (!(p.c > 0.0)) throw fail();
  return p;
}

/// PCA to min(K, n-1, d) components, then logistic regression with C.
inline LearnerSpec make_logreg_pca_learner(std::string name) {
  const LogregPcaParams params = parse_logreg_name(name);
  Learner fit = [params](const Eigen::MatrixXd& x, std::span<const int> y) -> ProbabilityModel {
    const Eigen::Index k = std::min({params.pca_dims, x.rows() - 1, x.cols()});
    auto pca = std::make_shared<PcaModel>(pca_fit(x, k));
    auto lr = std::make_shared<LogregModel>(logreg_train(pca->transform(x), y, params.c));
    return [pca, lr](const Eigen::MatrixXd& rows) { return lr->predict_proba(pca->transform(rows)); };
  };
  return {std::move(name), std::move(fit)};
}

inline LearnerSpec make_learner(const std::string& name) {
  if (name.rfind("logreg_pca", 0) == 0) return make_logreg_pca_learner(name);
  throw ContractError("learner '" + name + "' is not built in; supply it through the Learner interface");
}

}  // namespace bg
