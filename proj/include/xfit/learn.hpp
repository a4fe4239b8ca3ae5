#pragma once

#include <json.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <variant>

#include "xfit/boost_trees.hpp"
#include "xfit/errors.hpp"
#include "xfit/mars.hpp"

namespace xfit {

enum class Task { regression, binary };

enum class LearnerKind {
  linear_glm,
  logistic_glm,
  boosted_trees,
  mars_lite,
  interpolator_1nn,
};

inline std::string learner_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::linear_glm: return "linear_glm";
    case LearnerKind::logistic_glm: return "logistic_glm";
    case LearnerKind::boosted_trees: return "boosted_trees";
    case LearnerKind::mars_lite: return "mars_lite";
    case LearnerKind::interpolator_1nn: return "interpolator_1nn";
  }
  return "?";
}

inline LearnerKind learner_from_name(const std::string& s) {
  if (s == "linear_glm") return LearnerKind::linear_glm;
  if (s == "logistic_glm") return LearnerKind::logistic_glm;
  if (s == "boosted_trees") return LearnerKind::boosted_trees;
  if (s == "mars_lite") return LearnerKind::mars_lite;
  if (s == "interpolator_1nn") return LearnerKind::interpolator_1nn;
  throw std::invalid_argument("unknown learner kind '" + s + "'");
}

struct LearnerSpec {
  LearnerKind kind = LearnerKind::linear_glm;
  int rounds = 100;           // boosted_trees
  int max_depth = 2;          // boosted_trees
  double learning_rate = 0.1; // boosted_trees
  int max_basis = 20;         // mars_lite (further capped at n/5)
  double ridge = 1e-6;        // linear/logistic penalty
  int max_iter = 100;         // IRLS cap

  void validate() const {
    if (rounds < 1 || max_depth < 1 || max_iter < 1)
      throw std::invalid_argument("LearnerSpec: counts must be positive");
    if (learning_rate <= 0 || learning_rate > 1)
      throw std::invalid_argument("LearnerSpec: learning_rate must be in (0,1]");
    if (max_basis < 1) throw std::invalid_argument("LearnerSpec: max_basis must be positive");
    if (ridge <= 0) throw std::invalid_argument("LearnerSpec: ridge must be positive");
  }
};

constexpr double kPropensityClip = 0.01;

struct LinearFit {
  Eigen::VectorXd beta;  // [intercept, coefficients]
};

struct LogisticFit {
  Eigen::VectorXd beta;
  int iterations = 0;
};

struct KnnFit {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

class FittedModel {
 public:
  LearnerKind kind = LearnerKind::linear_glm;
  Task task = Task::regression;
  Eigen::Index width = 0;
  std::variant<LinearFit, LogisticFit, BoostedFit, MarsFit, KnnFit> impl;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    if (X.cols() != width)
      throw std::invalid_argument("predict: feature width " + std::to_string(X.cols()) +
                                  " != training width " + std::to_string(width));
    Eigen::VectorXd out(X.rows());
    if (const auto* lin = std::get_if<LinearFit>(&impl)) {
      out = Eigen::VectorXd::Constant(X.rows(), lin->beta[0]) +
            X * lin->beta.tail(width);
    } else if (const auto* lgt = std::get_if<LogisticFit>(&impl)) {
      Eigen::VectorXd z = Eigen::VectorXd::Constant(X.rows(), lgt->beta[0]) +
                          X * lgt->beta.tail(width);
      for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = detail::sigmoid(z[i]);
    } else if (const auto* bst = std::get_if<BoostedFit>(&impl)) {
      for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = bst->score_row(X.row(i));
      if (bst->logistic_loss)
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = detail::sigmoid(out[i]);
    } else if (const auto* mars = std::get_if<MarsFit>(&impl)) {
      for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = mars->predict_row(X.row(i));
    } else {
      const auto& knn = std::get<KnnFit>(impl);
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::Index best = 0;
        double best_d = (knn.X.row(0) - X.row(i)).squaredNorm();
        for (Eigen::Index j = 1; j < knn.X.rows(); ++j) {
          const double d = (knn.X.row(j) - X.row(i)).squaredNorm();
          if (d < best_d) {  // strict: ties keep the lowest index
            best_d = d;
            best = j;
          }
        }
        out[i] = knn.y[best];
      }
    }
    if (task == Task::binary)
      out = out.cwiseMax(kPropensityClip).cwiseMin(1.0 - kPropensityClip);
    if (!out.allFinite()) throw std::runtime_error("predict: non-finite prediction");
    return out;
  }

  // debugging aid, also pinned by the determinism tests
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = learner_name(kind);
    j["task"] = task == Task::binary ? "binary" : "regression";
    j["width"] = width;
    if (const auto* lin = std::get_if<LinearFit>(&impl)) {
      j["beta"] = std::vector<double>(lin->beta.data(), lin->beta.data() + lin->beta.size());
    } else if (const auto* lgt = std::get_if<LogisticFit>(&impl)) {
      j["beta"] = std::vector<double>(lgt->beta.data(), lgt->beta.data() + lgt->beta.size());
      j["iterations"] = lgt->iterations;
    } else if (const auto* bst = std::get_if<BoostedFit>(&impl)) {
      j["base"] = bst->base;
      j["learning_rate"] = bst->learning_rate;
      j["logistic_loss"] = bst->logistic_loss;
      auto trees = nlohmann::ordered_json::array();
      for (const auto& t : bst->trees) {
        auto nodes = nlohmann::ordered_json::array();
        for (const auto& nd : t.nodes)
          nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.value});
        trees.push_back(nodes);
      }
      j["trees"] = trees;
    } else if (const auto* mars = std::get_if<MarsFit>(&impl)) {
      auto terms = nlohmann::ordered_json::array();
      for (const auto& h : mars->basis) terms.push_back({h.feature, h.knot, h.sign});
      j["basis"] = terms;
      j["beta"] = std::vector<double>(mars->beta.data(), mars->beta.data() + mars->beta.size());
    } else {
      const auto& knn = std::get<KnnFit>(impl);
      j["n_train"] = knn.X.rows();
    }
    return j;
  }
};

namespace detail {

inline LinearFit fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           double ridge) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::MatrixXd D(n, p + 1);
  D.col(0).setOnes();
  D.rightCols(p) = X;
  Eigen::MatrixXd G = D.transpose() * D;
  G.diagonal().array() += ridge;
  return {G.ldlt().solve(D.transpose() * y)};
}

// penalized Bernoulli log-likelihood
inline double logistic_pll(const Eigen::MatrixXd& D, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& beta, double ridge) {
  Eigen::VectorXd z = D * beta;
  double ll = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // y*z - log(1 + e^z), computed stably
    const double zi = z[i];
    ll += y[i] * zi - (zi > 30 ? zi : std::log1p(std::exp(zi)));
  }
  return ll - 0.5 * ridge * beta.squaredNorm();
}

// IRLS with ridge and step halving; monotone in the penalized log-likelihood.
inline LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                double ridge, int max_iter) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::MatrixXd D(n, p + 1);
  D.col(0).setOnes();
  D.rightCols(p) = X;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  double pll = logistic_pll(D, y, beta, ridge);
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd z = D * beta;
    Eigen::VectorXd prob(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(z[i]);
      w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-10);
    }
    Eigen::VectorXd grad = D.transpose() * (y - prob) - ridge * beta;
    Eigen::MatrixXd H = D.transpose() * w.asDiagonal() * D;
    H.diagonal().array() += ridge;
    Eigen::VectorXd delta = H.ldlt().solve(grad);

    double step = 1.0;
    double pll_new = logistic_pll(D, y, beta + step * delta, ridge);
    while (pll_new < pll - 1e-12 && step > 1e-8) {
      step /= 2;
      pll_new = logistic_pll(D, y, beta + step * delta, ridge);
    }
    if (pll_new < pll - 1e-12) return {beta, it};  // cannot improve further
    beta += step * delta;
    const bool converged =
        (step * delta).lpNorm<Eigen::Infinity>() < 1e-8 ||
        std::abs(pll_new - pll) < 1e-12 * (1.0 + std::abs(pll));
    pll = pll_new;
    if (converged) return {beta, it};
  }
  throw IrlsDivergence("logistic_glm: IRLS failed to converge within " +
                           std::to_string(max_iter) + " iterations",
                       max_iter);
}

}  // namespace detail

inline FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y, Task task) {
  spec.validate();
  if (X.rows() < 2) throw std::invalid_argument("fit: need at least 2 rows");
  if (X.cols() < 1) throw std::invalid_argument("fit: need at least 1 feature");
  if (X.rows() != y.size()) throw std::invalid_argument("fit: X/y length mismatch");
  if (!X.allFinite() || !y.allFinite())
    throw std::invalid_argument("fit: non-finite inputs");
  if (task == Task::binary)
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y[i] != 0.0 && y[i] != 1.0)
        throw std::invalid_argument("fit: binary task requires 0/1 targets");
  if (spec.kind == LearnerKind::logistic_glm && task != Task::binary)
    throw std::invalid_argument("fit: logistic_glm requires a binary task");

  FittedModel model;
  model.kind = spec.kind;
  model.task = task;
  model.width = X.cols();
  switch (spec.kind) {
    case LearnerKind::linear_glm:
      model.impl = detail::fit_ridge(X, y, spec.ridge);
      break;
    case LearnerKind::logistic_glm:
      model.impl = detail::fit_logistic(X, y, spec.ridge, spec.max_iter);
      break;
    case LearnerKind::boosted_trees:
      model.impl = fit_boosted_trees(X, y, task == Task::binary, spec.rounds,
                                     spec.max_depth, spec.learning_rate);
      break;
    case LearnerKind::mars_lite:
      model.impl = fit_mars(X, y, spec.max_basis);
      break;
    case LearnerKind::interpolator_1nn:
      model.impl = KnnFit{X, y};
      break;
  }
  return model;
}

// ceil(T^(1/3)) without floating-point ceil hazards
inline int lag_window(std::size_t T) {
  int w = 1;
  while (static_cast<long long>(w) * w * w < static_cast<long long>(T)) ++w;
  return w;
}

// Row t-w (for t in [w, T)) holds the series values at t-1, ..., t-w,
// grouped lag-major: [lag-1 block of p columns][lag-2 block]...
// Aligns with targets at times w..T-1 (the first w points are dropped).
inline Eigen::MatrixXd build_lagged_features(const Eigen::MatrixXd& series, int w) {
  const Eigen::Index T = series.rows(), p = series.cols();
  if (w < 1) throw std::invalid_argument("build_lagged_features: window must be >= 1");
  if (T <= w) throw std::invalid_argument("build_lagged_features: series shorter than window");
  Eigen::MatrixXd out(T - w, p * w);
  for (Eigen::Index t = w; t < T; ++t)
    for (int d = 1; d <= w; ++d)
      out.block(t - w, static_cast<Eigen::Index>(d - 1) * p, 1, p) = series.row(t - d);
  return out;
}

}  // namespace xfit
