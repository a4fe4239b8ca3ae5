#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace xfit {

// One hinge term: sign=+1 -> max(0, x_f - knot); sign=-1 -> max(0, knot - x_f).
struct HingeBasis {
  int feature = 0;
  double knot = 0.0;
  int sign = +1;
};

struct MarsFit {
  std::vector<HingeBasis> basis;  // excludes the intercept
  Eigen::VectorXd beta;           // beta[0] = intercept, then one per basis term

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double s = beta[0];
    for (std::size_t b = 0; b < basis.size(); ++b) {
      const auto& h = basis[b];
      const double z = h.sign > 0 ? x[h.feature] - h.knot : h.knot - x[h.feature];
      if (z > 0) s += beta[b + 1] * z;
    }
    return s;
  }
};

namespace detail {

inline Eigen::VectorXd hinge_column(const Eigen::MatrixXd& X, const HingeBasis& h) {
  Eigen::VectorXd col(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double z = h.sign > 0 ? X(i, h.feature) - h.knot : h.knot - X(i, h.feature);
    col[i] = z > 0 ? z : 0.0;
  }
  return col;
}

// least squares with a tiny ridge for rank safety; returns (beta, rss)
inline std::pair<Eigen::VectorXd, double> ls_fit(const Eigen::MatrixXd& D,
                                                 const Eigen::VectorXd& y) {
  const double eps = 1e-8;
  Eigen::MatrixXd G = D.transpose() * D;
  G.diagonal().array() += eps;
  Eigen::VectorXd beta = G.ldlt().solve(D.transpose() * y);
  const double rss = (y - D * beta).squaredNorm();
  return {beta, rss};
}

// GCV with the standard additive-spline penalty (2 extra df per knot pair ->
// effective parameters = 2*cols - 1)
inline double gcv(double rss, double n, double cols) {
  const double c = 2.0 * cols - 1.0;
  if (c >= n) return std::numeric_limits<double>::infinity();
  const double denom = 1.0 - c / n;
  return (rss / n) / (denom * denom);
}

}  // namespace detail

// Forward stagewise hinge-pair selection + GCV backward pruning, additive
// (degree-1) hinges only. Basis count capped at min(max_basis, n/5).
inline MarsFit fit_mars(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        int max_basis) {
  const Eigen::Index n = X.rows(), p = X.cols();
  const int cap = std::min<int>(max_basis, static_cast<int>(n / 5));

  MarsFit out;
  if (cap < 2) {  // intercept-only
    out.beta = Eigen::VectorXd::Constant(1, y.mean());
    return out;
  }

  // candidate knots: up to 20 evenly strided distinct values per feature,
  // excluding the maximum (its upper hinge column is identically zero)
  std::vector<std::vector<double>> knots(p);
  for (Eigen::Index f = 0; f < p; ++f) {
    std::vector<double> vals(n);
    for (Eigen::Index i = 0; i < n; ++i) vals[i] = X(i, f);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    if (vals.size() < 2) continue;
    const std::size_t usable = vals.size() - 1;
    const std::size_t stride = std::max<std::size_t>(1, usable / 20);
    for (std::size_t i = 0; i < usable; i += stride) knots[f].push_back(vals[i]);
  }

  // forward pass
  Eigen::MatrixXd D = Eigen::MatrixXd::Ones(n, 1);
  std::vector<HingeBasis> basis;
  auto [beta, rss] = detail::ls_fit(D, y);
  Eigen::VectorXd resid = y - D * beta;
  const double rss0 = rss;

  while (static_cast<int>(basis.size()) + 2 <= cap) {
    const Eigen::Index B = D.cols();
    Eigen::MatrixXd G = D.transpose() * D;
    G.diagonal().array() += 1e-8;
    Eigen::LDLT<Eigen::MatrixXd> chol(G);

    double best_gain = rss0 * 1e-6 + 1e-12;
    int best_f = -1;
    double best_knot = 0;
    for (Eigen::Index f = 0; f < p; ++f) {
      for (double t : knots[f]) {
        Eigen::MatrixXd Z(n, 2);
        Z.col(0) = detail::hinge_column(X, {static_cast<int>(f), t, +1});
        Z.col(1) = detail::hinge_column(X, {static_cast<int>(f), t, -1});
        Eigen::MatrixXd A = D.transpose() * Z;            // B x 2
        Eigen::Vector2d c = Z.transpose() * resid;
        Eigen::Matrix2d S = Z.transpose() * Z - A.transpose() * chol.solve(A);
        S.diagonal().array() += 1e-10;
        const double det = S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
        if (det <= 1e-12 || S(0, 0) <= 0 || S(1, 1) <= 0) continue;
        const Eigen::Vector2d sol = S.inverse() * c;
        const double gain = c.dot(sol);
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_knot = t;
        }
      }
    }
    if (best_f < 0) break;

    D.conservativeResize(Eigen::NoChange, B + 2);
    D.col(B) = detail::hinge_column(X, {best_f, best_knot, +1});
    D.col(B + 1) = detail::hinge_column(X, {best_f, best_knot, -1});
    basis.push_back({best_f, best_knot, +1});
    basis.push_back({best_f, best_knot, -1});
    std::tie(beta, rss) = detail::ls_fit(D, y);
    resid = y - D * beta;
  }

  // backward pruning by GCV over nested deletions; keep the global winner
  std::vector<int> active(basis.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = static_cast<int>(i);

  auto rss_of = [&](const std::vector<int>& terms) {
    Eigen::MatrixXd Ds(n, terms.size() + 1);
    Ds.col(0).setOnes();
    for (std::size_t j = 0; j < terms.size(); ++j)
      Ds.col(j + 1) = D.col(terms[j] + 1);
    return detail::ls_fit(Ds, y).second;
  };

  std::vector<int> best_terms = active;
  double best_gcv = detail::gcv(rss, static_cast<double>(n),
                                static_cast<double>(active.size() + 1));
  while (!active.empty()) {
    double step_gcv = std::numeric_limits<double>::infinity();
    std::size_t drop = 0;
    for (std::size_t j = 0; j < active.size(); ++j) {
      std::vector<int> trial = active;
      trial.erase(trial.begin() + j);
      const double g = detail::gcv(rss_of(trial), static_cast<double>(n),
                                   static_cast<double>(trial.size() + 1));
      if (g < step_gcv) {
        step_gcv = g;
        drop = j;
      }
    }
    active.erase(active.begin() + drop);
    if (step_gcv < best_gcv) {
      best_gcv = step_gcv;
      best_terms = active;
    }
  }

  Eigen::MatrixXd Df(n, best_terms.size() + 1);
  Df.col(0).setOnes();
  out.basis.clear();
  for (std::size_t j = 0; j < best_terms.size(); ++j) {
    Df.col(j + 1) = D.col(best_terms[j] + 1);
    out.basis.push_back(basis[best_terms[j]]);
  }
  out.beta = detail::ls_fit(Df, y).first;
  return out;
}

}  // namespace xfit
