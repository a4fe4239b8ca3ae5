#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

namespace xfit {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int id = 0;
    while (nodes[id].feature >= 0)
      id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left
                                                       : nodes[id].right;
    return nodes[id].value;
  }
};

struct BoostedFit {
  double base = 0.0;
  double learning_rate = 0.1;
  bool logistic_loss = false;
  std::vector<Tree> trees;

  // raw additive score; the logistic link is applied by the caller
  double score_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    double s = base;
    for (const auto& t : trees) s += learning_rate * t.predict_row(x);
    return s;
  }
};

namespace detail {

// Greedy depth-limited regression tree on gradient/hessian vectors.
// Split search scans presorted feature orders filtered by node membership;
// equal-gain ties resolve to the smaller threshold and lower feature index.
class TreeGrower {
 public:
  TreeGrower(const Eigen::MatrixXd& X,
             const std::vector<std::vector<int>>& order, int max_depth,
             double leaf_clamp)
      : X_(X), order_(order), max_depth_(max_depth), leaf_clamp_(leaf_clamp) {}

  Tree grow(const Eigen::VectorXd& grad, const Eigen::VectorXd& hess,
            std::vector<int>& leaf_of_row) {
    grad_ = &grad;
    hess_ = &hess;
    tree_.nodes.clear();
    member_.assign(X_.rows(), 0);
    std::vector<int> all(X_.rows());
    for (int i = 0; i < X_.rows(); ++i) all[i] = i;
    build(all, 0, leaf_of_row);
    return std::move(tree_);
  }

 private:
  int build(const std::vector<int>& rows, int depth, std::vector<int>& leaf_of_row) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});

    double gsum = 0, hsum = 0;
    for (int i : rows) {
      gsum += (*grad_)[i];
      hsum += (*hess_)[i];
    }

    int best_feature = -1;
    double best_threshold = 0, best_gain = 1e-12;
    if (depth < max_depth_ && rows.size() >= 2) {
      for (int i : rows) member_[i] = 1;
      const double parent = gsum * gsum / std::max(hsum, 1e-12);
      for (int f = 0; f < X_.cols(); ++f) {
        // gather node members in ascending feature order
        scratch_.clear();
        for (int idx : order_[f])
          if (member_[idx]) scratch_.push_back(idx);
        double gl = 0, hl = 0;
        for (std::size_t pos = 0; pos + 1 < scratch_.size(); ++pos) {
          const int i = scratch_[pos];
          gl += (*grad_)[i];
          hl += (*hess_)[i];
          const double v = X_(i, f), vnext = X_(scratch_[pos + 1], f);
          if (v == vnext) continue;  // no boundary between equal values
          const double gr = gsum - gl, hr = hsum - hl;
          const double gain = gl * gl / std::max(hl, 1e-12) +
                              gr * gr / std::max(hr, 1e-12) - parent;
          if (gain > best_gain) {  // strict: first (smallest) threshold wins ties
            best_gain = gain;
            best_feature = f;
            best_threshold = (v + vnext) / 2.0;
          }
        }
      }
      for (int i : rows) member_[i] = 0;
    }

    if (best_feature < 0) {
      auto& node = tree_.nodes[id];
      node.feature = -1;
      double v = gsum / std::max(hsum, 1e-12);
      node.value = std::clamp(v, -leaf_clamp_, leaf_clamp_);
      for (int i : rows) leaf_of_row[i] = id;
      return id;
    }

    std::vector<int> left, right;
    for (int i : rows)
      (X_(i, best_feature) <= best_threshold ? left : right).push_back(i);
    const int l = build(left, depth + 1, leaf_of_row);
    const int r = build(right, depth + 1, leaf_of_row);
    auto& node = tree_.nodes[id];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& X_;
  const std::vector<std::vector<int>>& order_;
  int max_depth_;
  double leaf_clamp_;
  Tree tree_;
  const Eigen::VectorXd* grad_ = nullptr;
  const Eigen::VectorXd* hess_ = nullptr;
  std::vector<char> member_;
  std::vector<int> scratch_;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

// Gradient boosting with squared-error (regression) or logistic loss (binary).
// Leaf values are Newton steps clamped to [-4, 4].
inline BoostedFit fit_boosted_trees(const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& y, bool logistic,
                                    int rounds, int max_depth,
                                    double learning_rate) {
  const int n = static_cast<int>(X.rows());
  BoostedFit fit;
  fit.learning_rate = learning_rate;
  fit.logistic_loss = logistic;
  if (logistic) {
    double pbar = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
    fit.base = std::clamp(std::log(pbar / (1.0 - pbar)), -4.0, 4.0);
  } else {
    fit.base = y.mean();
  }

  std::vector<std::vector<int>> order(X.cols());
  for (int f = 0; f < X.cols(); ++f) {
    order[f].resize(n);
    for (int i = 0; i < n; ++i) order[f][i] = i;
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&X, f](int a, int b) { return X(a, f) < X(b, f); });
  }

  Eigen::VectorXd F = Eigen::VectorXd::Constant(n, fit.base);
  Eigen::VectorXd grad(n), hess(n);
  std::vector<int> leaf_of_row(n);
  const double leaf_clamp = logistic ? 4.0 : std::numeric_limits<double>::infinity();
  detail::TreeGrower grower(X, order, max_depth, leaf_clamp);

  fit.trees.reserve(rounds);
  for (int round = 0; round < rounds; ++round) {
    if (logistic) {
      for (int i = 0; i < n; ++i) {
        const double p = detail::sigmoid(F[i]);
        grad[i] = y[i] - p;
        hess[i] = std::max(p * (1.0 - p), 1e-12);
      }
    } else {
      grad = y - F;
      hess.setOnes();
    }
    Tree tree = grower.grow(grad, hess, leaf_of_row);
    for (int i = 0; i < n; ++i)
      F[i] += learning_rate * tree.nodes[leaf_of_row[i]].value;
    fit.trees.push_back(std::move(tree));
  }
  return fit;
}

}  // namespace xfit
