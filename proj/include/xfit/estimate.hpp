#pragma once

#include <json.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "xfit/data.hpp"
#include "xfit/dependence.hpp"
#include "xfit/errors.hpp"
#include "xfit/learn.hpp"
#include "xfit/split.hpp"

namespace xfit {

enum class Estimand { cf_mean_0, cf_mean_1, ate };

inline std::string estimand_name(Estimand e) {
  switch (e) {
    case Estimand::cf_mean_0: return "cf_mean_0";
    case Estimand::cf_mean_1: return "cf_mean_1";
    case Estimand::ate: return "ate";
  }
  return "?";
}

inline Estimand estimand_from_name(const std::string& s) {
  if (s == "cf_mean_0") return Estimand::cf_mean_0;
  if (s == "cf_mean_1") return Estimand::cf_mean_1;
  if (s == "ate") return Estimand::ate;
  throw std::invalid_argument("unknown estimand '" + s + "'");
}

enum class VarianceMethod { iid, cluster_robust, network_hac, ts_lag_window };

inline std::string variance_method_name(VarianceMethod m) {
  switch (m) {
    case VarianceMethod::iid: return "iid";
    case VarianceMethod::cluster_robust: return "cluster_robust";
    case VarianceMethod::network_hac: return "network_hac";
    case VarianceMethod::ts_lag_window: return "ts_lag_window";
  }
  return "?";
}

inline VarianceMethod variance_method_from_name(const std::string& s) {
  if (s == "iid") return VarianceMethod::iid;
  if (s == "cluster_robust") return VarianceMethod::cluster_robust;
  if (s == "network_hac") return VarianceMethod::network_hac;
  if (s == "ts_lag_window") return VarianceMethod::ts_lag_window;
  throw std::invalid_argument("unknown variance method '" + s + "'");
}

// True nuisance functions evaluated at original unit indices (time indices for
// series data). Injecting these skips nuisance fitting entirely.
struct OracleNuisance {
  std::function<double(Eigen::Index unit, double a)> m;
  std::function<double(Eigen::Index unit)> g1;
};

using NuisanceSpec = std::variant<LearnerSpec, OracleNuisance>;

// Doubly-robust one-step score for the counterfactual mean at arm a:
// m(a,L) + 1{A=a}/g(a|L) * (Y - m(A,L)).
inline double aipw_score(int a, double m0, double m1, double g1, double A, double Y) {
  if (!(g1 > 0.0 && g1 < 1.0))
    throw std::invalid_argument("aipw_score: propensity must lie strictly in (0,1)");
  const double m_obs = A == 1.0 ? m1 : m0;
  const double m_a = a == 1 ? m1 : m0;
  const double g_a = a == 1 ? g1 : 1.0 - g1;
  const double indicator = (A == 1.0) == (a == 1) ? 1.0 : 0.0;
  return m_a + indicator / g_a * (Y - m_obs);
}

inline double estimand_score(Estimand e, double m0, double m1, double g1, double A,
                             double Y) {
  switch (e) {
    case Estimand::cf_mean_0: return aipw_score(0, m0, m1, g1, A, Y);
    case Estimand::cf_mean_1: return aipw_score(1, m0, m1, g1, A, Y);
    case Estimand::ate:
      return aipw_score(1, m0, m1, g1, A, Y) - aipw_score(0, m0, m1, g1, A, Y);
  }
  throw std::logic_error("estimand_score: unhandled estimand");
}

struct VarianceEstimate {
  double sigma2 = 0;  // iid: per-unit variance (n-1 divisor); else Var-hat of the mean
  double se = 0;
  VarianceMethod method = VarianceMethod::iid;
  bool clamped = false;  // dependence-aware estimate was <= 0; iid values substituted
};

// iid: sigma2 = sample variance, se = sqrt(sigma2/n).
// Dependence-aware methods: sigma2 = (1/n^2) * sum of centered score products over
// all correlated ordered pairs plus the diagonal, se = sqrt(sigma2). For the
// time-series structure this is a uniform-weight lag-window sum over lags <= m.
inline VarianceEstimate variance(const Eigen::VectorXd& scores,
                                 const DependenceStructure& structure,
                                 VarianceMethod method) {
  const Eigen::Index n = scores.size();
  if (n < 2) throw std::invalid_argument("variance: need at least 2 scores");
  if (structure.n() != static_cast<std::size_t>(n))
    throw std::invalid_argument("variance: score count does not match structure size");
  if (!scores.allFinite()) throw std::invalid_argument("variance: non-finite scores");

  using Kind = DependenceStructure::Kind;
  const Kind kind = structure.kind();
  switch (method) {
    case VarianceMethod::iid: break;  // any structure: dependence ignored
    case VarianceMethod::cluster_robust:
      if (kind != Kind::one_way && kind != Kind::two_way)
        throw std::invalid_argument("variance: cluster_robust needs a clustered structure");
      break;
    case VarianceMethod::network_hac:
      if (kind != Kind::network)
        throw std::invalid_argument("variance: network_hac needs a network structure");
      break;
    case VarianceMethod::ts_lag_window:
      if (kind != Kind::time_series)
        throw std::invalid_argument("variance: ts_lag_window needs a time-series structure");
      break;
  }

  const Eigen::VectorXd s = scores.array() - scores.mean();
  const double diag = s.squaredNorm();
  VarianceEstimate out;
  out.method = method;
  const double iid_sigma2 = diag / static_cast<double>(n - 1);
  if (method == VarianceMethod::iid) {
    out.sigma2 = iid_sigma2;
    out.se = std::sqrt(out.sigma2 / static_cast<double>(n));
    return out;
  }

  double cross = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j : structure.neighbors(static_cast<int>(i))) cross += s[i] * s[j];
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  out.sigma2 = (diag + cross) / nn;
  if (out.sigma2 > 0) {
    out.se = std::sqrt(out.sigma2);
    return out;
  }
  out.clamped = true;  // small-sample HAC estimates can go non-positive
  out.sigma2 = iid_sigma2;
  out.se = std::sqrt(out.sigma2 / static_cast<double>(n));
  return out;
}

struct FoldSummary {
  int fold = 0;
  Eigen::Index train_size = 0;
  Eigen::Index eval_size = 0;
  std::string outcome_kind;
  std::string propensity_kind;
};

struct ScoreVector {
  Eigen::VectorXd values;           // one score per scored unit, unit-index order
  std::vector<Eigen::Index> units;  // original unit (or time) indices, ascending
};

struct EstimateResult {
  Estimand estimand = Estimand::ate;
  double psi = 0;
  double sigma2 = 0;
  double se = 0;
  double ci_low = 0;
  double ci_high = 0;
  VarianceMethod variance_method = VarianceMethod::iid;
  bool variance_clamped = false;
  std::vector<FoldSummary> folds;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["estimand"] = estimand_name(estimand);
    j["psi"] = psi;
    j["sigma2"] = sigma2;
    j["se"] = se;
    j["ci_low"] = ci_low;
    j["ci_high"] = ci_high;
    j["variance_method"] = variance_method_name(variance_method);
    j["variance_clamped"] = variance_clamped;
    auto folds_json = nlohmann::ordered_json::array();
    for (const auto& f : folds)
      folds_json.push_back({{"fold", f.fold},
                            {"train_size", f.train_size},
                            {"eval_size", f.eval_size},
                            {"outcome", f.outcome_kind},
                            {"propensity", f.propensity_kind}});
    j["folds"] = folds_json;
    return j;
  }
};

struct EstimationOutput {
  EstimateResult result;
  ScoreVector scores;
};

// Learner failures surface with the fold they occurred in.
class FoldError : public std::runtime_error {
 public:
  FoldError(int fold, const std::string& what)
      : std::runtime_error("fold " + std::to_string(fold) + ": " + what), fold(fold) {}
  int fold;
};

namespace detail {

struct NuisanceEval {
  Eigen::VectorXd m0, m1, g1;  // aligned to the eval rows
  std::string outcome_kind, propensity_kind;
};

// Joint-design convention shared by the estimators and the diagnostics: one
// outcome regression fitted on [features | A] and queried at A = 0 and A = 1,
// plus a binary propensity model on the bare features.
inline FittedModel fit_outcome_joint(const Eigen::MatrixXd& features,
                                     const Eigen::VectorXd& a_col,
                                     const Eigen::VectorXd& y_col,
                                     const std::vector<Eigen::Index>& train,
                                     const LearnerSpec& spec) {
  const Eigen::Index p = features.cols();
  const Eigen::Index nt = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd D(nt, p + 1);
  Eigen::VectorXd y(nt);
  for (Eigen::Index r = 0; r < nt; ++r) {
    D.row(r).head(p) = features.row(train[r]);
    D(r, p) = a_col[train[r]];
    y[r] = y_col[train[r]];
  }
  return fit(spec, D, y, Task::regression);
}

inline FittedModel fit_propensity(const Eigen::MatrixXd& features,
                                  const Eigen::VectorXd& a_col,
                                  const std::vector<Eigen::Index>& train,
                                  const LearnerSpec& spec) {
  const Eigen::Index nt = static_cast<Eigen::Index>(train.size());
  Eigen::MatrixXd D(nt, features.cols());
  Eigen::VectorXd a(nt);
  for (Eigen::Index r = 0; r < nt; ++r) {
    D.row(r) = features.row(train[r]);
    a[r] = a_col[train[r]];
  }
  return fit(spec, D, a, Task::binary);
}

inline void query_outcome_joint(const FittedModel& model,
                                const Eigen::MatrixXd& eval_features,
                                Eigen::VectorXd& m0, Eigen::VectorXd& m1) {
  Eigen::MatrixXd Q(eval_features.rows(), eval_features.cols() + 1);
  Q.leftCols(eval_features.cols()) = eval_features;
  Q.col(eval_features.cols()).setZero();
  m0 = model.predict(Q);
  Q.col(eval_features.cols()).setOnes();
  m1 = model.predict(Q);
}

// Fits (or queries the oracle for) both nuisances on one fold. `features` are
// the model inputs (raw covariates, or the lagged design for series data);
// `orig` maps feature rows back to original unit indices for oracle closures.
inline NuisanceEval eval_nuisances(const Eigen::MatrixXd& features,
                                   const Eigen::VectorXd& a_col,
                                   const Eigen::VectorXd& y_col,
                                   const std::vector<Eigen::Index>& orig,
                                   const std::vector<Eigen::Index>& train,
                                   const std::vector<Eigen::Index>& eval,
                                   const NuisanceSpec& outcome_spec,
                                   const NuisanceSpec& propensity_spec) {
  const Eigen::Index p = features.cols();
  const Eigen::Index ne = static_cast<Eigen::Index>(eval.size());
  NuisanceEval out;
  out.m0.resize(ne);
  out.m1.resize(ne);
  out.g1.resize(ne);

  Eigen::MatrixXd eval_features(ne, p);
  for (Eigen::Index r = 0; r < ne; ++r) eval_features.row(r) = features.row(eval[r]);

  if (const auto* spec = std::get_if<LearnerSpec>(&outcome_spec)) {
    const auto model = fit_outcome_joint(features, a_col, y_col, train, *spec);
    query_outcome_joint(model, eval_features, out.m0, out.m1);
    out.outcome_kind = learner_name(spec->kind);
  } else {
    const auto& oracle = std::get<OracleNuisance>(outcome_spec);
    if (!oracle.m) throw std::invalid_argument("oracle outcome nuisance is empty");
    for (Eigen::Index r = 0; r < ne; ++r) {
      out.m0[r] = oracle.m(orig[eval[r]], 0.0);
      out.m1[r] = oracle.m(orig[eval[r]], 1.0);
    }
    out.outcome_kind = "oracle";
  }

  if (const auto* spec = std::get_if<LearnerSpec>(&propensity_spec)) {
    const auto model = fit_propensity(features, a_col, train, *spec);
    out.g1 = model.predict(eval_features);
    out.propensity_kind = learner_name(spec->kind);
  } else {
    const auto& oracle = std::get<OracleNuisance>(propensity_spec);
    if (!oracle.g1) throw std::invalid_argument("oracle propensity nuisance is empty");
    for (Eigen::Index r = 0; r < ne; ++r)
      out.g1[r] = std::clamp(oracle.g1(orig[eval[r]]), kPropensityClip,
                             1.0 - kPropensityClip);
    out.propensity_kind = "oracle";
  }
  return out;
}

// Shared core: score each (train, eval) pair, pool by unit index, summarize.
// For time-series structures the models run on the lagged design and the
// first `w` time points are excluded from both training and scoring.
inline EstimationOutput run_folds(const ObservationTable& table,
                                  const DependenceStructure& structure,
                                  const std::vector<Fold>& folds,
                                  const NuisanceSpec& outcome_spec,
                                  const NuisanceSpec& propensity_spec,
                                  Estimand estimand, VarianceMethod method) {
  table.validate();
  const Eigen::Index n = table.n();
  if (structure.n() != static_cast<std::size_t>(n))
    throw std::invalid_argument("estimate: structure size does not match table");

  const bool series = structure.kind() == DependenceStructure::Kind::time_series;
  Eigen::MatrixXd features;
  Eigen::VectorXd a_col, y_col;
  std::vector<Eigen::Index> orig;
  Eigen::Index offset = 0;  // first scored original index
  if (series) {
    const int w = lag_window(static_cast<std::size_t>(n));
    Eigen::MatrixXd joint(n, table.p() + 1);
    joint.leftCols(table.p()) = table.covariates;
    joint.col(table.p()) = table.treatment;
    features = build_lagged_features(joint, w);
    offset = w;
  } else {
    features = table.covariates;
  }
  const Eigen::Index n_scored = n - offset;
  if (n_scored < 2) throw std::invalid_argument("estimate: too few scorable units");
  a_col = table.treatment.segment(offset, n_scored);
  y_col = table.outcome.segment(offset, n_scored);
  orig.resize(static_cast<std::size_t>(n_scored));
  for (Eigen::Index i = 0; i < n_scored; ++i) orig[static_cast<std::size_t>(i)] = i + offset;

  std::vector<double> pooled(static_cast<std::size_t>(n_scored));
  std::vector<char> seen(static_cast<std::size_t>(n_scored), 0);

  EstimateResult result;
  result.estimand = estimand;
  result.variance_method = method;

  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    // map original unit indices into the (possibly lag-shifted) feature rows
    std::vector<Eigen::Index> train, eval;
    for (int u : folds[fi].train)
      if (u >= offset) train.push_back(u - offset);
    for (int u : folds[fi].eval)
      if (u >= offset) eval.push_back(u - offset);
    if (eval.empty()) continue;
    if (train.empty())
      throw EmptyTrainingFold("estimate: fold " + std::to_string(fi) +
                              " has no usable training units");

    NuisanceEval ne;
    try {
      ne = eval_nuisances(features, a_col, y_col, orig, train, eval, outcome_spec,
                          propensity_spec);
    } catch (const std::invalid_argument&) {
      throw;  // caller-side misuse, not a data-driven learner failure
    } catch (const std::exception& e) {
      throw FoldError(static_cast<int>(fi), e.what());
    }

    for (std::size_t r = 0; r < eval.size(); ++r) {
      const Eigen::Index row = eval[r];
      pooled[static_cast<std::size_t>(row)] =
          estimand_score(estimand, ne.m0[static_cast<Eigen::Index>(r)],
                         ne.m1[static_cast<Eigen::Index>(r)],
                         ne.g1[static_cast<Eigen::Index>(r)], a_col[row], y_col[row]);
      if (seen[static_cast<std::size_t>(row)]++)
        throw std::logic_error("estimate: unit scored twice across folds");
    }

    result.folds.push_back({static_cast<int>(fi), static_cast<Eigen::Index>(train.size()),
                            static_cast<Eigen::Index>(eval.size()), ne.outcome_kind,
                            ne.propensity_kind});
  }

  for (Eigen::Index i = 0; i < n_scored; ++i)
    if (!seen[static_cast<std::size_t>(i)])
      throw std::invalid_argument("estimate: plan does not cover unit " +
                                  std::to_string(i + offset));

  ScoreVector scores;
  scores.values = Eigen::Map<const Eigen::VectorXd>(pooled.data(), n_scored);
  scores.units = orig;

  const DependenceStructure var_structure =
      series ? DependenceStructure::time_series(static_cast<std::size_t>(n_scored),
                                                structure.m_order())
             : structure;
  const VarianceEstimate ve = variance(scores.values, var_structure, method);
  result.psi = scores.values.mean();
  result.sigma2 = ve.sigma2;
  result.se = ve.se;
  result.variance_clamped = ve.clamped;
  result.ci_low = result.psi - 1.96 * result.se;
  result.ci_high = result.psi + 1.96 * result.se;
  return {std::move(result), std::move(scores)};
}

}  // namespace detail

inline EstimationOutput crossfit_estimate(const ObservationTable& table,
                                          const DependenceStructure& structure,
                                          const SplitPlan& plan,
                                          const NuisanceSpec& outcome_spec,
                                          const NuisanceSpec& propensity_spec,
                                          Estimand estimand, VarianceMethod method) {
  if (plan.n != static_cast<std::size_t>(table.n()))
    throw std::invalid_argument("crossfit_estimate: plan covers " +
                                std::to_string(plan.n) + " units but table has " +
                                std::to_string(table.n()));
  plan.validate();
  return detail::run_folds(table, structure, plan.folds, outcome_spec, propensity_spec,
                           estimand, method);
}

// Same scoring but nuisances are fit on all rows and evaluated on those same
// rows: the configuration whose empirical-process bias cross-fitting removes.
inline EstimationOutput nocrossfit_estimate(const ObservationTable& table,
                                            const DependenceStructure& structure,
                                            const NuisanceSpec& outcome_spec,
                                            const NuisanceSpec& propensity_spec,
                                            Estimand estimand, VarianceMethod method) {
  Fold all;
  all.train.resize(static_cast<std::size_t>(table.n()));
  std::iota(all.train.begin(), all.train.end(), 0);
  all.eval = all.train;
  return detail::run_folds(table, structure, {all}, outcome_spec, propensity_spec,
                           estimand, method);
}

}  // namespace xfit
