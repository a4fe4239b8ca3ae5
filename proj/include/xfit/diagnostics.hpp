#pragma once

// Empirical-process diagnostics: the gap between the eval-fold average and the
// population mean of (fitted score - reference score), its zero-mean behavior,
// how its variance scales with sample size, and the combinatorial upper bound
// implied by the number of correlated pairs in the dependence structure.

#include <xfit/dgp.hpp>
#include <xfit/estimate.hpp>
#include <xfit/io.hpp>
#include <xfit/parallel.hpp>
#include <xfit/split.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace xfit {

// EP value of fitted scores against reference scores on one eval fold:
// mean over the fold of (fitted - reference), centered by mu_delta, the
// estimate of the population mean of the same difference from an independent
// oracle sample of n_oracle units. Sign convention: fitted minus reference;
// negate for the reference-minus-fitted display.
inline double ep_term(const Eigen::VectorXd& fitted, const Eigen::VectorXd& reference,
                      double mu_delta, std::size_t n_oracle) {
  if (fitted.size() == 0 || fitted.size() != reference.size())
    throw std::invalid_argument("ep_term: score vectors misaligned");
  if (n_oracle < 10 * static_cast<std::size_t>(fitted.size()))
    throw std::invalid_argument(
        "ep_term: oracle sample must be at least 10x the eval fold");
  return (fitted - reference).mean() - mu_delta;
}

// Upper bound on Var(mean of n correlated scores) when every per-unit score
// variance is at most v: only the diagonal plus the correlated (ordered)
// pairs can contribute, each by at most v (Cauchy-Schwarz).
inline double variance_bound(const DependenceStructure& structure, double v) {
  if (v < 0) throw std::invalid_argument("variance_bound: v must be >= 0");
  const double n = static_cast<double>(structure.n());
  return (2.0 * static_cast<double>(structure.correlated_pairs()) + n) / (n * n) * v;
}

struct EpConfig {
  DgpSpec dgp;
  std::vector<std::size_t> sizes;  // n / T / N=M per DgpSpec semantics
  int replicates = 200;
  std::string scheme = "as_independent";
  LearnerSpec outcome;
  LearnerSpec propensity;
  bool oracle_nuisance = false;  // inject the dgp oracle as the fitted side
  Estimand estimand = Estimand::ate;
  std::size_t n_oracle = 0;  // 0: max(1e5, 20 * units)
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const {
    dgp.validate();
    if (sizes.empty()) throw std::invalid_argument("ep: sizes must be non-empty");
    for (std::size_t i = 1; i < sizes.size(); ++i)
      if (sizes[i] <= sizes[i - 1])
        throw std::invalid_argument("ep: sizes must be strictly increasing");
    if (replicates < 100)
      throw std::invalid_argument("ep: need at least 100 replicates");
    const auto kind = dgp.name == "network" ? DependenceStructure::Kind::network
                      : dgp.name == "time_series"
                          ? DependenceStructure::Kind::time_series
                          : DependenceStructure::Kind::two_way;
    if (!scheme_compatible(scheme, kind))
      throw std::invalid_argument("ep: scheme " + scheme +
                                  " is incompatible with dgp " + dgp.name);
    if (!oracle_nuisance) {
      outcome.validate();
      propensity.validate();
    }
    if (workers < 1) throw std::invalid_argument("ep: workers must be >= 1");
  }
};

struct EpReplicate {
  std::size_t size = 0;
  int replicate = 0;
  double ep = 0;
  double ep_scaled = 0;  // sqrt(units) * ep
  std::size_t n_oracle = 0;
};

struct EpSizeSummary {
  std::size_t size = 0;
  std::size_t units = 0;  // total units in a dataset of this size
  int replicates = 0;
  double mean_n_eval = 0;
  std::size_t n_oracle = 0;
  double mean_ep = 0;
  double se_mean = 0;   // sqrt(var_ep / replicates)
  double var_ep = 0;    // sample variance across replicates
  double var_scaled = 0;  // sample variance of sqrt(units) * ep
  double mean_correlated_pairs = 0;  // exact for deterministic structures
  double mean_delta_var = 0;  // avg within-fold sample variance of the score gap
  double max_delta_var = 0;
};

struct EPReport {
  nlohmann::ordered_json dgp;
  std::string scheme;
  std::string rn = "sqrt_n";  // scaling convention behind ep_scaled
  std::vector<EpReplicate> replicates;  // ordered by (size, replicate)
  std::vector<EpSizeSummary> sizes;
  bool slope_defined = false;  // needs >= 3 sizes, all with positive variance
  double slope = 0;            // log var_ep regressed on log units

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["dgp"] = dgp;
    j["scheme"] = scheme;
    j["r_n"] = rn;
    j["sign_convention"] = "fitted_minus_reference";
    auto sizes_json = nlohmann::ordered_json::array();
    for (const auto& s : sizes) {
      sizes_json.push_back({{"size", s.size},
                            {"units", s.units},
                            {"replicates", s.replicates},
                            {"mean_n_eval", s.mean_n_eval},
                            {"n_oracle", s.n_oracle},
                            {"mean_ep", s.mean_ep},
                            {"mean_ep_reversed", -s.mean_ep},
                            {"se_mean", s.se_mean},
                            {"var_ep", s.var_ep},
                            {"var_scaled", s.var_scaled},
                            {"mean_correlated_pairs", s.mean_correlated_pairs},
                            {"mean_delta_var", s.mean_delta_var},
                            {"max_delta_var", s.max_delta_var}});
    }
    j["sizes"] = std::move(sizes_json);
    j["slope_defined"] = slope_defined;
    if (slope_defined) j["slope"] = slope;
    auto reps = nlohmann::ordered_json::array();
    for (const auto& r : replicates)
      reps.push_back({{"size", r.size},
                      {"replicate", r.replicate},
                      {"ep", r.ep},
                      {"ep_scaled", r.ep_scaled},
                      {"n_oracle", r.n_oracle}});
    j["replicates"] = std::move(reps);
    return j;
  }

  std::string csv() const {
    std::string out = "size,replicate,ep,ep_scaled,n_oracle\n";
    for (const auto& r : replicates)
      out += std::to_string(r.size) + "," + std::to_string(r.replicate) + "," +
             fmt_g(r.ep) + "," + fmt_g(r.ep_scaled) + "," +
             std::to_string(r.n_oracle) + "\n";
    return out;
  }
};

namespace detail {

struct EpRepStats {
  double ep = 0;
  double delta_var = 0;
  std::size_t n_oracle = 0;
  std::size_t n_eval = 0;
  std::size_t units = 0;
  unsigned long long pairs = 0;
};

// The (features, A, Y) design the nuisance models see, plus the map from
// feature rows back to original unit indices for oracle lookups. For series
// data this is the lagged design with the first `start` time points dropped.
struct EpDesign {
  Eigen::MatrixXd features;
  Eigen::VectorXd a_col, y_col;
  Eigen::Index start = 0;  // first scoreable original index
};

inline EpDesign ep_design(const SimulatedDataset& ds) {
  EpDesign d;
  if (ds.structure.kind() == DependenceStructure::Kind::time_series) {
    const int T = static_cast<int>(ds.table.n());
    const int w = lag_window(T);
    d.start = std::max<Eigen::Index>(w, ds.oracle.first_valid);
    Eigen::MatrixXd joint(T, ds.table.p() + 1);
    joint.leftCols(ds.table.p()) = ds.table.covariates;
    joint.col(ds.table.p()) = ds.table.treatment;
    // feature row r describes time r + w
    d.features = build_lagged_features(joint, w);
    d.a_col = ds.table.treatment.tail(T - w);
    d.y_col = ds.table.outcome.tail(T - w);
  } else {
    d.features = ds.table.covariates;
    d.a_col = ds.table.treatment;
    d.y_col = ds.table.outcome;
  }
  return d;
}

// original unit index of feature row r
inline Eigen::Index ep_orig(const SimulatedDataset& ds, Eigen::Index r) {
  if (ds.structure.kind() == DependenceStructure::Kind::time_series)
    return r + lag_window(static_cast<int>(ds.table.n()));
  return r;
}

// EP of one dataset: fold 0 of a 2-fold split of `scheme` gives the train and
// eval halves; `seed` drives the split and the fresh oracle draws only.
inline EpRepStats ep_for_dataset(const SimulatedDataset& ds, const DgpSpec& dgp,
                                 std::size_t size, const std::string& scheme,
                                 bool oracle_nuisance, const LearnerSpec& outcome,
                                 const LearnerSpec& propensity, Estimand estimand,
                                 std::size_t n_oracle_cfg, std::uint64_t seed) {
  const auto plan = make_split(scheme, ds.structure, 2, derive_seed(seed, 0, 0, 0));
  const auto d = ep_design(ds);
  const Eigen::Index row_offset = ep_orig(ds, 0);  // 0, or w for series

  auto to_rows = [&](const std::vector<int>& units) {
    std::vector<Eigen::Index> rows;
    rows.reserve(units.size());
    for (int u : units)
      if (u >= d.start) rows.push_back(u - row_offset);
    return rows;
  };
  const auto train_rows = to_rows(plan.folds[0].train);
  const auto eval_rows = to_rows(plan.folds[0].eval);
  if (train_rows.empty())
    throw EmptyTrainingFold("ep: training half empty after the lag drop");
  if (eval_rows.empty())
    throw std::invalid_argument("ep: eval half empty after the lag drop");

  const Eigen::Index n2 = static_cast<Eigen::Index>(eval_rows.size());
  const std::size_t units = static_cast<std::size_t>(ds.table.n());
  const std::size_t n_target =
      n_oracle_cfg > 0 ? n_oracle_cfg : std::max<std::size_t>(100000, 20 * units);

  Eigen::VectorXd f_hat(n2), f_ref(n2);
  for (Eigen::Index r = 0; r < n2; ++r)
    f_ref[r] = oracle_score(ds, ep_orig(ds, eval_rows[r]), estimand);

  double mu_delta = 0;
  std::size_t n_actual = n_target;
  if (oracle_nuisance) {
    // the fitted side IS the reference: the gap is identically zero as a
    // function, so any oracle sample averages it to exactly zero
    f_hat = f_ref;
  } else {
    const auto outcome_model =
        fit_outcome_joint(d.features, d.a_col, d.y_col, train_rows, outcome);
    const auto propensity_model =
        fit_propensity(d.features, d.a_col, train_rows, propensity);

    auto fitted_scores = [&](const EpDesign& dd,
                             const std::vector<Eigen::Index>& rows) {
      Eigen::MatrixXd F(rows.size(), dd.features.cols());
      for (std::size_t r = 0; r < rows.size(); ++r)
        F.row(static_cast<Eigen::Index>(r)) = dd.features.row(rows[r]);
      Eigen::VectorXd m0, m1;
      query_outcome_joint(outcome_model, F, m0, m1);
      const Eigen::VectorXd g1 = propensity_model.predict(F);
      Eigen::VectorXd s(m0.size());
      for (Eigen::Index r = 0; r < s.size(); ++r)
        s[r] = estimand_score(estimand, m0[r], m1[r], g1[r],
                              dd.a_col[rows[static_cast<std::size_t>(r)]],
                              dd.y_col[rows[static_cast<std::size_t>(r)]]);
      return s;
    };

    f_hat = fitted_scores(d, eval_rows);

    // fresh same-size datasets pooled until the oracle sample target is met
    const std::size_t scoreable = static_cast<std::size_t>(
        d.features.rows() - (d.start - row_offset));
    const std::size_t k_ds = (n_target + scoreable - 1) / scoreable;
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < k_ds; ++k) {
      const auto fds = generate(dgp, size, derive_seed(seed, 1 + k, 0, 0));
      const auto fd = ep_design(fds);
      std::vector<Eigen::Index> all_rows;
      all_rows.reserve(scoreable);
      for (Eigen::Index r = fd.start - row_offset; r < fd.features.rows(); ++r)
        all_rows.push_back(r);
      const Eigen::VectorXd fh = fitted_scores(fd, all_rows);
      for (std::size_t r = 0; r < all_rows.size(); ++r) {
        sum += fh[static_cast<Eigen::Index>(r)] -
               oracle_score(fds, ep_orig(fds, all_rows[r]), estimand);
        ++count;
      }
    }
    mu_delta = sum / static_cast<double>(count);
    n_actual = count;
  }

  EpRepStats out;
  out.ep = ep_term(f_hat, f_ref, mu_delta, n_actual);
  const Eigen::VectorXd delta = f_hat - f_ref;
  if (n2 >= 2) {
    const double dm = delta.mean();
    out.delta_var = (delta.array() - dm).square().sum() / static_cast<double>(n2 - 1);
  }
  out.n_oracle = n_actual;
  out.n_eval = static_cast<std::size_t>(n2);
  out.units = units;
  out.pairs = ds.structure.correlated_pairs();
  return out;
}

inline EpRepStats ep_one_replicate(const EpConfig& cfg, std::size_t size_idx,
                                   int rep) {
  const std::size_t size = cfg.sizes[size_idx];
  const auto ds = generate(cfg.dgp, size, derive_seed(cfg.seed, size_idx, rep, 0));
  return ep_for_dataset(ds, cfg.dgp, size, cfg.scheme, cfg.oracle_nuisance,
                        cfg.outcome, cfg.propensity, cfg.estimand, cfg.n_oracle,
                        derive_seed(cfg.seed, size_idx, rep, 1));
}

}  // namespace detail

// For each size and replicate: generate data, take fold 0 of a 2-fold split
// of the configured scheme as (train, eval), fit the nuisances on the train
// half, and measure the empirical-process term on the eval half against the
// dgp oracle. Replicates are independent; execution order never matters.
inline EPReport ep_suite(const EpConfig& cfg) {
  cfg.validate();
  const std::size_t n_sizes = cfg.sizes.size();
  const std::size_t R = static_cast<std::size_t>(cfg.replicates);
  std::vector<detail::EpRepStats> slots(n_sizes * R);

  parallel_for(slots.size(), cfg.workers, [&](std::size_t i) {
    const std::size_t size_idx = i / R;
    const int rep = static_cast<int>(i % R);
    try {
      slots[i] = detail::ep_one_replicate(cfg, size_idx, rep);
    } catch (const std::exception& e) {
      throw ReplicateError(cfg.sizes[size_idx], rep, e.what());
    }
  });

  EPReport report;
  report.dgp = cfg.dgp.to_json();
  report.scheme = cfg.scheme;
  report.replicates.reserve(slots.size());

  std::vector<double> log_units, log_var;
  for (std::size_t s = 0; s < n_sizes; ++s) {
    EpSizeSummary sum;
    sum.size = cfg.sizes[s];
    sum.replicates = cfg.replicates;
    const std::size_t base = s * R;
    sum.units = slots[base].units;
    sum.n_oracle = slots[base].n_oracle;
    const double root_units = std::sqrt(static_cast<double>(sum.units));

    double ep_sum = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& st = slots[base + r];
      report.replicates.push_back({sum.size, static_cast<int>(r), st.ep,
                                   root_units * st.ep, st.n_oracle});
      ep_sum += st.ep;
      sum.mean_n_eval += static_cast<double>(st.n_eval);
      sum.mean_correlated_pairs += static_cast<double>(st.pairs);
      sum.mean_delta_var += st.delta_var;
      sum.max_delta_var = std::max(sum.max_delta_var, st.delta_var);
    }
    sum.mean_ep = ep_sum / static_cast<double>(R);
    sum.mean_n_eval /= static_cast<double>(R);
    sum.mean_correlated_pairs /= static_cast<double>(R);
    sum.mean_delta_var /= static_cast<double>(R);
    for (std::size_t r = 0; r < R; ++r) {
      const double dev = slots[base + r].ep - sum.mean_ep;
      sum.var_ep += dev * dev;
    }
    sum.var_ep /= static_cast<double>(R - 1);
    sum.var_scaled = static_cast<double>(sum.units) * sum.var_ep;
    sum.se_mean = std::sqrt(sum.var_ep / static_cast<double>(R));
    report.sizes.push_back(sum);

    if (sum.var_ep > 0) {
      log_units.push_back(std::log(static_cast<double>(sum.units)));
      log_var.push_back(std::log(sum.var_ep));
    }
  }

  if (n_sizes >= 3 && log_units.size() == n_sizes) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n_sizes; ++i) {
      mx += log_units[i];
      my += log_var[i];
    }
    mx /= static_cast<double>(n_sizes);
    my /= static_cast<double>(n_sizes);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n_sizes; ++i) {
      sxx += (log_units[i] - mx) * (log_units[i] - mx);
      sxy += (log_units[i] - mx) * (log_var[i] - my);
    }
    report.slope_defined = sxx > 0;
    if (report.slope_defined) report.slope = sxy / sxx;
  }
  return report;
}

}  // namespace xfit
