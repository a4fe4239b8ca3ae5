#pragma once

#include <json.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "xfit/data.hpp"
#include "xfit/dependence.hpp"
#include "xfit/estimate.hpp"
#include "xfit/rng.hpp"

namespace xfit {

// True estimand values plus evaluators for the true nuisance functions,
// indexed by original unit (or time) position in the generated table.
struct OracleHandle {
  double ate = 0;
  double cf_mean_1 = 0;
  double cf_mean_0 = 0;
  OracleNuisance nuisance;
  Eigen::Index first_valid = 0;  // series: nuisances undefined before this index

  double psi(Estimand e) const {
    switch (e) {
      case Estimand::cf_mean_0: return cf_mean_0;
      case Estimand::cf_mean_1: return cf_mean_1;
      case Estimand::ate: return ate;
    }
    throw std::logic_error("OracleHandle::psi: unhandled estimand");
  }
};

struct SimulatedDataset {
  ObservationTable table;
  // placeholder until a generator installs the real structure
  DependenceStructure structure = DependenceStructure::independent(1);
  OracleHandle oracle;
  std::string dgp;                // two_way_clustered | network | time_series
  nlohmann::ordered_json params;  // generator parameters including the seed
};

namespace detail {

inline double sigma2_beta(int a, int b) {
  const double ab = static_cast<double>(a + b);
  return a * b / (ab * ab * (ab + 1.0));
}

// Nodes and weights integrating f against the standard normal density
// (Golub-Welsch on the probabilists' Hermite recurrence).
inline const std::pair<Eigen::VectorXd, Eigen::VectorXd>& gauss_hermite_20() {
  static const auto cached = [] {
    const int K = 20;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(K, K);
    for (int k = 1; k < K; ++k) {
      const double b = std::sqrt(static_cast<double>(k));
      J(k, k - 1) = b;
      J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Eigen::VectorXd nodes = es.eigenvalues();
    Eigen::VectorXd weights = es.eigenvectors().row(0).transpose().array().square();
    return std::make_pair(std::move(nodes), std::move(weights));
  }();
  return cached;
}

// Outcome noise with one shared draw per unit plus a sum over neighbors, so
// that Var(Y | A, W) = sigma2 * (I + G G^T) with sigma2 = Var(2(Beta(6,6)-0.5)).
inline void add_network_noise(Rng& rng, const std::vector<std::vector<int>>& adj,
                              Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd delta(n), eps(n);
  for (Eigen::Index i = 0; i < n; ++i) delta[i] = 2.0 * (rng.beta_int(6, 6) - 0.5);
  for (Eigen::Index i = 0; i < n; ++i) eps[i] = 2.0 * (rng.beta_int(6, 6) - 0.5);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] += delta[i];
    for (int j : adj[static_cast<std::size_t>(i)]) y[i] += eps[j];
  }
}

// Treatment-assignment linear index of the clustered DGP, without latents.
inline double clustered_assignment_index(const Eigen::RowVectorXd& L) {
  return -0.4 + 0.8 * L[0] - 0.7 * L[1] * L[1] + 0.5 * std::sin(L[2]) +
         0.4 * L[0] * L[1] - 0.5 * L[3] * L[4];
}

// m(a, L): every latent effect in the outcome equation is independent of
// (L, A), so the conditional mean drops them exactly.
inline double clustered_outcome_mean(const Eigen::RowVectorXd& L, double a) {
  const double base = 0.5 * L[0] - 0.4 * L[1] + 0.3 * L[2] * L[2] -
                      0.5 * std::sin(L[3]) + 0.4 * L[0] * L[1];
  const double tau =
      1.0 + 0.5 * std::sin(L[0]) - 0.5 * std::sin(L[1]) + 0.3 * L[2] * L[3];
  return base + a * tau;
}

// g(1 | L) = E[ sigma((c(L) + 0.6 gamma - 0.6 nu)/5) ] over N(0,1) latents.
inline double clustered_propensity(const Eigen::RowVectorXd& L) {
  const auto& [nodes, weights] = gauss_hermite_20();
  const double c = clustered_assignment_index(L);
  double g = 0;
  for (Eigen::Index i = 0; i < nodes.size(); ++i)
    for (Eigen::Index j = 0; j < nodes.size(); ++j)
      g += weights[i] * weights[j] *
           sigmoid((c + 0.6 * nodes[i] - 0.6 * nodes[j]) / 5.0);
  return g;
}

inline double network_mu(double w1, double w2, double w3) {
  return 5.0 * (w1 > 0.4) - 2.0 * (w1 > 0.6) + 3.0 * (w1 > 0.7) +
         (2.0 * w3 - 1.0) * w2 + 1.0;
}

}  // namespace detail

// N x M cells with row/column random effects in the covariate, treatment, and
// outcome channels; cells sharing a row or column are dependent.
inline SimulatedDataset gen_two_way(int N, int M, std::uint64_t seed) {
  if (N < 2 || M < 2) throw std::invalid_argument("gen_two_way: need N, M >= 2");
  Rng rng(seed);

  auto draw_effects = [&](int count) {
    Eigen::VectorXd v(count);
    for (int i = 0; i < count; ++i) v[i] = rng.normal();
    return v;
  };
  const Eigen::VectorXd gL = draw_effects(N), nL = draw_effects(M);
  const Eigen::VectorXd gA = draw_effects(N), nA = draw_effects(M);
  const Eigen::VectorXd gY = draw_effects(N), nY = draw_effects(M);
  const Eigen::VectorXd gT = draw_effects(N), nT = draw_effects(M);

  const Eigen::Index n = static_cast<Eigen::Index>(N) * M;
  SimulatedDataset ds;
  ds.table.covariates.resize(n, 5);
  ds.table.covariate_names = {"L1", "L2", "L3", "L4", "L5"};
  ds.table.treatment.resize(n);
  ds.table.outcome.resize(n);
  ds.table.unit_ids.resize(static_cast<std::size_t>(n));
  std::vector<int> row_id(static_cast<std::size_t>(n)), col_id(static_cast<std::size_t>(n));

  const double sd_half = std::sqrt(0.5), sd_two = std::sqrt(2.0);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < M; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * M + j;
      const double L1 = rng.normal(gL[i] + nL[j], 1.0);
      const double L2 = rng.normal(0.0, 1.0);
      const double L3 = rng.normal(std::sin(L1) + 0.3 * L2, sd_half);
      const double L4 = rng.normal((L1 > 0 ? L2 : 0.0), sd_half);
      const double L5 = rng.normal(1.0, sd_two);
      ds.table.covariates.row(r) << L1, L2, L3, L4, L5;

      const double lin = detail::clustered_assignment_index(ds.table.covariates.row(r)) +
                         0.6 * gA[i] - 0.6 * nA[j];
      const double A = rng.bernoulli(detail::sigmoid(lin / 5.0));
      const double tau = 1.0 + 0.5 * std::sin(L1) - 0.5 * std::sin(L2) +
                         0.3 * L3 * L4 + 0.4 * gT[i] * nT[j];
      const double mean = 0.5 * L1 - 0.4 * L2 + 0.3 * L3 * L3 - 0.5 * std::sin(L4) +
                          0.4 * L1 * L2 + 0.6 * gY[i] + 0.6 * nY[j] + A * tau;
      ds.table.treatment[r] = A;
      ds.table.outcome[r] = rng.normal(mean, 1.0);
      ds.table.unit_ids[static_cast<std::size_t>(r)] =
          "r" + std::to_string(i) + "c" + std::to_string(j);
      row_id[static_cast<std::size_t>(r)] = i;
      col_id[static_cast<std::size_t>(r)] = j;
    }
  }
  ds.structure = DependenceStructure::two_way(std::move(row_id), std::move(col_id));

  // ATE = 1 + 0.3 E[L3 L4] = 1 + 0.3 * 0.3 * P(L1 > 0) * E[L2^2] = 1.045;
  // every other interaction term is mean-zero by independence and symmetry.
  ds.oracle.ate = 1.0 + 0.3 * 0.3 * 0.5;
  // E[Y(0)] = 0.3 E[L3^2]; E[L3^2] = E[sin^2 L1] + 0.09 + 0.5 with L1 ~ N(0,3),
  // and E[sin^2 L1] = (1 - exp(-2 Var(L1)))/2.
  ds.oracle.cf_mean_0 = 0.3 * (0.5 * (1.0 - std::exp(-6.0)) + 0.59);
  ds.oracle.cf_mean_1 = ds.oracle.cf_mean_0 + ds.oracle.ate;

  auto L = std::make_shared<Eigen::MatrixXd>(ds.table.covariates);
  ds.oracle.nuisance.m = [L](Eigen::Index i, double a) {
    return detail::clustered_outcome_mean(L->row(i), a);
  };
  ds.oracle.nuisance.g1 = [L](Eigen::Index i) {
    return detail::clustered_propensity(L->row(i));
  };

  ds.dgp = "two_way_clustered";
  ds.params = {{"dgp", ds.dgp}, {"N", N}, {"M", M}, {"seed", seed}};
  return ds;
}

// Erdos-Renyi network with unit covariates W and outcome noise summed over
// neighbors; edge_prob < 0 requests the default 3/n.
inline SimulatedDataset gen_network(int n, double edge_prob, std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("gen_network: need n >= 10");
  const double p = edge_prob < 0 ? 3.0 / n : edge_prob;
  if (p > 1.0) throw std::invalid_argument("gen_network: edge probability above 1");
  Rng rng(seed);

  std::vector<std::pair<int, int>> edges;
  if (p >= 1.0) {
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) edges.emplace_back(u, v);
  } else if (p > 0.0) {
    // geometric gaps over the n(n-1)/2 upper-triangle cells in row-major order
    const double logq = std::log1p(-p);
    const unsigned long long total =
        static_cast<unsigned long long>(n) * (n - 1) / 2;
    unsigned long long row_start = 0;
    int u = 0;
    long long pos = -1;
    while (true) {
      const unsigned long long skip =
          static_cast<unsigned long long>(std::log(rng.uniform_pos()) / logq);
      pos += static_cast<long long>(skip) + 1;
      if (pos < 0 || static_cast<unsigned long long>(pos) >= total) break;
      while (static_cast<unsigned long long>(pos) >=
             row_start + static_cast<unsigned long long>(n - 1 - u)) {
        row_start += static_cast<unsigned long long>(n - 1 - u);
        ++u;
      }
      const int v = u + 1 + static_cast<int>(static_cast<unsigned long long>(pos) - row_start);
      edges.emplace_back(u, v);
    }
  }

  SimulatedDataset ds;
  ds.structure = DependenceStructure::network(static_cast<std::size_t>(n), edges);
  ds.table.covariates.resize(n, 3);
  ds.table.covariate_names = {"W1", "W2", "W3"};
  ds.table.treatment.resize(n);
  ds.table.outcome.resize(n);
  ds.table.unit_ids.resize(static_cast<std::size_t>(n));

  auto mu = std::make_shared<Eigen::VectorXd>(n);
  for (int i = 0; i < n; ++i) {
    const double w1 = rng.beta_int(2, 2);
    const double w2 = rng.poisson(10.0);
    const double w3 = rng.bernoulli(0.3);
    ds.table.covariates.row(i) << w1, w2, w3;
    (*mu)[i] = detail::network_mu(w1, w2, w3);
    const double A = rng.bernoulli(detail::sigmoid((*mu)[i] / 20.0 - 1.0));
    ds.table.treatment[i] = A;
    ds.table.outcome[i] = (2.0 * A + 1.0) * (*mu)[i];
    ds.table.unit_ids[static_cast<std::size_t>(i)] = "u" + std::to_string(i);
  }
  detail::add_network_noise(rng, ds.structure.adjacency(), ds.table.outcome);

  // E[mu] from the Beta(2,2) CDF 3x^2 - 2x^3 and E[(2 W3 - 1) W2] = -4.
  auto beta22_tail = [](double x) { return 1.0 - (3.0 * x * x - 2.0 * x * x * x); };
  const double e_mu = 5.0 * beta22_tail(0.4) - 2.0 * beta22_tail(0.6) +
                      3.0 * beta22_tail(0.7) + (2.0 * 0.3 - 1.0) * 10.0 + 1.0;
  ds.oracle.ate = 2.0 * e_mu;
  ds.oracle.cf_mean_1 = 3.0 * e_mu;
  ds.oracle.cf_mean_0 = e_mu;
  ds.oracle.nuisance.m = [mu](Eigen::Index i, double a) {
    return (2.0 * a + 1.0) * (*mu)[i];
  };
  ds.oracle.nuisance.g1 = [mu](Eigen::Index i) {
    return detail::sigmoid((*mu)[i] / 20.0 - 1.0);
  };

  ds.dgp = "network";
  ds.params = {{"dgp", ds.dgp}, {"n", n}, {"edge_prob", p}, {"seed", seed}};
  return ds;
}

inline SimulatedDataset gen_network(int n, std::uint64_t seed) {
  return gen_network(n, -1.0, seed);
}

// m-dependent series: treatment and outcome at time t draw on the previous m
// time points; the first m points follow the stated initialization regime.
inline SimulatedDataset gen_timeseries(int T, int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("gen_timeseries: need m >= 1");
  if (T <= 4 * m) throw std::invalid_argument("gen_timeseries: need T > 4m");
  Rng rng(seed);

  SimulatedDataset ds;
  ds.table.covariates.resize(T, 3);
  ds.table.covariate_names = {"L1", "L2", "L3"};
  ds.table.treatment.resize(T);
  ds.table.outcome.resize(T);
  ds.table.unit_ids.resize(static_cast<std::size_t>(T));

  auto X = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Zero(T));
  auto A = std::make_shared<Eigen::VectorXd>(T);
  for (int t = 0; t < T; ++t) {
    const double l1 = rng.bernoulli(0.5);
    const double l2 = 1.0 + static_cast<double>(rng.below(3));
    const double l3 = rng.bernoulli(0.5);
    ds.table.covariates.row(t) << l1, l2, l3;

    if (t < m) {
      (*A)[t] = rng.bernoulli(0.5);
      ds.table.outcome[t] = 4.0 * (rng.beta_int(2, 2) - 0.5);
    } else {
      double x = 0, a_sum = 0;
      for (int k = t - m; k <= t - 1; ++k) {
        const double w = 0.25 / static_cast<double>(k + m - t + 1);
        x += w * (2.0 * ds.table.covariates(k, 0) + ds.table.covariates(k, 1) -
                  ds.table.covariates(k, 2));
        a_sum += (*A)[k];
      }
      (*X)[t] = x;
      (*A)[t] = rng.bernoulli(detail::sigmoid((x + a_sum - 0.5) / m));
      ds.table.outcome[t] = (*A)[t] + x + 0.3 + 20.0 * (rng.beta_int(2, 2) - 0.5);
    }
    ds.table.treatment[t] = (*A)[t];
    ds.table.unit_ids[static_cast<std::size_t>(t)] = "t" + std::to_string(t);
  }
  ds.structure = DependenceStructure::time_series(static_cast<std::size_t>(T), m);

  ds.oracle.ate = 1.0;  // unit coefficient on A_t in the outcome equation
  double e_x = 0;       // weights cover denominators 1..m, E[2L1 + L2 - L3] = 2.5
  for (int d = 1; d <= m; ++d) e_x += 0.25 / d;
  e_x *= 2.5;
  ds.oracle.cf_mean_0 = e_x + 0.3;
  ds.oracle.cf_mean_1 = e_x + 1.3;
  ds.oracle.first_valid = m;

  const int mm = m;
  ds.oracle.nuisance.m = [X, mm](Eigen::Index t, double a) {
    if (t < mm)
      throw std::invalid_argument("time-series oracle undefined before index m");
    return a + (*X)[t] + 0.3;
  };
  ds.oracle.nuisance.g1 = [X, A, mm](Eigen::Index t) {
    if (t < mm)
      throw std::invalid_argument("time-series oracle undefined before index m");
    double a_sum = 0;
    for (Eigen::Index k = t - mm; k <= t - 1; ++k) a_sum += (*A)[k];
    return detail::sigmoid(((*X)[t] + a_sum - 0.5) / mm);
  };

  ds.dgp = "time_series";
  ds.params = {{"dgp", ds.dgp}, {"T", T}, {"m", m}, {"seed", seed}};
  return ds;
}

inline SimulatedDataset gen_timeseries(int T, std::uint64_t seed) {
  return gen_timeseries(T, 4, seed);
}

// The influence-function value at the true nuisances, f_eta0(X_i).
inline double oracle_score(const SimulatedDataset& ds, Eigen::Index i, Estimand e) {
  const auto& nu = ds.oracle.nuisance;
  if (!nu.m || !nu.g1)
    throw std::invalid_argument("oracle_score: no oracle nuisances for dgp " + ds.dgp);
  if (i < 0 || i >= ds.table.n())
    throw std::invalid_argument("oracle_score: unit index out of range");
  if (i < ds.oracle.first_valid)
    throw std::invalid_argument("oracle_score: oracle undefined at index " +
                                std::to_string(i));
  return estimand_score(e, nu.m(i, 0.0), nu.m(i, 1.0), nu.g1(i), ds.table.treatment[i],
                        ds.table.outcome[i]);
}

// Tag-dispatched generation for config-driven callers. `size` means n for the
// network, T for the series, and N = M for the clustered design (so the unit
// count there is size^2).
struct DgpSpec {
  std::string name = "network";  // two_way_clustered | network | time_series
  double edge_prob = -1.0;       // network only; negative means the 3/n default
  int m = 4;                     // time_series only

  void validate() const {
    if (name != "two_way_clustered" && name != "network" && name != "time_series")
      throw std::invalid_argument("unknown dgp: " + name);
    if (name == "network" && edge_prob > 1.0)
      throw std::invalid_argument("dgp: edge_prob must be <= 1");
    if (name == "time_series" && m < 1)
      throw std::invalid_argument("dgp: m must be >= 1");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j{{"name", name}};
    if (name == "network") j["edge_prob"] = edge_prob;
    if (name == "time_series") j["m"] = m;
    return j;
  }
};

inline SimulatedDataset generate(const DgpSpec& spec, std::size_t size,
                                 std::uint64_t seed) {
  spec.validate();
  if (spec.name == "network")
    return gen_network(size, spec.edge_prob, seed);
  if (spec.name == "time_series")
    return gen_timeseries(static_cast<int>(size), spec.m, seed);
  return gen_two_way(static_cast<int>(size), static_cast<int>(size), seed);
}

}  // namespace xfit
