#pragma once

// Config-driven Monte Carlo runner: JSON experiment configs, a deterministic
// worker pool over (scheme, size, replicate) tasks, results as CSV with a
// truth sidecar, metric summaries, and self-contained SVG figures.

#include <xfit/diagnostics.hpp>
#include <xfit/svg.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace xfit {

namespace detail {

inline std::string jpath(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline void jcheck_keys(const nlohmann::json& j, const std::string& base,
                        std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) throw ConfigError(jpath(base, item.key()), "unknown field");
  }
}

inline const nlohmann::json& jrequire(const nlohmann::json& j,
                                      const std::string& base,
                                      const std::string& key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(jpath(base, key), "missing required field");
  return *it;
}

inline std::string jstring(const nlohmann::json& j, const std::string& base,
                           const std::string& key) {
  const auto& v = jrequire(j, base, key);
  if (!v.is_string()) throw ConfigError(jpath(base, key), "expected a string");
  return v.get<std::string>();
}

inline long long jint(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<long long>();
}

inline long long jint_opt(const nlohmann::json& j, const std::string& base,
                          const std::string& key, long long fallback) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : jint(*it, jpath(base, key));
}

inline double jnum_opt(const nlohmann::json& j, const std::string& base,
                       const std::string& key, double fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError(jpath(base, key), "expected a number");
  return it->get<double>();
}

inline bool jbool_opt(const nlohmann::json& j, const std::string& base,
                      const std::string& key, bool fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw ConfigError(jpath(base, key), "expected a boolean");
  return it->get<bool>();
}

inline std::string jstring_opt(const nlohmann::json& j, const std::string& base,
                               const std::string& key, const std::string& fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw ConfigError(jpath(base, key), "expected a string");
  return it->get<std::string>();
}

inline DgpSpec dgp_from_json(const nlohmann::json& j, const std::string& base) {
  if (!j.is_object()) throw ConfigError(base, "expected an object");
  jcheck_keys(j, base, {"name", "edge_prob", "m"});
  DgpSpec d;
  d.name = jstring(j, base, "name");
  d.edge_prob = jnum_opt(j, base, "edge_prob", d.edge_prob);
  d.m = static_cast<int>(jint_opt(j, base, "m", d.m));
  try {
    d.validate();
  } catch (const std::exception& e) {
    throw ConfigError(jpath(base, "name"), e.what());
  }
  return d;
}

inline LearnerSpec learner_from_json(const nlohmann::json& j,
                                     const std::string& base) {
  if (!j.is_object()) throw ConfigError(base, "expected an object");
  jcheck_keys(j, base, {"kind", "rounds", "max_depth", "learning_rate",
                        "max_basis", "ridge", "max_iter"});
  LearnerSpec s;
  const std::string kind = jstring(j, base, "kind");
  try {
    s.kind = learner_from_name(kind);
  } catch (const std::exception& e) {
    throw ConfigError(jpath(base, "kind"), e.what());
  }
  s.rounds = static_cast<int>(jint_opt(j, base, "rounds", s.rounds));
  s.max_depth = static_cast<int>(jint_opt(j, base, "max_depth", s.max_depth));
  s.learning_rate = jnum_opt(j, base, "learning_rate", s.learning_rate);
  s.max_basis = static_cast<int>(jint_opt(j, base, "max_basis", s.max_basis));
  s.ridge = jnum_opt(j, base, "ridge", s.ridge);
  s.max_iter = static_cast<int>(jint_opt(j, base, "max_iter", s.max_iter));
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(base, e.what());
  }
  return s;
}

inline nlohmann::ordered_json learner_to_json(const LearnerSpec& s) {
  return {{"kind", learner_name(s.kind)},     {"rounds", s.rounds},
          {"max_depth", s.max_depth},         {"learning_rate", s.learning_rate},
          {"max_basis", s.max_basis},         {"ridge", s.ridge},
          {"max_iter", s.max_iter}};
}

inline std::vector<std::size_t> sizes_from_json(const nlohmann::json& j,
                                                const std::string& base,
                                                const std::string& key) {
  const auto& v = jrequire(j, base, key);
  const std::string path = jpath(base, key);
  if (!v.is_array() || v.empty())
    throw ConfigError(path, "expected a non-empty array");
  std::vector<std::size_t> sizes;
  for (const auto& e : v) {
    const long long n = jint(e, path);
    if (n < 2) throw ConfigError(path, "sizes must be >= 2");
    if (!sizes.empty() && static_cast<std::size_t>(n) <= sizes.back())
      throw ConfigError(path, "sizes must be strictly increasing");
    sizes.push_back(static_cast<std::size_t>(n));
  }
  return sizes;
}

inline DependenceStructure::Kind dgp_kind(const DgpSpec& dgp) {
  if (dgp.name == "network") return DependenceStructure::Kind::network;
  if (dgp.name == "time_series") return DependenceStructure::Kind::time_series;
  return DependenceStructure::Kind::two_way;
}

inline bool variance_method_compatible(VarianceMethod m,
                                       DependenceStructure::Kind kind) {
  switch (m) {
    case VarianceMethod::iid: return true;
    case VarianceMethod::cluster_robust:
      return kind == DependenceStructure::Kind::one_way ||
             kind == DependenceStructure::Kind::two_way;
    case VarianceMethod::network_hac:
      return kind == DependenceStructure::Kind::network;
    case VarianceMethod::ts_lag_window:
      return kind == DependenceStructure::Kind::time_series;
  }
  return false;
}

}  // namespace detail

// Each dataset "size" maps to this many estimation units (the clustered
// design is an N x N grid of cells).
inline std::size_t units_for(const DgpSpec& dgp, std::size_t size) {
  return dgp.name == "two_way_clustered" ? size * size : size;
}

struct SchemeSpec {
  std::string name;
  int k = 5;
};

struct ExperimentConfig {
  std::string name;
  DgpSpec dgp;
  std::vector<std::size_t> sizes;
  int replicates = 500;
  std::vector<SchemeSpec> schemes;
  LearnerSpec outcome{.kind = LearnerKind::linear_glm};
  LearnerSpec propensity{.kind = LearnerKind::logistic_glm};
  bool oracle_nuisance = false;
  Estimand estimand = Estimand::ate;
  VarianceMethod variance_method = VarianceMethod::iid;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string output_dir = ".";
  std::size_t n_oracle = 0;   // EP oracle sample target; 0 = max(1e5, 20n)
  bool record_ep = false;     // per-replicate 2-fold EP diagnostic column
  bool record_timing = false; // off by default so reruns are byte-identical

  void validate() const {
    if (name.empty()) throw ConfigError("name", "must be a non-empty string");
    dgp.validate();
    if (sizes.empty()) throw ConfigError("sizes", "must be non-empty");
    if (replicates < 1) throw ConfigError("replicates", "must be >= 1");
    if (schemes.empty()) throw ConfigError("schemes", "must be non-empty");
    for (std::size_t i = 0; i < schemes.size(); ++i) {
      const std::string base = "schemes[" + std::to_string(i) + "]";
      if (schemes[i].k < 2) throw ConfigError(base + ".k", "must be >= 2");
      if (!scheme_compatible(schemes[i].name, detail::dgp_kind(dgp)))
        throw ConfigError(base + ".name", "scheme " + schemes[i].name +
                                              " is incompatible with dgp " +
                                              dgp.name);
    }
    if (!oracle_nuisance) {
      outcome.validate();
      propensity.validate();
    }
    if (!detail::variance_method_compatible(variance_method,
                                            detail::dgp_kind(dgp)))
      throw ConfigError("variance_method",
                        std::string(variance_method_name(variance_method)) +
                            " is incompatible with dgp " + dgp.name);
    if (workers < 1) throw ConfigError("workers", "must be >= 1");
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
    detail::jcheck_keys(
        j, "",
        {"name", "dgp", "sizes", "replicates", "schemes", "outcome_learner",
         "propensity_learner", "oracle_nuisance", "estimand", "variance_method",
         "seed", "workers", "output_dir", "n_oracle", "record_ep",
         "record_timing"});
    ExperimentConfig c;
    c.name = detail::jstring(j, "", "name");
    c.dgp = detail::dgp_from_json(detail::jrequire(j, "", "dgp"), "dgp");
    c.sizes = detail::sizes_from_json(j, "", "sizes");
    c.replicates = static_cast<int>(detail::jint_opt(j, "", "replicates", 500));
    const auto& schemes = detail::jrequire(j, "", "schemes");
    if (!schemes.is_array() || schemes.empty())
      throw ConfigError("schemes", "expected a non-empty array");
    for (std::size_t i = 0; i < schemes.size(); ++i) {
      const std::string base = "schemes[" + std::to_string(i) + "]";
      if (!schemes[i].is_object()) throw ConfigError(base, "expected an object");
      detail::jcheck_keys(schemes[i], base, {"name", "k"});
      SchemeSpec s;
      s.name = detail::jstring(schemes[i], base, "name");
      s.k = static_cast<int>(detail::jint_opt(schemes[i], base, "k", 5));
      c.schemes.push_back(std::move(s));
    }
    if (j.contains("outcome_learner"))
      c.outcome = detail::learner_from_json(j["outcome_learner"], "outcome_learner");
    if (j.contains("propensity_learner"))
      c.propensity =
          detail::learner_from_json(j["propensity_learner"], "propensity_learner");
    c.oracle_nuisance = detail::jbool_opt(j, "", "oracle_nuisance", false);
    try {
      c.estimand = estimand_from_name(detail::jstring_opt(j, "", "estimand", "ate"));
    } catch (const std::exception& e) {
      throw ConfigError("estimand", e.what());
    }
    try {
      c.variance_method = variance_method_from_name(
          detail::jstring_opt(j, "", "variance_method", "iid"));
    } catch (const std::exception& e) {
      throw ConfigError("variance_method", e.what());
    }
    c.seed = static_cast<std::uint64_t>(detail::jint_opt(j, "", "seed", 1));
    c.workers = static_cast<int>(detail::jint_opt(j, "", "workers", 1));
    c.output_dir = detail::jstring_opt(j, "", "output_dir", ".");
    c.n_oracle =
        static_cast<std::size_t>(detail::jint_opt(j, "", "n_oracle", 0));
    c.record_ep = detail::jbool_opt(j, "", "record_ep", false);
    c.record_timing = detail::jbool_opt(j, "", "record_timing", false);
    c.validate();
    return c;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["dgp"] = dgp.to_json();
    j["sizes"] = sizes;
    j["replicates"] = replicates;
    auto sch = nlohmann::ordered_json::array();
    for (const auto& s : schemes) sch.push_back({{"name", s.name}, {"k", s.k}});
    j["schemes"] = std::move(sch);
    j["outcome_learner"] = detail::learner_to_json(outcome);
    j["propensity_learner"] = detail::learner_to_json(propensity);
    j["oracle_nuisance"] = oracle_nuisance;
    j["estimand"] = estimand_name(estimand);
    j["variance_method"] = variance_method_name(variance_method);
    j["seed"] = seed;
    j["workers"] = workers;
    j["output_dir"] = output_dir;
    j["n_oracle"] = n_oracle;
    j["record_ep"] = record_ep;
    j["record_timing"] = record_timing;
    return j;
  }
};

struct RunPaths {
  std::string results_csv, meta_json;
};

namespace detail {

struct ReplicateOutcome {
  // pre-formatted CSV fields; empty means not available for this row
  std::string estimate, se, ci_low, ci_high, covered, ep, error;
  long long runtime_ms = 0;
  double psi_true = 0;
  bool has_truth = false;
};

inline ReplicateOutcome run_one(const ExperimentConfig& cfg,
                                std::size_t scheme_idx, std::size_t size_idx,
                                int rep) {
  ReplicateOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t base = derive_seed(cfg.seed, scheme_idx, size_idx,
                                         static_cast<std::uint64_t>(rep));
  try {
    const auto ds =
        generate(cfg.dgp, cfg.sizes[size_idx], derive_seed(base, 0, 0, 0));
    out.psi_true = ds.oracle.psi(cfg.estimand);
    out.has_truth = true;

    const auto& sch = cfg.schemes[scheme_idx];
    const auto plan =
        make_split(sch.name, ds.structure, sch.k, derive_seed(base, 1, 0, 0));
    const NuisanceSpec outcome_spec =
        cfg.oracle_nuisance ? NuisanceSpec(ds.oracle.nuisance)
                            : NuisanceSpec(cfg.outcome);
    const NuisanceSpec propensity_spec =
        cfg.oracle_nuisance ? NuisanceSpec(ds.oracle.nuisance)
                            : NuisanceSpec(cfg.propensity);
    const auto est =
        crossfit_estimate(ds.table, ds.structure, plan, outcome_spec,
                          propensity_spec, cfg.estimand, cfg.variance_method);

    double ep_value = 0;
    if (cfg.record_ep) {
      const auto ep = ep_for_dataset(ds, cfg.dgp, cfg.sizes[size_idx], sch.name,
                                     cfg.oracle_nuisance, cfg.outcome,
                                     cfg.propensity, cfg.estimand, cfg.n_oracle,
                                     derive_seed(base, 2, 0, 0));
      ep_value = ep.ep;
    }

    out.estimate = fmt_g(est.result.psi);
    out.se = fmt_g(est.result.se);
    out.ci_low = fmt_g(est.result.ci_low);
    out.ci_high = fmt_g(est.result.ci_high);
    out.covered = (est.result.ci_low <= out.psi_true &&
                   out.psi_true <= est.result.ci_high)
                      ? "1"
                      : "0";
    if (cfg.record_ep) out.ep = fmt_g(ep_value);
  } catch (const std::exception& e) {
    out.estimate.clear();
    out.se.clear();
    out.ci_low.clear();
    out.ci_high.clear();
    out.covered.clear();
    out.ep.clear();
    out.error = e.what();
  }
  if (cfg.record_timing)
    out.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  return out;
}

}  // namespace detail

inline const char* kResultsHeader =
    "experiment,dgp,scheme,n,replicate,estimate,se,ci_low,ci_high,covered,ep,"
    "runtime_ms,error\n";

// Executes schemes x sizes x replicates, one row each (failures included as
// error rows), sorted by (scheme, size, replicate). Output depends only on
// the config, never on the worker count.
inline RunPaths run(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);

  const std::size_t S = cfg.schemes.size();
  const std::size_t Z = cfg.sizes.size();
  const std::size_t R = static_cast<std::size_t>(cfg.replicates);
  std::vector<detail::ReplicateOutcome> slots(S * Z * R);

  parallel_for(slots.size(), cfg.workers, [&](std::size_t i) {
    const std::size_t scheme_idx = i / (Z * R);
    const std::size_t size_idx = (i / R) % Z;
    const int rep = static_cast<int>(i % R);
    slots[i] = detail::run_one(cfg, scheme_idx, size_idx, rep);
  });

  std::string csv = kResultsHeader;
  std::map<std::string, double> truths;  // keyed by the n column
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::size_t scheme_idx = i / (Z * R);
    const std::size_t size_idx = (i / R) % Z;
    const int rep = static_cast<int>(i % R);
    const auto& s = slots[i];
    const std::string n_str =
        std::to_string(units_for(cfg.dgp, cfg.sizes[size_idx]));
    if (s.has_truth) truths.emplace(n_str, s.psi_true);
    csv += csv_escape(cfg.name) + "," + csv_escape(cfg.dgp.name) + "," +
           csv_escape(cfg.schemes[scheme_idx].name) + "," + n_str + "," +
           std::to_string(rep) + "," + s.estimate + "," + s.se + "," +
           s.ci_low + "," + s.ci_high + "," + s.covered + "," + s.ep + "," +
           std::to_string(s.runtime_ms) + "," + csv_escape(s.error) + "\n";
  }

  nlohmann::ordered_json meta;
  meta["experiment"] = cfg.name;
  meta["estimand"] = estimand_name(cfg.estimand);
  meta["variance_method"] = variance_method_name(cfg.variance_method);
  auto truth_json = nlohmann::ordered_json::object();
  for (const auto& [k, v] : truths) truth_json[k] = v;
  meta["psi_true"] = std::move(truth_json);
  meta["config"] = cfg.to_json();

  RunPaths paths;
  const auto dir = std::filesystem::path(cfg.output_dir);
  paths.results_csv = (dir / (cfg.name + "_results.csv")).string();
  paths.meta_json = (dir / (cfg.name + "_results.meta.json")).string();
  write_text_file(paths.results_csv, csv);
  write_text_file(paths.meta_json, meta.dump(2) + "\n");
  return paths;
}

struct SummaryRow {
  std::string scheme;
  long long n = 0;
  int n_ok = 0, n_failed = 0;
  double psi_true = 0;
  // NaN marks a metric that is undefined for this group (e.g. no ok rows)
  double bias = std::nan(""), sd = std::nan(""), rmse = std::nan("");
  double mean_se = std::nan(""), coverage = std::nan("");
  double ep_mean = std::nan(""), ep_var = std::nan("");
};

// Per (scheme, n) operating characteristics; error rows are excluded from the
// metrics and reported in n_failed. Needs the .meta.json truth sidecar.
inline std::vector<SummaryRow> summarize(const std::string& results_csv_path) {
  const auto rows = parse_csv(read_text_file(results_csv_path));
  if (rows.size() < 1 || rows[0].size() != 13)
    throw std::runtime_error("summarize: malformed results file " +
                             results_csv_path);
  {
    const std::string want(kResultsHeader);
    std::string have;
    for (std::size_t c = 0; c < rows[0].size(); ++c)
      have += (c ? "," : "") + rows[0][c];
    if (have + "\n" != want)
      throw std::runtime_error("summarize: unexpected results header: " + have);
  }

  std::string meta_path = results_csv_path;
  if (meta_path.size() >= 4 && meta_path.substr(meta_path.size() - 4) == ".csv")
    meta_path.resize(meta_path.size() - 4);
  meta_path += ".meta.json";
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(meta_path));
  } catch (const std::exception& e) {
    throw std::runtime_error("summarize: cannot read truth sidecar " + meta_path +
                             ": " + e.what());
  }

  struct Acc {
    std::vector<double> est, se, ep;
    int covered = 0, n_failed = 0;
  };
  std::vector<std::pair<std::string, std::string>> order;  // (scheme, n)
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 13)
      throw std::runtime_error("summarize: bad row " + std::to_string(r));
    const std::pair<std::string, std::string> key{rows[r][2], rows[r][3]};
    if (!groups.count(key)) order.push_back(key);
    auto& acc = groups[key];
    if (!rows[r][12].empty()) {
      ++acc.n_failed;
      continue;
    }
    acc.est.push_back(std::stod(rows[r][5]));
    acc.se.push_back(std::stod(rows[r][6]));
    acc.covered += rows[r][9] == "1";
    if (!rows[r][10].empty()) acc.ep.push_back(std::stod(rows[r][10]));
  }

  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    const auto& acc = groups[key];
    SummaryRow s;
    s.scheme = key.first;
    s.n = std::stoll(key.second);
    s.n_ok = static_cast<int>(acc.est.size());
    s.n_failed = acc.n_failed;
    if (!meta.contains("psi_true") || !meta["psi_true"].contains(key.second))
      throw std::runtime_error("summarize: no oracle psi for n=" + key.second);
    s.psi_true = meta["psi_true"][key.second].get<double>();

    auto mean_of = [](const std::vector<double>& v) {
      double m = 0;
      for (double x : v) m += x;
      return m / static_cast<double>(v.size());
    };
    auto var_of = [&](const std::vector<double>& v, double m) {
      double acc2 = 0;
      for (double x : v) acc2 += (x - m) * (x - m);
      return acc2 / static_cast<double>(v.size() - 1);
    };

    if (s.n_ok >= 1) {
      const double mean_est = mean_of(acc.est);
      s.bias = mean_est - s.psi_true;
      double mse = 0;
      for (double x : acc.est) mse += (x - s.psi_true) * (x - s.psi_true);
      s.rmse = std::sqrt(mse / s.n_ok);
      s.mean_se = mean_of(acc.se);
      s.coverage = static_cast<double>(acc.covered) / s.n_ok;
      if (s.n_ok >= 2) s.sd = std::sqrt(var_of(acc.est, mean_est));
    }
    if (!acc.ep.empty()) {
      const double m = mean_of(acc.ep);
      s.ep_mean = m;
      if (acc.ep.size() >= 2) s.ep_var = var_of(acc.ep, m);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  auto cell = [](double v) { return std::isnan(v) ? std::string() : fmt_g(v); };
  std::string out =
      "scheme,n,n_ok,n_failed,psi_true,bias,sd,rmse,mean_se,coverage,ep_mean,"
      "ep_var\n";
  for (const auto& s : rows)
    out += csv_escape(s.scheme) + "," + std::to_string(s.n) + "," +
           std::to_string(s.n_ok) + "," + std::to_string(s.n_failed) + "," +
           fmt_g(s.psi_true) + "," + cell(s.bias) + "," + cell(s.sd) + "," +
           cell(s.rmse) + "," + cell(s.mean_se) + "," + cell(s.coverage) + "," +
           cell(s.ep_mean) + "," + cell(s.ep_var) + "\n";
  return out;
}

// <x>_results.csv -> <x>_summary.csv alongside it (generic .csv otherwise)
inline std::string summary_path_for(const std::string& results_csv_path) {
  const std::string tail = "_results.csv";
  if (results_csv_path.size() > tail.size() &&
      results_csv_path.substr(results_csv_path.size() - tail.size()) == tail)
    return results_csv_path.substr(0, results_csv_path.size() - tail.size()) +
           "_summary.csv";
  return results_csv_path + ".summary.csv";
}

inline std::string write_summary(const std::string& results_csv_path) {
  const auto rows = summarize(results_csv_path);
  const auto path = summary_path_for(results_csv_path);
  write_text_file(path, summary_csv(rows));
  return path;
}

// One SVG per metric, a polyline per scheme across sizes (log x). The
// coverage panel is pinned to [0, 1] with a 0.95 reference line.
inline std::vector<std::string> plot(const std::string& summary_csv_path) {
  const auto cells = parse_csv(read_text_file(summary_csv_path));
  if (cells.size() < 2)
    throw std::runtime_error("plot: empty summary " + summary_csv_path);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < cells[0].size(); ++c) col[cells[0][c]] = c;
  for (const char* need : {"scheme", "n", "bias", "sd", "rmse", "coverage"})
    if (!col.count(need))
      throw std::runtime_error(std::string("plot: summary lacks column ") + need);

  std::string base = summary_csv_path;
  if (base.size() >= 4 && base.substr(base.size() - 4) == ".csv")
    base.resize(base.size() - 4);

  std::vector<std::string> written;
  for (const char* metric : {"bias", "sd", "rmse", "coverage"}) {
    std::vector<SvgSeries> series;
    for (std::size_t r = 1; r < cells.size(); ++r) {
      const auto& row = cells[r];
      const std::string& scheme = row[col["scheme"]];
      const std::string& val = row[col[metric]];
      if (val.empty()) continue;
      auto it = std::find_if(series.begin(), series.end(),
                             [&](const SvgSeries& s) { return s.label == scheme; });
      if (it == series.end()) {
        series.push_back({scheme, {}, {}});
        it = series.end() - 1;
      }
      it->x.push_back(std::stod(row[col["n"]]));
      it->y.push_back(std::stod(val));
    }
    if (series.empty()) continue;
    SvgOptions opt;
    opt.title = metric + std::string(" by sample size");
    opt.x_label = "n";
    opt.y_label = metric;
    if (std::string(metric) == "coverage") {
      opt.y_min = 0.0;
      opt.y_max = 1.0;
      opt.ref_y = 0.95;
    }
    const std::string path = base + "_" + metric + ".svg";
    write_text_file(path, line_chart_svg(series, opt));
    written.push_back(path);
  }
  return written;
}

// Side-by-side cross-fit vs no-cross-fit on the same datasets, reported as
// sqrt(n) * |bias| per size: the visual of the refit bias that splitting
// removes. Adaptive interpolating nuisances make it stark.
struct DemoBiasConfig {
  std::string name = "demo_bias";
  DgpSpec dgp{.name = "network", .edge_prob = 0.0};
  std::vector<std::size_t> sizes{250, 500, 1000, 2000};
  int replicates = 200;
  int k = 5;
  LearnerSpec outcome{.kind = LearnerKind::interpolator_1nn};
  // Depth-2 boosting captures the treatment model's covariate interaction;
  // 50 rounds keeps small-sample fits away from the probability clip.
  LearnerSpec propensity{.kind = LearnerKind::boosted_trees, .rounds = 50};
  bool oracle_nuisance = false;
  Estimand estimand = Estimand::ate;
  VarianceMethod variance_method = VarianceMethod::iid;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string output_dir = ".";

  void validate() const {
    if (name.empty()) throw ConfigError("name", "must be a non-empty string");
    dgp.validate();
    if (sizes.empty()) throw ConfigError("sizes", "must be non-empty");
    if (replicates < 1) throw ConfigError("replicates", "must be >= 1");
    if (k < 2) throw ConfigError("k", "must be >= 2");
    if (!oracle_nuisance) {
      outcome.validate();
      propensity.validate();
    }
    if (!detail::variance_method_compatible(variance_method,
                                            detail::dgp_kind(dgp)))
      throw ConfigError("variance_method",
                        std::string(variance_method_name(variance_method)) +
                            " is incompatible with dgp " + dgp.name);
    if (workers < 1) throw ConfigError("workers", "must be >= 1");
  }

  static DemoBiasConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
    detail::jcheck_keys(j, "",
                        {"name", "dgp", "sizes", "replicates", "k",
                         "outcome_learner", "propensity_learner",
                         "oracle_nuisance", "estimand", "variance_method",
                         "seed", "workers", "output_dir"});
    DemoBiasConfig c;
    c.name = detail::jstring_opt(j, "", "name", c.name);
    if (j.contains("dgp")) c.dgp = detail::dgp_from_json(j["dgp"], "dgp");
    if (j.contains("sizes")) c.sizes = detail::sizes_from_json(j, "", "sizes");
    c.replicates =
        static_cast<int>(detail::jint_opt(j, "", "replicates", c.replicates));
    c.k = static_cast<int>(detail::jint_opt(j, "", "k", c.k));
    if (j.contains("outcome_learner"))
      c.outcome = detail::learner_from_json(j["outcome_learner"], "outcome_learner");
    if (j.contains("propensity_learner"))
      c.propensity =
          detail::learner_from_json(j["propensity_learner"], "propensity_learner");
    c.oracle_nuisance = detail::jbool_opt(j, "", "oracle_nuisance", false);
    try {
      c.estimand = estimand_from_name(detail::jstring_opt(j, "", "estimand", "ate"));
    } catch (const std::exception& e) {
      throw ConfigError("estimand", e.what());
    }
    try {
      c.variance_method = variance_method_from_name(
          detail::jstring_opt(j, "", "variance_method", "iid"));
    } catch (const std::exception& e) {
      throw ConfigError("variance_method", e.what());
    }
    c.seed = static_cast<std::uint64_t>(detail::jint_opt(j, "", "seed", 1));
    c.workers = static_cast<int>(detail::jint_opt(j, "", "workers", 1));
    c.output_dir = detail::jstring_opt(j, "", "output_dir", ".");
    c.validate();
    return c;
  }
};

struct DemoBiasPaths {
  std::string results_csv, meta_json, summary_csv, svg;
};

namespace detail {

struct DemoSlot {
  ReplicateOutcome crossfit, no_crossfit;
};

inline DemoSlot demo_one(const DemoBiasConfig& cfg, std::size_t size_idx,
                         int rep) {
  DemoSlot out;
  const std::uint64_t base =
      derive_seed(cfg.seed, 0, size_idx, static_cast<std::uint64_t>(rep));
  SimulatedDataset ds;
  try {
    ds = generate(cfg.dgp, cfg.sizes[size_idx], derive_seed(base, 0, 0, 0));
  } catch (const std::exception& e) {
    out.crossfit.error = e.what();
    out.no_crossfit.error = e.what();
    return out;
  }
  const double psi_true = ds.oracle.psi(cfg.estimand);
  const NuisanceSpec outcome_spec =
      cfg.oracle_nuisance ? NuisanceSpec(ds.oracle.nuisance)
                          : NuisanceSpec(cfg.outcome);
  const NuisanceSpec propensity_spec =
      cfg.oracle_nuisance ? NuisanceSpec(ds.oracle.nuisance)
                          : NuisanceSpec(cfg.propensity);

  auto fill = [&](ReplicateOutcome& slot, bool crossfit) {
    slot.psi_true = psi_true;
    slot.has_truth = true;
    try {
      const auto est =
          crossfit
              ? crossfit_estimate(
                    ds.table, ds.structure,
                    as_independent_split(static_cast<std::size_t>(ds.table.n()),
                                         cfg.k, derive_seed(base, 1, 0, 0)),
                    outcome_spec, propensity_spec, cfg.estimand,
                    cfg.variance_method)
              : nocrossfit_estimate(ds.table, ds.structure, outcome_spec,
                                    propensity_spec, cfg.estimand,
                                    cfg.variance_method);
      slot.estimate = fmt_g(est.result.psi);
      slot.se = fmt_g(est.result.se);
      slot.ci_low = fmt_g(est.result.ci_low);
      slot.ci_high = fmt_g(est.result.ci_high);
      slot.covered = (est.result.ci_low <= psi_true &&
                      psi_true <= est.result.ci_high)
                         ? "1"
                         : "0";
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  };
  fill(out.crossfit, true);
  fill(out.no_crossfit, false);
  return out;
}

}  // namespace detail

inline DemoBiasPaths demo_bias(const DemoBiasConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);

  const std::size_t Z = cfg.sizes.size();
  const std::size_t R = static_cast<std::size_t>(cfg.replicates);
  std::vector<detail::DemoSlot> slots(Z * R);
  parallel_for(slots.size(), cfg.workers, [&](std::size_t i) {
    slots[i] = detail::demo_one(cfg, i / R, static_cast<int>(i % R));
  });

  std::string csv = kResultsHeader;
  std::map<std::string, double> truths;
  for (int which = 0; which < 2; ++which) {
    const std::string scheme = which == 0 ? "crossfit" : "no_crossfit";
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const std::size_t size_idx = i / R;
      const int rep = static_cast<int>(i % R);
      const auto& s = which == 0 ? slots[i].crossfit : slots[i].no_crossfit;
      const std::string n_str =
          std::to_string(units_for(cfg.dgp, cfg.sizes[size_idx]));
      if (s.has_truth) truths.emplace(n_str, s.psi_true);
      csv += csv_escape(cfg.name) + "," + csv_escape(cfg.dgp.name) + "," +
             scheme + "," + n_str + "," + std::to_string(rep) + "," +
             s.estimate + "," + s.se + "," + s.ci_low + "," + s.ci_high + "," +
             s.covered + ",," + std::to_string(s.runtime_ms) + "," +
             csv_escape(s.error) + "\n";
    }
  }

  nlohmann::ordered_json meta;
  meta["experiment"] = cfg.name;
  meta["estimand"] = estimand_name(cfg.estimand);
  meta["variance_method"] = variance_method_name(cfg.variance_method);
  auto truth_json = nlohmann::ordered_json::object();
  for (const auto& [k, v] : truths) truth_json[k] = v;
  meta["psi_true"] = std::move(truth_json);

  DemoBiasPaths paths;
  const auto dir = std::filesystem::path(cfg.output_dir);
  paths.results_csv = (dir / (cfg.name + "_results.csv")).string();
  paths.meta_json = (dir / (cfg.name + "_results.meta.json")).string();
  write_text_file(paths.results_csv, csv);
  write_text_file(paths.meta_json, meta.dump(2) + "\n");
  paths.summary_csv = write_summary(paths.results_csv);

  const auto rows = summarize(paths.results_csv);
  std::vector<SvgSeries> series;
  for (const auto& row : rows) {
    if (std::isnan(row.bias)) continue;
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const SvgSeries& s) { return s.label == row.scheme; });
    if (it == series.end()) {
      series.push_back({row.scheme, {}, {}});
      it = series.end() - 1;
    }
    it->x.push_back(static_cast<double>(row.n));
    it->y.push_back(std::sqrt(static_cast<double>(row.n)) * std::abs(row.bias));
  }
  SvgOptions opt;
  opt.title = "sqrt(n) x |bias|: cross-fit vs no cross-fit";
  opt.x_label = "n";
  opt.y_label = "sqrt(n) x |bias|";
  paths.svg = (dir / (cfg.name + "_scaled_bias.svg")).string();
  write_text_file(paths.svg, line_chart_svg(series, opt));
  return paths;
}

// diagnose-ep config: the EpConfig payload plus artifact naming.
struct EpRunConfig {
  std::string name = "ep";
  std::string output_dir = ".";
  EpConfig ep;

  static EpRunConfig from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
    detail::jcheck_keys(j, "",
                        {"name", "output_dir", "dgp", "sizes", "replicates",
                         "scheme", "outcome_learner", "propensity_learner",
                         "oracle_nuisance", "estimand", "n_oracle", "seed",
                         "workers"});
    EpRunConfig c;
    c.name = detail::jstring_opt(j, "", "name", c.name);
    c.output_dir = detail::jstring_opt(j, "", "output_dir", ".");
    c.ep.dgp = detail::dgp_from_json(detail::jrequire(j, "", "dgp"), "dgp");
    c.ep.sizes = detail::sizes_from_json(j, "", "sizes");
    c.ep.replicates =
        static_cast<int>(detail::jint_opt(j, "", "replicates", c.ep.replicates));
    c.ep.scheme = detail::jstring_opt(j, "", "scheme", c.ep.scheme);
    if (j.contains("outcome_learner"))
      c.ep.outcome =
          detail::learner_from_json(j["outcome_learner"], "outcome_learner");
    if (j.contains("propensity_learner"))
      c.ep.propensity =
          detail::learner_from_json(j["propensity_learner"], "propensity_learner");
    c.ep.oracle_nuisance = detail::jbool_opt(j, "", "oracle_nuisance", false);
    try {
      c.ep.estimand =
          estimand_from_name(detail::jstring_opt(j, "", "estimand", "ate"));
    } catch (const std::exception& e) {
      throw ConfigError("estimand", e.what());
    }
    c.ep.n_oracle =
        static_cast<std::size_t>(detail::jint_opt(j, "", "n_oracle", 0));
    c.ep.seed = static_cast<std::uint64_t>(detail::jint_opt(j, "", "seed", 1));
    c.ep.workers = static_cast<int>(detail::jint_opt(j, "", "workers", 1));
    try {
      c.ep.validate();
    } catch (const std::exception& e) {
      throw ConfigError("", e.what());
    }
    return c;
  }
};

struct EpRunPaths {
  std::string csv, json;
};

inline EpRunPaths diagnose_ep(const EpRunConfig& cfg) {
  const auto report = ep_suite(cfg.ep);
  std::filesystem::create_directories(cfg.output_dir);
  const auto dir = std::filesystem::path(cfg.output_dir);
  EpRunPaths paths;
  paths.csv = (dir / (cfg.name + "_ep.csv")).string();
  paths.json = (dir / (cfg.name + "_ep.json")).string();
  write_text_file(paths.csv, report.csv());
  write_text_file(paths.json, report.to_json().dump(2) + "\n");
  return paths;
}

}  // namespace xfit
