#include <xfit/harness.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

namespace {

nlohmann::json load_config(const std::string& path) {
  const std::string text = xfit::read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
}

int cmd_simulate(const std::string& dgp_name, std::size_t size,
                 std::uint64_t seed, double edge_prob, int m,
                 const std::string& prefix) {
  xfit::DgpSpec spec;
  spec.name = dgp_name;
  spec.edge_prob = edge_prob;
  spec.m = m;
  spec.validate();
  const auto ds = xfit::generate(spec, size, seed);

  nlohmann::ordered_json truth;
  truth["dgp"] = ds.dgp;
  truth["params"] = ds.params;
  truth["seed"] = seed;
  truth["ate"] = ds.oracle.ate;
  truth["cf_mean_1"] = ds.oracle.cf_mean_1;
  truth["cf_mean_0"] = ds.oracle.cf_mean_0;
  truth["first_valid"] = ds.oracle.first_valid;

  const auto parent = std::filesystem::path(prefix).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::string data_path = prefix + "_data.csv";
  const std::string structure_path = prefix + "_structure.json";
  const std::string truth_path = prefix + "_truth.json";
  xfit::write_text_file(data_path, xfit::table_csv(ds.table));
  xfit::write_text_file(structure_path,
                        xfit::structure_json(ds.structure).dump(2) + "\n");
  xfit::write_text_file(truth_path, truth.dump(2) + "\n");
  std::printf("%s\n%s\n%s\n", data_path.c_str(), structure_path.c_str(),
              truth_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xfit: cross-fitting simulation lab for dependent data"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "generate one dataset and write data/structure/truth files");
  std::string sim_dgp = "network";
  std::size_t sim_size = 0;
  std::uint64_t sim_seed = 1;
  double sim_edge_prob = -1.0;
  int sim_m = 4;
  std::string sim_out;
  simulate->add_option("--dgp", sim_dgp,
                       "two_way_clustered | network | time_series");
  simulate->add_option("--size", sim_size, "n (network), T (time series), or N=M (clustered)")
      ->required();
  simulate->add_option("--seed", sim_seed, "rng seed");
  simulate->add_option("--edge-prob", sim_edge_prob,
                       "network edge probability; negative means 3/n");
  simulate->add_option("--m", sim_m, "time series dependence order");
  simulate->add_option("--out", sim_out, "output path prefix")->required();

  // run
  auto* run = app.add_subcommand("run", "run a Monte Carlo experiment config");
  std::string run_config;
  int run_workers = 0;
  std::uint64_t run_seed = 0;
  std::string run_outdir;
  run->add_option("config", run_config, "experiment JSON file")->required();
  auto* run_workers_opt = run->add_option("--workers", run_workers, "worker threads");
  auto* run_seed_opt = run->add_option("--seed", run_seed, "master seed override");
  auto* run_outdir_opt =
      run->add_option("--output-dir", run_outdir, "output directory override");

  // summarize
  auto* summarize = app.add_subcommand(
      "summarize", "aggregate a results CSV into per-(scheme, n) metrics");
  std::string sum_results;
  summarize->add_option("results", sum_results, "results CSV from `run`")
      ->required();

  // plot
  auto* plot = app.add_subcommand("plot", "render SVG charts from a summary CSV");
  std::string plot_summary;
  plot->add_option("summary", plot_summary, "summary CSV from `summarize`")
      ->required();

  // diagnose-ep
  auto* diag = app.add_subcommand(
      "diagnose-ep", "empirical-process diagnostic across sample sizes");
  std::string diag_config;
  int diag_workers = 0;
  std::uint64_t diag_seed = 0;
  std::string diag_outdir;
  diag->add_option("config", diag_config, "diagnostic JSON file")->required();
  auto* diag_workers_opt =
      diag->add_option("--workers", diag_workers, "worker threads");
  auto* diag_seed_opt = diag->add_option("--seed", diag_seed, "master seed override");
  auto* diag_outdir_opt =
      diag->add_option("--output-dir", diag_outdir, "output directory override");

  // demo-bias
  auto* demo = app.add_subcommand(
      "demo-bias", "cross-fit vs no-cross-fit refit bias demonstration");
  std::string demo_config;
  int demo_workers = 0;
  std::uint64_t demo_seed = 0;
  std::string demo_outdir;
  demo->add_option("config", demo_config, "demo JSON file; {} uses the defaults")
      ->required();
  auto* demo_workers_opt =
      demo->add_option("--workers", demo_workers, "worker threads");
  auto* demo_seed_opt = demo->add_option("--seed", demo_seed, "master seed override");
  auto* demo_outdir_opt =
      demo->add_option("--output-dir", demo_outdir, "output directory override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed())
      return cmd_simulate(sim_dgp, sim_size, sim_seed, sim_edge_prob, sim_m,
                          sim_out);

    if (run->parsed()) {
      auto cfg = xfit::ExperimentConfig::from_json(load_config(run_config));
      if (run_workers_opt->count()) cfg.workers = run_workers;
      if (run_seed_opt->count()) cfg.seed = run_seed;
      if (run_outdir_opt->count()) cfg.output_dir = run_outdir;
      cfg.validate();
      const auto paths = xfit::run(cfg);
      std::printf("%s\n%s\n", paths.results_csv.c_str(), paths.meta_json.c_str());
      return 0;
    }

    if (summarize->parsed()) {
      const auto path = xfit::write_summary(sum_results);
      std::printf("%s\n", path.c_str());
      return 0;
    }

    if (plot->parsed()) {
      const auto paths = xfit::plot(plot_summary);
      for (const auto& p : paths) std::printf("%s\n", p.c_str());
      return 0;
    }

    if (diag->parsed()) {
      auto cfg = xfit::EpRunConfig::from_json(load_config(diag_config));
      if (diag_workers_opt->count()) cfg.ep.workers = diag_workers;
      if (diag_seed_opt->count()) cfg.ep.seed = diag_seed;
      if (diag_outdir_opt->count()) cfg.output_dir = diag_outdir;
      cfg.ep.validate();
      const auto paths = xfit::diagnose_ep(cfg);
      std::printf("%s\n%s\n", paths.csv.c_str(), paths.json.c_str());
      return 0;
    }

    if (demo->parsed()) {
      auto cfg = xfit::DemoBiasConfig::from_json(load_config(demo_config));
      if (demo_workers_opt->count()) cfg.workers = demo_workers;
      if (demo_seed_opt->count()) cfg.seed = demo_seed;
      if (demo_outdir_opt->count()) cfg.output_dir = demo_outdir;
      cfg.validate();
      const auto paths = xfit::demo_bias(cfg);
      std::printf("%s\n%s\n%s\n%s\n", paths.results_csv.c_str(),
                  paths.meta_json.c_str(), paths.summary_csv.c_str(),
                  paths.svg.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
