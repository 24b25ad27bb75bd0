// Batch front-end for the hierarchical state-switching curve models:
// transform raw recordings into windowed features, simulate data sets, fit
// the candidate model variants, decode hidden states, and run residual
// diagnostics. All outputs are plot-ready CSV/JSON tables.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "carhhmm/commands.hpp"

using namespace carhhmm;

int main(int argc, char** argv) {
  CLI::App app{"hierarchical state-switching models for high-frequency curve sequences"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand name

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<int> restarts;
  std::optional<int> threads;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (created if missing)");
  app.add_option("--seed", seed, "random seed override");
  app.add_option("--variant", variant, "model variant: carhhmm-dft | hhmm-dft | carhhmm | carhmm-dft");
  app.add_option("--restarts", restarts, "number of optimizer restarts");
  app.add_option("--threads", threads, "worker threads (default: HHMM_THREADS or all cores)");

  std::string raw_csv, features_csv, fit_json;
  auto* transform = app.add_subcommand("transform", "raw CSV -> windowed features");
  transform->add_option("input", raw_csv, "raw CSV with time_s, depth_m (optional), acc_x[, acc_y, acc_z]")
      ->required()
      ->check(CLI::ExistingFile);

  auto* simulate = app.add_subcommand("simulate", "generate data sets from the model");
  std::optional<int> n_dives;
  bool raw_flag = false;
  bool study_flag = false;
  int replicates = 10;
  simulate->add_option("--n-dives", n_dives, "dives per data set (default 100)");
  simulate->add_flag("--raw", raw_flag, "also write reconstructed raw curves");
  simulate->add_flag("--study", study_flag, "run the full multi-variant simulation study");
  simulate->add_option("--replicates", replicates, "study replicates (with --study)");

  auto* fit_cmd = app.add_subcommand("fit", "maximum likelihood fit on a features file");
  fit_cmd->add_option("features", features_csv, "features CSV")->required()->check(CLI::ExistingFile);

  auto* decode = app.add_subcommand("decode", "state posteriors from a fitted model");
  decode->add_option("features", features_csv, "features CSV")->required()->check(CLI::ExistingFile);
  decode->add_option("fit", fit_json, "fit.json from the fit command")->required()->check(CLI::ExistingFile);

  auto* diagnose = app.add_subcommand("diagnose", "pseudoresiduals and histogram weights");
  diagnose->add_option("features", features_csv, "features CSV")->required()->check(CLI::ExistingFile);
  diagnose->add_option("fit", fit_json, "fit.json from the fit command")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (variant) config.variant = parse_variant(*variant);
    if (seed) config.fit.seed = *seed;
    if (restarts) config.fit.restarts = *restarts;
    if (threads) config.fit.threads = *threads;
    if (n_dives) config.sim_n_dives = *n_dives;
    const std::uint64_t run_seed = seed.value_or(config.fit.seed);

    if (transform->parsed()) return cmd_transform(raw_csv, config, out_dir);
    if (simulate->parsed()) {
      if (study_flag)
        return cmd_study(config, replicates, run_seed, threads.value_or(config.fit.threads),
                         out_dir);
      return cmd_simulate(config, run_seed, raw_flag, out_dir);
    }
    if (fit_cmd->parsed()) return cmd_fit(features_csv, config, out_dir);
    if (decode->parsed()) return cmd_decode(features_csv, fit_json, out_dir);
    if (diagnose->parsed()) return cmd_diagnose(features_csv, fit_json, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "carhhmm: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}
