// Command-line front end: `sweep` runs the garnet benchmark grid, `verify`
// runs the numerical theory checks, `summarize` aggregates a results file,
// `garnet` dumps a generated MRP, `train` runs one cell with loss curves.
//
// Exit codes: 0 success, 1 usage/config error, 2 theory-check failure,
// 3 partial sweep failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "vamlab/biaslab.hpp"
#include "vamlab/errors.hpp"
#include "vamlab/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitTheoryFailure = 2;
constexpr int kExitPartialSweep = 3;

struct CommonFlags {
  std::string config_path;
  std::vector<double> rhos;
  std::vector<int> ranks;
  std::vector<std::string> algorithms;
  int seeds = -1;
  int samples = -1;
  std::string out;
  int workers = -1;
  int64_t base_seed = -1;
};

void add_common_flags(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config_path, "key = value config file");
  cmd->add_option("--rho", flags->rhos, "rho values (overrides config)")->delimiter(',');
  cmd->add_option("--ranks", flags->ranks, "rank constraints k")->delimiter(',');
  cmd->add_option("--algorithms", flags->algorithms,
                  "itervaml, muzero_joint, muzero_td, mle")
      ->delimiter(',');
  cmd->add_option("--seeds", flags->seeds, "number of seeds (base-seed + offset)");
  cmd->add_option("--samples", flags->samples, "dataset size per run");
  cmd->add_option("--out", flags->out, "output directory");
  cmd->add_option("--workers", flags->workers, "parallel workers (0 = hardware)");
  cmd->add_option("--base-seed", flags->base_seed, "first run seed");
}

vamlab::ExperimentConfig resolve_config(const CommonFlags& flags) {
  vamlab::ExperimentConfig config;
  if (!flags.config_path.empty()) config = vamlab::load_config_file(flags.config_path);
  // Flags win over the file.
  if (!flags.rhos.empty()) config.rhos = flags.rhos;
  if (!flags.ranks.empty()) config.ranks = flags.ranks;
  if (!flags.algorithms.empty()) config.algorithms = flags.algorithms;
  if (flags.seeds >= 0) config.seeds = flags.seeds;
  if (flags.samples >= 0) config.samples = flags.samples;
  if (!flags.out.empty()) config.out_dir = flags.out;
  if (flags.workers >= 0) config.workers = flags.workers;
  if (flags.base_seed >= 0) config.base_seed = static_cast<uint64_t>(flags.base_seed);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decision-aware model-learning laboratory for tabular MRPs"};
  app.require_subcommand(1);

  CommonFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand("sweep", "run the full garnet benchmark grid");
  add_common_flags(sweep_cmd, &sweep_flags);

  auto* verify_cmd = app.add_subcommand("verify", "run the theory checks");
  std::string verify_out;
  bool inject_fault = false;
  uint64_t verify_seed = 1;
  verify_cmd->add_option("--out", verify_out, "where to write verify.json");
  verify_cmd->add_option("--seed", verify_seed, "seed for randomized checks");
  verify_cmd->add_flag("--inject-fault", inject_fault,
                       "negative control: perturb the closed-form minimizer");

  auto* summarize_cmd = app.add_subcommand("summarize", "aggregate a results.csv");
  std::string rows_path, summary_out;
  summarize_cmd->add_option("rows", rows_path, "path to results.csv")->required();
  summarize_cmd->add_option("--out", summary_out, "directory for summary.md / summary.csv");

  auto* garnet_cmd = app.add_subcommand("garnet", "dump one generated garnet MRP as JSON");
  vamlab::GarnetSpec garnet_spec;
  std::string garnet_out;
  garnet_cmd->add_option("--n", garnet_spec.n, "states");
  garnet_cmd->add_option("--m", garnet_spec.m, "successors per state");
  garnet_cmd->add_option("--rho", garnet_spec.rho, "base successor probability");
  garnet_cmd->add_option("--reward-bonus", garnet_spec.reward_bonus, "bonus on state 0");
  garnet_cmd->add_option("--discount", garnet_spec.discount, "discount factor");
  garnet_cmd->add_option("--seed", garnet_spec.seed, "generator seed");
  garnet_cmd->add_option("--out", garnet_out, "output file (stdout if omitted)");

  CommonFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "run a single cell with loss curves");
  add_common_flags(train_cmd, &train_flags);
  double train_rho = 0.5;
  int train_k = 10;
  std::string train_alg = "itervaml";
  uint64_t train_seed = 2024;
  int train_stride = 10;
  train_cmd->add_option("--cell-rho", train_rho, "rho for this run");
  train_cmd->add_option("--k", train_k, "rank constraint");
  train_cmd->add_option("--algorithm", train_alg, "training scheme");
  train_cmd->add_option("--seed", train_seed, "run seed");
  train_cmd->add_option("--loss-stride", train_stride, "record loss every this many steps");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep_cmd->parsed()) {
      const vamlab::ExperimentConfig config = resolve_config(sweep_flags);
      std::cerr << "sweep: " << config.total_cells() << " cells -> " << config.out_dir << "\n";
      const vamlab::SweepOutcome outcome = vamlab::run_sweep(config);
      std::cerr << "sweep: " << outcome.rows.size() << " rows (" << outcome.resumed
                << " resumed, " << outcome.failures << " failures)\n";
      return outcome.failures > 0 ? kExitPartialSweep : kExitOk;
    }

    if (verify_cmd->parsed()) {
      vamlab::VerifyOptions options;
      options.seed = verify_seed;
      options.inject_fault = inject_fault;
      const vamlab::VerifyReport report = vamlab::run_theory_checks(options);
      std::cout << vamlab::verify_report_text(report);
      const std::string json = vamlab::verify_report_json(report);
      if (!verify_out.empty()) {
        std::filesystem::create_directories(verify_out);
        std::ofstream(std::filesystem::path(verify_out) / "verify.json") << json;
      } else {
        std::ofstream("verify.json") << json;
      }
      return report.all_passed ? kExitOk : kExitTheoryFailure;
    }

    if (summarize_cmd->parsed()) {
      const auto rows = vamlab::read_results_csv(rows_path);
      const vamlab::SummaryTable table = vamlab::summarize(rows);
      const std::string md = vamlab::summary_markdown(table);
      std::cout << md;
      if (!summary_out.empty()) {
        std::filesystem::create_directories(summary_out);
        std::ofstream(std::filesystem::path(summary_out) / "summary.md") << md;
        std::ofstream(std::filesystem::path(summary_out) / "summary.csv")
            << vamlab::summary_csv(table);
      }
      return kExitOk;
    }

    if (garnet_cmd->parsed()) {
      const vamlab::TabularMRP mrp = vamlab::generate_garnet(garnet_spec);
      const std::string json = vamlab::mrp_to_json(mrp, &garnet_spec);
      if (garnet_out.empty()) {
        std::cout << json << "\n";
      } else {
        std::ofstream(garnet_out) << json;
      }
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      vamlab::ExperimentConfig config = resolve_config(train_flags);
      config.loss_stride = train_stride;
      vamlab::TrainResult result;
      const vamlab::ResultRow row = vamlab::run_single_with_record(
          config, train_rho, train_k, train_alg, train_seed, &result);
      const std::string record = vamlab::run_record_json(config, row, result);
      if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
        std::ofstream(std::filesystem::path(config.out_dir) / "run.json") << record;
      }
      std::cout << record << "\n";
      std::cerr << (row.diverged ? "diverged" : "converged") << ", mae " << row.mae << ", rmse "
                << row.rmse << ", max " << row.max_error << ", " << row.wall_time_s << " s\n";
      return kExitOk;
    }
  } catch (const vamlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
