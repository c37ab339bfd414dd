#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vamlab/mdp.hpp"
#include "vamlab/valuelearn.hpp"

namespace vamlab {

/// Full sweep description. Cells are the cross product
/// rhos x ranks x algorithms x seeds; the garnet field is a template whose
/// rho and seed are overridden per cell.
struct ExperimentConfig {
  GarnetSpec garnet;  // n, m, reward_bonus, discount
  std::vector<double> rhos = {0.5, 0.75, 1.0};
  std::vector<int> ranks = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 50};
  std::vector<std::string> algorithms = {"itervaml", "muzero_joint", "muzero_td", "mle"};
  int seeds = 16;
  uint64_t base_seed = 2024;
  int samples = 100000;
  TrainSchedule schedule;
  int itervaml_horizon = 1;
  int loss_stride = 0;  // 0 disables loss-curve recording
  std::string out_dir = "results";
  int workers = 0;  // 0 = hardware concurrency

  void validate() const;
  int total_cells() const;
};

/// Parses a plain key=value config file ('#' comments). Unknown keys are an
/// error; flags handled by the CLI override whatever the file sets.
ExperimentConfig load_config_file(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

struct ResultRow {
  double rho = 0.0;
  int k = 0;
  std::string algorithm;
  uint64_t seed = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double max_error = 0.0;
  bool diverged = false;
  double wall_time_s = 0.0;
};

/// Key identifying a cell, used for resume bookkeeping.
std::string row_key(double rho, int k, const std::string& algorithm, uint64_t seed);

/// Trains one cell and scores it against the exact value function.
ResultRow run_single(const ExperimentConfig& config, double rho, int k,
                     const std::string& algorithm, uint64_t seed);

/// Full run record for one cell (used by the `train` verb): spec, errors
/// and the model-loss curve at the configured stride.
std::string run_record_json(const ExperimentConfig& config, const ResultRow& row,
                            const TrainResult& result);
ResultRow run_single_with_record(const ExperimentConfig& config, double rho, int k,
                                 const std::string& algorithm, uint64_t seed,
                                 TrainResult* result_out);

struct SweepOutcome {
  std::vector<ResultRow> rows;  // every completed cell, canonical order
  int resumed = 0;              // cells skipped because results.csv had them
  int failures = 0;             // worker exceptions (not divergences)
};

/// Runs every cell over a worker pool. Rows stream to out_dir/results.csv in
/// canonical order as they complete, so a rerun with the same config is
/// byte-identical apart from the wall-time column; a partially written CSV
/// is picked up and completed. Also emits results.json, summary.md and
/// summary.csv.
SweepOutcome run_sweep(const ExperimentConfig& config);

// --- results.csv ------------------------------------------------------------
extern const char* kResultsCsvSchema;  // versioned header comment line
void write_results_header(std::ostream& out);
void write_result_row(std::ostream& out, const ResultRow& row);
std::vector<ResultRow> read_results_csv(const std::string& path);
std::string results_json(const std::vector<ResultRow>& rows);

/// Drops the trailing wall-time column from every data line (for the
/// determinism comparison).
std::string strip_wall_time_column(const std::string& csv_text);

// --- aggregation -------------------------------------------------------------
struct CellSummary {
  double rho = 0.0;
  int k = 0;
  std::string algorithm;
  int runs = 0;
  int diverged = 0;
  double mean_mae = 0.0;
  double stderr_mae = 0.0;  // standard error of the mean
  double stddev_mae = 0.0;  // sample standard deviation
  double mean_rmse = 0.0;
  double mean_max_error = 0.0;
  bool winner = false;  // lowest mean MAE among algorithms at this (rho, k)
  int seed_wins = 0;    // seeds where this algorithm has the lowest MAE
};

struct SummaryTable {
  std::vector<CellSummary> cells;  // canonical order
};

/// Mean / spread per (rho, k, algorithm); diverged runs are kept in the
/// aggregates and counted separately.
SummaryTable summarize(const std::vector<ResultRow>& rows);
std::string summary_markdown(const SummaryTable& table);
std::string summary_csv(const SummaryTable& table);

const CellSummary* find_cell(const SummaryTable& table, double rho, int k,
                             const std::string& algorithm);

}  // namespace vamlab
