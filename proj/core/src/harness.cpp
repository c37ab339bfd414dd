#include "vamlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "vamlab/errors.hpp"

namespace vamlab {

namespace fs = std::filesystem;

const char* kResultsCsvSchema = "# vamlab results v1";

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) throw ConfigError("bad number in CSV: " + s);
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void ExperimentConfig::validate() const {
  garnet.validate();
  schedule.validate();
  if (rhos.empty() || ranks.empty() || algorithms.empty()) {
    throw ConfigError("config: rho/rank/algorithm lists must be nonempty");
  }
  if (seeds < 1) throw ConfigError("config: seeds must be >= 1");
  if (samples < 1) throw ConfigError("config: samples must be >= 1");
  for (double r : rhos) {
    if (r < 0.0 || r > 1.0) throw ConfigError("config: rho outside [0, 1]");
  }
  for (int k : ranks) {
    if (k < 1) throw ConfigError("config: rank must be >= 1");
  }
  for (const auto& a : algorithms) {
    if (a != "itervaml" && a != "muzero_joint" && a != "muzero_td" && a != "mle") {
      throw ConfigError("config: unknown algorithm '" + a + "'");
    }
  }
  if (itervaml_horizon < 1 || itervaml_horizon > TransitionDataset::kMaxHorizon) {
    throw ConfigError("config: itervaml_horizon must be 1 or 2");
  }
}

int ExperimentConfig::total_cells() const {
  return static_cast<int>(rhos.size() * ranks.size() * algorithms.size()) * seeds;
}

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text, T (*one)(const std::string&)) {
  std::vector<T> out;
  for (const auto& piece : split(text, ',')) {
    const std::string t = trim(piece);
    if (!t.empty()) out.push_back(one(t));
  }
  return out;
}

double parse_double_str(const std::string& s) { return std::stod(s); }
int parse_int_str(const std::string& s) { return std::stoi(s); }
std::string parse_string_str(const std::string& s) { return s; }

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key == "n") c.garnet.n = std::stoi(value);
    else if (key == "m") c.garnet.m = std::stoi(value);
    else if (key == "reward_bonus") c.garnet.reward_bonus = std::stod(value);
    else if (key == "discount") c.garnet.discount = std::stod(value);
    else if (key == "rho") c.rhos = parse_list<double>(value, parse_double_str);
    else if (key == "ranks") c.ranks = parse_list<int>(value, parse_int_str);
    else if (key == "algorithms") c.algorithms = parse_list<std::string>(value, parse_string_str);
    else if (key == "seeds") c.seeds = std::stoi(value);
    else if (key == "base_seed") c.base_seed = std::stoull(value);
    else if (key == "samples") c.samples = std::stoi(value);
    else if (key == "out") c.out_dir = value;
    else if (key == "workers") c.workers = std::stoi(value);
    else if (key == "loss_stride") c.loss_stride = std::stoi(value);
    else if (key == "itervaml_horizon") c.itervaml_horizon = std::stoi(value);
    else if (key == "outer_iterations") c.schedule.outer_iterations = std::stoi(value);
    else if (key == "model_steps_per_outer") c.schedule.model_steps_per_outer = std::stoi(value);
    else if (key == "value_sweeps_per_outer") c.schedule.value_sweeps_per_outer = std::stoi(value);
    else if (key == "target_refresh_period") c.schedule.target_refresh_period = std::stoi(value);
    else if (key == "model_lr") c.schedule.model_lr = std::stod(value);
    else if (key == "value_lr") c.schedule.value_lr = std::stod(value);
    else if (key == "tolerance") c.schedule.tolerance = std::stod(value);
    else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string row_key(double rho, int k, const std::string& algorithm, uint64_t seed) {
  return format_double(rho) + "|" + std::to_string(k) + "|" + algorithm + "|" +
         std::to_string(seed);
}

ResultRow run_single_with_record(const ExperimentConfig& config, double rho, int k,
                                 const std::string& algorithm, uint64_t seed,
                                 TrainResult* result_out) {
  const auto t0 = std::chrono::steady_clock::now();
  GarnetSpec spec = config.garnet;
  spec.rho = rho;
  spec.seed = seed;
  const TabularMRP mrp = generate_garnet(spec);
  const ValueTable v_star = exact_value(mrp);
  const TransitionDataset dataset = sample_transitions(mrp, config.samples, seed);
  const TransitionCounts counts = count_transitions(dataset);
  LowRankModel model(mrp.n_states, k, seed);

  TrainResult result;
  if (algorithm == "itervaml") {
    result = train_itervaml(counts, mrp.reward, mrp.discount, std::move(model), config.schedule,
                            config.itervaml_horizon, config.loss_stride);
  } else if (algorithm == "muzero_joint") {
    result = train_muzero_joint(counts, mrp.reward, mrp.discount, std::move(model),
                                ValueTable::Zero(mrp.n_states), config.schedule,
                                config.loss_stride);
  } else if (algorithm == "muzero_td") {
    result = train_muzero_model_with_td(counts, mrp.reward, mrp.discount, std::move(model),
                                        config.schedule, config.loss_stride);
  } else if (algorithm == "mle") {
    result = train_mle(counts, mrp.reward, mrp.discount, std::move(model), config.schedule,
                       config.loss_stride);
  } else {
    throw ConfigError("unknown algorithm '" + algorithm + "'");
  }

  const ErrorStats err = value_error(result.value, v_star);
  ResultRow row;
  row.rho = rho;
  row.k = k;
  row.algorithm = algorithm;
  row.seed = seed;
  row.mae = err.mae;
  row.rmse = err.rmse;
  row.max_error = err.max_abs;
  row.diverged = result.diverged;
  row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (result_out != nullptr) *result_out = std::move(result);
  return row;
}

ResultRow run_single(const ExperimentConfig& config, double rho, int k,
                     const std::string& algorithm, uint64_t seed) {
  return run_single_with_record(config, rho, k, algorithm, seed, nullptr);
}

std::string run_record_json(const ExperimentConfig& config, const ResultRow& row,
                            const TrainResult& result) {
  GarnetSpec spec = config.garnet;
  spec.rho = row.rho;
  spec.seed = row.seed;
  nlohmann::json j;
  j["spec"] = {{"n", spec.n},          {"m", spec.m},
               {"rho", spec.rho},      {"reward_bonus", spec.reward_bonus},
               {"discount", spec.discount}, {"seed", spec.seed},
               {"samples", config.samples}};
  j["algorithm"] = row.algorithm;
  j["k"] = row.k;
  j["rho"] = row.rho;
  j["seed"] = row.seed;
  j["mae"] = row.mae;
  j["rmse"] = row.rmse;
  j["max_error"] = row.max_error;
  j["diverged"] = row.diverged;
  j["loss_stride"] = config.loss_stride;
  j["loss_curve"] = result.loss_curve;
  return j.dump(2);
}

void write_results_header(std::ostream& out) {
  out << kResultsCsvSchema << "\n";
  out << "rho,k,algorithm,seed,mae,rmse,max_error,diverged,wall_time_s\n";
}

void write_result_row(std::ostream& out, const ResultRow& r) {
  out << format_double(r.rho) << ',' << r.k << ',' << r.algorithm << ',' << r.seed << ','
      << format_double(r.mae) << ',' << format_double(r.rmse) << ','
      << format_double(r.max_error) << ',' << (r.diverged ? 1 : 0) << ','
      << format_double(r.wall_time_s) << '\n';
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open results file " + path);
  std::vector<ResultRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("rho,", 0) == 0) continue;  // header
    const auto parts = split(line, ',');
    if (parts.size() != 9) throw ConfigError("bad results row: " + line);
    ResultRow r;
    r.rho = parse_double(parts[0]);
    r.k = std::stoi(parts[1]);
    r.algorithm = parts[2];
    r.seed = std::stoull(parts[3]);
    r.mae = parse_double(parts[4]);
    r.rmse = parse_double(parts[5]);
    r.max_error = parse_double(parts[6]);
    r.diverged = parts[7] == "1";
    r.wall_time_s = parse_double(parts[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string results_json(const std::vector<ResultRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"rho", r.rho},
                   {"k", r.k},
                   {"algorithm", r.algorithm},
                   {"seed", r.seed},
                   {"mae", r.mae},
                   {"rmse", r.rmse},
                   {"max_error", r.max_error},
                   {"diverged", r.diverged},
                   {"wall_time_s", r.wall_time_s}});
  }
  return nlohmann::json{{"schema", "vamlab results v1"}, {"rows", std::move(arr)}}.dump(2);
}

std::string strip_wall_time_column(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const size_t comma = line.rfind(',');
    if (!line.empty() && line[0] != '#' && comma != std::string::npos) {
      out << line.substr(0, comma) << '\n';
    } else {
      out << line << '\n';
    }
  }
  return out.str();
}

// --- sweep -------------------------------------------------------------------

namespace {

struct Job {
  double rho;
  int k;
  std::string algorithm;
  uint64_t seed;
};

std::vector<Job> make_jobs(const ExperimentConfig& config) {
  std::vector<Job> jobs;
  jobs.reserve(static_cast<size_t>(config.total_cells()));
  for (double rho : config.rhos) {
    for (int k : config.ranks) {
      for (const auto& alg : config.algorithms) {
        for (int s = 0; s < config.seeds; ++s) {
          jobs.push_back({rho, k, alg, config.base_seed + static_cast<uint64_t>(s)});
        }
      }
    }
  }
  return jobs;
}

// Writes rows in job order regardless of completion order.
class OrderedWriter {
 public:
  OrderedWriter(std::ofstream out, int job_count)
      : out_(std::move(out)), pending_(static_cast<size_t>(job_count)) {}

  void post(int index, ResultRow row) {
    std::lock_guard<std::mutex> lock(mu_);
    pending_[static_cast<size_t>(index)] = std::move(row);
    ready_[static_cast<size_t>(index)] = true;
    while (next_ < static_cast<int>(pending_.size()) && ready_[static_cast<size_t>(next_)]) {
      write_result_row(out_, pending_[static_cast<size_t>(next_)]);
      out_.flush();
      ++next_;
    }
  }

  void init_flags() { ready_.assign(pending_.size(), false); }

 private:
  std::ofstream out_;
  std::mutex mu_;
  std::vector<ResultRow> pending_;
  std::vector<bool> ready_;
  int next_ = 0;
};

}  // namespace

SweepOutcome run_sweep(const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  const fs::path csv_path = fs::path(config.out_dir) / "results.csv";

  // Resume bookkeeping: completed cells are never recomputed.
  std::unordered_set<std::string> done;
  std::vector<ResultRow> existing;
  if (fs::exists(csv_path)) {
    existing = read_results_csv(csv_path.string());
    for (const auto& r : existing) done.insert(row_key(r.rho, r.k, r.algorithm, r.seed));
  }

  const std::vector<Job> all_jobs = make_jobs(config);
  std::vector<Job> todo;
  for (const auto& j : all_jobs) {
    if (done.find(row_key(j.rho, j.k, j.algorithm, j.seed)) == done.end()) todo.push_back(j);
  }

  SweepOutcome outcome;
  outcome.resumed = static_cast<int>(all_jobs.size() - todo.size());

  std::ofstream out;
  if (existing.empty()) {
    out.open(csv_path, std::ios::trunc);
    write_results_header(out);
  } else {
    out.open(csv_path, std::ios::app);
  }
  if (!out) throw ConfigError("cannot open " + csv_path.string() + " for writing");

  OrderedWriter writer(std::move(out), static_cast<int>(todo.size()));
  writer.init_flags();

  std::atomic<int> next_job{0};
  std::atomic<int> failures{0};
  std::mutex rows_mu;
  std::vector<ResultRow> new_rows(todo.size());

  int workers = config.workers > 0 ? config.workers
                                   : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min<int>(workers, std::max<int>(1, static_cast<int>(todo.size())));

  auto worker_loop = [&]() {
    while (true) {
      const int idx = next_job.fetch_add(1);
      if (idx >= static_cast<int>(todo.size())) break;
      const Job& job = todo[static_cast<size_t>(idx)];
      ResultRow row;
      try {
        row = run_single(config, job.rho, job.k, job.algorithm, job.seed);
      } catch (const std::exception&) {
        row.rho = job.rho;
        row.k = job.k;
        row.algorithm = job.algorithm;
        row.seed = job.seed;
        row.mae = row.rmse = row.max_error = std::numeric_limits<double>::quiet_NaN();
        row.diverged = true;
        failures.fetch_add(1);
      }
      {
        std::lock_guard<std::mutex> lock(rows_mu);
        new_rows[static_cast<size_t>(idx)] = row;
      }
      writer.post(idx, std::move(row));
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker_loop);
  for (auto& t : pool) t.join();

  outcome.failures = failures.load();

  // Full row set in canonical order for aggregation and the JSON mirror.
  std::map<std::string, ResultRow> by_key;
  for (const auto& r : existing) by_key[row_key(r.rho, r.k, r.algorithm, r.seed)] = r;
  for (const auto& r : new_rows) by_key[row_key(r.rho, r.k, r.algorithm, r.seed)] = r;
  outcome.rows.reserve(all_jobs.size());
  for (const auto& j : all_jobs) {
    outcome.rows.push_back(by_key.at(row_key(j.rho, j.k, j.algorithm, j.seed)));
  }

  std::ofstream((fs::path(config.out_dir) / "results.json")) << results_json(outcome.rows);
  const SummaryTable table = summarize(outcome.rows);
  std::ofstream((fs::path(config.out_dir) / "summary.md")) << summary_markdown(table);
  std::ofstream((fs::path(config.out_dir) / "summary.csv")) << summary_csv(table);
  return outcome;
}

// --- aggregation ---------------------------------------------------------------

SummaryTable summarize(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw ConfigError("summarize: no rows");

  // Preserve first-appearance order of rho, k and algorithm values.
  std::vector<double> rhos;
  std::vector<int> ks;
  std::vector<std::string> algs;
  for (const auto& r : rows) {
    if (std::find(rhos.begin(), rhos.end(), r.rho) == rhos.end()) rhos.push_back(r.rho);
    if (std::find(ks.begin(), ks.end(), r.k) == ks.end()) ks.push_back(r.k);
    if (std::find(algs.begin(), algs.end(), r.algorithm) == algs.end()) {
      algs.push_back(r.algorithm);
    }
  }

  SummaryTable table;
  for (double rho : rhos) {
    for (int k : ks) {
      std::vector<CellSummary> group;
      for (const auto& alg : algs) {
        std::vector<const ResultRow*> cell;
        for (const auto& r : rows) {
          if (r.rho == rho && r.k == k && r.algorithm == alg) cell.push_back(&r);
        }
        if (cell.empty()) continue;
        CellSummary s;
        s.rho = rho;
        s.k = k;
        s.algorithm = alg;
        s.runs = static_cast<int>(cell.size());
        double sum = 0.0, sum_rmse = 0.0, sum_max = 0.0;
        for (const auto* r : cell) {
          sum += r->mae;
          sum_rmse += r->rmse;
          sum_max += r->max_error;
          if (r->diverged) ++s.diverged;
        }
        s.mean_mae = sum / s.runs;
        s.mean_rmse = sum_rmse / s.runs;
        s.mean_max_error = sum_max / s.runs;
        double ss = 0.0;
        for (const auto* r : cell) ss += (r->mae - s.mean_mae) * (r->mae - s.mean_mae);
        s.stddev_mae = s.runs > 1 ? std::sqrt(ss / (s.runs - 1)) : 0.0;
        s.stderr_mae = s.stddev_mae / std::sqrt(static_cast<double>(s.runs));
        group.push_back(std::move(s));
      }
      if (group.empty()) continue;
      // Flag the minimizing algorithm and count per-seed wins.
      size_t best = 0;
      for (size_t i = 1; i < group.size(); ++i) {
        if (group[i].mean_mae < group[best].mean_mae) best = i;
      }
      group[best].winner = true;
      // Per-seed head-to-head: who has the smallest MAE for each seed.
      std::map<uint64_t, std::pair<double, std::string>> seed_best;
      for (const auto& r : rows) {
        if (r.rho != rho || r.k != k) continue;
        auto it = seed_best.find(r.seed);
        if (it == seed_best.end() || r.mae < it->second.first) {
          seed_best[r.seed] = {r.mae, r.algorithm};
        }
      }
      for (auto& s : group) {
        for (const auto& [seed, winner] : seed_best) {
          (void)seed;
          if (winner.second == s.algorithm) ++s.seed_wins;
        }
      }
      for (auto& s : group) table.cells.push_back(std::move(s));
    }
  }
  return table;
}

const CellSummary* find_cell(const SummaryTable& table, double rho, int k,
                             const std::string& algorithm) {
  for (const auto& c : table.cells) {
    if (c.rho == rho && c.k == k && c.algorithm == algorithm) return &c;
  }
  return nullptr;
}

std::string summary_markdown(const SummaryTable& table) {
  std::ostringstream os;
  os << "# Garnet sweep summary\n\n";
  os << "Mean MAE against the exact value function, +/- standard error of the mean\n";
  os << "(sample standard deviation in parentheses). Winner per (rho, k) in bold;\n";
  os << "diverged runs stay in the aggregates and are counted separately.\n";

  std::vector<double> rhos;
  for (const auto& c : table.cells) {
    if (std::find(rhos.begin(), rhos.end(), c.rho) == rhos.end()) rhos.push_back(c.rho);
  }
  for (double rho : rhos) {
    std::vector<int> ks;
    std::vector<std::string> algs;
    for (const auto& c : table.cells) {
      if (c.rho != rho) continue;
      if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
      if (std::find(algs.begin(), algs.end(), c.algorithm) == algs.end()) {
        algs.push_back(c.algorithm);
      }
    }
    os << "\n## rho = " << format_double(rho) << "\n\n| k |";
    for (const auto& a : algs) os << " " << a << " |";
    os << "\n|---|";
    for (size_t i = 0; i < algs.size(); ++i) os << "---|";
    os << "\n";
    for (int k : ks) {
      os << "| " << k << " |";
      for (const auto& a : algs) {
        const CellSummary* c = find_cell(table, rho, k, a);
        if (c == nullptr) {
          os << " - |";
          continue;
        }
        std::ostringstream cell;
        cell.precision(4);
        cell << c->mean_mae << " +/- " << c->stderr_mae << " (" << c->stddev_mae << ")";
        if (c->diverged > 0) cell << " [" << c->diverged << " div]";
        os << (c->winner ? " **" + cell.str() + "**" : " " + cell.str()) << " |";
      }
      os << "\n";
    }
    os << "\n### Orderings\n\n";
    for (int k : ks) {
      const CellSummary* w = nullptr;
      int total_seeds = 0;
      for (const auto& a : algs) {
        const CellSummary* c = find_cell(table, rho, k, a);
        if (c == nullptr) continue;
        total_seeds = std::max(total_seeds, c->runs);
        if (c->winner) w = c;
      }
      if (w == nullptr) continue;
      os << "- k=" << k << ": " << w->algorithm << " wins (mean MAE "
         << format_double(w->mean_mae) << ", best in " << w->seed_wins << "/" << total_seeds
         << " seeds)\n";
    }
  }
  return os.str();
}

std::string summary_csv(const SummaryTable& table) {
  std::ostringstream os;
  os << "# vamlab summary v1\n";
  os << "rho,k,algorithm,runs,diverged,mean_mae,stderr_mae,stddev_mae,mean_rmse,"
        "mean_max_error,winner,seed_wins\n";
  for (const auto& c : table.cells) {
    os << format_double(c.rho) << ',' << c.k << ',' << c.algorithm << ',' << c.runs << ','
       << c.diverged << ',' << format_double(c.mean_mae) << ',' << format_double(c.stderr_mae)
       << ',' << format_double(c.stddev_mae) << ',' << format_double(c.mean_rmse) << ','
       << format_double(c.mean_max_error) << ',' << (c.winner ? 1 : 0) << ',' << c.seed_wins
       << '\n';
  }
  return os.str();
}

}  // namespace vamlab
