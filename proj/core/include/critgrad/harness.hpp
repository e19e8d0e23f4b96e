#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "critgrad/config.hpp"
#include "critgrad/optim.hpp"

namespace critgrad {

/// One row of run_seed<N>.csv.
struct RunRow {
  std::size_t step;
  double loss;
  double grad_norm;
  std::optional<double> dist_to_opt;
  std::size_t buffer_size;
  std::optional<double> buffer_min_proxy;
  double buffer_mean_age;
  std::size_t buffer_max_age;
  double gc_norm_mean;
  /// gc_norm_mean - grad_norm; 0 when the buffer was empty at aggregation.
  double norm_gap;
};

inline constexpr const char* kRunCsvHeader =
    "step,loss,grad_norm,dist_to_opt,buffer_size,buffer_min_proxy,buffer_mean_age,"
    "buffer_max_age,gc_norm_mean,norm_gap";
inline constexpr const char* kBufferCsvHeader = "step,entry,proxy_norm,true_norm,age";

std::vector<RunRow> to_rows(const Trajectory& trajectory);

/// Writers emit '.' decimals with 17 significant digits; empty optional
/// fields are left blank. Failures throw IoError.
void write_run_csv(const std::vector<RunRow>& rows, const std::filesystem::path& path);
void write_buffer_csv(const Trajectory& trajectory, const std::filesystem::path& path);
/// Throws IoError on unreadable files or missing columns.
std::vector<RunRow> read_run_csv(const std::filesystem::path& path);

/// Header-indexed numeric table; blank cells are NaN.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of `name`; throws IoError when absent.
  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Result of one seed.
struct SeedResult {
  std::uint64_t seed;
  Trajectory trajectory;
  std::vector<RunRow> rows;
};

struct Summary {
  std::size_t steps;
  std::vector<std::uint64_t> seeds;
  /// Loss at the optimum: exact when known, else the full-batch baseline.
  double reference_loss;
  std::vector<double> final_losses;
  double final_loss_mean;
  /// Sample standard deviation (0 for a single seed).
  double final_loss_stddev;
  /// Steps until (loss - ref) <= threshold·max(|ref|, 1); empty if never.
  std::vector<std::optional<std::size_t>> steps_to_threshold;
  double threshold;
};

/// Summary from per-seed rows; final_losses is empty when steps == 0.
Summary summarize(const ExperimentConfig& config, double reference_loss,
                  const std::vector<std::vector<RunRow>>& rows);
std::string to_json(const Summary& summary);

/// Train once per seed. The oracle and buffer streams are forked from the
/// seed; the problem is built once from config.problem.
std::vector<SeedResult> run_seeds(const ExperimentConfig& config);

/// run_seeds() plus, under config.out: run_seed<N>.csv, buffer_seed<N>.csv,
/// summary.json and config.json.
Summary run(const ExperimentConfig& config);

/// Age histogram of buffer snapshots (buffer_seed<N>.csv rows).
struct StalenessReport {
  std::map<std::size_t, std::size_t> counts;
  std::size_t max_age = 0;
  std::size_t samples = 0;
};
StalenessReport staleness_report(const CsvTable& buffer_rows);
StalenessReport staleness_report(const Trajectory& trajectory);

struct NormGapReport {
  std::vector<double> series;
  /// Mean gap over the last quarter of the steps (0 when empty).
  double last_quartile_mean = 0.0;
};
/// Needs the gc_norm_mean and grad_norm columns. Steps where gc_norm_mean is
/// 0 (empty buffer) report a gap of 0.
NormGapReport norm_gap_report(const CsvTable& run_rows);
NormGapReport norm_gap_report(const std::vector<RunRow>& rows);

struct AblationRow {
  Selection selection;
  Replacement replacement;
  AggregationMode aggregation;
  Summary summary;
  /// (final_loss_mean - ref) / |ref|; the plain difference when ref == 0.
  double relative_gap;
};
/// Every requested combination, sorted by (selection, replacement,
/// aggregation) name. Writes ablation.csv under config.out when `write`.
std::vector<AblationRow> ablate(const ExperimentConfig& config, bool write = true);

/// Train on a quadratic with recorded noise, then replay the recorded
/// weights through simulate_system.
struct SimulationCheck {
  std::vector<double> optimizer_norms;
  std::vector<double> system_norms;
  double max_discrepancy;
  std::size_t staleness;
};
SimulationCheck simulate_check(const ExperimentConfig& config, std::uint64_t seed);
void write_simulation_csv(const SimulationCheck& check, const std::filesystem::path& path);

}  // namespace critgrad
