#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedsem/federation.hpp"

namespace fedsem {

enum class Normalization { automatic, on, off };

struct ExperimentConfig {
  std::string preset;
  std::string corpus = "synthetic";  // "synthetic" or a path for load_corpus
  int synthetic_classes = 4;
  int synthetic_per_class = 100;
  int validation_size = 40;
  int clients = 4;
  double alpha_dir = 1.0;
  int rounds = 10;
  int epoch_budget = 12;
  int max_epochs = 0;  // 0: E_total
  std::optional<double> lambda;  // empty: adaptive
  std::vector<Strategy> strategies{Strategy::baseline, Strategy::utilitarian, Strategy::proportional_fairness};
  SemComConfig semcom = SemComConfig::desk_scale();
  TrainingHyper hyper{.adam = {.learning_rate = 2e-3}};  // desk scale trains faster than 3e-4
  double initial_loss = 1.0;
  double utility_epsilon = 1e-8;
  double aggregation_epsilon = 1e-8;
  std::vector<std::uint64_t> seeds{1, 2};
  int threads = 1;
  std::string output_dir = "fedsem-out";
  Normalization normalize_efficiency = Normalization::automatic;

  void validate() const;

  static ExperimentConfig desk_scale();
  static ExperimentConfig paper_scale();
};

/// Strict `key = value` parser. `preset` is applied first wherever it
/// appears; every other key overrides it. Unknown or repeated keys and bad
/// values throw ConfigError naming the key.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Applies one `key = value` override with the same parsing and validation.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Reads FEDSEM_SEED, if set, into a single-seed list.
void apply_seed_override(ExperimentConfig& cfg);

/// One row per round per strategy per seed.
struct CsvRow {
  int round = 0;
  std::string strategy;
  std::uint64_t seed = 0;
  double psnr_db = 0.0;
  double mse = 0.0;
  double avg_client_loss = 0.0;
  double g_part = 0.0;
  double g_effort = 0.0;
  double total_steps = 0.0;
  std::vector<std::size_t> selected;
  std::vector<int> epochs;
  double efficiency = 0.0;
  std::optional<double> rel_efficiency;  // efficiency / baseline efficiency, same seed and round
};

inline constexpr const char* kCsvVersionLine = "# fedsem-rounds v1";
inline constexpr const char* kCsvHeader =
    "round,strategy,seed,psnr_db,mse,avg_client_loss,g_part,g_effort,total_steps,selected_set,epochs_vector,"
    "efficiency,rel_efficiency";

struct RunResult {
  Strategy strategy;
  std::uint64_t seed;
  std::vector<RoundRecord> records;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::vector<CsvRow> rows;
};

/// Data and initial model shared by every strategy for one seed.
struct SeedSetup {
  std::vector<std::vector<Tensor>> client_data;
  std::vector<Tensor> validation;
  ModelParams initial;
  Partition partition;
};

SeedSetup prepare_seed(const ExperimentConfig& cfg, const SemComModel& model, std::uint64_t seed);

/// Runs every (seed, strategy) pair on paired data and fills the CSV rows,
/// including Baseline-normalized efficiency when requested.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::vector<CsvRow> to_rows(const std::vector<RunResult>& runs);

/// rel_efficiency = efficiency / baseline efficiency for the same seed and
/// round. Throws ConfigError if normalization is `on` and a baseline is missing.
void normalize_efficiency(std::vector<CsvRow>& rows, Normalization mode);

void write_csv(std::ostream& os, const std::vector<CsvRow>& rows);
std::vector<CsvRow> read_csv(std::istream& is);

/// Fixed-layout text summary. Per strategy: terminal PSNR mean [min, max]
/// over seeds, mean terminal G_part and G_effort, mean terminal relative
/// efficiency; then one line per (strategy, seed) and a trend check per seed.
std::string emit_summary(const std::vector<CsvRow>& rows);

/// Writes rounds.csv and summary.txt into cfg.output_dir.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

std::string format_double(double v);

}  // namespace fedsem

namespace fedsem {

/// Parses a one-shot selection instance:
///   epoch_budget = 4
///   max_epochs = 3        (optional, defaults to epoch_budget)
///   lambda = 0            (optional)
///   utilities = 5, 3, 1
///   participation = 0, 0, 0   (optional, defaults to zeros)
SelectionProblem parse_selection_problem(const std::string& text);

std::string format_plan(const SelectionPlan& plan);

}  // namespace fedsem
