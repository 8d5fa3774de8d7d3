#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prelog/fading_model.hpp"
#include "prelog/types.hpp"

namespace prelog {

enum class Experiment { Validate, Rank, Spark, JacobianMC, Identify, MISweep, PrelogReport };

const char* to_string(Experiment e);
// Subcommand name to experiment; throws ConfigError for unknown names.
Experiment experiment_from_string(const std::string& name);

struct EstimatorConfig {
  std::string kind = "direct_mixture";  // or bound_chain
  std::string frontend = "both";        // oversampled, symbol_rate, both
  int n_outer = 200;
  int n_inner = 10000;
  std::uint64_t n_samples = 100000;  // kNN / Jensen samples for the bound chain
  int knn_k = 4;
  std::uint64_t trials = 10000;      // jacobian-mc
  int n_starts = 20;                 // identify
  bool noiseless = false;            // identify
  int draws = 100;                   // validate
  bool coherent = false;
};

struct Scenario {
  Experiment experiment = Experiment::Validate;
  nlohmann::json config;  // echo after overrides
  std::optional<BlockSpec> spec;
  std::vector<double> rho_grid_db;
  std::uint64_t seed = 0;
  EstimatorConfig estimator;
  double rho_db = 30.0;
  std::vector<int> pilot_positions{1};
  std::vector<cplx> pilot_values;  // defaults to 1 at every position
  int n_blocks = 10;
  std::string output = "prelog_out";
  std::vector<std::string> inputs;
  int workers = 1;
};

// Parses JSON text; syntax errors become ConfigError naming the line.
nlohmann::json parse_config_text(const std::string& text, const std::string& origin);

// Sets j[a][b][c] for the dotted path "a.b.c". The value is read as JSON when
// it parses, otherwise kept as a string.
void apply_override(nlohmann::json& j, const std::string& dotted_path, const std::string& value);

// Validates the configuration for `experiment`; throws ConfigError.
Scenario parse_scenario(const nlohmann::json& config, Experiment experiment, int workers);

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 1 invariant failure
  std::string message;
  std::vector<std::string> artifacts;  // paths relative to output
  nlohmann::json summary;
};

// Runs the experiment, writes its artifacts and manifest.json under
// scenario.output, and prints a one-line verdict to `log`.
RunOutcome run(const Scenario& scenario, std::ostream& log);

struct SeriesFit {
  std::string input;
  std::string frontend;
  std::string estimator;
  int n = 0;
  int q = 0;
  int points = 0;
  double slope_per_channel_use = 0.0;
  double slope_se_per_channel_use = 0.0;
  double r_squared = 0.0;
  double rho_lo_db = 0.0;
  double rho_hi_db = 0.0;
};

struct PrelogReport {
  std::vector<SeriesFit> series;
  double ref_symbol_rate = 0.0;  // 1 - Q/N
  double ref_oversampled = 0.0;  // 1 - 1/N
  std::optional<double> gap;
  std::string note;
};

// Reads mi-sweep CSV files; series are (input, frontend, estimator). The gap
// is oversampled minus symbol_rate when both appear, else last minus first.
// Throws ConfigError on mismatched (n, q) or series with fewer than 3 points.
PrelogReport report_prelog(const std::vector<std::string>& inputs);

}  // namespace prelog
