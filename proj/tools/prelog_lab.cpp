// prelog_lab: command-line front end for the experiment families.
//
//   prelog_lab <subcommand> [--config scenario.json] [--workers N] [--a.b value ...]
//
// Any other --dotted.path option overrides the matching JSON field.
// Exit status: 0 success, 1 invariant failure, 2 configuration error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prelog/experiments.hpp"
#include "prelog/io.hpp"
#include "prelog/parallel.hpp"

namespace {

constexpr int kConfigExit = 2;

std::vector<std::pair<std::string, std::string>> split_overrides(
    const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0) {
      throw prelog::ConfigError(a, "unexpected argument");
    }
    const std::string body = a.substr(2);
    const std::size_t eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      out.emplace_back(body, extras[++i]);
    } else {
      throw prelog::ConfigError(body, "option needs a value");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification lab for noncoherent block-fading channels"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"validate", "closed-form front-ends against the quadrature oracle"},
      {"rank", "numerical rank of the symbol-rate fading covariance"},
      {"spark", "full-spark check of [Qo^T Qe^T]"},
      {"jacobian-mc", "Monte Carlo singularity check of the Jacobian plus the explicit witness"},
      {"identify", "joint recovery of fading and data from oversampled samples"},
      {"mi-sweep", "mutual information versus SNR"},
      {"prelog-report", "slope fits and reference pre-logs from mi-sweep CSV files"}};

  std::string config_path;
  int workers = 0;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "scenario JSON file");
    sub->add_option("--workers", workers,
                    "worker threads (default: PRELOG_LAB_WORKERS or 1)")
        ->check(CLI::PositiveNumber);
    sub->allow_extras();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    const prelog::Experiment experiment = prelog::experiment_from_string(sub->get_name());
    nlohmann::json config = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) {
        throw prelog::ConfigError(config_path, "cannot open scenario file");
      }
      std::stringstream buf;
      buf << f.rdbuf();
      config = prelog::parse_config_text(buf.str(), config_path);
    }
    for (const auto& [path, value] : split_overrides(sub->remaining())) {
      prelog::apply_override(config, path, value);
    }
    if (workers <= 0) {
      workers = config.contains("workers") ? 0 : prelog::default_workers();
    }
    const prelog::Scenario scenario = prelog::parse_scenario(config, experiment, workers);
    const prelog::RunOutcome out = prelog::run(scenario, std::cout);
    return out.exit_code;
  } catch (const prelog::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 1;
  }
}
