#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rhc/rhc.hpp"
#include "rhc/theory.hpp"

namespace rhc {

/// Raised for unreadable or invalid configuration; `key` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error("config key '" + key + "': " + message), key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct TheoryOverrides {
  std::optional<double> c_hat_nu;
  std::optional<double> i_HVprime;
  std::optional<double> alpha_ell;
  double lambda_rate = 1.0;
  double Theta1 = 1.0;
  double Theta2 = 1.0;
  double c4 = 1.0;
  double c5 = 1.0;
  double r = 2.0;
  Tracking tracking = Tracking::H;
};

struct ExperimentConfig {
  int nx = 33;
  int ny = 33;
  std::string coefficients = "paper_default";
  double nu = 0.1;
  std::string initial_state = "paper_default";
  std::string actuator_preset = "ex1";
  std::vector<ActuatorRegion> actuator_regions;
  RhcConfig rhc;
  /// Standard deviation of Gaussian noise added to each measured state (0 = exact).
  double measurement_noise = 0.0;
  std::vector<double> sweep;
  std::uint64_t seed = 0;
  TheoryOverrides theory;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
/// Reads and validates a JSON config file. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Mesh, operators, actuators and initial state described by a config.
struct Experiment {
  Mesh mesh;
  std::shared_ptr<const SpatialOperators> ops;
  ActuatorSet actuators;
  Vector y0;
};

Experiment build_experiment(const ExperimentConfig& config);

struct RunOutcome {
  RhcConfig config;
  RhcResult result;
  PerformanceMetrics metrics;
  DecayFit decay;
  SparsityProfile sparsity;
  bool stabilizing = false;
};

/// One receding horizon run with prediction horizon T (overriding config.rhc.T).
RunOutcome run_experiment(const ExperimentConfig& config, const Experiment& experiment, double T);

/// Shortest decimal string that reads back to the same double.
std::string format_double(double v);

std::string state_csv(const RunOutcome& run, const SpatialOperators& ops);
std::string controls_csv(const RunOutcome& run);
nlohmann::json summary_json(const RunOutcome& run, const Experiment& experiment);

/// Header plus one row per run: T,J,y_L2V,y_final_V,y_final_H,iter,zeta_hat,status.
std::string table_csv(const std::vector<RunOutcome>& runs);

/// "stabilized", "not_stabilized" or "failed".
std::string run_status(const RunOutcome& run);

/// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Writes state.csv, controls.csv and summary.json into `dir`.
void write_run_outputs(const std::filesystem::path& dir, const RunOutcome& run,
                       const Experiment& experiment);

/// Constants report for the config's T and delta.
nlohmann::json theory_report(const ExperimentConfig& config, const Experiment& experiment);

}  // namespace rhc
