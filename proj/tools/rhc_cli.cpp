#include <atomic>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "rhc/experiment.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;

unsigned thread_count(std::size_t jobs) {
  unsigned n = 1;
  if (const char* env = std::getenv("RHC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

std::string row_directory(double T) { return "T_" + rhc::format_double(T); }

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const rhc::ExperimentConfig config = rhc::load_config(config_path);
  const rhc::Experiment experiment = rhc::build_experiment(config);
  const rhc::RunOutcome run = rhc::run_experiment(config, experiment, config.rhc.T);
  rhc::write_run_outputs(out_dir, run, experiment);
  const rhc::PerformanceMetrics& m = run.metrics;
  std::cout << "T=" << rhc::format_double(run.config.T) << " J=" << m.objective
            << " |y|_L2V=" << m.state_l2v << " |y(T_inf)|_V=" << m.final_v
            << " |y(T_inf)|_H=" << m.final_h << " iter=" << m.total_iterations
            << " status=" << rhc::run_status(run) << '\n';
  if (run.result.failed) {
    std::cerr << "solver failure: " << run.result.failure << '\n';
    return kExitSolver;
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  const rhc::ExperimentConfig config = rhc::load_config(config_path);
  std::vector<double> horizons = config.sweep;
  if (horizons.empty()) horizons.push_back(config.rhc.T);
  const rhc::Experiment experiment = rhc::build_experiment(config);

  std::vector<rhc::RunOutcome> runs(horizons.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < horizons.size(); i = next++) {
      runs[i] = rhc::run_experiment(config, experiment, horizons[i]);
      rhc::write_run_outputs(std::filesystem::path(out_dir) / row_directory(horizons[i]), runs[i],
                             experiment);
    }
  };
  const unsigned n = thread_count(horizons.size());
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::filesystem::create_directories(out_dir);
  rhc::write_file_atomic(std::filesystem::path(out_dir) / "table.csv", rhc::table_csv(runs));
  std::cout << rhc::table_csv(runs);
  bool failed = false;
  for (const auto& r : runs) {
    if (r.result.failed) {
      std::cerr << "T=" << rhc::format_double(r.config.T) << ": " << r.result.failure << '\n';
      failed = true;
    }
  }
  return failed ? kExitSolver : 0;
}

int cmd_theory(const std::string& config_path) {
  const rhc::ExperimentConfig config = rhc::load_config(config_path);
  const rhc::Experiment experiment = rhc::build_experiment(config);
  std::cout << rhc::theory_report(config, experiment).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receding horizon stabilization of linear parabolic equations"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Single receding horizon run");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->add_option("--out", out_dir, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Runs every prediction horizon in config.sweep");
  sweep->add_option("--config", config_path, "JSON experiment config")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();

  auto* theory = app.add_subcommand("theory", "Prints the stability constants as JSON");
  theory->add_option("--config", config_path, "JSON experiment config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir);
    return cmd_theory(config_path);
  } catch (const rhc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSolver;
  }
}
