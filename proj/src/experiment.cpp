#include "rhc/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace rhc {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where, "expected an object");
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError(where.empty() ? item.key() : where + "." + item.key(), "unknown key");
    }
  }
}

std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

double number_or(const json& obj, const std::string& where, const std::string& key,
                 double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join(where, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(join(where, key), "must be finite");
  return d;
}

double positive_or(const json& obj, const std::string& where, const std::string& key,
                   double fallback) {
  const double d = number_or(obj, where, key, fallback);
  if (!(d > 0.0)) throw ConfigError(join(where, key), "must be positive");
  return d;
}

int int_or(const json& obj, const std::string& where, const std::string& key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(join(where, key), "expected an integer");
  return v.get<int>();
}

std::string string_or(const json& obj, const std::string& where, const std::string& key,
                      const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(join(where, key), "expected a string");
  return v.get<std::string>();
}

Point parse_point(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(where, "expected [x1, x2]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

std::vector<ActuatorRegion> parse_regions(const json& arr) {
  std::vector<ActuatorRegion> regions;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "actuators[" + std::to_string(i) + "]";
    const json& r = arr[i];
    check_keys(r, where, {"lower", "upper", "subdivisions"});
    if (!r.contains("lower") || !r.contains("upper")) {
      throw ConfigError(where, "needs 'lower' and 'upper'");
    }
    ActuatorRegion region;
    region.parent.lower = parse_point(r.at("lower"), where + ".lower");
    region.parent.upper = parse_point(r.at("upper"), where + ".upper");
    if (r.contains("subdivisions")) {
      const json& d = r.at("subdivisions");
      if (!d.is_array() || d.size() != 2 || !d[0].is_number_integer() ||
          !d[1].is_number_integer()) {
        throw ConfigError(where + ".subdivisions", "expected [d1, d2]");
      }
      region.subdivisions = {d[0].get<int>(), d[1].get<int>()};
    }
    regions.push_back(region);
  }
  return regions;
}

ControlNorm parse_norm(const std::string& s, const std::string& where) {
  if (s == "l2") return ControlNorm::L2;
  if (s == "l1") return ControlNorm::L1;
  throw ConfigError(where, "expected \"l1\" or \"l2\"");
}

const char* norm_name(ControlNorm n) { return n == ControlNorm::L1 ? "l1" : "l2"; }

void validate_horizon(const RhcConfig& base, double T, const std::string& where) {
  RhcConfig probe = base;
  probe.T = T;
  try {
    probe.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, "", {"mesh", "coefficients", "initial_state", "actuators", "rhc", "solver",
                       "sweep", "seed", "theory"});
  ExperimentConfig c;

  if (doc.contains("mesh")) {
    const json& m = doc.at("mesh");
    check_keys(m, "mesh", {"nx", "ny"});
    c.nx = int_or(m, "mesh", "nx", c.nx);
    c.ny = int_or(m, "mesh", "ny", c.ny);
    if (c.nx < 3) throw ConfigError("mesh.nx", "needs at least 3 nodes");
    if (c.ny < 3) throw ConfigError("mesh.ny", "needs at least 3 nodes");
  }

  if (doc.contains("coefficients")) {
    const json& co = doc.at("coefficients");
    if (co.is_string()) {
      c.coefficients = co.get<std::string>();
    } else {
      check_keys(co, "coefficients", {"preset", "nu"});
      c.coefficients = string_or(co, "coefficients", "preset", c.coefficients);
      c.nu = positive_or(co, "coefficients", "nu", c.nu);
    }
    if (c.coefficients != "paper_default" && c.coefficients != "heat") {
      throw ConfigError("coefficients", "unknown preset '" + c.coefficients + "'");
    }
  }

  c.initial_state = string_or(doc, "", "initial_state", c.initial_state);
  if (c.initial_state != "paper_default" && c.initial_state != "zero" &&
      c.initial_state != "first_eigenfunction") {
    throw ConfigError("initial_state", "unknown preset '" + c.initial_state + "'");
  }

  if (doc.contains("actuators")) {
    const json& a = doc.at("actuators");
    if (a.is_string()) {
      c.actuator_preset = a.get<std::string>();
      if (c.actuator_preset != "ex1" && c.actuator_preset != "ex2") {
        throw ConfigError("actuators", "unknown preset '" + c.actuator_preset + "'");
      }
    } else if (a.is_array()) {
      if (a.empty()) throw ConfigError("actuators", "needs at least one rectangle");
      c.actuator_preset.clear();
      c.actuator_regions = parse_regions(a);
      try {
        (void)build_rectangular_actuators(c.actuator_regions);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("actuators", e.what());
      }
    } else {
      throw ConfigError("actuators", "expected a preset name or a list of rectangles");
    }
  }

  if (doc.contains("rhc")) {
    const json& r = doc.at("rhc");
    check_keys(r, "rhc", {"T", "delta", "T_inf", "beta", "norm", "dt", "allow_short_horizon",
                          "measurement_noise"});
    c.rhc.T = positive_or(r, "rhc", "T", c.rhc.T);
    c.rhc.delta = positive_or(r, "rhc", "delta", c.rhc.delta);
    c.rhc.T_inf = positive_or(r, "rhc", "T_inf", c.rhc.T_inf);
    c.rhc.beta = positive_or(r, "rhc", "beta", c.rhc.beta);
    c.rhc.dt = positive_or(r, "rhc", "dt", c.rhc.dt);
    c.rhc.norm = parse_norm(string_or(r, "rhc", "norm", "l2"), "rhc.norm");
    if (r.contains("allow_short_horizon")) {
      if (!r.at("allow_short_horizon").is_boolean()) {
        throw ConfigError("rhc.allow_short_horizon", "expected true or false");
      }
      c.rhc.allow_short_horizon = r.at("allow_short_horizon").get<bool>();
    }
    c.measurement_noise = number_or(r, "rhc", "measurement_noise", 0.0);
    if (c.measurement_noise < 0.0) {
      throw ConfigError("rhc.measurement_noise", "must be non-negative");
    }
  }

  if (doc.contains("solver")) {
    const json& s = doc.at("solver");
    check_keys(s, "solver", {"max_iters", "grad_tol", "rel_change_tol", "memory",
                             "sufficient_decrease", "backtracking", "alpha_min", "alpha_max",
                             "max_backtracks", "prox_tol"});
    SolverOptions& o = c.rhc.solver;
    o.max_iters = int_or(s, "solver", "max_iters", o.max_iters);
    o.grad_tol = positive_or(s, "solver", "grad_tol", o.grad_tol);
    o.rel_change_tol = positive_or(s, "solver", "rel_change_tol", o.rel_change_tol);
    o.memory = int_or(s, "solver", "memory", o.memory);
    o.sufficient_decrease = positive_or(s, "solver", "sufficient_decrease", o.sufficient_decrease);
    o.backtracking = positive_or(s, "solver", "backtracking", o.backtracking);
    o.alpha_min = positive_or(s, "solver", "alpha_min", o.alpha_min);
    o.alpha_max = positive_or(s, "solver", "alpha_max", o.alpha_max);
    o.max_backtracks = int_or(s, "solver", "max_backtracks", o.max_backtracks);
    o.prox_tol = positive_or(s, "solver", "prox_tol", o.prox_tol);
    try {
      o.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("solver", e.what());
    }
  }

  validate_horizon(c.rhc, c.rhc.T, "rhc.T");

  if (doc.contains("sweep")) {
    const json& sw = doc.at("sweep");
    if (!sw.is_array() || sw.empty()) throw ConfigError("sweep", "expected a non-empty list");
    for (std::size_t i = 0; i < sw.size(); ++i) {
      const std::string where = "sweep[" + std::to_string(i) + "]";
      if (!sw[i].is_number()) throw ConfigError(where, "expected a number");
      const double T = sw[i].get<double>();
      validate_horizon(c.rhc, T, where);
      c.sweep.push_back(T);
    }
  }

  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    c.seed = doc.at("seed").get<std::uint64_t>();
  }

  if (doc.contains("theory")) {
    const json& t = doc.at("theory");
    check_keys(t, "theory", {"c_hat_nu", "i_HVprime", "alpha_ell", "lambda_rate", "Theta1",
                             "Theta2", "c4", "c5", "r", "tracking"});
    TheoryOverrides& o = c.theory;
    if (t.contains("c_hat_nu")) o.c_hat_nu = positive_or(t, "theory", "c_hat_nu", 1.0);
    if (t.contains("i_HVprime")) o.i_HVprime = positive_or(t, "theory", "i_HVprime", 1.0);
    if (t.contains("alpha_ell")) o.alpha_ell = positive_or(t, "theory", "alpha_ell", 1.0);
    o.lambda_rate = positive_or(t, "theory", "lambda_rate", o.lambda_rate);
    o.Theta1 = positive_or(t, "theory", "Theta1", o.Theta1);
    o.Theta2 = positive_or(t, "theory", "Theta2", o.Theta2);
    o.c4 = positive_or(t, "theory", "c4", o.c4);
    o.c5 = positive_or(t, "theory", "c5", o.c5);
    o.r = number_or(t, "theory", "r", o.r);
    if (o.r < 2.0) throw ConfigError("theory.r", "must be at least 2");
    const std::string tracking = string_or(t, "theory", "tracking", "H");
    if (tracking != "H" && tracking != "V") throw ConfigError("theory.tracking", "expected H or V");
    o.tracking = tracking == "H" ? Tracking::H : Tracking::V;
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

Experiment build_experiment(const ExperimentConfig& config) {
  Experiment e;
  e.mesh = build_uniform_mesh(config.nx, config.ny);
  Coefficients coefficients =
      config.coefficients == "heat" ? heat_coefficients(config.nu) : paper_coefficients();
  coefficients.nu = config.nu;
  e.ops = std::make_shared<const SpatialOperators>(e.mesh, coefficients);

  std::vector<ActuatorRegion> regions = config.actuator_regions;
  if (config.actuator_preset == "ex1") regions = example_two_parent_regions();
  if (config.actuator_preset == "ex2") regions = example_thirteen_regions();
  e.actuators = assemble_actuator_loads(e.mesh, build_rectangular_actuators(regions));

  const double amplitude = config.initial_state == "paper_default"        ? 3.0
                           : config.initial_state == "first_eigenfunction" ? 1.0
                                                                           : 0.0;
  e.y0 = project_function(e.mesh, [amplitude](Point x) {
    return amplitude * std::sin(std::numbers::pi * x.x1) * std::sin(std::numbers::pi * x.x2);
  });
  return e;
}

RunOutcome run_experiment(const ExperimentConfig& config, const Experiment& experiment, double T) {
  RunOutcome out;
  out.config = config.rhc;
  out.config.T = T;
  if (config.measurement_noise > 0.0) {
    const double sigma = config.measurement_noise;
    auto rng = std::make_shared<std::mt19937_64>(config.seed);
    out.config.measurement = [sigma, rng](double, Vector& y) {
      std::normal_distribution<double> normal(0.0, sigma);
      for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += normal(*rng);
    };
  }
  Propagator propagator(experiment.ops, experiment.actuators.load, out.config.dt);
  out.result = rhc_run(propagator, experiment.y0, out.config);
  out.metrics = performance_metrics(out.result, *experiment.ops, out.config);
  out.decay = decay_rate_fit(out.result, *experiment.ops, out.config);
  out.sparsity = sparsity_profile(out.result);
  out.stabilizing = is_stabilizing(out.result, *experiment.ops, out.config);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string state_csv(const RunOutcome& run, const SpatialOperators& ops) {
  std::string s = "t,norm_H,norm_V\n";
  const StateTrajectory& y = run.result.y_rh;
  for (int j = 0; j <= run.result.completed_steps; ++j) {
    const Vector col = y.values.col(j);
    s += format_double(y.grid.time(j)) + ',' + format_double(sobolev_norm(col, ops, NormKind::H)) +
         ',' + format_double(sobolev_norm(col, ops, NormKind::V)) + '\n';
  }
  return s;
}

std::string controls_csv(const RunOutcome& run) {
  const ControlTrajectory& u = run.result.u_rh;
  std::string s = "t";
  for (int i = 0; i < u.controls(); ++i) s += ",u_" + std::to_string(i + 1);
  s += '\n';
  for (int j = 0; j <= run.result.completed_steps; ++j) {
    s += format_double(u.grid.time(j));
    for (int i = 0; i < u.controls(); ++i) s += ',' + format_double(u.values(i, j));
    s += '\n';
  }
  return s;
}

std::string run_status(const RunOutcome& run) {
  if (run.result.failed) return "failed";
  return run.stabilizing ? "stabilized" : "not_stabilized";
}

json summary_json(const RunOutcome& run, const Experiment& experiment) {
  json j;
  j["schema_version"] = 1;
  j["config"] = {{"T", run.config.T},
                 {"delta", run.config.delta},
                 {"T_inf", run.config.T_inf},
                 {"beta", run.config.beta},
                 {"norm", norm_name(run.config.norm)},
                 {"dt", run.config.dt},
                 {"actuators", experiment.actuators.size()},
                 {"coverage", coverage_fraction(experiment.actuators)},
                 {"dofs", experiment.ops->dofs()}};
  j["metrics"] = {{"J", run.metrics.objective},
                  {"y_L2V", run.metrics.state_l2v},
                  {"y_final_V", run.metrics.final_v},
                  {"y_final_H", run.metrics.final_h},
                  {"iter", run.metrics.total_iterations}};
  j["decay_fit"] = {{"zeta_hat", run.decay.zeta_hat},
                    {"c_hat", run.decay.c_hat},
                    {"samples", run.decay.samples}};
  j["sparsity"] = {{"zero_fraction", run.sparsity.zero_fraction},
                   {"overall", run.sparsity.overall}};
  json windows = json::array();
  int unconverged = 0;
  for (const auto& w : run.result.windows) {
    windows.push_back({{"k", w.index},
                       {"t0", w.t0},
                       {"objective", w.objective},
                       {"iterations", w.iterations},
                       {"converged", w.converged},
                       {"residual", w.final_residual}});
    if (!w.converged) ++unconverged;
  }
  j["windows"] = windows;
  j["unconverged_windows"] = unconverged;
  j["status"] = run_status(run);
  if (run.result.failed) j["error"] = run.result.failure;
  return j;
}

std::string table_csv(const std::vector<RunOutcome>& runs) {
  std::string s = "T,J,y_L2V,y_final_V,y_final_H,iter,zeta_hat,status\n";
  for (const auto& r : runs) {
    s += format_double(r.config.T) + ',' + format_double(r.metrics.objective) + ',' +
         format_double(r.metrics.state_l2v) + ',' + format_double(r.metrics.final_v) + ',' +
         format_double(r.metrics.final_h) + ',' + std::to_string(r.metrics.total_iterations) +
         ',' + format_double(r.decay.zeta_hat) + ',' + run_status(r) + '\n';
  }
  return s;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_run_outputs(const std::filesystem::path& dir, const RunOutcome& run,
                       const Experiment& experiment) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "state.csv", state_csv(run, *experiment.ops));
  write_file_atomic(dir / "controls.csv", controls_csv(run));
  write_file_atomic(dir / "summary.json", summary_json(run, experiment).dump(2) + "\n");
}

json theory_report(const ExperimentConfig& config, const Experiment& experiment) {
  const RhcConfig& rc = config.rhc;
  const TheoryOverrides& o = config.theory;
  json report;
  json errors = json::array();

  std::vector<double> times;
  for (int k = 0; k <= 128; ++k) times.push_back(2.0 * std::numbers::pi * k / 128.0);
  const CoefficientBounds bounds =
      coefficient_bounds(experiment.ops->coefficients(), experiment.mesh, times, o.r);

  TheoryConstants c;
  c.N_ab = bounds.n_ab();
  c.C_U = experiment.actuators.control_constant;
  c.beta = rc.beta;
  c.N_actuators = experiment.actuators.size();
  c.nu = experiment.ops->nu();
  c.i_HVprime = o.i_HVprime.value_or(std::sqrt(poincare_unit_square()));
  c.alpha_ell = o.alpha_ell.value_or(default_alpha_ell(rc.beta));
  c.lambda_rate = o.lambda_rate;
  c.Theta1 = o.Theta1;
  c.Theta2 = o.Theta2;
  c.c4 = o.c4;
  c.c5 = o.c5;
  std::string chat_source = "config";
  if (o.c_hat_nu) {
    c.c_hat_nu = *o.c_hat_nu;
  } else {
    std::vector<double> horizons{rc.T};
    if (rc.delta != rc.T) horizons.push_back(rc.delta);
    c.c_hat_nu = calibrate_chat(experiment.ops, horizons, rc.dt, c.N_ab);
    chat_source = "calibrated";
  }

  report["T"] = rc.T;
  report["delta"] = rc.delta;
  report["beta"] = rc.beta;
  report["norm"] = norm_name(rc.norm);
  report["tracking"] = o.tracking == Tracking::H ? "H" : "V";
  report["N_actuators"] = c.N_actuators;
  report["C_U"] = c.C_U;
  report["r"] = bounds.r;
  report["a_Lr"] = bounds.a_lr;
  report["b_sup"] = bounds.b_sup;
  report["div_b_Lr"] = bounds.div_b_lr;
  report["N_ab"] = bounds.n_ab();
  report["N_tilde"] = bounds.n_tilde();
  report["c_hat_nu"] = c.c_hat_nu;
  report["c_hat_nu_source"] = chat_source;
  report["i_HVprime"] = c.i_HVprime;
  report["alpha_ell"] = c.alpha_ell;
  report["lambda_rate"] = c.lambda_rate;
  report["Theta1"] = c.Theta1;
  report["Theta2"] = c.Theta2;
  report["c4"] = c.c4;
  report["c5"] = c.c5;

  auto guarded = [&errors](const char* name, auto&& fn) -> json {
    try {
      return fn();
    } catch (const std::exception& e) {
      errors.push_back(std::string(name) + ": " + e.what());
      return nullptr;
    }
  };
  report["gamma1_T"] = guarded("gamma1_T", [&] { return json(gamma1(rc.T, c)); });
  report["gamma1_delta"] = guarded("gamma1_delta", [&] { return json(gamma1(rc.delta, c)); });
  report["gamma2"] = {
      {"l2_H", gamma2_eval(rc.T, c, ControlNorm::L2, Tracking::H)},
      {"l1_H", gamma2_eval(rc.T, c, ControlNorm::L1, Tracking::H)},
      {"l2_V", gamma2_eval(rc.T, c, ControlNorm::L2, Tracking::V)},
      {"l1_V", gamma2_eval(rc.T, c, ControlNorm::L1, Tracking::V)},
  };
  const double g2 = gamma2_eval(rc.T, c, rc.norm, o.tracking);
  report["gamma2_T"] = g2;

  report["theta1"] = nullptr;
  report["theta2"] = nullptr;
  report["alpha"] = nullptr;
  report["eta"] = nullptr;
  report["zeta"] = nullptr;
  report["eta_in_unit_interval"] = false;
  try {
    const HorizonFactors f = alpha_horizon(rc.T, rc.delta, g2, c.alpha_ell);
    report["theta1"] = f.theta1;
    report["theta2"] = f.theta2;
    report["alpha"] = f.alpha;
    const ZetaResult z = zeta_rate(f.alpha, rc.delta, gamma1(rc.delta, c), g2);
    report["eta"] = z.eta;
    report["eta_in_unit_interval"] = z.valid;
    if (z.valid) {
      report["zeta"] = z.zeta;
    } else {
      errors.push_back("zeta: eta is outside (0,1), no decay rate certified");
    }
  } catch (const std::exception& e) {
    errors.push_back(std::string("alpha: ") + e.what());
  }
  report["errors"] = errors;
  return report;
}

}  // namespace rhc
