#include "rhc/rhc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rhc {

namespace {

int steps_of(double length, double dt, const char* what) {
  const double ratio = length / dt;
  const double rounded = std::nearbyint(ratio);
  if (rounded < 1.0 || std::abs(length - rounded * dt) > 1e-12 * std::max(1.0, length)) {
    throw std::invalid_argument(std::string("RhcConfig: ") + what +
                                " must be a positive integer multiple of dt");
  }
  return static_cast<int>(rounded);
}

double squared_h(const SpatialOperators& ops, const Eigen::Ref<const Vector>& v) {
  return v.dot(ops.mass() * v);
}

}  // namespace

void RhcConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("RhcConfig: dt must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("RhcConfig: beta must be positive");
  const int s = steps_of(delta, dt, "delta");
  const int m = steps_of(T, dt, "T");
  const int total = steps_of(T_inf, dt, "T_inf");
  if (m < s || (m == s && !allow_short_horizon)) {
    throw std::invalid_argument("RhcConfig: the horizon T must exceed delta");
  }
  if (total % s != 0) throw std::invalid_argument("RhcConfig: T_inf must be a multiple of delta");
  solver.validate();
}

RhcResult rhc_run(Propagator& propagator, const Vector& y0, const RhcConfig& config) {
  config.validate();
  if (propagator.dt() != config.dt) {
    throw std::invalid_argument("rhc_run: propagator step differs from config dt");
  }
  const SpatialOperators& ops = propagator.ops();
  if (y0.size() != ops.dofs()) throw std::invalid_argument("rhc_run: y0 has wrong dimension");

  const TimeGrid grid = TimeGrid::make(0.0, config.T_inf, config.dt);
  const int s = steps_of(config.delta, config.dt, "delta");
  const int window_count = grid.steps / s;
  const int n = propagator.controls();

  RhcResult result;
  result.y_rh = {grid, Matrix::Zero(ops.dofs(), grid.nodes())};
  result.u_rh = ControlTrajectory::zeros(grid, n);
  result.y_rh.values.col(0) = y0;

  ControlTrajectory previous;
  bool have_previous = false;
  for (int k = 0; k < window_count; ++k) {
    const int first = k * s;
    const double t_k = grid.time(first);
    const Vector y_k = result.y_rh.values.col(first);
    Vector measured = y_k;
    if (config.measurement) config.measurement(t_k, measured);

    OcpProblem problem{&propagator, measured, TimeGrid::make(t_k, config.T, config.dt), config.beta,
                       config.norm};
    OcpSolution sol;
    try {
      sol = solve_ocp(problem, config.solver, have_previous ? &previous : nullptr);
    } catch (const std::exception& e) {
      result.failed = true;
      result.failure = "window " + std::to_string(k) + " at t = " + std::to_string(t_k) + ": " +
                       e.what();
      break;
    }
    if (!sol.u_star.values.allFinite() || !sol.y_star.values.allFinite()) {
      result.failed = true;
      result.failure = "window " + std::to_string(k) + " produced non-finite values";
      break;
    }
    result.windows.push_back(
        {k, t_k, sol.objective, sol.iterations, sol.converged, sol.final_residual});

    ControlTrajectory segment{TimeGrid::make(t_k, config.delta, config.dt),
                              sol.u_star.values.leftCols(s + 1)};
    Matrix kept_state;
    if (config.measurement) {
      kept_state = propagator.state_solve(segment, y_k).values;
    } else {
      kept_state = sol.y_star.values.leftCols(s + 1);
    }
    result.y_rh.values.middleCols(first + 1, s) = kept_state.rightCols(s);
    result.u_rh.values.middleCols(first, s) = segment.values.leftCols(s);
    if (k == window_count - 1) result.u_rh.values.col(grid.steps) = segment.values.col(s);
    result.segments.push_back(std::move(segment));
    result.completed_steps = first + s;

    previous = shifted_warm_start(
        sol.u_star, TimeGrid::make(t_k + config.delta, config.T, config.dt), s);
    have_previous = true;
    propagator.release_before(t_k + config.delta);
  }
  return result;
}

RhcResult uncontrolled_run(Propagator& propagator, const Vector& y0, double T_inf) {
  const TimeGrid grid = TimeGrid::make(0.0, T_inf, propagator.dt());
  RhcResult result;
  result.u_rh = ControlTrajectory::zeros(grid, propagator.controls());
  result.y_rh = propagator.state_solve(result.u_rh, y0);
  result.completed_steps = grid.steps;
  propagator.release_before(T_inf);
  return result;
}

PerformanceMetrics performance_metrics(const RhcResult& result, const SpatialOperators& ops,
                                       const RhcConfig& config) {
  PerformanceMetrics m;
  const double tracking = tracking_cost(result.y_rh, ops);
  double penalty = 0.0;
  for (const auto& seg : result.segments) penalty += control_penalty(seg, config.beta, config.norm);
  m.objective = tracking + penalty;
  m.state_l2v = std::sqrt(2.0 * tracking);
  const Vector last = result.y_rh.values.col(result.completed_steps);
  m.final_v = sobolev_norm(last, ops, NormKind::V);
  m.final_h = sobolev_norm(last, ops, NormKind::H);
  for (const auto& w : result.windows) m.total_iterations += w.iterations;
  return m;
}

DecayFit decay_rate_fit(const std::vector<double>& times, const std::vector<double>& squared_norms,
                        double t_from) {
  if (times.size() != squared_norms.size()) {
    throw std::invalid_argument("decay_rate_fit: times and norms differ in length");
  }
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(squared_norms[i] > 0.0)) break;
    if (times[i] < t_from) continue;
    const double l = std::log(squared_norms[i]);
    st += times[i];
    sl += l;
    stt += times[i] * times[i];
    stl += times[i] * l;
    ++n;
  }
  DecayFit fit;
  fit.samples = n;
  if (n < 2) return fit;
  const double denom = n * stt - st * st;
  if (!(denom > 0.0)) return fit;
  const double slope = (n * stl - st * sl) / denom;
  const double intercept = (sl - slope * st) / n;
  fit.zeta_hat = -slope;
  fit.c_hat = std::exp(intercept);
  return fit;
}

DecayFit decay_rate_fit(const RhcResult& result, const SpatialOperators& ops,
                        const RhcConfig& config) {
  const TimeGrid& grid = result.y_rh.grid;
  const int s = steps_of(config.delta, grid.dt, "delta");
  std::vector<double> times;
  std::vector<double> norms;
  for (int j = 0; j <= result.completed_steps; j += s) {
    times.push_back(grid.time(j));
    norms.push_back(squared_h(ops, result.y_rh.values.col(j)));
  }
  return decay_rate_fit(times, norms, grid.t0 + 0.5 * grid.horizon);
}

SparsityProfile sparsity_profile(const ControlTrajectory& u) {
  SparsityProfile p;
  const Eigen::Index nodes = u.values.cols();
  long long zeros_total = 0;
  for (Eigen::Index i = 0; i < u.values.rows(); ++i) {
    long long zeros = 0;
    for (Eigen::Index j = 0; j < nodes; ++j) {
      if (u.values(i, j) == 0.0) ++zeros;
    }
    zeros_total += zeros;
    p.zero_fraction.push_back(nodes > 0 ? static_cast<double>(zeros) / nodes : 1.0);
  }
  p.overall = u.values.size() > 0 ? static_cast<double>(zeros_total) / u.values.size() : 1.0;
  return p;
}

SparsityProfile sparsity_profile(const RhcResult& result) { return sparsity_profile(result.u_rh); }

bool is_stabilizing(const RhcResult& result, const SpatialOperators& ops, const RhcConfig& config) {
  if (result.failed) return false;
  const DecayFit fit = decay_rate_fit(result, ops, config);
  const PerformanceMetrics m = performance_metrics(result, ops, config);
  const double initial = sobolev_norm(result.y_rh.values.col(0), ops, NormKind::H);
  return fit.samples >= 2 && fit.zeta_hat > 0.0 && m.final_h < initial;
}

}  // namespace rhc
