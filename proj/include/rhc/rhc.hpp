#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rhc/optim.hpp"

namespace rhc {

struct RhcConfig {
  double T = 1.5;
  double delta = 0.25;
  double T_inf = 10.0;
  double beta = 1000.0;
  ControlNorm norm = ControlNorm::L2;
  double dt = 0.0125;
  SolverOptions solver;
  /// Permits T == delta (the window then keeps its whole solution).
  bool allow_short_horizon = false;
  /// Optional perturbation of the measured state before each window solve.
  std::function<void(double t, Vector& y)> measurement;

  /// Throws std::invalid_argument when the grid relations do not hold.
  void validate() const;
};

struct WindowSummary {
  int index = 0;
  double t0 = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double final_residual = 0.0;
};

struct RhcResult {
  /// State over [0, T_inf] on the dt grid.
  StateTrajectory y_rh;
  /// Control over [0, T_inf]; the node t_k carries the value chosen by window k.
  ControlTrajectory u_rh;
  /// Control of window k on its kept segment [t_k, t_k + delta], endpoints included.
  std::vector<ControlTrajectory> segments;
  std::vector<WindowSummary> windows;
  /// Number of dt-steps actually propagated (< y_rh.grid.steps after a failure).
  int completed_steps = 0;
  bool failed = false;
  std::string failure;
};

RhcResult rhc_run(Propagator& propagator, const Vector& y0, const RhcConfig& config);

/// u = 0 over [0, T_inf].
RhcResult uncontrolled_run(Propagator& propagator, const Vector& y0, double T_inf);

struct PerformanceMetrics {
  double objective = 0.0;       ///< J over [0, T_inf] with the applied control
  double state_l2v = 0.0;       ///< ||y||_{L2(0,T_inf;V)}
  double final_v = 0.0;
  double final_h = 0.0;
  int total_iterations = 0;
};

PerformanceMetrics performance_metrics(const RhcResult& result, const SpatialOperators& ops,
                                       const RhcConfig& config);

struct DecayFit {
  double zeta_hat = 0.0;
  /// exp(intercept) of the fit of log ||y||_H^2.
  double c_hat = 0.0;
  int samples = 0;
};

/// Least squares fit log(s_i) = log(c) - zeta * t_i over the samples with
/// t_i >= t_from. Zero samples end the fit (only the positive prefix is used).
DecayFit decay_rate_fit(const std::vector<double>& times, const std::vector<double>& squared_norms,
                        double t_from);

/// Fit of ||y_rh(t_k)||_H^2 at the window starts and T_inf, over the tail half.
DecayFit decay_rate_fit(const RhcResult& result, const SpatialOperators& ops,
                        const RhcConfig& config);

struct SparsityProfile {
  std::vector<double> zero_fraction;
  double overall = 0.0;
};

SparsityProfile sparsity_profile(const ControlTrajectory& u);
SparsityProfile sparsity_profile(const RhcResult& result);

/// Decay fitted and the final H-norm below the initial one.
bool is_stabilizing(const RhcResult& result, const SpatialOperators& ops, const RhcConfig& config);

}  // namespace rhc
