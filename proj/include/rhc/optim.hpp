#pragma once

#include <cstdint>
#include <vector>

#include "rhc/prox.hpp"
#include "rhc/timestepping.hpp"

namespace rhc {

struct SolverOptions {
  int max_iters = 20000;
  /// l2 stop: L2(t0,t0+T;R^N) norm of the reduced gradient.
  double grad_tol = 1e-5;
  /// l1 stop: ||u_{k+1}-u_k|| / ||u_{k+1}||.
  double rel_change_tol = 1e-4;
  /// Trailing window of the nonmonotone acceptance test.
  int memory = 10;
  double sufficient_decrease = 1e-4;
  double backtracking = 0.5;
  double alpha_min = 1e-8;
  double alpha_max = 1e8;
  int max_backtracks = 50;
  /// Bisection tolerance inside the squared-l1 prox.
  double prox_tol = 1e-10;
  bool keep_log = false;

  void validate() const;
};

/// One finite-horizon open-loop problem on `grid` from state y0.
struct OcpProblem {
  Propagator* propagator = nullptr;
  Vector y0;
  TimeGrid grid;
  double beta = 1.0;
  ControlNorm norm = ControlNorm::L2;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double residual = 0.0;
  double step = 0.0;
};

struct OcpSolution {
  ControlTrajectory u_star;
  StateTrajectory y_star;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double final_residual = 0.0;
  std::vector<IterationRecord> log;
};

struct GradientEvaluation {
  /// Smooth part -B'p, plus beta*u in the l2 case.
  ControlTrajectory gradient;
  StateTrajectory state;
  StateTrajectory adjoint;
  double smooth_value = 0.0;
  double objective = 0.0;
};

/// State solve, adjoint solve, and the nodal L2-in-time gradient.
GradientEvaluation reduced_gradient(OcpProblem& problem, const ControlTrajectory& u);

/// Objective value and state for u (forward solve only).
std::pair<double, StateTrajectory> evaluate_objective(OcpProblem& problem,
                                                      const ControlTrajectory& u);

/// BB1 step <s,s>/<s,g_diff>, clamped to [alpha_min, alpha_max]; alpha_max
/// whenever s = 0 or the curvature <s,g_diff> is not positive.
double bb_stepsize(const ControlTrajectory& s, const ControlTrajectory& g_diff,
                   const SolverOptions& options);

/// Barzilai-Borwein gradient method for the l2 cost. Starts from `initial`
/// when given, else from u = 0.
OcpSolution solve_ocp_l2(OcpProblem& problem, const SolverOptions& options,
                         const ControlTrajectory* initial = nullptr);

/// Proximal gradient with BB trial steps and a nonmonotone (trailing max)
/// sufficient-decrease test, for the squared-l1 cost.
OcpSolution solve_ocp_l1(OcpProblem& problem, const SolverOptions& options,
                         const ControlTrajectory* initial = nullptr);

/// Dispatches on problem.norm.
OcpSolution solve_ocp(OcpProblem& problem, const SolverOptions& options,
                      const ControlTrajectory* initial = nullptr);

/// Pointwise prox of alpha*G at every time node.
ControlTrajectory prox_trajectory(const ControlTrajectory& x, double alpha, double beta,
                                  ControlNorm norm, double tol);

/// ||u - prox_{alpha G}(u - alpha F'(u))|| / ||u|| (0 when u = 0 is a fixed point).
double fixed_point_residual(OcpProblem& problem, const ControlTrajectory& u, double alpha,
                            double prox_tol = 1e-10);

/// Shifts `previous` forward by `shift` grid steps onto `grid`, zero-padded.
ControlTrajectory shifted_warm_start(const ControlTrajectory& previous, const TimeGrid& grid,
                                     int shift);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  int trials = 0;
};

/// Central-difference directional derivatives against reduced_gradient on
/// random controls/directions. `smooth_only` drops the control cost from both
/// sides; otherwise the l2 cost beta/2 |u|_2^2 is included.
GradientCheckReport finite_difference_gradcheck(OcpProblem& problem, int trials,
                                                std::uint64_t seed, bool smooth_only);

}  // namespace rhc
