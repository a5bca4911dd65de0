#pragma once

#include <map>
#include <memory>

#include <Eigen/SparseLU>

#include "rhc/actuators.hpp"
#include "rhc/mesh_fem.hpp"

namespace rhc {

/// Uniform grid t0 + j*dt, j = 0..steps, with steps*dt = horizon.
struct TimeGrid {
  double t0 = 0.0;
  double horizon = 0.0;
  double dt = 0.0;
  int steps = 0;

  /// Throws std::invalid_argument unless dt > 0 and horizon is a positive
  /// integer multiple of dt (to 1e-12 relative).
  static TimeGrid make(double t0, double horizon, double dt);

  [[nodiscard]] int nodes() const { return steps + 1; }
  [[nodiscard]] double time(int j) const { return t0 + j * dt; }
  /// Trapezoidal quadrature weight of node j.
  [[nodiscard]] double weight(int j) const {
    return (j == 0 || j == steps) ? 0.5 * dt : dt;
  }
  [[nodiscard]] bool same_as(const TimeGrid& other) const {
    return steps == other.steps && t0 == other.t0 && dt == other.dt;
  }
};

/// Nodal control values; column j is u(t_j) in R^N. Piecewise linear in time.
struct ControlTrajectory {
  TimeGrid grid;
  Matrix values;

  static ControlTrajectory zeros(const TimeGrid& grid, int controls) {
    return {grid, Matrix::Zero(controls, grid.nodes())};
  }
  [[nodiscard]] int controls() const { return static_cast<int>(values.rows()); }
};

/// Interior-dof coefficient vectors; column j is y(t_j).
struct StateTrajectory {
  TimeGrid grid;
  Matrix values;
};

enum class ControlNorm { L1, L2 };

/// Crank-Nicolson operators of one step with A evaluated at the step midpoint:
/// implicit = M + dt/2 A, explicit = M - dt/2 A.
struct StepOperator {
  double t_mid = 0.0;
  SparseMatrix implicit;
  SparseMatrix explicit_part;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

/// Forward and adjoint Crank-Nicolson integrator for the controlled system
///   M y' + A(t) y = B u(t).
/// Step factorizations are cached by absolute step midpoint, so windows that
/// revisit the same times (receding horizon, optimizer iterations) reuse them.
/// Not thread-safe; give every thread its own propagator.
class Propagator {
 public:
  Propagator(std::shared_ptr<const SpatialOperators> ops, Matrix load, double dt);

  [[nodiscard]] const SpatialOperators& ops() const { return *ops_; }
  [[nodiscard]] const std::shared_ptr<const SpatialOperators>& ops_ptr() const { return ops_; }
  [[nodiscard]] const Matrix& load() const { return load_; }
  [[nodiscard]] double dt() const { return dt_; }
  [[nodiscard]] int controls() const { return static_cast<int>(load_.cols()); }

  /// Forward sweep from y0 under control u.
  StateTrajectory state_solve(const ControlTrajectory& u, const Vector& y0);

  /// Exact discrete adjoint of state_solve for the smooth cost
  /// 1/2 sum_j w_j y_j'K y_j. Returns p with p_m = 0; column j < m belongs to
  /// the step [t_j, t_{j+1}]. Sign convention: the smooth gradient is -B'p.
  StateTrajectory adjoint_solve(const StateTrajectory& y);

  /// Nodal L2(t0,t0+T;R^N) representative of the smooth gradient given p.
  [[nodiscard]] ControlTrajectory smooth_gradient(const StateTrajectory& p) const;

  /// Drops cached steps whose midpoint lies before t.
  void release_before(double t);
  [[nodiscard]] std::size_t cached_steps() const { return cache_.size(); }

 private:
  const StepOperator& step(const TimeGrid& grid, int j);
  std::unique_ptr<StepOperator> build_step(double t_mid) const;

  std::shared_ptr<const SpatialOperators> ops_;
  Matrix load_;
  double dt_;
  std::map<long long, std::unique_ptr<StepOperator>> cache_;
  std::unique_ptr<StepOperator> scratch_;
};

/// One-shot forward solve (builds a temporary propagator).
StateTrajectory cn_state_solve(std::shared_ptr<const SpatialOperators> ops,
                               const ActuatorSet& actuators, const ControlTrajectory& u,
                               const Vector& y0);

/// One-shot adjoint solve for a state trajectory.
StateTrajectory cn_adjoint_solve(std::shared_ptr<const SpatialOperators> ops,
                                 const StateTrajectory& y);

/// |u|_1^2 or |u|_2^2 of one control vector.
double control_cost(const Eigen::Ref<const Vector>& u, ControlNorm norm);

/// Trapezoidal quadrature of 1/2 y'Ky + beta/2 |u|_*^2. Throws
/// std::invalid_argument on a grid mismatch.
double objective_eval(const StateTrajectory& y, const ControlTrajectory& u,
                      const SpatialOperators& ops, double beta, ControlNorm norm);

/// 1/2 sum_j w_j y_j'K y_j.
double tracking_cost(const StateTrajectory& y, const SpatialOperators& ops);

/// beta/2 sum_j w_j |u_j|_*^2.
double control_penalty(const ControlTrajectory& u, double beta, ControlNorm norm);

/// Trapezoidal L2(t0,t0+T;R^N) inner product of two nodal trajectories.
double control_inner(const ControlTrajectory& a, const ControlTrajectory& b);
double control_norm(const ControlTrajectory& a);

}  // namespace rhc
