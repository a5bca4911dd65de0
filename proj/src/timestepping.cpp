#include "rhc/timestepping.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rhc {

namespace {

constexpr double kSolveResidualTol = 1e-10;

// Midpoint keys are multiples of dt/2. Returns -1 if t_mid is off-lattice.
long long midpoint_key(double t_mid, double dt) {
  const double scaled = 2.0 * t_mid / dt;
  const double rounded = std::nearbyint(scaled);
  if (std::abs(scaled - rounded) > 1e-6 || rounded < 0) return -1;
  return static_cast<long long>(rounded);
}

Vector checked_solve(const StepOperator& op, const Vector& rhs, bool transposed) {
  Vector x = transposed ? Vector(op.lu.transpose().solve(rhs)) : Vector(op.lu.solve(rhs));
  const Vector residual =
      transposed ? Vector(op.implicit.transpose() * x - rhs) : Vector(op.implicit * x - rhs);
  const double scale = std::max(rhs.norm(), 1e-300);
  if (!x.allFinite() || residual.norm() > kSolveResidualTol * scale) {
    throw std::runtime_error("Crank-Nicolson linear solve failed at t = " +
                             std::to_string(op.t_mid));
  }
  return x;
}

}  // namespace

TimeGrid TimeGrid::make(double t0, double horizon, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("TimeGrid: dt must be positive");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon) || !std::isfinite(t0)) {
    throw std::invalid_argument("TimeGrid: horizon must be positive");
  }
  const double ratio = horizon / dt;
  const double steps = std::nearbyint(ratio);
  if (steps < 1.0 || std::abs(horizon - steps * dt) > 1e-12 * std::max(1.0, horizon)) {
    throw std::invalid_argument("TimeGrid: horizon " + std::to_string(horizon) +
                                " is not an integer multiple of dt " + std::to_string(dt));
  }
  return TimeGrid{t0, horizon, dt, static_cast<int>(steps)};
}

Propagator::Propagator(std::shared_ptr<const SpatialOperators> ops, Matrix load, double dt)
    : ops_(std::move(ops)), load_(std::move(load)), dt_(dt) {
  if (!ops_) throw std::invalid_argument("Propagator: null operators");
  if (!(dt_ > 0.0)) throw std::invalid_argument("Propagator: dt must be positive");
  if (load_.size() == 0) load_.resize(ops_->dofs(), 0);
  if (load_.rows() != ops_->dofs()) {
    throw std::invalid_argument("Propagator: load matrix rows do not match interior dofs");
  }
}

std::unique_ptr<StepOperator> Propagator::build_step(double t_mid) const {
  auto op = std::make_unique<StepOperator>();
  op->t_mid = t_mid;
  const SparseMatrix a = ops_->system_matrix(t_mid);
  op->implicit = ops_->mass() + (0.5 * dt_) * a;
  op->explicit_part = ops_->mass() - (0.5 * dt_) * a;
  op->implicit.makeCompressed();
  op->explicit_part.makeCompressed();
  op->lu.compute(Eigen::SparseMatrix<double>(op->implicit));
  if (op->lu.info() != Eigen::Success) {
    throw std::runtime_error("Crank-Nicolson factorization failed at t = " +
                             std::to_string(t_mid));
  }
  return op;
}

const StepOperator& Propagator::step(const TimeGrid& grid, int j) {
  if (grid.dt != dt_) {
    throw std::invalid_argument("Propagator: grid step differs from propagator step");
  }
  const double t_mid = grid.t0 + (j + 0.5) * dt_;
  const long long key = midpoint_key(t_mid, dt_);
  if (key < 0) {
    scratch_ = build_step(t_mid);
    return *scratch_;
  }
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    it = cache_.emplace(key, build_step(0.5 * dt_ * static_cast<double>(key))).first;
  }
  return *it->second;
}

void Propagator::release_before(double t) {
  while (!cache_.empty() && cache_.begin()->second->t_mid < t) {
    cache_.erase(cache_.begin());
  }
}

StateTrajectory Propagator::state_solve(const ControlTrajectory& u, const Vector& y0) {
  const TimeGrid& grid = u.grid;
  if (u.values.cols() != grid.nodes() || u.values.rows() != controls()) {
    throw std::invalid_argument("state_solve: control trajectory does not match grid/actuators");
  }
  if (y0.size() != ops_->dofs()) {
    throw std::invalid_argument("state_solve: initial state has wrong dimension");
  }
  StateTrajectory y{grid, Matrix(ops_->dofs(), grid.nodes())};
  y.values.col(0) = y0;
  const bool has_controls = controls() > 0;
  for (int j = 0; j < grid.steps; ++j) {
    const StepOperator& op = step(grid, j);
    Vector rhs = op.explicit_part * y.values.col(j);
    if (has_controls) {
      rhs.noalias() += (0.5 * dt_) * (load_ * (u.values.col(j) + u.values.col(j + 1)));
    }
    y.values.col(j + 1) = checked_solve(op, rhs, false);
  }
  return y;
}

StateTrajectory Propagator::adjoint_solve(const StateTrajectory& y) {
  const TimeGrid& grid = y.grid;
  if (y.values.rows() != ops_->dofs() || y.values.cols() != grid.nodes()) {
    throw std::invalid_argument("adjoint_solve: state trajectory does not match grid");
  }
  const SparseMatrix& k = ops_->stiffness();
  StateTrajectory p{grid, Matrix::Zero(ops_->dofs(), grid.nodes())};
  const StepOperator* next = nullptr;
  for (int j = grid.steps - 1; j >= 0; --j) {
    Vector rhs = -grid.weight(j + 1) * (k * y.values.col(j + 1));
    if (next != nullptr) {
      rhs.noalias() += next->explicit_part.transpose() * p.values.col(j + 1);
    }
    const StepOperator& op = step(grid, j);
    p.values.col(j) = checked_solve(op, rhs, true);
    next = &op;
  }
  return p;
}

ControlTrajectory Propagator::smooth_gradient(const StateTrajectory& p) const {
  const TimeGrid& grid = p.grid;
  ControlTrajectory g = ControlTrajectory::zeros(grid, controls());
  if (controls() == 0) return g;
  const Matrix btp = load_.transpose() * p.values;
  const int m = grid.steps;
  g.values.col(0) = -btp.col(0);
  for (int j = 1; j < m; ++j) {
    g.values.col(j) = -0.5 * (btp.col(j) + btp.col(j - 1));
  }
  g.values.col(m) = -btp.col(m - 1);
  return g;
}

StateTrajectory cn_state_solve(std::shared_ptr<const SpatialOperators> ops,
                               const ActuatorSet& actuators, const ControlTrajectory& u,
                               const Vector& y0) {
  Propagator prop(std::move(ops), actuators.load, u.grid.dt);
  return prop.state_solve(u, y0);
}

StateTrajectory cn_adjoint_solve(std::shared_ptr<const SpatialOperators> ops,
                                 const StateTrajectory& y) {
  Propagator prop(std::move(ops), Matrix(), y.grid.dt);
  return prop.adjoint_solve(y);
}

double control_cost(const Eigen::Ref<const Vector>& u, ControlNorm norm) {
  if (norm == ControlNorm::L2) return u.squaredNorm();
  const double l1 = u.lpNorm<1>();
  return l1 * l1;
}

double tracking_cost(const StateTrajectory& y, const SpatialOperators& ops) {
  double total = 0.0;
  for (int j = 0; j < y.grid.nodes(); ++j) {
    const auto col = y.values.col(j);
    total += y.grid.weight(j) * 0.5 * col.dot(ops.stiffness() * col);
  }
  return total;
}

double control_penalty(const ControlTrajectory& u, double beta, ControlNorm norm) {
  double total = 0.0;
  for (int j = 0; j < u.grid.nodes(); ++j) {
    total += u.grid.weight(j) * 0.5 * beta * control_cost(u.values.col(j), norm);
  }
  return total;
}

double objective_eval(const StateTrajectory& y, const ControlTrajectory& u,
                      const SpatialOperators& ops, double beta, ControlNorm norm) {
  if (!y.grid.same_as(u.grid) || y.values.cols() != u.values.cols()) {
    throw std::invalid_argument("objective_eval: state and control grids differ");
  }
  return tracking_cost(y, ops) + control_penalty(u, beta, norm);
}

double control_inner(const ControlTrajectory& a, const ControlTrajectory& b) {
  double total = 0.0;
  for (int j = 0; j < a.grid.nodes(); ++j) {
    total += a.grid.weight(j) * a.values.col(j).dot(b.values.col(j));
  }
  return total;
}

double control_norm(const ControlTrajectory& a) { return std::sqrt(control_inner(a, a)); }

}  // namespace rhc
