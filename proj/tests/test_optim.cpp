#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rhc/optim.hpp"

using namespace rhc;

namespace {

constexpr double kPi = std::numbers::pi;

struct Fixture {
  std::shared_ptr<const SpatialOperators> ops;
  ActuatorSet actuators;
  std::unique_ptr<Propagator> prop;
  OcpProblem problem;

  Fixture(int n, Coefficients coefficients, std::vector<ActuatorRegion> regions, double horizon,
          double beta, ControlNorm norm, double amplitude = 3.0) {
    ops = std::make_shared<const SpatialOperators>(build_uniform_mesh(n, n), std::move(coefficients));
    actuators = assemble_actuator_loads(ops->mesh(), build_rectangular_actuators(regions));
    prop = std::make_unique<Propagator>(ops, actuators.load, 0.0125);
    problem.propagator = prop.get();
    problem.y0 = project_function(ops->mesh(), [amplitude](Point x) {
      return amplitude * std::sin(kPi * x.x1) * std::sin(kPi * x.x2);
    });
    problem.grid = TimeGrid::make(0.0, horizon, 0.0125);
    problem.beta = beta;
    problem.norm = norm;
  }
};

std::vector<ActuatorRegion> two_actuators() { return {{Box{{0.2, 0.2}, {0.8, 0.6}}, {2, 1}}}; }
std::vector<ActuatorRegion> one_actuator() { return {{Box{{0.25, 0.25}, {0.75, 0.75}}, {1, 1}}}; }

/// Minimizer of the l2 objective from the normal equations of the dense
/// control-to-state map: (S'QS + beta W) u = -S'Q y_free.
double dense_l2_optimum(Fixture& f) {
  const TimeGrid& grid = f.problem.grid;
  const int n = f.prop->controls();
  const int nodes = grid.nodes();
  const int dofs = f.ops->dofs();
  const int unknowns = n * nodes;
  Eigen::MatrixXd S(dofs * nodes, unknowns);
  for (int c = 0; c < unknowns; ++c) {
    ControlTrajectory e = ControlTrajectory::zeros(grid, n);
    e.values.data()[c] = 1.0;
    const StateTrajectory y = f.prop->state_solve(e, Vector::Zero(dofs));
    S.col(c) = Eigen::Map<const Eigen::VectorXd>(y.values.data(), dofs * nodes);
  }
  const StateTrajectory free_run =
      f.prop->state_solve(ControlTrajectory::zeros(grid, n), f.problem.y0);
  const Eigen::Map<const Eigen::VectorXd> y_free(free_run.values.data(), dofs * nodes);

  const Eigen::MatrixXd K(f.ops->stiffness());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(dofs * nodes, dofs * nodes);
  Eigen::VectorXd W(unknowns);
  for (int j = 0; j < nodes; ++j) {
    Q.block(j * dofs, j * dofs, dofs, dofs) = grid.weight(j) * K;
    W.segment(j * n, n).setConstant(grid.weight(j));
  }
  Eigen::MatrixXd H = S.transpose() * Q * S;
  H.diagonal() += f.problem.beta * W;
  const Eigen::VectorXd u = H.ldlt().solve(-S.transpose() * (Q * y_free));
  const Eigen::VectorXd y = S * u + y_free;
  return 0.5 * y.dot(Q * y) + 0.5 * f.problem.beta * u.dot(W.asDiagonal() * u);
}

}  // namespace

TEST_SUITE("optim") {

TEST_CASE("gradient vanishes for zero data") {
  Fixture f(5, paper_coefficients(), two_actuators(), 0.1, 1.0, ControlNorm::L2, 0.0);
  const GradientEvaluation ev =
      reduced_gradient(f.problem, ControlTrajectory::zeros(f.problem.grid, 2));
  CHECK(ev.gradient.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(ev.objective == 0.0);
}

TEST_CASE("smooth gradient is linear in the initial state") {
  Fixture f(5, paper_coefficients(), two_actuators(), 0.1, 1.0, ControlNorm::L1);
  const ControlTrajectory zero = ControlTrajectory::zeros(f.problem.grid, 2);
  const Matrix g1 = reduced_gradient(f.problem, zero).gradient.values;
  f.problem.y0 *= 2.0;
  const Matrix g2 = reduced_gradient(f.problem, zero).gradient.values;
  CHECK((g2 - 2.0 * g1).cwiseAbs().maxCoeff() <= 1e-12 * g1.cwiseAbs().maxCoeff());
}

TEST_CASE("adjoint gradient against central differences") {
  Fixture f(5, paper_coefficients(), two_actuators(), 0.1, 1.0, ControlNorm::L2);
  REQUIRE(f.problem.grid.steps == 8);
  CHECK(finite_difference_gradcheck(f.problem, 20, 1, true).max_relative_error <= 1e-7);
  CHECK(finite_difference_gradcheck(f.problem, 20, 2, false).max_relative_error <= 1e-7);
}

TEST_CASE("zero direction has zero derivative") {
  Fixture f(5, paper_coefficients(), two_actuators(), 0.1, 1.0, ControlNorm::L2);
  ControlTrajectory u = ControlTrajectory::zeros(f.problem.grid, 2);
  u.values.setConstant(0.3);
  const GradientEvaluation ev = reduced_gradient(f.problem, u);
  CHECK(control_inner(ev.gradient, ControlTrajectory::zeros(f.problem.grid, 2)) == 0.0);
}

TEST_CASE("BB step") {
  SolverOptions options;
  const TimeGrid grid = TimeGrid::make(0.0, 0.5, 0.0125);
  ControlTrajectory s = ControlTrajectory::zeros(grid, 1);
  s.values.setConstant(0.7);
  const double q = 3.0;
  ControlTrajectory y{grid, q * s.values};
  CHECK(bb_stepsize(s, y, options) == doctest::Approx(1.0 / q).epsilon(1e-14));
  ControlTrajectory neg{grid, -s.values};
  CHECK(bb_stepsize(s, neg, options) == options.alpha_max);
  CHECK(bb_stepsize(ControlTrajectory::zeros(grid, 1), y, options) == options.alpha_max);
}

TEST_CASE("l2 solver from the zero state") {
  Fixture f(5, paper_coefficients(), two_actuators(), 0.1, 1.0, ControlNorm::L2, 0.0);
  const OcpSolution sol = solve_ocp_l2(f.problem, SolverOptions{});
  CHECK(sol.iterations == 1);
  CHECK(sol.converged);
  CHECK(sol.objective == 0.0);
  CHECK(sol.u_star.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("l2 solver against the dense normal equations") {
  Fixture f(5, paper_coefficients(), one_actuator(), 0.1, 0.05, ControlNorm::L2);
  SolverOptions options;
  options.grad_tol = 1e-9;
  const OcpSolution sol = solve_ocp_l2(f.problem, options);
  CHECK(sol.converged);
  const double ref = dense_l2_optimum(f);
  CHECK(std::abs(sol.objective - ref) <= 1e-6 * ref);
  // The control matters for this instance.
  const double uncontrolled =
      evaluate_objective(f.problem, ControlTrajectory::zeros(f.problem.grid, 1)).first;
  CHECK(ref < 0.99 * uncontrolled);
}

TEST_CASE("l1 solver from the zero state") {
  Fixture f(5, paper_coefficients(), two_actuators(), 0.1, 1.0, ControlNorm::L1, 0.0);
  const OcpSolution sol = solve_ocp_l1(f.problem, SolverOptions{});
  CHECK(sol.objective == 0.0);
  CHECK(sol.u_star.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("prohibitive control cost on a dissipative system") {
  Fixture f(9, heat_coefficients(0.1), two_actuators(), 0.5, 1e9, ControlNorm::L1);
  const OcpSolution sol = solve_ocp_l1(f.problem, SolverOptions{});
  // The squared l1 cost has a zero subgradient at u = 0, so the minimizer is
  // of the size |F'(0)|/beta rather than exactly zero.
  CHECK(sol.u_star.values.cwiseAbs().maxCoeff() <= 1e-6);
  const double zero_value =
      evaluate_objective(f.problem, ControlTrajectory::zeros(f.problem.grid, 2)).first;
  CHECK(sol.objective <= zero_value);
  CHECK(sol.objective >= zero_value * (1.0 - 1e-9));
}

TEST_CASE("l1 solution is a prox fixed point and improves on the start") {
  Fixture f(9, paper_coefficients(), two_actuators(), 0.5, 0.05, ControlNorm::L1);
  SolverOptions options;
  const OcpSolution sol = solve_ocp_l1(f.problem, options);
  CHECK(sol.converged);
  const double start = evaluate_objective(f.problem, ControlTrajectory::zeros(f.problem.grid, 2)).first;
  CHECK(sol.objective <= start);
  CHECK(sol.u_star.values.cwiseAbs().maxCoeff() > 0.0);
  // Step of the order of the inverse curvature of the smooth part.
  const GradientEvaluation ev = reduced_gradient(f.problem, sol.u_star);
  const ControlTrajectory probe{sol.u_star.grid, sol.u_star.values + ev.gradient.values};
  const GradientEvaluation ev2 = reduced_gradient(f.problem, probe);
  const double alpha =
      bb_stepsize(ev.gradient, {ev.gradient.grid, ev2.gradient.values - ev.gradient.values}, options);
  CHECK(fixed_point_residual(f.problem, sol.u_star, alpha) <= 10.0 * options.rel_change_tol);
}

TEST_CASE("dispatch and warm start") {
  Fixture f(5, paper_coefficients(), two_actuators(), 0.1, 0.5, ControlNorm::L2);
  const OcpSolution a = solve_ocp(f.problem, SolverOptions{});
  const OcpSolution b = solve_ocp_l2(f.problem, SolverOptions{});
  CHECK(a.objective == b.objective);
  const OcpSolution warm = solve_ocp(f.problem, SolverOptions{}, &a.u_star);
  CHECK(warm.iterations <= 2);

  const ControlTrajectory wrong = ControlTrajectory::zeros(TimeGrid::make(0.0, 0.2, 0.0125), 2);
  CHECK_THROWS_AS(solve_ocp(f.problem, SolverOptions{}, &wrong), std::invalid_argument);
}

TEST_CASE("shifted warm start") {
  const TimeGrid old_grid = TimeGrid::make(0.0, 0.1, 0.0125);
  ControlTrajectory prev = ControlTrajectory::zeros(old_grid, 1);
  for (int j = 0; j < old_grid.nodes(); ++j) prev.values(0, j) = j + 1.0;
  const TimeGrid next = TimeGrid::make(0.025, 0.1, 0.0125);
  const ControlTrajectory w = shifted_warm_start(prev, next, 2);
  CHECK(w.grid.same_as(next));
  CHECK(w.values(0, 0) == 3.0);
  CHECK(w.values(0, 6) == 9.0);
  CHECK(w.values(0, 7) == 0.0);
  CHECK(w.values(0, 8) == 0.0);
}

TEST_CASE("invalid options and problems") {
  SolverOptions bad;
  bad.backtracking = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  OcpProblem empty;
  CHECK_THROWS_AS(solve_ocp(empty, SolverOptions{}), std::invalid_argument);
}

}  // TEST_SUITE
