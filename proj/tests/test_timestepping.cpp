#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rhc/timestepping.hpp"

using namespace rhc;

namespace {

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const SpatialOperators> heat_ops(int n) {
  return std::make_shared<const SpatialOperators>(build_uniform_mesh(n, n), heat_coefficients(0.1));
}

Vector sin_sin(const Mesh& mesh) {
  return project_function(mesh,
                          [](Point x) { return std::sin(kPi * x.x1) * std::sin(kPi * x.x2); });
}

ActuatorSet small_actuators(const Mesh& mesh) {
  return assemble_actuator_loads(
      mesh, build_rectangular_actuators({{Box{{0.2, 0.2}, {0.8, 0.6}}, {2, 1}}}));
}

ControlTrajectory random_control(const TimeGrid& grid, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  ControlTrajectory u = ControlTrajectory::zeros(grid, n);
  for (Eigen::Index k = 0; k < u.values.size(); ++k) u.values.data()[k] = normal(rng);
  return u;
}

}  // namespace

TEST_SUITE("timestepping") {

TEST_CASE("time grid") {
  const TimeGrid g = TimeGrid::make(0.5, 1.5, 0.0125);
  CHECK(g.steps == 120);
  CHECK(g.nodes() == 121);
  CHECK(g.time(120) == doctest::Approx(2.0));
  CHECK(g.weight(0) == doctest::Approx(0.00625));
  CHECK(g.weight(1) == doctest::Approx(0.0125));
  CHECK_THROWS_AS(TimeGrid::make(0.0, 1.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::make(0.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("analytic eigenfunction decay") {
  auto ops = heat_ops(33);
  const Vector y0 = sin_sin(ops->mesh());
  const TimeGrid grid = TimeGrid::make(0.0, 1.0, 0.0125);
  const StateTrajectory y = cn_state_solve(ops, ActuatorSet{}, ControlTrajectory::zeros(grid, 0), y0);
  const double expected =
      sobolev_norm(y0, *ops, NormKind::H) * std::exp(-0.1 * 2.0 * kPi * kPi * 1.0);
  const double got = sobolev_norm(y.values.col(grid.steps), *ops, NormKind::H);
  CHECK(std::abs(got / expected - 1.0) < 0.01);
}

TEST_CASE("Crank-Nicolson is second order against the semi-discrete flow") {
  auto ops = heat_ops(17);
  const Vector y0 = sin_sin(ops->mesh());
  const oracle::HeatModes modes = oracle::heat_modes(Eigen::MatrixXd(ops->stiffness()),
                                                     Eigen::MatrixXd(ops->mass()), y0);
  const double exact = std::sqrt(modes.squared_h_norm(0.1, 1.0));
  double previous = 0.0;
  for (double dt : {0.05, 0.025, 0.0125}) {
    const TimeGrid grid = TimeGrid::make(0.0, 1.0, dt);
    const StateTrajectory y =
        cn_state_solve(ops, ActuatorSet{}, ControlTrajectory::zeros(grid, 0), y0);
    const double err = std::abs(sobolev_norm(y.values.col(grid.steps), *ops, NormKind::H) - exact);
    if (previous > 0.0) {
      CHECK(previous / err >= 3.0);
      CHECK(previous / err <= 5.0);
    }
    previous = err;
  }
}

TEST_CASE("zero data stays zero") {
  auto ops = heat_ops(9);
  const ActuatorSet act = small_actuators(ops->mesh());
  const TimeGrid grid = TimeGrid::make(0.0, 0.5, 0.0125);
  const StateTrajectory y =
      cn_state_solve(ops, act, ControlTrajectory::zeros(grid, act.size()), Vector::Zero(ops->dofs()));
  CHECK(y.values.cwiseAbs().maxCoeff() == 0.0);
  const StateTrajectory p = cn_adjoint_solve(ops, y);
  CHECK(p.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward sweep matches a dense Crank-Nicolson reference") {
  auto ops = std::make_shared<const SpatialOperators>(build_uniform_mesh(6, 6), paper_coefficients());
  const ActuatorSet act = small_actuators(ops->mesh());
  const TimeGrid grid = TimeGrid::make(0.3, 0.25, 0.025);
  const ControlTrajectory u = random_control(grid, act.size(), 5);
  const Vector y0 = Vector::LinSpaced(ops->dofs(), -1.0, 2.0);
  const StateTrajectory y = cn_state_solve(ops, act, u, y0);

  const Eigen::MatrixXd M(ops->mass());
  Eigen::VectorXd ref = y0;
  for (int j = 0; j < grid.steps; ++j) {
    const Eigen::MatrixXd A(ops->system_matrix(grid.time(j) + 0.5 * grid.dt));
    const Eigen::VectorXd f = 0.5 * act.load * (u.values.col(j) + u.values.col(j + 1));
    ref = (M + 0.5 * grid.dt * A)
              .fullPivLu()
              .solve((M - 0.5 * grid.dt * A) * ref + grid.dt * f);
    CHECK((y.values.col(j + 1) - ref).norm() <= 1e-11 * (1.0 + ref.norm()));
  }
}

TEST_CASE("adjoint terminal condition") {
  auto ops = std::make_shared<const SpatialOperators>(build_uniform_mesh(6, 6), paper_coefficients());
  const ActuatorSet act = small_actuators(ops->mesh());
  const TimeGrid grid = TimeGrid::make(0.0, 0.2, 0.025);
  Propagator prop(ops, act.load, grid.dt);
  const StateTrajectory y =
      prop.state_solve(random_control(grid, act.size(), 11), Vector::Ones(ops->dofs()));
  const StateTrajectory p = prop.adjoint_solve(y);
  CHECK(p.values.col(grid.steps).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.values.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("step factorizations are cached and released") {
  auto ops = heat_ops(9);
  Propagator prop(ops, Matrix(), 0.0125);
  const TimeGrid grid = TimeGrid::make(0.0, 0.5, 0.0125);
  const Vector y0 = sin_sin(ops->mesh());
  const StateTrajectory first = prop.state_solve(ControlTrajectory::zeros(grid, 0), y0);
  CHECK(prop.cached_steps() == 40);
  const StateTrajectory again = prop.state_solve(ControlTrajectory::zeros(grid, 0), y0);
  CHECK(prop.cached_steps() == 40);
  CHECK((first.values - again.values).cwiseAbs().maxCoeff() == 0.0);
  prop.release_before(0.25);
  CHECK(prop.cached_steps() == 20);
}

TEST_CASE("grid and dimension mismatches are rejected") {
  auto ops = heat_ops(9);
  Propagator prop(ops, small_actuators(ops->mesh()).load, 0.0125);
  const TimeGrid grid = TimeGrid::make(0.0, 0.1, 0.0125);
  CHECK_THROWS_AS(prop.state_solve(ControlTrajectory::zeros(grid, 3), Vector::Zero(ops->dofs())),
                  std::invalid_argument);
  CHECK_THROWS_AS(prop.state_solve(ControlTrajectory::zeros(grid, 2), Vector::Zero(3)),
                  std::invalid_argument);
  const StateTrajectory y{grid, Matrix::Zero(ops->dofs(), grid.nodes())};
  const ControlTrajectory u = ControlTrajectory::zeros(TimeGrid::make(0.0, 0.2, 0.0125), 2);
  CHECK_THROWS_AS(objective_eval(y, u, *ops, 1.0, ControlNorm::L2), std::invalid_argument);
}

TEST_CASE("objective evaluation") {
  auto ops = heat_ops(9);
  const TimeGrid grid = TimeGrid::make(0.0, 1.0, 0.0125);
  const StateTrajectory y{grid, Matrix::Zero(ops->dofs(), grid.nodes())};
  CHECK(objective_eval(y, ControlTrajectory::zeros(grid, 2), *ops, 2.0, ControlNorm::L2) == 0.0);

  ControlTrajectory u = ControlTrajectory::zeros(grid, 2);
  u.values.row(0).setOnes();
  CHECK(objective_eval(y, u, *ops, 2.0, ControlNorm::L1) == doctest::Approx(1.0).epsilon(1e-14));

  u.values.row(0).setConstant(1.0);
  u.values.row(1).setConstant(2.0);
  CHECK(control_penalty(u, 1.0, ControlNorm::L1) == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(control_penalty(u, 1.0, ControlNorm::L2) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("squared l1 versus squared l2 split") {
  const TimeGrid grid = TimeGrid::make(0.0, 0.5, 0.0125);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ControlTrajectory u = random_control(grid, 4, seed);
    double cross = 0.0;
    for (int j = 0; j < grid.nodes(); ++j) {
      double s = 0.0;
      for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) s += std::abs(u.values(a, j) * u.values(b, j));
      }
      cross += grid.weight(j) * s;
    }
    const double diff =
        control_penalty(u, 3.0, ControlNorm::L1) - control_penalty(u, 3.0, ControlNorm::L2);
    CHECK(std::abs(diff - 3.0 * cross) <= 1e-12);
  }
}

TEST_CASE("control inner product is the trapezoidal rule") {
  const TimeGrid grid = TimeGrid::make(0.0, 1.0, 0.25);
  ControlTrajectory a = ControlTrajectory::zeros(grid, 1);
  a.values.row(0).setOnes();
  CHECK(control_inner(a, a) == doctest::Approx(1.0));
  CHECK(control_norm(a) == doctest::Approx(1.0));
}

}  // TEST_SUITE
