#include "rhc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>

namespace rhc {

namespace {

void check_problem(const OcpProblem& problem) {
  if (problem.propagator == nullptr) throw std::invalid_argument("OcpProblem: null propagator");
  if (!(problem.beta > 0.0)) throw std::invalid_argument("OcpProblem: beta must be positive");
  if (problem.y0.size() != problem.propagator->ops().dofs()) {
    throw std::invalid_argument("OcpProblem: initial state has wrong dimension");
  }
}

ControlTrajectory axpy(const ControlTrajectory& x, double a, const ControlTrajectory& y) {
  return {x.grid, x.values + a * y.values};
}

ControlTrajectory diff(const ControlTrajectory& a, const ControlTrajectory& b) {
  return {a.grid, a.values - b.values};
}

// Smooth part only: F(u) and -B'p.
GradientEvaluation smooth_evaluation(OcpProblem& problem, const ControlTrajectory& u,
                                     StateTrajectory* known_state = nullptr) {
  Propagator& prop = *problem.propagator;
  GradientEvaluation ev;
  ev.state = known_state != nullptr ? std::move(*known_state) : prop.state_solve(u, problem.y0);
  ev.adjoint = prop.adjoint_solve(ev.state);
  ev.gradient = prop.smooth_gradient(ev.adjoint);
  ev.smooth_value = tracking_cost(ev.state, prop.ops());
  ev.objective = ev.smooth_value + control_penalty(u, problem.beta, problem.norm);
  return ev;
}

ControlTrajectory initial_control(const OcpProblem& problem, const ControlTrajectory* initial) {
  const int n = problem.propagator->controls();
  if (initial == nullptr) return ControlTrajectory::zeros(problem.grid, n);
  if (!initial->grid.same_as(problem.grid) || initial->values.rows() != n) {
    throw std::invalid_argument("solve_ocp: initial guess does not match the problem grid");
  }
  return *initial;
}

}  // namespace

void SolverOptions::validate() const {
  if (max_iters <= 0 || !(grad_tol > 0.0) || !(rel_change_tol > 0.0) || memory <= 0 ||
      !(sufficient_decrease > 0.0) || !(alpha_min > 0.0) || !(alpha_max >= alpha_min) ||
      max_backtracks <= 0 || !(prox_tol > 0.0)) {
    throw std::invalid_argument("SolverOptions: all parameters must be positive");
  }
  if (!(backtracking > 0.0 && backtracking < 1.0)) {
    throw std::invalid_argument("SolverOptions: backtracking factor must lie in (0,1)");
  }
}

GradientEvaluation reduced_gradient(OcpProblem& problem, const ControlTrajectory& u) {
  check_problem(problem);
  GradientEvaluation ev = smooth_evaluation(problem, u);
  if (problem.norm == ControlNorm::L2) ev.gradient.values += problem.beta * u.values;
  return ev;
}

std::pair<double, StateTrajectory> evaluate_objective(OcpProblem& problem,
                                                      const ControlTrajectory& u) {
  check_problem(problem);
  StateTrajectory y = problem.propagator->state_solve(u, problem.y0);
  const double value = objective_eval(y, u, problem.propagator->ops(), problem.beta, problem.norm);
  return {value, std::move(y)};
}

double bb_stepsize(const ControlTrajectory& s, const ControlTrajectory& g_diff,
                   const SolverOptions& options) {
  const double ss = control_inner(s, s);
  const double sy = control_inner(s, g_diff);
  if (!(ss > 0.0) || !(sy > 0.0) || !std::isfinite(sy)) return options.alpha_max;
  return std::clamp(ss / sy, options.alpha_min, options.alpha_max);
}

OcpSolution solve_ocp_l2(OcpProblem& problem, const SolverOptions& options,
                         const ControlTrajectory* initial) {
  check_problem(problem);
  options.validate();
  ControlTrajectory u = initial_control(problem, initial);
  GradientEvaluation ev = reduced_gradient(problem, u);
  OcpSolution sol;
  sol.iterations = 1;

  bool first = true;
  double alpha = options.alpha_max;
  for (;;) {
    const double residual = control_norm(ev.gradient);
    if (options.keep_log) sol.log.push_back({sol.iterations, ev.objective, residual, alpha});
    sol.final_residual = residual;
    if (residual <= options.grad_tol) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= options.max_iters || !std::isfinite(residual)) break;

    if (first) {
      // The reduced problem is quadratic, so the gradient difference along the
      // gradient gives its curvature exactly: alpha = <g,g>/<g,Hg>.
      const ControlTrajectory probe_u = axpy(u, 1.0, ev.gradient);
      const GradientEvaluation probe = reduced_gradient(problem, probe_u);
      alpha = bb_stepsize(ev.gradient, diff(probe.gradient, ev.gradient), options);
      first = false;
    }
    ControlTrajectory u_next = axpy(u, -alpha, ev.gradient);
    GradientEvaluation ev_next = reduced_gradient(problem, u_next);
    ++sol.iterations;
    alpha = bb_stepsize(diff(u_next, u), diff(ev_next.gradient, ev.gradient), options);
    u = std::move(u_next);
    ev = std::move(ev_next);
  }
  sol.objective = ev.objective;
  sol.u_star = std::move(u);
  sol.y_star = std::move(ev.state);
  return sol;
}

ControlTrajectory prox_trajectory(const ControlTrajectory& x, double alpha, double beta,
                                  ControlNorm norm, double tol) {
  ControlTrajectory out{x.grid, Matrix(x.values.rows(), x.values.cols())};
  const ProxParams params{alpha, beta, tol};
  for (Eigen::Index j = 0; j < x.values.cols(); ++j) {
    const Vector col = x.values.col(j);
    out.values.col(j) = norm == ControlNorm::L1 ? prox_sql1(col, params) : prox_sql2(col, params);
  }
  return out;
}

OcpSolution solve_ocp_l1(OcpProblem& problem, const SolverOptions& options,
                         const ControlTrajectory* initial) {
  check_problem(problem);
  options.validate();
  const ControlNorm norm = problem.norm;
  ControlTrajectory u = initial_control(problem, initial);
  GradientEvaluation ev = smooth_evaluation(problem, u);
  OcpSolution sol;
  sol.iterations = 0;

  std::deque<double> history{ev.objective};
  // Curvature probe along the smooth gradient for the first trial step.
  double alpha = options.alpha_max;
  if (control_norm(ev.gradient) > 0.0) {
    const GradientEvaluation probe = smooth_evaluation(problem, axpy(u, 1.0, ev.gradient));
    alpha = bb_stepsize(ev.gradient, diff(probe.gradient, ev.gradient), options);
  }

  double best_objective = ev.objective;
  ControlTrajectory best_u = u;
  StateTrajectory best_y = ev.state;

  for (;;) {
    const double reference = *std::max_element(history.begin(), history.end());
    bool accepted = false;
    ControlTrajectory candidate;
    StateTrajectory candidate_state;
    double candidate_objective = 0.0;
    double step_sq = 0.0;
    for (int bt = 0; bt <= options.max_backtracks; ++bt) {
      candidate = prox_trajectory(axpy(u, -alpha, ev.gradient), alpha, problem.beta, norm,
                                  options.prox_tol);
      auto [value, state] = evaluate_objective(problem, candidate);
      const ControlTrajectory d = diff(candidate, u);
      step_sq = control_inner(d, d);
      if (value <= reference - options.sufficient_decrease / (2.0 * alpha) * step_sq) {
        accepted = true;
        candidate_objective = value;
        candidate_state = std::move(state);
        break;
      }
      alpha = std::max(alpha * options.backtracking, std::numeric_limits<double>::min());
    }
    ++sol.iterations;
    if (!accepted) {
      sol.converged = false;
      break;
    }

    const double cand_norm = control_norm(candidate);
    const double step_norm = std::sqrt(step_sq);
    double rel_change = 0.0;
    if (step_norm > 0.0) {
      rel_change = cand_norm > 0.0 ? step_norm / cand_norm : std::numeric_limits<double>::infinity();
    }
    if (options.keep_log) {
      sol.log.push_back({sol.iterations, candidate_objective, rel_change, alpha});
    }
    sol.final_residual = rel_change;

    GradientEvaluation ev_next = smooth_evaluation(problem, candidate, &candidate_state);
    const double next_alpha =
        bb_stepsize(diff(candidate, u), diff(ev_next.gradient, ev.gradient), options);
    u = std::move(candidate);
    ev = std::move(ev_next);
    if (ev.objective <= best_objective) {
      best_objective = ev.objective;
      best_u = u;
      best_y = ev.state;
    }
    history.push_back(ev.objective);
    while (static_cast<int>(history.size()) > options.memory) history.pop_front();

    if (rel_change <= options.rel_change_tol) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= options.max_iters) break;
    alpha = next_alpha;
  }
  if (sol.converged) {
    sol.objective = ev.objective;
    sol.u_star = std::move(u);
    sol.y_star = std::move(ev.state);
  } else {
    sol.objective = best_objective;
    sol.u_star = std::move(best_u);
    sol.y_star = std::move(best_y);
  }
  return sol;
}

OcpSolution solve_ocp(OcpProblem& problem, const SolverOptions& options,
                      const ControlTrajectory* initial) {
  return problem.norm == ControlNorm::L2 ? solve_ocp_l2(problem, options, initial)
                                         : solve_ocp_l1(problem, options, initial);
}

double fixed_point_residual(OcpProblem& problem, const ControlTrajectory& u, double alpha,
                            double prox_tol) {
  check_problem(problem);
  const GradientEvaluation ev = smooth_evaluation(problem, u);
  const ControlTrajectory mapped =
      prox_trajectory(axpy(u, -alpha, ev.gradient), alpha, problem.beta, problem.norm, prox_tol);
  const double gap = control_norm(diff(u, mapped));
  const double scale = control_norm(u);
  if (scale == 0.0) return gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return gap / scale;
}

ControlTrajectory shifted_warm_start(const ControlTrajectory& previous, const TimeGrid& grid,
                                     int shift) {
  ControlTrajectory out = ControlTrajectory::zeros(grid, previous.controls());
  for (int j = 0; j < grid.nodes(); ++j) {
    const int src = j + shift;
    if (src < previous.grid.nodes()) out.values.col(j) = previous.values.col(src);
  }
  return out;
}

GradientCheckReport finite_difference_gradcheck(OcpProblem& problem, int trials,
                                                std::uint64_t seed, bool smooth_only) {
  check_problem(problem);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = problem.propagator->controls();
  auto random_control = [&]() {
    ControlTrajectory c = ControlTrajectory::zeros(problem.grid, n);
    for (Eigen::Index k = 0; k < c.values.size(); ++k) c.values.data()[k] = normal(rng);
    return c;
  };
  auto value = [&](const ControlTrajectory& c) {
    const StateTrajectory y = problem.propagator->state_solve(c, problem.y0);
    double v = tracking_cost(y, problem.propagator->ops());
    if (!smooth_only) v += control_penalty(c, problem.beta, ControlNorm::L2);
    return v;
  };

  GradientCheckReport report;
  for (int t = 0; t < trials; ++t) {
    const ControlTrajectory u = random_control();
    const ControlTrajectory d = random_control();
    GradientEvaluation ev = smooth_evaluation(problem, u);
    if (!smooth_only) ev.gradient.values += problem.beta * u.values;
    const double analytic = control_inner(ev.gradient, d);
    const double eps = 1e-3 * (1.0 + control_norm(u)) / std::max(control_norm(d), 1e-300);
    const double fd = (value(axpy(u, eps, d)) - value(axpy(u, -eps, d))) / (2.0 * eps);
    const double err = std::abs(fd - analytic) / std::max(std::abs(analytic), 1e-300);
    report.max_relative_error = std::max(report.max_relative_error, fd == analytic ? 0.0 : err);
    ++report.trials;
  }
  return report;
}

}  // namespace rhc
