#include "rhc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rhc {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite");
  }
}

std::array<Point, 3> edge_midpoints(const Mesh& mesh, const std::array<int, 3>& tri) {
  const Point& p0 = mesh.nodes[tri[0]];
  const Point& p1 = mesh.nodes[tri[1]];
  const Point& p2 = mesh.nodes[tri[2]];
  auto mid = [](const Point& a, const Point& b) {
    return Point{0.5 * (a.x1 + b.x1), 0.5 * (a.x2 + b.x2)};
  };
  return {mid(p0, p1), mid(p1, p2), mid(p2, p0)};
}

double divergence(const VectorField& b, double t, Point x) {
  constexpr double h = 1e-6;
  const double d1 = (b(t, {x.x1 + h, x.x2})[0] - b(t, {x.x1 - h, x.x2})[0]) / (2.0 * h);
  const double d2 = (b(t, {x.x1, x.x2 + h})[1] - b(t, {x.x1, x.x2 - h})[1]) / (2.0 * h);
  return d1 + d2;
}

}  // namespace

CoefficientBounds coefficient_bounds(const Coefficients& coefficients, const Mesh& mesh,
                                     const std::vector<double>& times, double r) {
  if (r < 2.0) throw std::invalid_argument("coefficient_bounds: r must be at least 2 (= n)");
  if (times.empty()) throw std::invalid_argument("coefficient_bounds: no time samples");
  CoefficientBounds out;
  out.r = r;
  for (double t : times) {
    double a_int = 0.0;
    double div_int = 0.0;
    for (const auto& tri : mesh.triangles) {
      const double w = std::abs(mesh.signed_area(tri)) / 3.0;
      for (const Point& q : edge_midpoints(mesh, tri)) {
        if (coefficients.reaction) a_int += w * std::pow(std::abs(coefficients.reaction(t, q)), r);
        if (coefficients.convection) {
          div_int += w * std::pow(std::abs(divergence(coefficients.convection, t, q)), r);
          const auto bq = coefficients.convection(t, q);
          out.b_sup = std::max(out.b_sup, std::hypot(bq[0], bq[1]));
        }
      }
    }
    if (coefficients.convection) {
      for (const Point& p : mesh.nodes) {
        const auto bp = coefficients.convection(t, p);
        out.b_sup = std::max(out.b_sup, std::hypot(bp[0], bp[1]));
      }
    }
    out.a_lr = std::max(out.a_lr, std::pow(a_int, 1.0 / r));
    out.div_b_lr = std::max(out.div_b_lr, std::pow(div_int, 1.0 / r));
  }
  return out;
}

double poincare_unit_square() { return 1.0 / (2.0 * std::numbers::pi * std::numbers::pi); }

double default_alpha_ell(double beta) {
  return std::min(1.0 / (2.0 * poincare_unit_square()), 0.5 * beta);
}

double gamma1(double T, const TheoryConstants& c) {
  require_positive(T, "T");
  require_positive(c.c_hat_nu, "c_hat_nu");
  require_positive(c.i_HVprime, "i_HVprime");
  require_positive(c.C_U, "C_U");
  require_positive(c.beta, "beta");
  if (!(c.N_ab >= 0.0)) throw std::invalid_argument("N_ab must be non-negative");
  const double observability = T / (2.0 * c.c_hat_nu * (T + 1.0 + T * c.N_ab));
  const double control = c.beta / (2.0 * c.i_HVprime * c.C_U);
  return std::min(observability, control);
}

double gamma2_eval(double T, const TheoryConstants& c, ControlNorm norm, Tracking tracking) {
  if (!(T >= 0.0)) throw std::invalid_argument("T must be non-negative");
  require_positive(c.lambda_rate, "lambda_rate");
  require_positive(c.Theta1, "Theta1");
  require_positive(c.Theta2, "Theta2");
  require_positive(c.c4, "c4");
  require_positive(c.beta, "beta");
  const double n = norm == ControlNorm::L1 ? static_cast<double>(c.N_actuators) : 1.0;
  const double decay = 1.0 - std::exp(-c.lambda_rate * T);
  if (tracking == Tracking::H) {
    return (c.Theta1 + c.beta * n * c.c4 * c.Theta2) / (2.0 * c.lambda_rate) * decay;
  }
  require_positive(c.nu, "nu");
  require_positive(c.c5, "c5");
  const double inner = c.c5 * c.Theta1 + (1.0 + c.nu * n * c.beta) * c.c4 * c.Theta2;
  return (1.0 + inner / c.lambda_rate * decay) / (2.0 * c.nu);
}

HorizonFactors alpha_horizon(double T, double delta, double gamma2_T, double alpha_ell) {
  if (!(delta > 0.0) || !(T > delta)) {
    throw std::invalid_argument("alpha_horizon: requires T > delta > 0");
  }
  require_positive(alpha_ell, "alpha_ell");
  HorizonFactors f;
  f.theta1 = 1.0 + gamma2_T / (alpha_ell * (T - delta));
  f.theta2 = gamma2_T / (alpha_ell * delta);
  f.alpha = 1.0 - gamma2_T * gamma2_T / (alpha_ell * alpha_ell * delta * (T - delta));
  return f;
}

ZetaResult zeta_rate(double alpha, double delta, double gamma1_delta, double gamma2_T) {
  require_positive(delta, "delta");
  require_positive(gamma2_T, "gamma2_T");
  ZetaResult z;
  z.eta = 1.0 - alpha * gamma1_delta / gamma2_T;
  z.valid = z.eta > 0.0 && z.eta < 1.0;
  if (z.valid) z.zeta = std::abs(std::log(z.eta)) / delta;
  return z;
}

ObservabilityCheck observability_residual(const StateTrajectory& y, const Matrix& forcing,
                                          const SpatialOperators& ops, double N_ab,
                                          double c_hat_nu) {
  const TimeGrid& grid = y.grid;
  if (forcing.size() != 0 && (forcing.cols() != grid.nodes() || forcing.rows() != ops.dofs())) {
    throw std::invalid_argument("observability_residual: forcing does not match the state grid");
  }
  ObservabilityCheck out;
  const Vector y0 = y.values.col(0);
  out.lhs = y0.dot(ops.mass() * y0);
  double state_v = 0.0;
  double forcing_vp = 0.0;
  for (int j = 0; j < grid.nodes(); ++j) {
    const Vector yj = y.values.col(j);
    state_v += grid.weight(j) * yj.dot(ops.stiffness() * yj);
    if (forcing.size() != 0) {
      const Vector g = forcing.col(j);
      forcing_vp += grid.weight(j) * g.dot(ops.solve_stiffness(g));
    }
  }
  const double factor = 1.0 + 1.0 / grid.horizon + N_ab;
  out.rhs = c_hat_nu * factor * state_v + forcing_vp;
  if (state_v > 0.0) out.min_chat = std::max(0.0, (out.lhs - forcing_vp) / (factor * state_v));
  return out;
}

double calibrate_chat(const std::shared_ptr<const SpatialOperators>& ops,
                      const std::vector<double>& horizons, double dt, double N_ab) {
  const Mesh& mesh = ops->mesh();
  std::vector<std::shared_ptr<const SpatialOperators>> variants{ops};
  variants.push_back(std::make_shared<const SpatialOperators>(mesh, heat_coefficients(ops->nu())));
  double best = 0.0;
  for (const auto& variant : variants) {
    Propagator prop(variant, Matrix(), dt);
    for (double horizon : horizons) {
      const TimeGrid grid = TimeGrid::make(0.0, horizon, dt);
      const ControlTrajectory none = ControlTrajectory::zeros(grid, 0);
      for (int k = 1; k <= 2; ++k) {
        for (int l = 1; l <= 2; ++l) {
          const Vector y0 = project_function(mesh, [k, l](Point x) {
            return std::sin(k * std::numbers::pi * x.x1) * std::sin(l * std::numbers::pi * x.x2);
          });
          const StateTrajectory y = prop.state_solve(none, y0);
          best = std::max(best, observability_residual(y, Matrix(), *variant, N_ab, 1.0).min_chat);
        }
      }
    }
  }
  return best;
}

double sql1_identity_check(const ControlTrajectory& u, double beta) {
  double l1 = 0.0;
  double l2 = 0.0;
  double cross = 0.0;
  for (int j = 0; j < u.grid.nodes(); ++j) {
    const double w = u.grid.weight(j);
    const auto col = u.values.col(j);
    l1 += w * control_cost(col, ControlNorm::L1);
    l2 += w * control_cost(col, ControlNorm::L2);
    double pairs = 0.0;
    for (Eigen::Index a = 0; a < col.size(); ++a) {
      for (Eigen::Index b = a + 1; b < col.size(); ++b) pairs += std::abs(col[a] * col[b]);
    }
    cross += w * pairs;
  }
  return std::abs(0.5 * beta * l1 - 0.5 * beta * l2 - beta * cross);
}

TheoryConstants evaluate_theory(TheoryConstants c, double T, double delta, ControlNorm norm,
                                Tracking tracking) {
  c.gamma1_T = gamma1(T, c);
  c.gamma1_delta = gamma1(delta, c);
  c.gamma2_T = gamma2_eval(T, c, norm, tracking);
  const HorizonFactors f = alpha_horizon(T, delta, c.gamma2_T, c.alpha_ell);
  c.alpha_T = f.alpha;
  c.theta1 = f.theta1;
  c.theta2 = f.theta2;
  const ZetaResult z = zeta_rate(c.alpha_T, delta, c.gamma1_delta, c.gamma2_T);
  c.eta = z.eta;
  c.zeta = z.zeta;
  return c;
}

}  // namespace rhc
