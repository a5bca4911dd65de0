#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rhc/timestepping.hpp"

namespace rhc {

struct CoefficientBounds {
  /// sup_t ||a(t,.)||_{L^r}
  double a_lr = 0.0;
  /// sup_{t,x} |b(t,x)|
  double b_sup = 0.0;
  /// sup_t ||div b(t,.)||_{L^r}, central differences.
  double div_b_lr = 0.0;
  double r = 2.0;

  [[nodiscard]] double n_ab() const { return a_lr + b_sup; }
  [[nodiscard]] double n_tilde() const { return a_lr + b_sup + div_b_lr; }
};

/// N(a,b) = ||a||_{L^inf(L^r)} + ||b||_{L^inf}, sampled at `times` with the
/// edge-midpoint rule on every triangle (vertices included for b). Throws
/// std::invalid_argument for r < 2 or an empty time list.
CoefficientBounds coefficient_bounds(const Coefficients& coefficients, const Mesh& mesh,
                                     const std::vector<double>& times, double r = 2.0);

/// Constants entering the stability estimates. The analytic ones have no
/// value in the literature and default to the unit-square choices below.
struct TheoryConstants {
  double c_hat_nu = 1.0;
  /// ||.||_{V'} <= i ||.||_H; 1/sqrt(2 pi^2) on the unit square.
  double i_HVprime = 0.0;
  double N_ab = 0.0;
  double C_U = 0.0;
  double beta = 1.0;
  int N_actuators = 1;
  double nu = 0.1;
  /// Lower bound l(y,u) >= alpha_ell ||y||_H^2 (defaults to min(1/(2 c_p), beta/2)).
  double alpha_ell = 0.0;
  double lambda_rate = 1.0;
  double Theta1 = 1.0;
  double Theta2 = 1.0;
  double c4 = 1.0;
  double c5 = 1.0;

  // Outputs filled by evaluate_theory.
  double gamma1_T = 0.0;
  double gamma1_delta = 0.0;
  double gamma2_T = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double alpha_T = 0.0;
  double eta = 0.0;
  double zeta = 0.0;
};

/// Poincare constant of the unit square, 1/(2 pi^2).
double poincare_unit_square();
/// Default alpha_ell = min(1/(2 c_p), beta/2).
double default_alpha_ell(double beta);

/// min{ T / (2 c_hat (T + 1 + T N)), beta / (2 i C_U) }. Throws
/// std::invalid_argument for non-positive T or constants.
double gamma1(double T, const TheoryConstants& c);

enum class Tracking { V, H };

/// Closed-form gamma_2 bounds.
///   H: (Theta1 + beta [N] c4 Theta2)/(2 lambda) (1 - e^{-lambda T})
///   V: 1/(2 nu) (1 + (c5 Theta1 + (1 + nu [N] beta) c4 Theta2)/lambda (1 - e^{-lambda T}))
/// with the factor N present only for the l1 cost.
double gamma2_eval(double T, const TheoryConstants& c, ControlNorm norm, Tracking tracking);

struct HorizonFactors {
  double alpha = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
};

/// alpha = 1 - gamma2^2/(alpha_ell^2 delta (T - delta)). Throws
/// std::invalid_argument unless T > delta > 0.
HorizonFactors alpha_horizon(double T, double delta, double gamma2_T, double alpha_ell);

struct ZetaResult {
  double eta = 0.0;
  double zeta = 0.0;
  /// eta lies in (0,1); otherwise zeta is left at 0.
  bool valid = false;
};

ZetaResult zeta_rate(double alpha, double delta, double gamma1_delta, double gamma2_T);

struct ObservabilityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double min_chat = 0.0;
};

/// ||y(t0)||_H^2 against c_hat (1 + 1/T + N) ||y||^2_{L2(V)} + ||f||^2_{L2(V')}.
/// `forcing` holds the load vectors B u(t_j) column by column (empty for f = 0).
ObservabilityCheck observability_residual(const StateTrajectory& y, const Matrix& forcing,
                                          const SpatialOperators& ops, double N_ab,
                                          double c_hat_nu);

/// Largest min_chat over uncontrolled probes sin(k pi x1) sin(l pi x2),
/// k,l in {1,2}, for the configured coefficients and for a = b = 0, on each
/// horizon. Stands in for the unknown constant c_hat_nu.
double calibrate_chat(const std::shared_ptr<const SpatialOperators>& ops,
                      const std::vector<double>& horizons, double dt, double N_ab);

/// |(beta/2) int |u|_1^2 - (beta/2) int |u|_2^2 - beta int sum_{i<j} |u_i u_j||.
double sql1_identity_check(const ControlTrajectory& u, double beta);

/// Fills the derived members of `c` for horizon T and sampling time delta.
/// gamma2 uses the requested norm and tracking variant.
TheoryConstants evaluate_theory(TheoryConstants c, double T, double delta, ControlNorm norm,
                                Tracking tracking);

}  // namespace rhc
