#pragma once

#include "rhc/mesh_fem.hpp"

namespace rhc {

/// Step alpha_bar, weight beta, and the bisection tolerance on |psi(mu*)|.
struct ProxParams {
  double alpha_bar = 1.0;
  double beta = 1.0;
  double tol = 1e-10;

  /// Throws std::invalid_argument unless all three are positive.
  void validate() const;
};

/// psi(mu) = sum_i [sqrt(alpha_bar*beta/2)|x_i|/sqrt(mu) - alpha_bar*beta]_+ - 1.
/// Non-increasing in mu. Throws std::invalid_argument for mu <= 0.
double psi(double mu, const Vector& x, const ProxParams& p);

/// Positive zero of psi by bisection, |psi(mu*)| <= tol, or the better end of
/// a bracket that has shrunk to adjacent doubles. Throws
/// std::invalid_argument for x = 0.
double find_mu_star(const Vector& x, const ProxParams& p);

/// Weights lambda_i(mu) = [sqrt(alpha_bar*beta/2)|x_i|/sqrt(mu) - alpha_bar*beta]_+.
Vector prox_weights(double mu, const Vector& x, const ProxParams& p);

/// prox of alpha_bar * beta/2 |.|_1^2. Inactive components are exact zeros.
Vector prox_sql1(const Vector& x, const ProxParams& p);

/// prox of alpha_bar * beta/2 |.|_2^2, i.e. x / (1 + alpha_bar*beta).
Vector prox_sql2(const Vector& x, const ProxParams& p);

/// Number of nonzero components of prox_sql1(x).
int active_set_size(const Vector& x, const ProxParams& p);

}  // namespace rhc
