#include "rhc/prox.hpp"

#include <cmath>
#include <stdexcept>

namespace rhc {

void ProxParams::validate() const {
  if (!(alpha_bar > 0.0) || !(beta > 0.0) || !(tol > 0.0)) {
    throw std::invalid_argument("ProxParams: alpha_bar, beta and tol must be positive");
  }
}

Vector prox_weights(double mu, const Vector& x, const ProxParams& p) {
  const double ab = p.alpha_bar * p.beta;
  const double scale = std::sqrt(0.5 * ab) / std::sqrt(mu);
  Vector lambda(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    lambda[i] = std::max(0.0, scale * std::abs(x[i]) - ab);
  }
  return lambda;
}

double psi(double mu, const Vector& x, const ProxParams& p) {
  if (!(mu > 0.0)) throw std::invalid_argument("psi: mu must be positive");
  return prox_weights(mu, x, p).sum() - 1.0;
}

double find_mu_star(const Vector& x, const ProxParams& p) {
  p.validate();
  const double xmax = x.lpNorm<Eigen::Infinity>();
  if (!(xmax > 0.0)) throw std::invalid_argument("find_mu_star: x must be nonzero");
  const double n = static_cast<double>(x.size());
  double hi = 0.5 * p.alpha_bar * p.beta * xmax * xmax * n * n;
  while (psi(hi, x, p) >= 0.0) hi *= 2.0;
  double lo = hi * 1e-16;
  while (psi(lo, x, p) <= 0.0) lo *= 1e-4;

  for (int it = 0; it < 4000; ++it) {
    const double mid = 0.5 * (lo + hi);
    // For large alpha_bar*beta the slope of psi can exceed tol/ulp(mu); the
    // bracket then collapses to adjacent doubles before |psi| <= tol.
    if (!(mid > lo && mid < hi)) return std::abs(psi(lo, x, p)) < std::abs(psi(hi, x, p)) ? lo : hi;
    const double value = psi(mid, x, p);
    if (std::abs(value) <= p.tol) return mid;
    if (value > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw std::runtime_error("find_mu_star: bisection did not converge");
}

Vector prox_sql1(const Vector& x, const ProxParams& p) {
  p.validate();
  if (x.lpNorm<Eigen::Infinity>() == 0.0) return Vector::Zero(x.size());
  const double mu = find_mu_star(x, p);
  const Vector lambda = prox_weights(mu, x, p);
  const double ab = p.alpha_bar * p.beta;
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out[i] = lambda[i] > 0.0 ? lambda[i] * x[i] / (lambda[i] + ab) : 0.0;
  }
  return out;
}

Vector prox_sql2(const Vector& x, const ProxParams& p) {
  p.validate();
  return x / (1.0 + p.alpha_bar * p.beta);
}

int active_set_size(const Vector& x, const ProxParams& p) {
  p.validate();
  if (x.lpNorm<Eigen::Infinity>() == 0.0) return 0;
  const Vector lambda = prox_weights(find_mu_star(x, p), x, p);
  int count = 0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > 0.0) ++count;
  }
  return count;
}

}  // namespace rhc
