#pragma once

#include <cmath>

#include "passbf/types.hpp"

namespace passbf::mm {

// Distance r(x) = sqrt((x - xu)^2 + psi^2) and the change r(x) - r(x0) in a
// cancellation-free form.
inline double dist(double x, double xu, double psi) { return std::hypot(x - xu, psi); }

inline double dist_delta(double x, double x0, double xu, double psi) {
  const double d = x - x0, a = x0 - xu;
  return (2.0 * a * d + d * d) / (dist(x, xu, psi) + dist(x0, xu, psi));
}

/// Tangent bound of the concave term omega * r(x), omega <= 0.
inline double tangent_surrogate(double omega, double x, double x0, double xu, double psi) {
  const double r0 = dist(x0, xu, psi);
  return omega * (r0 + (x0 - xu) / r0 * (x - x0));
}

/// r(x) - [r0 + r'(x0)(x - x0)] >= 0, evaluated without cancellation.
inline double tangent_gap(double x, double x0, double xu, double psi) {
  const double d = x - x0, a = x0 - xu;
  const double r = dist(x, xu, psi), r0 = dist(x0, xu, psi);
  const double dr = (2.0 * a * d + d * d) / (r + r0);
  return (r0 * d * d - a * d * dr) / (r0 * (r + r0));
}

/// Jensen-type bound r <= (r^2 + r0^2) / (2 r0).
inline double jensen_surrogate(double x, double x0, double xu, double psi) {
  const double r0 = dist(x0, xu, psi);
  const double dx = x - xu;
  return (dx * dx + psi * psi + r0 * r0) / (2.0 * r0);
}

/// Convex majorizer of x * r(x) on x >= 0: the Jensen bound times x with the
/// concave -2 xu x^2 piece replaced by its tangent at x0.
inline double nc_surrogate(double x, double x0, double xu, double psi) {
  const double r0 = dist(x0, xu, psi);
  const double dx = x - xu, d = x - x0;
  return (x * (dx * dx + psi * psi + r0 * r0) + 2.0 * xu * d * d) / (2.0 * r0);
}

/// nc_surrogate(x) - x r(x) >= 0 for x >= 0.
inline double nc_gap(double x, double x0, double xu, double psi) {
  const double r0 = dist(x0, xu, psi);
  const double dr = dist_delta(x, x0, xu, psi);
  const double d = x - x0;
  return (x * dr * dr + 2.0 * xu * d * d) / (2.0 * r0);
}

inline double nc_gap_derivative(double x, double x0, double xu, double psi) {
  const double r = dist(x, xu, psi), r0 = dist(x0, xu, psi);
  const double dr = dist_delta(x, x0, xu, psi);
  return (dr * dr) / (2.0 * r0) + x * dr * ((x - xu) / r) / r0 + 2.0 * xu * (x - x0) / r0;
}

// L^ex(theta) = -Re{c e^{i a theta}}.
inline double lex_value(cplx c, double theta, double a = 1.0) { return -std::real(c * std::exp(kI * (a * theta))); }
inline double lex_gradient(cplx c, double theta, double a = 1.0) {
  return a * std::imag(c * std::exp(kI * (a * theta)));
}
inline double lex_hessian(cplx c, double theta, double a = 1.0) {
  return a * a * std::real(c * std::exp(kI * (a * theta)));
}
/// Lipschitz constant of the gradient of L^ex.
inline double lex_lipschitz(cplx c, double a = 1.0) { return a * a * std::abs(c); }

/// Gradient in the real-coefficient form phi Re{g} sin(theta) + phi Im{g} cos(theta), with c = phi * g.
inline double lex_gradient_trig(double phi, cplx g, double theta) {
  return phi * std::real(g) * std::sin(theta) + phi * std::imag(g) * std::cos(theta);
}

/// Quadratic upper bound of L^ex around theta0 with curvature varrho.
inline double lex_surrogate(cplx c, double theta, double theta0, double varrho) {
  const double d = theta - theta0;
  return lex_value(c, theta0) + lex_gradient(c, theta0) * d + 0.5 * varrho * d * d;
}

}  // namespace passbf::mm
