#pragma once

#include <cmath>

#include <Eigen/Eigenvalues>

#include "passbf/types.hpp"

namespace passbf {

struct BallQpResult {
  MatC d;
  double multiplier = 0.0;  // eta >= 0
  bool active = false;
};

/// min tr(D^H Phi D) - 2 Re tr(Psi^H D)  s.t.  ||D||_F^2 <= power,
/// Phi Hermitian PSD. Stationarity gives (Phi + eta I) D = Psi; eta is found by
/// bisection on the secular equation when the unconstrained minimizer is too big.
/// On a singular Phi with an inactive ball the minimum-norm solution is returned.
inline BallQpResult solve_ball_qp(const MatC& phi, const MatC& psi, double power, double rel_tol = 1e-10) {
  if (!(power > 0.0)) throw InvalidInput("ball radius must be positive");
  Eigen::SelfAdjointEigenSolver<MatC> es(phi);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const VecR ev = es.eigenvalues().cwiseMax(0.0);
  const MatC& V = es.eigenvectors();
  const MatC c = V.adjoint() * psi;
  const VecR cn = c.rowwise().squaredNorm();
  const double emax = ev.size() ? ev.maxCoeff() : 0.0;
  const double cut = std::max(emax, 1.0) * 1e-13;

  auto norm2_at = [&](double eta) {
    double s = 0.0;
    for (int i = 0; i < ev.size(); ++i) {
      const double den = ev(i) + eta;
      if (den > cut) s += cn(i) / (den * den);
      else if (cn(i) > 0.0) return std::numeric_limits<double>::infinity();
    }
    return s;
  };
  auto build = [&](double eta) {
    MatC y = c;
    for (int i = 0; i < ev.size(); ++i) {
      const double den = ev(i) + eta;
      if (den > cut) y.row(i) /= den;
      else y.row(i).setZero();
    }
    return MatC(V * y);
  };

  BallQpResult res;
  // Pseudo-inverse at eta = 0: components in the numerical null space are dropped.
  double n0 = 0.0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > cut) n0 += cn(i) / (ev(i) * ev(i));
  if (n0 <= power) {
    res.d = build(0.0);
    return res;
  }
  double lo = 0.0, hi = std::sqrt(cn.sum() / power);
  while (norm2_at(hi) > power) hi *= 2.0;
  double eta = hi;
  for (int it = 0; it < 400; ++it) {
    eta = 0.5 * (lo + hi);
    const double n2 = norm2_at(eta);
    if (std::abs(n2 - power) <= rel_tol * power) break;
    if (n2 > power) lo = eta;
    else hi = eta;
    if (hi - lo <= 1e-300) break;
  }
  res.d = build(eta);
  // Remove the residual bisection error so the constraint holds exactly.
  const double n = res.d.squaredNorm();
  if (n > 0.0) res.d *= std::sqrt(power / n);
  res.multiplier = eta;
  res.active = true;
  return res;
}

}  // namespace passbf
