#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "passbf/types.hpp"

namespace passbf {

/// Separable convex objective on an ordered box. `eval` fills the per-coordinate
/// gradient and Hessian diagonal and returns the objective value relative to
/// some fixed reference point.
using SeparableObjective = std::function<double(const VecR& x, VecR* grad, VecR* hess)>;

struct BarrierOptions {
  double t0 = 1.0;
  double mu = 10.0;
  double gap_tol = 1e-9;
  double armijo = 1e-4;
  double step_fraction = 0.99;
  int max_newton = 100;
  double start_blend = 1e-6;
};

struct BarrierResult {
  VecR x;
  int newton_steps = 0;
  bool capped = false;
};

/// Strictly feasible point with equal slack in every constraint.
inline VecR ordered_box_center(int L, double lo_spacing, double upper) {
  VecR c(L);
  const double sl = (upper - (L - 1) * lo_spacing) / (L + 1);
  for (int l = 0; l < L; ++l) c(l) = sl + l * (lo_spacing + sl);
  return c;
}

/// Minimizes f over {x_1 >= 0, x_l - x_{l-1} >= spacing, x_L <= upper} with a
/// log-barrier path-following Newton method. `x0` must be feasible.
inline BarrierResult minimize_ordered_box(const SeparableObjective& f, const VecR& x0, double spacing, double upper,
                                          const BarrierOptions& opt = {}) {
  const int L = static_cast<int>(x0.size());
  const int m = L + 1;
  BarrierResult res;
  if ((L - 1) * spacing >= upper * (1.0 - 1e-14)) {
    res.x = x0;
    return res;
  }
  auto slacks = [&](const VecR& x) {
    VecR s(m);
    s(0) = x(0);
    for (int l = 1; l < L; ++l) s(l) = x(l) - x(l - 1) - spacing;
    s(L) = upper - x(L - 1);
    return s;
  };
  VecR x = (1.0 - opt.start_blend) * x0 + opt.start_blend * ordered_box_center(L, spacing, upper);
  if (slacks(x).minCoeff() <= 0.0) x = ordered_box_center(L, spacing, upper);

  VecR g(L), h(L), gt(L), ht(L);
  double t = opt.t0;
  auto phi_t = [&](const VecR& y, double tt, VecR* gr, VecR* he) -> double {
    const VecR s = slacks(y);
    if (s.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
    const double fv = f(y, gr, he);
    double b = 0.0;
    for (int i = 0; i < m; ++i) b -= std::log(s(i));
    return tt * fv + b;
  };

  while (true) {
    for (int inner = 0; inner < 50; ++inner) {
      if (res.newton_steps >= opt.max_newton) {
        res.capped = true;
        res.x = x;
        return res;
      }
      const double val = phi_t(x, t, &g, &h);
      const VecR s = slacks(x);
      // Barrier gradient: constraint i has gradient a_i; -log s_i contributes -a_i / s_i.
      VecR grad = t * g;
      MatR H = MatR::Zero(L, L);
      H.diagonal() = t * h;
      auto add = [&](int i, int j, double wi, double wj, double si) {
        // constraint value = wi * x_i + wj * x_j + const, j = -1 for single-variable rows
        grad(i) -= wi / si;
        H(i, i) += wi * wi / (si * si);
        if (j >= 0) {
          grad(j) -= wj / si;
          H(j, j) += wj * wj / (si * si);
          H(i, j) += wi * wj / (si * si);
          H(j, i) += wi * wj / (si * si);
        }
      };
      add(0, -1, 1.0, 0.0, s(0));
      for (int l = 1; l < L; ++l) add(l, l - 1, 1.0, -1.0, s(l));
      add(L - 1, -1, -1.0, 0.0, s(L));

      Eigen::LDLT<MatR> ldlt(H);
      const VecR dx = -ldlt.solve(grad);
      const double dec2 = -grad.dot(dx);
      ++res.newton_steps;
      if (!(dec2 > 1e-14)) break;
      // Largest step keeping every slack positive.
      double smax = 1.0;
      const VecR ds = slacks(x + dx) - s;
      for (int i = 0; i < m; ++i)
        if (ds(i) < 0.0) smax = std::min(smax, -opt.step_fraction * s(i) / ds(i));
      double step = smax;
      // Steps below the floating-point resolution of x cannot make progress.
      const double resolution = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x.cwiseAbs().maxCoeff());
      if (smax * dx.cwiseAbs().maxCoeff() <= resolution) break;
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        const VecR xn = x + step * dx;
        const double vn = phi_t(xn, t, &gt, &ht);
        if (vn <= val - opt.armijo * step * dec2) {
          x = xn;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
      if (dec2 * 0.5 <= 1e-12) break;
    }
    if (m / t <= opt.gap_tol) break;
    t *= opt.mu;
  }
  res.x = x;
  return res;
}

}  // namespace passbf
