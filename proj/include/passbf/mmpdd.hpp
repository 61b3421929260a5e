#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "passbf/ball_qp.hpp"
#include "passbf/barrier.hpp"
#include "passbf/channel.hpp"
#include "passbf/surrogates.hpp"
#include "passbf/wmmse.hpp"

namespace passbf {

/// Auxiliary variables of the augmented Lagrangian, all K x M (M = N L) except q.
struct AuxState {
  MatR theta;  // PASS-modified phases
  MatC u;      // equivalent pinching coefficients
  MatC q;      // received amplitudes, K x K
  MatR s;      // distances, refreshed from X
};

struct PddDuals {
  MatC lambda_u;
  MatR lambda_theta;
  MatC lambda_q;
  double rho = 1e-4;
};

struct SolverConfig {
  double rho0 = 1e-4;
  double gamma = 0.9;
  double sigma_shrink = 0.85;
  double eps_final = 1e-6;
  int max_outer = 200;
  int max_inner = 30;
  double inner_tol = 1e-4;
  double rho_floor = 1e-16;
  /// Run the augmented Lagrangian in normalized units: unit power budget and
  /// unit noise power. The sum rate is invariant to this change of units.
  bool normalize_units = true;
};

struct PddState {
  Placement x;
  TransmitBeam d;
  AuxState aux;
  PddDuals duals;
  VecC v;
  VecR alpha;
  // Internal units: channel amplitudes times amp_scale, D times beam_scale.
  double amp_scale = 1.0;
  double beam_scale = 1.0;

  double phi(const Scenario& s) const { return amp_scale * s.phi(); }
  double noise(const Scenario& s) const {
    const double g = amp_scale * beam_scale;
    return g * g * s.noise_power;
  }
  double power(const Scenario& s) const { return beam_scale * beam_scale * s.max_power; }
  TransmitBeam physical_beam() const { return TransmitBeam{d.d / beam_scale}; }
};

struct Residuals {
  MatC bu;
  MatR btheta;
  MatC bq;
  double inf_norm = 0.0;
};

struct TraceRow {
  int outer_iter = 0;
  int inner_sweeps = 0;
  double sum_rate = 0.0;
  double al_value = 0.0;
  double residual_inf = 0.0;
  double rho = 0.0;
};

enum class SolveStatus { converged, max_iterations, penalty_collapse };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::penalty_collapse: return "penalty_collapse";
  }
  return "?";
}

struct SolveResult {
  Placement x;
  TransmitBeam d;
  double sum_rate = 0.0;
  double residual_inf = 0.0;
  int outer_iterations = 0;
  SolveStatus status = SolveStatus::max_iterations;
  std::vector<TraceRow> trace;
  std::vector<std::vector<double>> inner_al;  // AL after each inner sweep, per outer iteration
  int barrier_warnings = 0;
  bool converged() const { return status == SolveStatus::converged; }
};

namespace detail {

inline MatR psi_matrix(const Scenario& s) {
  MatR p(s.n_users, s.n_waveguides);
  for (int k = 0; k < s.n_users; ++k)
    for (int n = 0; n < s.n_waveguides; ++n) p(k, n) = s.transverse_offset(k, n);
  return p;
}

inline MatR distances(const Scenario& s, const Placement& x) {
  const int K = s.n_users, N = s.n_waveguides, L = s.pas_per_waveguide;
  MatR r(K, N * L);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n)
      for (int l = 0; l < L; ++l) r(k, n * L + l) = s.distance(k, n, x.x(n, l));
  return r;
}

/// A = U Sigma: per-waveguide sums of the pinching coefficients (K x N).
inline MatC collapse_u(const MatC& u, int N, int L) {
  MatC a(u.rows(), N);
  for (int n = 0; n < N; ++n) a.col(n) = u.middleCols(n * L, L).rowwise().sum();
  return a;
}

}  // namespace detail

/// Equally spaced PAs around the mean user abscissa, RZF beamformer at full power,
/// auxiliaries consistent with X, zero duals.
inline PddState init_solver(const Scenario& s, std::uint64_t /*seed*/ = 0, const SolverConfig& cfg = {}) {
  s.validate();
  const int K = s.n_users, N = s.n_waveguides, L = s.pas_per_waveguide, M = N * L;
  PddState st;
  if (cfg.normalize_units) {
    st.amp_scale = std::sqrt(s.max_power / s.noise_power);
    st.beam_scale = 1.0 / std::sqrt(s.max_power);
  }
  st.x = centered_placement(s);

  const MatC h = effective_channel_direct(s, st.x);
  const MatC gram = h.adjoint() * h + (K * s.noise_power / s.max_power) * MatC::Identity(K, K);
  MatC d = h * gram.ldlt().solve(MatC::Identity(K, K));
  const double pw = d.squaredNorm();
  if (pw > 0.0) d *= std::sqrt(s.max_power / pw);
  st.d.d = d * st.beam_scale;

  const double kappa = s.wavenumber(), ne = s.refractive_index, phi = st.phi(s);
  st.aux.s = detail::distances(s, st.x);
  st.aux.theta.resize(K, M);
  st.aux.u.resize(K, M);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n)
      for (int l = 0; l < L; ++l) {
        const int m = n * L + l;
        const double r = st.aux.s(k, m);
        st.aux.theta(k, m) = kappa * (r + ne * st.x.x(n, l));
        st.aux.u(k, m) = phi * std::exp(-kI * st.aux.theta(k, m)) / r;
      }
  st.aux.q = detail::collapse_u(st.aux.u, N, L) * st.d.d;
  st.duals.lambda_u = MatC::Zero(K, M);
  st.duals.lambda_theta = MatR::Zero(K, M);
  st.duals.lambda_q = MatC::Zero(K, K);
  st.duals.rho = cfg.rho0;
  st.v = VecC::Zero(K);
  st.alpha = VecR::Ones(K);
  return st;
}

inline Residuals residuals(const Scenario& s, const PddState& st) {
  const int K = s.n_users, N = s.n_waveguides, L = s.pas_per_waveguide, M = N * L;
  const double kappa = s.wavenumber(), ne = s.refractive_index, phi = st.phi(s);
  const MatR r = detail::distances(s, st.x);
  Residuals b;
  b.bu.resize(K, M);
  b.btheta.resize(K, M);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n)
      for (int l = 0; l < L; ++l) {
        const int m = n * L + l;
        const double th = st.aux.theta(k, m);
        b.bu(k, m) = st.aux.u(k, m) * r(k, m) - phi * std::exp(-kI * th);
        b.btheta(k, m) = th - kappa * (r(k, m) + ne * st.x.x(n, l));
      }
  b.bq = st.aux.q - detail::collapse_u(st.aux.u, N, L) * st.d.d;
  b.inf_norm = std::max({b.bu.size() ? b.bu.cwiseAbs().maxCoeff() : 0.0,
                         b.btheta.size() ? b.btheta.cwiseAbs().maxCoeff() : 0.0,
                         b.bq.size() ? b.bq.cwiseAbs().maxCoeff() : 0.0});
  return b;
}

/// WMMSE part of the augmented Lagrangian, evaluated on Q with the state's (v, alpha).
inline double al_wmmse_term(const Scenario& s, const PddState& st) {
  WmmseState w;
  w.v = st.v;
  w.alpha = st.alpha;
  return wmmse_objective_calibrated(st.aux.q, w, st.noise(s));
}

inline double al_objective(const Scenario& s, const PddState& st) {
  const Residuals b = residuals(s, st);
  const double rho = st.duals.rho;
  const double pen = (b.bu + rho * st.duals.lambda_u).squaredNorm() +
                     (b.btheta + rho * st.duals.lambda_theta).squaredNorm() +
                     (b.bq + rho * st.duals.lambda_q).squaredNorm();
  return al_wmmse_term(s, st) + pen / (2.0 * rho);
}

inline void update_vw(const Scenario& s, PddState& st) {
  const WmmseState w = wmmse_state_from_received(st.aux.q, st.noise(s));
  st.v = w.v;
  st.alpha = w.alpha;
}

/// Joint minimization over (D, Q): Q is eliminated in closed form per entry, which
/// leaves a quadratic in D over the power ball.
inline void update_DQ(const Scenario& s, PddState& st) {
  const int K = s.n_users, N = s.n_waveguides, L = s.pas_per_waveguide;
  const double rho = st.duals.rho, sc = 1.0 / (2.0 * rho);
  const MatC A = detail::collapse_u(st.aux.u, N, L);
  VecR a(K), w(K);
  VecC g(K);
  for (int k = 0; k < K; ++k) {
    a(k) = st.alpha(k) * std::norm(st.v(k)) / kLn2;
    g(k) = st.alpha(k) * std::conj(st.v(k)) / kLn2;
    w(k) = a(k) * sc / (a(k) + sc);
  }
  MatC wt(K, K);
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < K; ++i)
      wt(k, i) = sc * (a(k) * rho * st.duals.lambda_q(k, i) + (k == i ? g(k) : cplx(0.0))) / (a(k) + sc);
  const MatC phi = A.adjoint() * w.asDiagonal() * A;
  const MatC psi = A.adjoint() * wt;
  st.d.d = solve_ball_qp(0.5 * (phi + phi.adjoint()), psi, st.power(s)).d;
  const MatC c = A * st.d.d;
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < K; ++i)
      st.aux.q(k, i) = ((k == i ? g(k) : cplx(0.0)) + sc * (c(k, i) - rho * st.duals.lambda_q(k, i))) / (a(k) + sc);
}

namespace detail {

/// Per-(k, PA) data of the x-subproblem, frozen at the expansion point x0.
struct XTerm {
  double xu, psi, x0, r0;
  cplx u, w0;    // w = u r + zeta, zeta = rho lambda_u - phi e^{-i theta}
  double e0;     // theta - kappa (r + n_eff x) + rho lambda_theta
  double omega;  // coefficient of r(x) in the expanded x-part
};

struct XCoeffs {
  double kappa, ne, rho;
};

inline XTerm make_xterm(const Scenario& s, const PddState& st, int k, int n, int l) {
  const int m = n * s.pas_per_waveguide + l;
  const double kappa = s.wavenumber(), ne = s.refractive_index, rho = st.duals.rho;
  XTerm t;
  t.xu = s.users[k].x;
  t.psi = s.transverse_offset(k, n);
  t.x0 = st.x.x(n, l);
  t.r0 = mm::dist(t.x0, t.xu, t.psi);
  t.u = st.aux.u(k, m);
  const double th = st.aux.theta(k, m);
  const cplx zeta = rho * st.duals.lambda_u(k, m) - st.phi(s) * std::exp(-kI * th);
  t.w0 = t.u * t.r0 + zeta;
  t.e0 = th - kappa * (t.r0 + ne * t.x0) + rho * st.duals.lambda_theta(k, m);
  t.omega = (std::real(std::conj(t.u) * zeta) - kappa * (th + rho * st.duals.lambda_theta(k, m))) / rho;
  return t;
}

/// Change of the exact AL x-part between x0 and x.
inline double xterm_al_delta(const XTerm& t, const XCoeffs& c, double x) {
  const double d = x - t.x0;
  const double dr = mm::dist_delta(x, t.x0, t.xu, t.psi);
  const double du = 2.0 * std::real(std::conj(t.w0) * t.u) * dr + std::norm(t.u) * dr * dr;
  const double de = -c.kappa * (dr + c.ne * d);
  return (du + 2.0 * t.e0 * de + de * de) / (2.0 * c.rho);
}

inline double xterm_surrogate_delta(const XTerm& t, const XCoeffs& c, double x, double* grad, double* hess) {
  const double d = x - t.x0;
  const double r = mm::dist(x, t.xu, t.psi);
  const double dr = mm::dist_delta(x, t.x0, t.xu, t.psi);
  const double rp = (x - t.xu) / r;
  const double nc = c.kappa * c.kappa * c.ne / c.rho;
  double val = xterm_al_delta(t, c, x) + nc * mm::nc_gap(x, t.x0, t.xu, t.psi);
  const cplx w = t.w0 + t.u * dr;
  const double e = t.e0 - c.kappa * (dr + c.ne * d);
  double g = (std::real(std::conj(w) * t.u) * rp - c.kappa * e * (rp + c.ne)) / c.rho;
  g += nc * mm::nc_gap_derivative(x, t.x0, t.xu, t.psi);
  double h = (std::norm(t.u) + c.kappa * c.kappa * (1.0 + c.ne * c.ne)) / c.rho + nc * 3.0 * x / t.r0;
  if (t.omega <= 0.0) {
    val += -t.omega * mm::tangent_gap(x, t.x0, t.xu, t.psi);
    g += -t.omega * (rp - (t.x0 - t.xu) / t.r0);
  } else {
    h += t.omega * t.psi * t.psi / (r * r * r);
  }
  if (grad) *grad = g;
  if (hess) *hess = h;
  return val;
}

}  // namespace detail

/// MM step on X: minimizes the convex surrogate of the AL x-part per waveguide
/// under C1/C2. Returns the number of waveguides whose Newton budget ran out.
inline int update_X(const Scenario& s, PddState& st, const BarrierOptions& opt = {}) {
  const int K = s.n_users, N = s.n_waveguides, L = s.pas_per_waveguide;
  const detail::XCoeffs c{s.wavenumber(), s.refractive_index, st.duals.rho};
  int warnings = 0;
  for (int n = 0; n < N; ++n) {
    std::vector<detail::XTerm> terms;
    terms.reserve(K * L);
    for (int l = 0; l < L; ++l)
      for (int k = 0; k < K; ++k) terms.push_back(detail::make_xterm(s, st, k, n, l));
    SeparableObjective f = [&](const VecR& x, VecR* grad, VecR* hess) {
      double v = 0.0;
      for (int l = 0; l < L; ++l) {
        double gl = 0.0, hl = 0.0;
        for (int k = 0; k < K; ++k) {
          double gk, hk;
          v += detail::xterm_surrogate_delta(terms[l * K + k], c, x(l), &gk, &hk);
          gl += gk;
          hl += hk;
        }
        if (grad) (*grad)(l) = gl;
        if (hess) (*hess)(l) = hl;
      }
      return v;
    };
    const VecR x0 = st.x.x.row(n).transpose();
    const BarrierResult br = minimize_ordered_box(f, x0, s.min_spacing, s.span_x, opt);
    if (br.capped) ++warnings;
    VecR xn = br.x;
    xn(0) = std::max(xn(0), 0.0);
    xn(L - 1) = std::min(xn(L - 1), s.span_x);
    if (f(xn, nullptr, nullptr) <= 0.0) st.x.x.row(n) = xn.transpose();
  }
  st.aux.s = detail::distances(s, st.x);
  return warnings;
}

/// Exact minimization over each row u_k.
inline void update_U(const Scenario& s, PddState& st) {
  const int K = s.n_users, N = s.n_waveguides, L = s.pas_per_waveguide, M = N * L;
  const double rho = st.duals.rho, phi = st.phi(s);
  const MatR& r = st.aux.s;
  MatC C(M, K);  // Sigma D
  for (int n = 0; n < N; ++n)
    for (int l = 0; l < L; ++l) C.row(n * L + l) = st.d.d.row(n);
  const MatC G = C.conjugate() * C.transpose();
  for (int k = 0; k < K; ++k) {
    VecC zeta(M);
    for (int m = 0; m < M; ++m) zeta(m) = rho * st.duals.lambda_u(k, m) - phi * std::exp(-kI * st.aux.theta(k, m));
    MatC sys = G;
    sys.diagonal() += r.row(k).transpose().array().square().matrix().cast<cplx>();
    const VecC t = (st.aux.q.row(k) + rho * st.duals.lambda_q.row(k)).transpose();
    const VecC rhs = C.conjugate() * t - (r.row(k).transpose().cast<cplx>().array() * zeta.array()).matrix();
    Eigen::LLT<MatC> llt(sys);
    if (llt.info() != Eigen::Success) throw NumericalError("singular u-subproblem");
    st.aux.u.row(k) = llt.solve(rhs).transpose();
  }
}

/// Lipschitz constants phi |lambda_u + u r / rho| of the exponential term's gradient.
inline MatR lipschitz_theta(const Scenario& s, const PddState& st) {
  const MatC c = st.phi(s) * (st.duals.lambda_u + (st.aux.u.array() * st.aux.s.array().cast<cplx>()).matrix() / st.duals.rho);
  return c.cwiseAbs();
}

inline void update_theta(const Scenario& s, PddState& st) {
  const int K = s.n_users, N = s.n_waveguides, L = s.pas_per_waveguide;
  const double rho = st.duals.rho, kappa = s.wavenumber(), ne = s.refractive_index, phi = st.phi(s);
  st.aux.s = detail::distances(s, st.x);
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n)
      for (int l = 0; l < L; ++l) {
        const int m = n * L + l;
        const double r = st.aux.s(k, m);
        const cplx c = phi * (st.duals.lambda_u(k, m) + st.aux.u(k, m) * r / rho);
        const double th0 = st.aux.theta(k, m);
        const double g0 = mm::lex_gradient(c, th0);
        const double lip = std::abs(c);
        st.aux.theta(k, m) =
            (rho * lip * th0 - rho * g0 + kappa * (r + ne * st.x.x(n, l)) - rho * st.duals.lambda_theta(k, m)) /
            (rho * lip + 1.0);
      }
}

struct OuterDecision {
  bool terminate = false;
  bool dual_step = false;
  bool collapse = false;
};

/// Dual ascent when the residual shrank enough, otherwise tighten the penalty.
inline OuterDecision outer_update(const Residuals& b, PddDuals& duals, double& prev_residual,
                                  const SolverConfig& cfg) {
  OuterDecision d;
  if (b.inf_norm <= cfg.eps_final) {
    d.terminate = true;
    return d;
  }
  if (b.inf_norm <= cfg.gamma * prev_residual) {
    duals.lambda_u += b.bu / duals.rho;
    duals.lambda_theta += b.btheta / duals.rho;
    duals.lambda_q += b.bq / duals.rho;
    d.dual_step = true;
  } else {
    duals.rho *= cfg.sigma_shrink;
    if (duals.rho < cfg.rho_floor) d.collapse = true;
  }
  prev_residual = b.inf_norm;
  return d;
}

inline SolveResult solve(const Scenario& s, const SolverConfig& cfg = {}, std::uint64_t seed = 0) {
  PddState st = init_solver(s, seed, cfg);
  SolveResult res;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_outer; ++it) {
    std::vector<double> inner;
    double al_prev = al_objective(s, st);
    inner.push_back(al_prev);
    int sweeps = 0;
    for (; sweeps < cfg.max_inner;) {
      update_vw(s, st);
      update_DQ(s, st);
      res.barrier_warnings += update_X(s, st);
      update_U(s, st);
      update_theta(s, st);
      ++sweeps;
      const double al = al_objective(s, st);
      inner.push_back(al);
      const bool done = std::abs(al - al_prev) <= cfg.inner_tol * std::max(1.0, std::abs(al_prev));
      al_prev = al;
      if (done) break;
    }
    const Residuals b = residuals(s, st);
    TraceRow row;
    row.outer_iter = it + 1;
    row.inner_sweeps = sweeps;
    row.sum_rate = sum_rate(s, st.x, st.physical_beam());
    row.al_value = al_prev;
    row.residual_inf = b.inf_norm;
    row.rho = st.duals.rho;
    res.trace.push_back(row);
    res.inner_al.push_back(std::move(inner));
    res.outer_iterations = it + 1;
    const OuterDecision dec = outer_update(b, st.duals, prev, cfg);
    if (dec.terminate) {
      res.status = SolveStatus::converged;
      break;
    }
    if (dec.collapse) {
      res.status = SolveStatus::penalty_collapse;
      break;
    }
  }
  res.x = st.x;
  res.d = st.physical_beam();
  res.sum_rate = sum_rate(s, st.x, res.d);
  res.residual_inf = residuals(s, st).inf_norm;
  return res;
}

}  // namespace passbf
