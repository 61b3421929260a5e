#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "passbf/scenario.hpp"
#include "passbf/types.hpp"

namespace passbf {

// Flat PA index m = n * L + l.
inline int pa_index(const Scenario& s, int n, int l) { return n * s.pas_per_waveguide + l; }

/// Block-diagonal feed-to-PA response G(X), M x N. Entry (n,l) of block n is
/// exp(-i kappa n_eff x_{n,l}) / sqrt(L).
inline MatC guided_response(const Scenario& s, const Placement& p) {
  const int N = s.n_waveguides, L = s.pas_per_waveguide;
  const double kn = s.wavenumber() * s.refractive_index;
  const double amp = 1.0 / std::sqrt(static_cast<double>(L));
  MatC g = MatC::Zero(N * L, N);
  for (int n = 0; n < N; ++n)
    for (int l = 0; l < L; ++l) g(pa_index(s, n, l), n) = amp * std::exp(-kI * (kn * p.x(n, l)));
  return g;
}

/// Free-space LoS row h_k^H (1 x M) from every PA to user k.
inline RowC user_channel(const Scenario& s, const Placement& p, int k) {
  const int N = s.n_waveguides, L = s.pas_per_waveguide;
  const double sb = std::sqrt(s.path_gain_beta());
  const double kappa = s.wavenumber();
  RowC h(N * L);
  for (int n = 0; n < N; ++n) {
    for (int l = 0; l < L; ++l) {
      const double r = s.distance(k, n, p.x(n, l));
      if (!(r > 0.0)) throw InvalidInput("user co-located with PA");
      h(pa_index(s, n, l)) = sb * std::exp(-kI * (kappa * r)) / r;
    }
  }
  return h;
}

/// h~_k = G^H h_k for every user plus the link geometry that produced it.
struct EffectiveChannel {
  MatC h_tilde;  // N x K, column k is h~_k
  MatR r;        // K x M distances
  MatR psi;      // K x N transverse offsets

  int n_users() const { return static_cast<int>(h_tilde.cols()); }
  /// Received amplitudes q_{k,k'} = h~_k^H d_{k'} (K x K).
  MatC received(const TransmitBeam& b) const { return h_tilde.adjoint() * b.d; }
};

inline EffectiveChannel effective_channel(const Scenario& s, const Placement& p) {
  const int N = s.n_waveguides, K = s.n_users, L = s.pas_per_waveguide;
  const MatC g = guided_response(s, p);
  EffectiveChannel ch;
  ch.h_tilde.resize(N, K);
  ch.r.resize(K, N * L);
  ch.psi.resize(K, N);
  for (int k = 0; k < K; ++k) {
    const RowC row = user_channel(s, p, k) * g;
    ch.h_tilde.col(k) = row.adjoint();
    for (int n = 0; n < N; ++n) {
      ch.psi(k, n) = s.transverse_offset(k, n);
      for (int l = 0; l < L; ++l) ch.r(k, pa_index(s, n, l)) = s.distance(k, n, p.x(n, l));
    }
  }
  return ch;
}

/// Effective channel by the direct per-PA sum, without forming G.
/// Used on hot paths (search, grid evaluation).
inline MatC effective_channel_direct(const Scenario& s, const Placement& p) {
  const int N = s.n_waveguides, K = s.n_users, L = s.pas_per_waveguide;
  const double phi = s.phi(), kappa = s.wavenumber(), ne = s.refractive_index;
  MatC h(N, K);
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < N; ++n) {
      cplx acc = 0.0;
      for (int l = 0; l < L; ++l) {
        const double x = p.x(n, l);
        const double r = s.distance(k, n, x);
        if (!(r > 0.0)) throw InvalidInput("user co-located with PA");
        acc += std::exp(-kI * (kappa * (r + ne * x))) / r;
      }
      h(n, k) = std::conj(phi * acc);
    }
  }
  return h;
}

struct RateReport {
  VecR sinr;
  VecR rate;
  double sum_rate = 0.0;
  MatR received_power;  // |h~_k^H d_k'|^2, K x K
};

inline RateReport rates_from_received(const MatC& q, double noise_power) {
  const int K = static_cast<int>(q.rows());
  RateReport rep;
  rep.received_power = q.cwiseAbs2();
  rep.sinr.resize(K);
  rep.rate.resize(K);
  for (int k = 0; k < K; ++k) {
    const double sig = rep.received_power(k, k);
    const double interf = rep.received_power.row(k).sum() - sig;
    rep.sinr(k) = sig / (interf + noise_power);
    rep.rate(k) = std::log2(1.0 + rep.sinr(k));
  }
  rep.sum_rate = rep.rate.sum();
  return rep;
}

inline RateReport sinr_and_rate(const EffectiveChannel& ch, const TransmitBeam& b, const Scenario& s) {
  return rates_from_received(ch.received(b), s.noise_power);
}

inline double sum_rate(const Scenario& s, const Placement& p, const TransmitBeam& b) {
  const MatC h = effective_channel_direct(s, p);
  return rates_from_received(h.adjoint() * b.d, s.noise_power).sum_rate;
}

/// Effective gains E_k (diagonal) and interference I_{k,k'} (off-diagonal),
/// evaluated from the scalar geometric sums rather than the matrix product.
inline MatR effective_gains(const Scenario& s, const Placement& p, const TransmitBeam& b) {
  const int N = s.n_waveguides, K = s.n_users, L = s.pas_per_waveguide;
  const double kappa = s.wavenumber(), ne = s.refractive_index;
  const double scale = s.path_gain_beta() / L;
  MatR e(K, K);
  for (int k = 0; k < K; ++k) {
    for (int kp = 0; kp < K; ++kp) {
      cplx acc = 0.0;
      for (int n = 0; n < N; ++n)
        for (int l = 0; l < L; ++l) {
          const double x = p.x(n, l);
          const double r = s.distance(k, n, x);
          acc += std::exp(-kI * (kappa * (r + ne * x))) / r * b.d(n, kp);
        }
      e(k, kp) = scale * std::norm(acc);
    }
  }
  return e;
}

enum class Constraint { min_spacing, waveguide_span, power };

inline std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::min_spacing: return "C1";
    case Constraint::waveguide_span: return "C2";
    case Constraint::power: return "C3";
  }
  return "?";
}

struct Violation {
  Constraint constraint;
  int waveguide = -1;  // -1 for the power constraint
  int pa = -1;
  double margin = 0.0;  // amount by which the constraint is exceeded
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  bool feasible() const { return violations.empty(); }
  std::string describe() const {
    std::ostringstream os;
    for (const auto& v : violations)
      os << to_string(v.constraint) << "(n=" << v.waveguide << ",l=" << v.pa << ") margin=" << v.margin << "; ";
    return os.str();
  }
};

inline constexpr double kFeasibilityTol = 1e-9;

/// Checks C1 (spacing), C2 (span) and C3 (power) with an absolute tolerance.
inline FeasibilityReport check_feasibility(const Scenario& s, const Placement& p, const TransmitBeam& b,
                                           double tol = kFeasibilityTol) {
  FeasibilityReport rep;
  const int N = s.n_waveguides, L = s.pas_per_waveguide;
  if (p.x.rows() != N || p.x.cols() != L) throw InvalidInput("placement shape mismatch");
  for (int n = 0; n < N; ++n) {
    for (int l = 0; l < L; ++l) {
      const double x = p.x(n, l);
      if (!std::isfinite(x)) {
        rep.violations.push_back({Constraint::waveguide_span, n, l, std::numeric_limits<double>::infinity()});
        continue;
      }
      if (-x > tol) rep.violations.push_back({Constraint::waveguide_span, n, l, -x});
      if (x - s.span_x > tol) rep.violations.push_back({Constraint::waveguide_span, n, l, x - s.span_x});
      if (l > 0) {
        const double short_by = s.min_spacing - (x - p.x(n, l - 1));
        if (short_by > tol) rep.violations.push_back({Constraint::min_spacing, n, l, short_by});
      }
    }
  }
  const double excess = b.power() - s.max_power;
  if (excess > tol || !std::isfinite(excess)) rep.violations.push_back({Constraint::power, -1, -1, excess});
  return rep;
}

}  // namespace passbf
