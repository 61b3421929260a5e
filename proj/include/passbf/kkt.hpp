#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <thread>
#include <vector>

#include "passbf/channel.hpp"
#include "passbf/rng.hpp"
#include "passbf/types.hpp"

namespace passbf {

/// Dual/power parameters plus placement parameters from which a full solution is
/// rebuilt. Stored after projection.
struct KktParams {
  VecR lambda;  // K, > 0
  VecR mu;      // K, >= 0
  VecR x_end;   // N
  MatR omega;   // N x L, omega(n, 0) is the offset from the feed
};

/// d_k = mu_k (I + H diag(lambda) H^H)^{-1} h_k with one Cholesky factorization.
inline TransmitBeam reconstruct_beam(const MatC& h, const VecR& lambda, const VecR& mu) {
  const int N = static_cast<int>(h.rows()), K = static_cast<int>(h.cols());
  if (lambda.size() != K || mu.size() != K) throw InvalidInput("lambda/mu size mismatch");
  MatC a = MatC::Identity(N, N);
  for (int k = 0; k < K; ++k) a.noalias() += lambda(k) * h.col(k) * h.col(k).adjoint();
  Eigen::LLT<MatC> llt(a);
  if (llt.info() != Eigen::Success) throw NumericalError("reconstruction matrix not positive definite");
  TransmitBeam b;
  b.d = llt.solve(h);
  for (int k = 0; k < K; ++k) b.d.col(k) *= mu(k);
  return b;
}

inline TransmitBeam reconstruct_beam(const EffectiveChannel& ch, const VecR& lambda, const VecR& mu) {
  return reconstruct_beam(ch.h_tilde, lambda, mu);
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}
inline double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

inline VecR project_x_end(const VecR& raw, const Scenario& s) {
  const double lo = s.pas_per_waveguide * s.min_spacing;
  VecR out(raw.size());
  for (int n = 0; n < raw.size(); ++n) out(n) = lo + sigmoid(raw(n)) * (s.span_x - lo);
  return out;
}

/// eps 1 + (1 - L eps) z / sum(z); a zero-sum input is replaced by the uniform vector.
inline VecR project_spacings(const VecR& z, double eps) {
  const int L = static_cast<int>(z.size());
  if (!(eps > 0.0) || eps > 1.0 / L * (1.0 + 1e-12)) throw InvalidInput("projection threshold outside (0, 1/L]");
  const double sum = z.sum();
  const VecR zz = sum > 0.0 ? z : VecR::Constant(L, 1.0 / L);
  const double ss = sum > 0.0 ? sum : 1.0;
  const double slack = std::max(0.0, 1.0 - L * eps);
  return VecR::Constant(L, eps) + (slack / ss) * zz;
}

/// Placement from projected last-PA positions and spacings: x_{n,l} = sum_{i<=l} omega_{n,i}.
inline Placement placement_from_spacings(const MatR& omega) {
  Placement p;
  p.x.resize(omega.rows(), omega.cols());
  for (int n = 0; n < omega.rows(); ++n) {
    double acc = 0.0;
    for (int l = 0; l < omega.cols(); ++l) {
      acc += omega(n, l);
      p.x(n, l) = acc;
    }
  }
  return p;
}

/// mu <- mu P / sum(mu); D <- D diag(sqrt(mu)) / sum_k ||d_k||^2, then an exact
/// rescale to total power P.
inline TransmitBeam normalize_power(const TransmitBeam& beam, const VecR& mu, double power) {
  const double msum = mu.sum();
  if (!(msum > 0.0)) throw InvalidInput("normalize_power needs sum(mu) > 0");
  const double dsum = beam.d.squaredNorm();
  TransmitBeam out;
  if (!(dsum > 0.0)) {
    out.d = MatC::Zero(beam.d.rows(), beam.d.cols());
    return out;
  }
  out.d = beam.d;
  for (int k = 0; k < mu.size(); ++k) out.d.col(k) *= std::sqrt(std::max(0.0, mu(k) * power / msum));
  out.d /= dsum;
  const double n = out.d.squaredNorm();
  if (n > 0.0) out.d *= std::sqrt(power / n);
  return out;
}

struct DecodedSolution {
  KktParams params;
  Placement x;
  TransmitBeam beam;
  double sum_rate = 0.0;
};

/// Raw layout: [x_end (N) | omega (N*L, waveguide-major) | lambda (K) | mu (K)].
inline int raw_dimension(const Scenario& s) { return s.n_waveguides * (1 + s.pas_per_waveguide) + 2 * s.n_users; }

/// Scale applied to softplus outputs for lambda, so that raw values of order one
/// span the regime between matched filtering and zero forcing.
inline double lambda_scale(const Scenario& s) { return s.max_power / s.noise_power; }

inline KktParams project_raw(const VecR& raw, const Scenario& s) {
  const int N = s.n_waveguides, L = s.pas_per_waveguide, K = s.n_users;
  if (raw.size() != raw_dimension(s)) throw InvalidInput("raw parameter vector has wrong length");
  KktParams p;
  p.x_end = project_x_end(raw.head(N), s);
  p.omega.resize(N, L);
  for (int n = 0; n < N; ++n) {
    VecR z(L);
    for (int l = 0; l < L; ++l) z(l) = softplus(raw(N + n * L + l));
    const VecR zp = project_spacings(z, s.min_spacing / p.x_end(n));
    p.omega.row(n) = (p.x_end(n) * zp).transpose();
  }
  p.lambda.resize(K);
  p.mu.resize(K);
  const double ls = lambda_scale(s);
  for (int k = 0; k < K; ++k) {
    p.lambda(k) = ls * softplus(raw(N + N * L + k));
    p.mu(k) = softplus(raw(N + N * L + K + k));
  }
  return p;
}

/// Rebuilds (X, D) from already-projected parameters.
inline DecodedSolution decode_params(const KktParams& p, const Scenario& s) {
  DecodedSolution sol;
  sol.params = p;
  sol.x = placement_from_spacings(p.omega);
  const MatC h = effective_channel_direct(s, sol.x);
  const double msum = p.mu.sum();
  if (!(msum > 0.0)) {
    sol.beam.d = MatC::Zero(s.n_waveguides, s.n_users);
  } else {
    sol.beam = normalize_power(reconstruct_beam(h, p.lambda, p.mu), p.mu, s.max_power);
  }
  sol.sum_rate = rates_from_received(h.adjoint() * sol.beam.d, s.noise_power).sum_rate;
  return sol;
}

inline DecodedSolution decode_raw(const VecR& raw, const Scenario& s) { return decode_params(project_raw(raw, s), s); }

/// Raw vector whose decoded placement reproduces `x` (feasible, with x_{n,1} >= min_spacing)
/// and whose dual/power entries are zero.
inline VecR encode_placement(const Placement& x, const Scenario& s) {
  const int N = s.n_waveguides, L = s.pas_per_waveguide;
  VecR raw = VecR::Zero(raw_dimension(s));
  const double lo = L * s.min_spacing;
  for (int n = 0; n < N; ++n) {
    const double xe = std::clamp(x.x(n, L - 1), lo, s.span_x);
    const double frac = std::clamp((xe - lo) / (s.span_x - lo), 1e-12, 1.0 - 1e-12);
    raw(n) = std::log(frac / (1.0 - frac));
    VecR z(L);
    double prev = 0.0;
    for (int l = 0; l < L; ++l) {
      z(l) = std::max(x.x(n, l) - prev - s.min_spacing, 0.0);
      prev = x.x(n, l);
    }
    const double zs = z.sum();
    for (int l = 0; l < L; ++l) {
      const double zn = zs > 0.0 ? std::max(L * z(l) / zs, 1e-9) : 1.0;
      raw(N + n * L + l) = softplus_inverse(zn);
    }
  }
  return raw;
}

struct DualSearchOptions {
  int population = 64;
  int elites = 8;
  double smoothing = 0.9;
  double init_std = 0.5;
  double min_std = 1e-6;
  int threads = 1;
};

struct DualSearchResult {
  DecodedSolution best;
  std::vector<double> best_trace;  // best-so-far after each evaluation
  int evaluations = 0;
};

/// Cross-entropy search over the raw parameter vector. The decoded initial mean is
/// evaluated first, so the result is never worse than it.
inline DualSearchResult dual_search(const Scenario& s, int budget, std::uint64_t seed,
                                    const DualSearchOptions& opt = {}) {
  if (budget < 1) throw InvalidInput("dual_search budget must be >= 1");
  const int dim = raw_dimension(s);
  RandomStream rng(SplitMix64::mix(seed ^ 0xD1B54A32D192ED03ULL));
  VecR mean = encode_placement(centered_placement(s), s);
  VecR var = VecR::Constant(dim, opt.init_std * opt.init_std);

  DualSearchResult res;
  res.best = decode_raw(mean, s);
  res.evaluations = 1;
  res.best_trace.push_back(res.best.sum_rate);

  const int threads = std::max(1, opt.threads);
  while (res.evaluations < budget) {
    const int pop = std::min(opt.population, budget - res.evaluations);
    std::vector<VecR> cand(pop);
    for (int i = 0; i < pop; ++i) {
      cand[i].resize(dim);
      for (int j = 0; j < dim; ++j) cand[i](j) = mean(j) + std::sqrt(var(j)) * rng.normal();
    }
    std::vector<DecodedSolution> sols(pop);
    auto work = [&](int tid) {
      for (int i = tid; i < pop; i += threads) sols[i] = decode_raw(cand[i], s);
    };
    if (threads == 1 || pop == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < std::min(threads, pop); ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    for (int i = 0; i < pop; ++i) {
      if (sols[i].sum_rate > res.best.sum_rate) res.best = sols[i];
      res.best_trace.push_back(res.best.sum_rate);
    }
    res.evaluations += pop;
    std::vector<int> order(pop);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return sols[a].sum_rate > sols[b].sum_rate; });
    const int ne = std::min(opt.elites, pop);
    VecR em = VecR::Zero(dim), ev = VecR::Zero(dim);
    for (int e = 0; e < ne; ++e) em += cand[order[e]];
    em /= ne;
    for (int e = 0; e < ne; ++e) ev += (cand[order[e]] - em).cwiseAbs2();
    ev /= ne;
    mean = opt.smoothing * em + (1.0 - opt.smoothing) * mean;
    var = opt.smoothing * ev + (1.0 - opt.smoothing) * var;
    var = var.cwiseMax(opt.min_std * opt.min_std);
  }
  return res;
}

}  // namespace passbf
