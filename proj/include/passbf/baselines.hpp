#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "passbf/ball_qp.hpp"
#include "passbf/channel.hpp"
#include "passbf/wmmse.hpp"

namespace passbf {

struct WmmseOptions {
  double rel_tol = 1e-8;
  int max_iter = 500;
};

struct ClassicWmmseResult {
  TransmitBeam beam;
  double sum_rate = 0.0;
  double multiplier = 0.0;     // power-constraint multiplier of the final D-step
  WmmseState state;            // (v, alpha) that produced the final D
  std::vector<double> trace;   // K - sum_rate after each iteration
  int iterations = 0;
  bool converged = false;
};

/// Regularized zero-forcing H (H^H H + reg I)^{-1} scaled to full power.
inline MatC rzf_beam(const MatC& h, double noise_power, double power) {
  const int K = static_cast<int>(h.cols());
  const MatC gram = h.adjoint() * h + (K * noise_power / power) * MatC::Identity(K, K);
  MatC d = h * gram.ldlt().solve(MatC::Identity(K, K));
  const double pw = d.squaredNorm();
  if (pw > 0.0) d *= std::sqrt(power / pw);
  return d;
}

/// Alternating WMMSE for an arbitrary channel matrix whose column k is the
/// (effective) channel of user k. Starts from RZF.
inline ClassicWmmseResult classic_wmmse(const MatC& h, double noise_power, double power,
                                        const WmmseOptions& opt = {}) {
  const int K = static_cast<int>(h.cols());
  ClassicWmmseResult res;
  MatC d = rzf_beam(h, noise_power, power);
  double prev = static_cast<double>(K) - rates_from_received(h.adjoint() * d, noise_power).sum_rate;
  for (int it = 0; it < opt.max_iter; ++it) {
    const WmmseState st = wmmse_state_from_received(h.adjoint() * d, noise_power);
    MatC phi = MatC::Zero(h.rows(), h.rows());
    MatC psi(h.rows(), K);
    for (int k = 0; k < K; ++k) {
      phi += st.alpha(k) * std::norm(st.v(k)) * h.col(k) * h.col(k).adjoint();
      psi.col(k) = st.alpha(k) * std::conj(st.v(k)) * h.col(k);
    }
    const BallQpResult qp = solve_ball_qp(0.5 * (phi + phi.adjoint()), psi, power);
    d = qp.d;
    res.multiplier = qp.multiplier;
    res.state = st;
    const double obj = static_cast<double>(K) - rates_from_received(h.adjoint() * d, noise_power).sum_rate;
    res.trace.push_back(obj);
    res.iterations = it + 1;
    if (std::abs(obj - prev) <= opt.rel_tol * std::max(1.0, std::abs(prev))) {
      res.converged = true;
      break;
    }
    prev = obj;
  }
  res.beam.d = d;
  res.sum_rate = rates_from_received(h.adjoint() * d, noise_power).sum_rate;
  return res;
}

/// Element positions of the fully digital reference array: N L elements at x = 0,
/// half-wavelength spaced along y and centered on the service area.
inline std::vector<UserPosition> fd_array_positions(const Scenario& s) {
  const int M = s.total_pas();
  std::vector<UserPosition> pos(M);
  const double half = 0.5 * s.wavelength();
  for (int j = 0; j < M; ++j) pos[j] = {0.0, 0.5 * s.span_y + (j - 0.5 * (M - 1)) * half};
  return pos;
}

/// Free-space LoS channel of the fixed array, M x K.
inline MatC fd_channel(const Scenario& s) {
  const auto pos = fd_array_positions(s);
  const int M = static_cast<int>(pos.size()), K = s.n_users;
  const double sb = std::sqrt(s.path_gain_beta()), kappa = s.wavenumber();
  MatC h(M, K);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < M; ++j) {
      const double dx = pos[j].x - s.users[k].x, dy = pos[j].y - s.users[k].y;
      const double r = std::sqrt(dx * dx + dy * dy + s.pass_height * s.pass_height);
      h(j, k) = std::conj(sb * std::exp(-kI * (kappa * r)) / r);
    }
  return h;
}

struct BaselineResult {
  Placement x;  // empty for the fully digital array
  TransmitBeam beam;
  double sum_rate = 0.0;
  int iterations = 0;
  bool converged = true;
};

inline BaselineResult fd_wmmse(const Scenario& s, const WmmseOptions& opt = {}) {
  const ClassicWmmseResult w = classic_wmmse(fd_channel(s), s.noise_power, s.max_power, opt);
  BaselineResult r;
  r.beam = w.beam;
  r.sum_rate = w.sum_rate;
  r.iterations = w.iterations;
  r.converged = w.converged;
  return r;
}

inline Placement uniform_placement(const Scenario& s) {
  const int N = s.n_waveguides, L = s.pas_per_waveguide;
  Placement p;
  p.x.resize(N, L);
  for (int n = 0; n < N; ++n)
    for (int l = 0; l < L; ++l) p.x(n, l) = L == 1 ? 0.5 * s.span_x : l * s.span_x / (L - 1);
  return p;
}

inline BaselineResult uniform_pass(const Scenario& s, const WmmseOptions& opt = {}) {
  BaselineResult r;
  r.x = uniform_placement(s);
  const ClassicWmmseResult w = classic_wmmse(effective_channel_direct(s, r.x), s.noise_power, s.max_power, opt);
  r.beam = w.beam;
  r.sum_rate = sum_rate(s, r.x, r.beam);
  r.iterations = w.iterations;
  r.converged = w.converged;
  return r;
}

struct GridOptions {
  double resolution = 1e-3;
  int threads = 1;
  double max_evaluations_k1 = 5e8;
  double max_evaluations_k2 = 2e6;
};

namespace detail {

/// Enumerates ordered index tuples i_1 < ... < i_M with gaps >= g and calls
/// fn(tuple) in lexicographic order. Tuples are split by first index for threading.
template <class Fn>
void for_each_tuple_from(int first, int M, int count, int gap, std::vector<int>& idx, Fn&& fn) {
  idx[0] = first;
  if (M == 1) {
    fn(idx);
    return;
  }
  int depth = 1;
  idx[1] = first + gap;
  while (depth > 0) {
    if (idx[depth] > count - 1 - (M - 1 - depth) * gap) {
      --depth;
      if (depth > 0) ++idx[depth];
      continue;
    }
    if (depth == M - 1) {
      fn(idx);
      ++idx[depth];
    } else {
      idx[depth + 1] = idx[depth] + gap;
      ++depth;
    }
  }
}

inline double count_tuples(long long count, int M, long long gap) {
  // number of i_1 < ... < i_M in [0, count) with gaps >= gap
  const double free = static_cast<double>(count - 1 - (M - 1) * (gap - 1));
  if (free < M) return 0.0;
  double c = 1.0;
  for (int j = 0; j < M; ++j) c = c * (free - j) / (j + 1);
  return c;
}

}  // namespace detail

/// Exhaustive search over PA positions on a regular grid of the waveguide span,
/// respecting the minimum spacing. K = 1 uses the MRT closed form, K = 2 the
/// classic WMMSE per grid point. Ties resolve to the lexicographically first tuple.
inline BaselineResult grid_oracle(const Scenario& s, const GridOptions& opt = {}) {
  const int K = s.n_users, N = s.n_waveguides, L = s.pas_per_waveguide, M = N * L;
  if (M > 3 || K > 2) throw InvalidInput("grid oracle limited to N*L <= 3 and K <= 2");
  if (!(opt.resolution > 0.0)) throw InvalidInput("grid resolution must be positive");
  const long long count = static_cast<long long>(std::floor(s.span_x / opt.resolution + 1e-9)) + 1;
  const int gap = static_cast<int>(std::ceil(s.min_spacing / opt.resolution - 1e-9));
  // Along a waveguide PAs must be ordered; across waveguides positions are independent.
  double evals = 1.0;
  for (int n = 0; n < N; ++n) evals *= detail::count_tuples(count, L, gap);
  const double cap = K == 1 ? opt.max_evaluations_k1 : opt.max_evaluations_k2;
  if (evals > cap)
    throw InvalidInput("grid oracle instance too large: " + std::to_string(static_cast<long long>(evals)) +
                       " evaluations exceed cap " + std::to_string(static_cast<long long>(cap)));
  if (evals < 1.0) throw InvalidInput("grid too coarse for the spacing constraint");

  const double kappa = s.wavenumber(), ne = s.refractive_index, phi = s.phi();
  // g(k, n, i): conj of PA contribution at grid point i on waveguide n for user k.
  std::vector<cplx> g(static_cast<size_t>(K) * N * count);
  auto gat = [&](int k, int n, long long i) -> cplx& { return g[(static_cast<size_t>(k) * N + n) * count + i]; };
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n)
      for (long long i = 0; i < count; ++i) {
        const double x = std::min(i * opt.resolution, s.span_x);
        const double r = s.distance(k, n, x);
        gat(k, n, i) = std::conj(phi * std::exp(-kI * (kappa * (r + ne * x))) / r);
      }

  // Score to maximize; for K = 1 the MRT rate is monotone in ||h~||^2.
  auto eval_cfg = [&](const std::vector<int>& cfg) -> double {
    // cfg holds M grid indices, waveguide-major
    if (K == 1) {
      double e = 0.0;
      for (int n = 0; n < N; ++n) {
        cplx acc = 0.0;
        for (int l = 0; l < L; ++l) acc += gat(0, n, cfg[n * L + l]);
        e += std::norm(acc);
      }
      return e;
    }
    MatC h(N, K);
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n) {
        cplx acc = 0.0;
        for (int l = 0; l < L; ++l) acc += gat(k, n, cfg[n * L + l]);
        h(n, k) = acc;
      }
    return classic_wmmse(h, s.noise_power, s.max_power).sum_rate;
  };

  // Enumerate configurations: recursion over waveguides, each an ordered tuple.
  struct Best {
    double rate = -1.0;
    std::vector<int> cfg;
  };
  const int threads = std::max(1, opt.threads);
  std::vector<Best> best(threads);
  auto worker = [&](int tid) {
    std::vector<int> cfg(M), idx(L);
    // Split on the first index of waveguide 0.
    for (int first = tid; first < count; first += threads) {
      std::function<void(int)> rec = [&](int n) {
        if (n == N) {
          const double r = eval_cfg(cfg);
          // strict improvement or earlier tuple at equality is decided in the reduction
          if (r > best[tid].rate || (r == best[tid].rate && cfg < best[tid].cfg)) {
            best[tid].rate = r;
            best[tid].cfg = cfg;
          }
          return;
        }
        auto visit = [&](const std::vector<int>& t) {
          for (int l = 0; l < L; ++l) cfg[n * L + l] = t[l];
          rec(n + 1);
        };
        if (n == 0) {
          detail::for_each_tuple_from(first, L, static_cast<int>(count), gap, idx, visit);
        } else {
          std::vector<int> idx2(L);
          for (int f = 0; f < count; ++f) detail::for_each_tuple_from(f, L, static_cast<int>(count), gap, idx2, visit);
        }
      };
      rec(0);
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  Best b = best[0];
  for (int t = 1; t < threads; ++t)
    if (best[t].rate > b.rate || (best[t].rate == b.rate && best[t].cfg < b.cfg)) b = best[t];

  BaselineResult r;
  r.x.x.resize(N, L);
  for (int n = 0; n < N; ++n)
    for (int l = 0; l < L; ++l) r.x.x(n, l) = std::min(b.cfg[n * L + l] * opt.resolution, s.span_x);
  const MatC h = effective_channel_direct(s, r.x);
  if (K == 1) {
    const double nh = h.col(0).norm();
    r.beam.d = nh > 0.0 ? MatC(h * (std::sqrt(s.max_power) / nh)) : MatC::Zero(N, 1);
  } else {
    r.beam = classic_wmmse(h, s.noise_power, s.max_power).beam;
  }
  r.sum_rate = sum_rate(s, r.x, r.beam);
  return r;
}

}  // namespace passbf
