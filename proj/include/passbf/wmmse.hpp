#pragma once

#include <cmath>

#include "passbf/channel.hpp"
#include "passbf/types.hpp"

namespace passbf {

struct WmmseState {
  VecC v;      // equalizers
  VecR alpha;  // weights
  VecR e;      // MSE values
  VecR j_cov;  // received-signal covariances
};

/// e_k for an arbitrary equalizer, from the received amplitudes q = H~^H D.
inline double mse_from_received(const MatC& q, double noise_power, cplx v, int k) {
  double acc = 0.0;
  for (int i = 0; i < q.cols(); ++i) acc += std::norm(v * q(k, i));
  return acc + noise_power * std::norm(v) + 1.0 - 2.0 * std::real(v * q(k, k));
}

inline double mse(const EffectiveChannel& ch, const TransmitBeam& b, cplx v, int k, double noise_power) {
  const RowC row = ch.h_tilde.col(k).adjoint() * b.d;
  double acc = 0.0;
  for (int i = 0; i < row.size(); ++i) acc += std::norm(v * row(i));
  return acc + noise_power * std::norm(v) + 1.0 - 2.0 * std::real(v * row(k));
}

inline double received_covariance(const MatC& q, double noise_power, int k) {
  return q.row(k).squaredNorm() + noise_power;
}

inline cplx equalizer_from_received(const MatC& q, double noise_power, int k) {
  return std::conj(q(k, k)) / received_covariance(q, noise_power, k);
}

inline cplx optimal_equalizer(const EffectiveChannel& ch, const TransmitBeam& b, int k, double noise_power) {
  return equalizer_from_received(ch.received(b), noise_power, k);
}

inline double weight_from_mse(double e) {
  if (!(e > 0.0)) throw NumericalError("non-positive MSE; channel or beam is corrupted");
  return 1.0 / e;
}

inline double optimal_weight(const EffectiveChannel& ch, const TransmitBeam& b, int k, double noise_power) {
  const MatC q = ch.received(b);
  const cplx v = equalizer_from_received(q, noise_power, k);
  return weight_from_mse(mse_from_received(q, noise_power, v, k));
}

/// Optimal (v, alpha) for every user given received amplitudes.
inline WmmseState wmmse_state_from_received(const MatC& q, double noise_power) {
  const int K = static_cast<int>(q.rows());
  WmmseState st;
  st.v.resize(K);
  st.alpha.resize(K);
  st.e.resize(K);
  st.j_cov.resize(K);
  for (int k = 0; k < K; ++k) {
    st.j_cov(k) = received_covariance(q, noise_power, k);
    st.v(k) = std::conj(q(k, k)) / st.j_cov(k);
    st.e(k) = mse_from_received(q, noise_power, st.v(k), k);
    st.alpha(k) = weight_from_mse(st.e(k));
  }
  return st;
}

inline WmmseState optimal_wmmse_state(const EffectiveChannel& ch, const TransmitBeam& b, double noise_power) {
  return wmmse_state_from_received(ch.received(b), noise_power);
}

/// sum_k (alpha_k e_k - log2 alpha_k), with e_k evaluated at the state's v.
inline double wmmse_objective(const EffectiveChannel& ch, const TransmitBeam& b, const WmmseState& st,
                              double noise_power) {
  const MatC q = ch.received(b);
  double obj = 0.0;
  for (int k = 0; k < q.rows(); ++k) {
    if (!(st.alpha(k) > 0.0)) throw InvalidInput("wmmse weights must be positive");
    obj += st.alpha(k) * mse_from_received(q, noise_power, st.v(k), k) - std::log2(st.alpha(k));
  }
  return obj;
}

/// K + sum_k (alpha_k e_k - ln alpha_k - 1) / ln 2. Agrees with wmmse_objective
/// whenever alpha_k e_k = 1, and alpha_k = 1/e_k is its exact minimizer in alpha,
/// so every block update of the alternating scheme is a descent step.
inline double wmmse_objective_calibrated(const MatC& q, const WmmseState& st, double noise_power) {
  double obj = static_cast<double>(q.rows());
  for (int k = 0; k < q.rows(); ++k) {
    const double a = st.alpha(k);
    if (!(a > 0.0)) throw InvalidInput("wmmse weights must be positive");
    obj += (a * mse_from_received(q, noise_power, st.v(k), k) - std::log(a) - 1.0) / kLn2;
  }
  return obj;
}

}  // namespace passbf
