#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "passbf/types.hpp"

namespace passbf {

/// How the reference gain at 1 m is derived from the carrier frequency.
/// `paper_linear` uses beta = c / (4 pi f_c); `squared` uses its square
/// (the Friis power gain).
enum class BetaConvention { paper_linear, squared };

inline std::string_view to_string(BetaConvention b) {
  return b == BetaConvention::paper_linear ? "paper_linear" : "squared";
}

inline BetaConvention beta_convention_from_string(std::string_view s) {
  if (s == "paper_linear") return BetaConvention::paper_linear;
  if (s == "squared") return BetaConvention::squared;
  throw InvalidInput("unknown beta convention '" + std::string(s) + "'");
}

struct UserPosition {
  double x = 0.0;
  double y = 0.0;
};

/// Physical configuration of one PASS downlink instance. Immutable once built;
/// derived quantities are computed on demand.
struct Scenario {
  int n_waveguides = 1;
  int n_users = 1;
  int pas_per_waveguide = 1;
  double span_x = 20.0;
  double span_y = 10.0;
  double pass_height = 2.5;
  double carrier_freq = 30e9;
  double refractive_index = 1.4;
  BetaConvention beta_convention = BetaConvention::paper_linear;
  double max_power = 0.01;      // watts
  double noise_power = 1e-12;   // watts
  double min_spacing = 0.0;     // meters
  std::vector<double> waveguide_y;
  std::vector<UserPosition> users;

  int total_pas() const { return n_waveguides * pas_per_waveguide; }
  double wavelength() const { return kSpeedOfLight / carrier_freq; }
  double guided_wavelength() const { return wavelength() / refractive_index; }
  double wavenumber() const { return 2.0 * kPi / wavelength(); }
  double path_gain_beta() const {
    const double amp = kSpeedOfLight / (4.0 * kPi * carrier_freq);
    return beta_convention == BetaConvention::paper_linear ? amp : amp * amp;
  }
  /// Per-PA amplitude constant sqrt(beta / L).
  double phi() const { return std::sqrt(path_gain_beta() / pas_per_waveguide); }

  /// Transverse PA-user offset sqrt((y_n - y_k)^2 + h^2); constant along a waveguide.
  double transverse_offset(int k, int n) const {
    const double dy = waveguide_y[n] - users[k].y;
    return std::sqrt(dy * dy + pass_height * pass_height);
  }
  double distance(int k, int n, double x) const {
    const double dx = x - users[k].x;
    const double psi = transverse_offset(k, n);
    return std::sqrt(dx * dx + psi * psi);
  }

  /// Throws InvalidInput describing the first broken invariant.
  void validate() const {
    auto fail = [](const std::string& m) { throw InvalidInput("invalid scenario: " + m); };
    if (n_users < 1) fail("n_users must be >= 1");
    if (n_waveguides != n_users) fail("n_waveguides must equal n_users");
    if (pas_per_waveguide < 1) fail("pas_per_waveguide must be >= 1");
    if (!(span_x > 0.0) || !(span_y > 0.0)) fail("spans must be positive");
    if (!(pass_height >= 0.0)) fail("pass_height must be non-negative");
    if (!(carrier_freq > 0.0)) fail("carrier_freq must be positive");
    if (!(refractive_index > 0.0)) fail("refractive_index must be positive");
    if (!(max_power > 0.0)) fail("max_power must be positive");
    if (!(noise_power > 0.0)) fail("noise_power must be positive");
    if (!(min_spacing > 0.0)) fail("min_spacing must be positive");
    if (pas_per_waveguide * min_spacing > span_x * (1.0 + 1e-12)) fail("L * min_spacing exceeds span_x");
    if (static_cast<int>(waveguide_y.size()) != n_waveguides) fail("waveguide_y size mismatch");
    for (int n = 0; n < n_waveguides; ++n) {
      if (waveguide_y[n] < 0.0 || waveguide_y[n] > span_y) fail("waveguide_y outside [0, span_y]");
      if (n > 0 && !(waveguide_y[n] > waveguide_y[n - 1])) fail("waveguide_y not strictly increasing");
    }
    if (static_cast<int>(users.size()) != n_users) fail("user count mismatch");
    for (const auto& u : users) {
      if (u.x < 0.0 || u.x > span_x || u.y < 0.0 || u.y > span_y) fail("user outside the service area");
    }
  }
};

/// Tunable physical parameters; users are supplied separately. Defaults are the
/// standard evaluation setup (30 GHz, 20 x 10 m^2, h = 2.5 m, n_eff = 1.4,
/// sigma^2 = -90 dBm, P = 10 dBm).
struct ScenarioParams {
  int n_users = 4;
  int pas_per_waveguide = 8;
  double span_x = 20.0;
  double span_y = 10.0;
  double pass_height = 2.5;
  double carrier_freq = 30e9;
  double refractive_index = 1.4;
  double power_dbm = 10.0;
  double noise_dbm = -90.0;
  double min_spacing = 0.0;  // <= 0 selects half a free-space wavelength
  BetaConvention beta_convention = BetaConvention::paper_linear;

  void validate() const {
    if (n_users < 1) throw InvalidInput("n_users must be >= 1");
    if (pas_per_waveguide < 1) throw InvalidInput("pas_per_waveguide must be >= 1");
    if (!(span_x > 0.0) || !(span_y > 0.0)) throw InvalidInput("spans must be positive");
    if (!(pass_height >= 0.0)) throw InvalidInput("pass_height must be non-negative");
    if (!(carrier_freq > 0.0)) throw InvalidInput("carrier_freq must be positive");
    if (!(refractive_index > 0.0)) throw InvalidInput("refractive_index must be positive");
    if (!std::isfinite(power_dbm) || !std::isfinite(noise_dbm)) throw InvalidInput("powers must be finite");
  }
};

/// Waveguides sit at the centres of N equal strips of the y-span.
inline std::vector<double> default_waveguide_y(int n, double span_y) {
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = (i + 0.5) * span_y / n;
  return y;
}

inline Scenario make_scenario(const ScenarioParams& p, std::vector<UserPosition> users) {
  p.validate();
  Scenario s;
  s.n_users = p.n_users;
  s.n_waveguides = p.n_users;
  s.pas_per_waveguide = p.pas_per_waveguide;
  s.span_x = p.span_x;
  s.span_y = p.span_y;
  s.pass_height = p.pass_height;
  s.carrier_freq = p.carrier_freq;
  s.refractive_index = p.refractive_index;
  s.beta_convention = p.beta_convention;
  s.max_power = dbm_to_watts(p.power_dbm);
  s.noise_power = dbm_to_watts(p.noise_dbm);
  s.min_spacing = p.min_spacing > 0.0 ? p.min_spacing : 0.5 * s.wavelength();
  s.waveguide_y = default_waveguide_y(s.n_waveguides, s.span_y);
  s.users = std::move(users);
  s.validate();
  return s;
}

/// PA x-coordinates, one row per waveguide (N x L).
struct Placement {
  MatR x;
};

/// Equally spaced placement around the mean user abscissa.
inline Placement centered_placement(const Scenario& s) {
  const int N = s.n_waveguides, L = s.pas_per_waveguide;
  const double sp = std::max(s.min_spacing, std::min(5.0 * s.guided_wavelength(), s.span_x / L));
  double cx = 0.0;
  for (const auto& u : s.users) cx += u.x;
  cx /= s.n_users;
  VecR row(L);
  for (int l = 0; l < L; ++l) row(l) = cx + (l - 0.5 * (L - 1)) * sp;
  if (row(0) < 0.0) row.array() -= row(0);
  if (row(L - 1) > s.span_x) row.array() -= row(L - 1) - s.span_x;
  row(0) = std::max(row(0), 0.0);
  Placement p;
  p.x.resize(N, L);
  for (int n = 0; n < N; ++n) p.x.row(n) = row.transpose();
  return p;
}

/// Digital precoder, column k serves user k (N x K).
struct TransmitBeam {
  MatC d;
  double power() const { return d.squaredNorm(); }
};

}  // namespace passbf
