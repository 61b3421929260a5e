#include <gtest/gtest.h>

#include <random>

#include "passbf/baselines.hpp"
#include "passbf/kkt.hpp"
#include "test_util.hpp"

using namespace passbf;

namespace {

double abs_cosine(const VecC& a, const VecC& b) {
  return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

VecR random_raw(std::mt19937_64& g, const Scenario& s, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  VecR raw(raw_dimension(s));
  for (int i = 0; i < raw.size(); ++i) raw(i) = n(g);
  return raw;
}

}  // namespace

// ---- reconstruction ----

TEST(Reconstruct, ScalarCaseIsCollinearWithChannel) {
  const MatC h = MatC::Constant(1, 1, cplx(0.3, -0.4));
  const VecR lambda = VecR::Constant(1, 2.0), mu = VecR::Constant(1, 1.5);
  const TransmitBeam b = reconstruct_beam(h, lambda, mu);
  const cplx expected = 1.5 * h(0, 0) / (1.0 + 2.0 * 0.25);
  EXPECT_LT(std::abs(b.d(0, 0) - expected), 1e-15);
}

TEST(Reconstruct, VanishingDualsGiveMatchedFilter) {
  std::mt19937_64 g(1);
  const MatC h = fixtures::random_complex(g, 3, 2);
  const VecR mu = (VecR(2) << 0.7, 2.0).finished();
  const TransmitBeam b = reconstruct_beam(h, VecR::Constant(2, 1e-12), mu);
  for (int k = 0; k < 2; ++k) EXPECT_LT((b.d.col(k) - mu(k) * h.col(k)).norm(), 1e-10 * h.col(k).norm());
}

TEST(Reconstruct, SizeMismatchThrows) {
  const MatC h = MatC::Ones(2, 2);
  EXPECT_THROW(reconstruct_beam(h, VecR::Ones(1), VecR::Ones(2)), InvalidInput);
}

TEST(Reconstruct, CollinearWithWmmseFixedPoint) {
  std::mt19937_64 g(2);
  WmmseOptions opt;
  opt.rel_tol = 1e-10;
  opt.max_iter = 5000;
  for (int t = 0; t < 10; ++t) {
    const Scenario s = fixtures::random_scenario(g, 2 + t % 2, 1 + t % 3);
    const MatC h = effective_channel_direct(s, fixtures::random_placement(g, s));
    const ClassicWmmseResult w = classic_wmmse(h, s.noise_power, s.max_power, opt);
    ASSERT_GT(w.multiplier, 0.0);
    const int K = s.n_users;
    VecR lambda(K);
    for (int k = 0; k < K; ++k) lambda(k) = w.state.alpha(k) * std::norm(w.state.v(k)) / w.multiplier;
    const TransmitBeam r = reconstruct_beam(h, lambda, VecR::Ones(K));
    for (int k = 0; k < K; ++k) EXPECT_GE(abs_cosine(r.d.col(k), w.beam.d.col(k)), 1.0 - 1e-6);
  }
}

// ---- projections ----

TEST(ProjectXEnd, ZeroRawIsMidpoint) {
  ScenarioParams p;
  p.n_users = 1;
  p.pas_per_waveguide = 8;
  p.min_spacing = 0.005;
  const Scenario s = make_scenario(p, {{3.0, 5.0}});
  EXPECT_NEAR(project_x_end(VecR::Zero(1), s)(0), 10.02, 1e-12);
  EXPECT_NEAR(project_x_end(VecR::Constant(1, 50.0), s)(0), 20.0, 1e-12);
  EXPECT_NEAR(project_x_end(VecR::Constant(1, -50.0), s)(0), 0.04, 1e-12);
}

TEST(ProjectSpacings, Examples) {
  const VecR a = project_spacings((VecR(2) << 1.0, 1.0).finished(), 0.25);
  EXPECT_NEAR(a(0), 0.5, 1e-15);
  EXPECT_NEAR(a(1), 0.5, 1e-15);
  const VecR b = project_spacings((VecR(2) << 1.0, 3.0).finished(), 0.1);
  EXPECT_NEAR(b(0), 0.3, 1e-15);
  EXPECT_NEAR(b(1), 0.7, 1e-15);
}

TEST(ProjectSpacings, OutputsLieOnTheShrunkSimplex) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    const int L = 1 + t % 8;
    VecR z(L);
    for (int l = 0; l < L; ++l) z(l) = std::exp(6.0 * (u(g) - 0.5));
    const double eps = u(g) / L;
    const VecR p = project_spacings(z, eps);
    EXPECT_GE(p.minCoeff(), eps);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  }
}

TEST(ProjectSpacings, ZeroSumFallsBackToUniform) {
  const VecR p = project_spacings(VecR::Zero(4), 0.1);
  for (int l = 0; l < 4; ++l) EXPECT_NEAR(p(l), 0.25, 1e-15);
}

TEST(ProjectSpacings, InvalidThresholdThrows) {
  EXPECT_THROW(project_spacings(VecR::Ones(2), 0.0), InvalidInput);
  EXPECT_THROW(project_spacings(VecR::Ones(2), 0.6), InvalidInput);
}

// Only the uniform point of the simplex is fixed by the map.
TEST(ProjectSpacings, UniformSimplexPointIsFixed) {
  for (int L : {1, 3, 8}) {
    const VecR u = VecR::Constant(L, 1.0 / L);
    EXPECT_LT((project_spacings(u, 0.5 / L) - u).cwiseAbs().maxCoeff(), 1e-12);
  }
  const VecR z = (VecR(2) << 0.3, 0.7).finished();
  EXPECT_GT((project_spacings(z, 0.1) - z).cwiseAbs().maxCoeff(), 1e-3);
}

// ---- power normalization ----

TEST(NormalizePower, HitsBudgetExactly) {
  std::mt19937_64 g(4);
  for (int t = 0; t < 50; ++t) {
    TransmitBeam b{fixtures::random_complex(g, 3, 3) * std::exp(4.0 * (t % 5 - 2))};
    const VecR mu = (VecR(3) << 0.2, 1.0, 3.0).finished();
    EXPECT_NEAR(normalize_power(b, mu, 0.01).power(), 0.01, 1e-12 * 0.01);
  }
}

TEST(NormalizePower, EqualWeightsKeepColumnRatios) {
  std::mt19937_64 g(5);
  TransmitBeam b{fixtures::random_complex(g, 2, 3)};
  const TransmitBeam o = normalize_power(b, VecR::Ones(3), 1.0);
  const double r = o.d.col(0).norm() / b.d.col(0).norm();
  for (int k = 1; k < 3; ++k) EXPECT_NEAR(o.d.col(k).norm() / b.d.col(k).norm(), r, 1e-12 * r);
}

TEST(NormalizePower, ZeroBeamStaysZero) {
  TransmitBeam b{MatC::Zero(2, 2)};
  EXPECT_EQ(normalize_power(b, VecR::Ones(2), 1.0).d.norm(), 0.0);
}

TEST(NormalizePower, NonPositiveMuSumThrows) {
  TransmitBeam b{MatC::Ones(2, 2)};
  EXPECT_THROW(normalize_power(b, VecR::Zero(2), 1.0), InvalidInput);
}

TEST(NormalizePower, DoublingBudgetNeverLowersSingleUserRate) {
  std::mt19937_64 g(6);
  for (int t = 0; t < 20; ++t) {
    const Scenario s = fixtures::random_scenario(g, 1, 3);
    const MatC h = effective_channel_direct(s, fixtures::random_placement(g, s));
    TransmitBeam b{fixtures::random_complex(g, 1, 1)};
    const double r1 = rates_from_received(h.adjoint() * normalize_power(b, VecR::Ones(1), s.max_power).d,
                                          s.noise_power).sum_rate;
    const double r2 = rates_from_received(h.adjoint() * normalize_power(b, VecR::Ones(1), 2 * s.max_power).d,
                                          s.noise_power).sum_rate;
    EXPECT_GE(r2, r1);
  }
}

TEST(PhaseRotation, SinrInvariant) {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  for (int t = 0; t < 50; ++t) {
    const Scenario s = fixtures::random_scenario(g, 3, 2);
    const MatC h = effective_channel_direct(s, fixtures::random_placement(g, s));
    TransmitBeam b = fixtures::random_beam(g, s);
    const VecR s0 = rates_from_received(h.adjoint() * b.d, s.noise_power).sinr;
    for (int k = 0; k < 3; ++k) b.d.col(k) *= std::exp(kI * u(g));
    const VecR s1 = rates_from_received(h.adjoint() * b.d, s.noise_power).sinr;
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(s1(k), s0(k), 1e-12 * std::max(1.0, s0(k)));
  }
}

// ---- decoding ----

TEST(Decode, RandomRawVectorsAreFeasible) {
  std::mt19937_64 g(8);
  for (int t = 0; t < 1000; ++t) {
    const Scenario s = fixtures::random_scenario(g, 1 + t % 4, 1 + t % 8);
    const DecodedSolution d = decode_raw(random_raw(g, s, 0.5 + 4.0 * (t % 3)), s);
    const FeasibilityReport f = check_feasibility(s, d.x, d.beam);
    EXPECT_TRUE(f.feasible()) << f.describe();
    EXPECT_GT(d.params.lambda.minCoeff(), 0.0);
    EXPECT_GE(d.params.mu.minCoeff(), 0.0);
  }
}

TEST(Decode, EncodedPlacementRoundTrips) {
  std::mt19937_64 g(9);
  for (int t = 0; t < 50; ++t) {
    const Scenario s = fixtures::random_scenario(g, 2, 1 + t % 6);
    Placement x = fixtures::random_placement(g, s);
    // the first PA must sit at least one spacing from the feed to be representable
    for (int n = 0; n < x.x.rows(); ++n) {
      const double shift = std::max(0.0, s.min_spacing - x.x(n, 0));
      x.x.row(n).array() += shift;
      if (x.x(n, x.x.cols() - 1) > s.span_x) x.x.row(n).array() -= x.x(n, x.x.cols() - 1) - s.span_x;
    }
    if (x.x.col(0).minCoeff() < s.min_spacing) continue;
    const DecodedSolution d = decode_raw(encode_placement(x, s), s);
    EXPECT_LT((d.x.x - x.x).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Decode, WrongLengthThrows) {
  std::mt19937_64 g(10);
  const Scenario s = fixtures::random_scenario(g, 2, 2);
  EXPECT_THROW(decode_raw(VecR::Zero(raw_dimension(s) + 1), s), InvalidInput);
}

// ---- dual search ----

TEST(DualSearch, TraceMonotoneAndResultFeasible) {
  std::mt19937_64 g(11);
  const Scenario s = fixtures::random_scenario(g, 2, 3);
  const DualSearchResult r = dual_search(s, 300, 5);
  EXPECT_EQ(r.evaluations, 300);
  ASSERT_EQ(static_cast<int>(r.best_trace.size()), 300);
  for (size_t i = 1; i < r.best_trace.size(); ++i) EXPECT_GE(r.best_trace[i], r.best_trace[i - 1]);
  EXPECT_TRUE(check_feasibility(s, r.best.x, r.best.beam).feasible());
  EXPECT_NEAR(sum_rate(s, r.best.x, r.best.beam), r.best.sum_rate, 1e-9);
  const DecodedSolution init = decode_raw(encode_placement(centered_placement(s), s), s);
  EXPECT_GE(r.best.sum_rate, init.sum_rate);
}

TEST(DualSearch, DeterministicPerSeedAndThreadCount) {
  std::mt19937_64 g(12);
  const Scenario s = fixtures::random_scenario(g, 2, 2);
  const DualSearchResult a = dual_search(s, 200, 9);
  DualSearchOptions opt;
  opt.threads = 3;
  const DualSearchResult b = dual_search(s, 200, 9, opt);
  EXPECT_EQ(a.best.sum_rate, b.best.sum_rate);
  EXPECT_EQ(a.best.x.x, b.best.x.x);
  EXPECT_NE(dual_search(s, 200, 10).best_trace, a.best_trace);
}

TEST(DualSearch, ZeroBudgetThrows) {
  std::mt19937_64 g(13);
  EXPECT_THROW(dual_search(fixtures::random_scenario(g, 1, 1), 0, 1), InvalidInput);
}

TEST(DualSearch, SingleAntennaWithinTwoPercentOfGridOracle) {
  std::mt19937_64 g(14);
  for (int t = 0; t < 3; ++t) {
    const Scenario s = fixtures::random_scenario(g, 1, 1);
    const double oracle = grid_oracle(s).sum_rate;
    const double found = dual_search(s, 2000, t).best.sum_rate;
    EXPECT_GE(found, 0.98 * oracle);
  }
}
