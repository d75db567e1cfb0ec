#include "fracspec/asymptotics.hpp"
#include "fracspec/weyl_quadrature.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fracspec;

namespace {

std::vector<double> power_sequence(Index n, double c, double e) {
  std::vector<double> v;
  for (Index j = 1; j <= n; ++j) v.push_back(c * std::pow(static_cast<double>(j), e));
  return v;
}

// one line with log-spaced distances; u is stored along the line
std::pair<Vec, std::vector<NormalLine>> sampled_line(const std::function<double(double)> &f, double lo, double hi,
                                                     int m) {
  NormalLine l;
  Vec u(m);
  for (int i = 0; i < m; ++i) {
    const double d = lo * std::pow(hi / lo, i / (m - 1.0));
    l.nodes.push_back(i);
    l.dist.push_back(d);
    u(i) = f(d);
  }
  return {u, {l}};
}

Vec sample_interior(const Grid &g, const std::function<double(double)> &f) {
  Vec u(static_cast<Index>(g.interior.size()));
  for (std::size_t i = 0; i < g.interior.size(); ++i) u(static_cast<Index>(i)) = f(g.dist[g.interior[i]]);
  return u;
}

} // namespace

TEST(WeylFit, ExactPowerLaw) {
  const auto v = power_sequence(300, 2.0, 0.5);
  const auto f = weyl_fit(v);
  EXPECT_NEAR(f.exponent, 0.5, 1e-12);
  EXPECT_NEAR(f.constant, 2.0, 1e-11);
  EXPECT_LE(f.residual, 1e-12);
  EXPECT_EQ(f.j_lo, 101);
  EXPECT_EQ(f.j_hi, 200);
}

TEST(WeylFit, RecoversDirichletConstant) {
  const auto C = weyl_constant_dirichlet(fractional_power_symbol(SecondOrderCoeffs::identity(2), 0.5),
                                         DomainSpec::rectangle())
                     .C;
  EXPECT_NEAR(C, std::sqrt(4 * pi), 1e-10);
  const auto f = weyl_fit(power_sequence(600, C, 0.5));
  EXPECT_NEAR(f.constant, 3.5449077018, 1e-8);
}

TEST(WeylFit, FixedExponentWithCorrection) {
  std::vector<double> v;
  for (int j = 1; j <= 200; ++j) v.push_back(0.25 / j * (1.0 + 1.0 / j));
  const auto f = weyl_fit(v, std::pair<Index, Index>{20, 200}, -1.0);
  EXPECT_TRUE(f.fixed_exponent);
  EXPECT_EQ(f.exponent, -1.0);
  EXPECT_NEAR(f.constant, 0.25, 0.02 * 0.25);
}

TEST(WeylFit, FixedConstantIsGeometricMean) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ud(0.5, 2.0);
  std::vector<double> v(80);
  for (auto &x : v) x = ud(rng);
  const auto f = weyl_fit(v, std::pair<Index, Index>{11, 70}, 0.3);
  double s = 0.0;
  for (Index j = 11; j <= 70; ++j) s += std::log(v[j - 1] * std::pow(static_cast<double>(j), -0.3));
  EXPECT_NEAR(f.constant, std::exp(s / 60.0), 1e-12);
}

TEST(WeylFit, WindowErrors) {
  const auto v = power_sequence(50, 1.0, 1.0);
  EXPECT_THROW(weyl_fit(v, std::pair<Index, Index>{1, 30}), argument_error);
  EXPECT_THROW(weyl_fit(v, std::pair<Index, Index>{10, 51}), argument_error);
  EXPECT_THROW(weyl_fit(v, std::pair<Index, Index>{30, 20}), argument_error);
  EXPECT_THROW(weyl_fit(v, std::pair<Index, Index>{10, 18}), argument_error);
  EXPECT_THROW(weyl_fit(power_sequence(20, 1.0, 1.0)), argument_error); // middle third of 20 holds 7
  auto bad = v;
  bad[24] = 0.0;
  EXPECT_THROW(weyl_fit(bad), numeric_error);
}

TEST(Windows, MiddleThird) {
  EXPECT_EQ(middle_third(300), (std::pair<Index, Index>{101, 200}));
  EXPECT_EQ(middle_third(4), (std::pair<Index, Index>{2, 2}));
}

TEST(Windows, ResolvedCount) {
  // square side 1, h = 1/16, GLL phase limit: pi (32)^2 / (2 pi)^2
  EXPECT_EQ(resolved_count(1.0, 2, 1.0 / 16, theta_max_gll), 81);
  // half circle arc pi, 1024 boundary nodes on the full circle
  const double h = 2 * pi / 1024;
  EXPECT_EQ(resolved_count(pi, 1, h, theta_max_second_order),
            static_cast<Index>(std::floor(pi * 2 * 0.3 / h / (2 * pi))));
  EXPECT_EQ(resolved_window(40, 1.0, 2, 1.0 / 16, theta_max_gll), (std::pair<Index, Index>{10, 40}));
  EXPECT_THROW(resolved_count(1.0, 0, 0.1, 1.0), argument_error);
}

TEST(BoundaryExponent, PurePower) {
  const auto [u, lines] = sampled_line([](double d) { return std::pow(d, 0.5); }, 1e-4, 1e-1, 40);
  const auto r = boundary_exponent(u, lines, {1e-4, 1e-1});
  EXPECT_NEAR(r.exponent, 0.5, 1e-12);
  EXPECT_EQ(r.samples, 40);
}

TEST(BoundaryExponent, LowerOrderCorrection) {
  const auto [u, lines] = sampled_line([](double d) { return d * (1 + d); }, 1e-3, 1e-1, 60);
  EXPECT_NEAR(boundary_exponent(u, lines, {1e-3, 1e-1}).exponent, 1.0, 0.02);
}

TEST(BoundaryExponent, TooFewSamples) {
  const auto [u, lines] = sampled_line([](double d) { return d; }, 1e-3, 1e-1, 15);
  EXPECT_THROW(boundary_exponent(u, lines, {1e-3, 1e-1}), numeric_error);
  EXPECT_THROW(boundary_exponent(Vec::Zero(15), lines, {1e-3, 1e-1}), numeric_error);
  EXPECT_THROW(boundary_exponent(u, lines, {1e-1, 1e-3}), argument_error);
}

TEST(BoundaryExponent, GridOverload) {
  const Grid g = build_grid(DomainSpec::rectangle(), 64);
  const Vec u = sample_interior(g, [](double d) { return std::pow(d, 0.75); });
  EXPECT_NEAR(boundary_exponent(u, g).exponent, 0.75, 1e-10);
}

TEST(RatioTrace, PowerProfileIsNonvanishing) {
  const Grid g = build_grid(DomainSpec::interval(), 256);
  const auto r = ratio_trace_check(sample_interior(g, [](double d) { return std::sqrt(d); }), g, 0.5);
  EXPECT_TRUE(r.nonvanishing);
  EXPECT_NEAR(r.near_max, 1.0, 1e-12);
  EXPECT_NEAR(r.global_max, 1.0, 1e-12);
  ASSERT_EQ(r.patch_sup.size(), 2u);
}

TEST(RatioTrace, ExtraPowerVanishes) {
  const Grid g = build_grid(DomainSpec::interval(), 256);
  const auto r = ratio_trace_check(sample_interior(g, [](double d) { return std::pow(d, 1.5); }), g, 0.5);
  EXPECT_FALSE(r.nonvanishing);
  EXPECT_LE(r.near_max, 4.0 / 256);
}

TEST(RatioTrace, SquarePatches) {
  const Grid g = build_grid(DomainSpec::rectangle(), 32);
  const auto r = ratio_trace_check(sample_interior(g, [](double d) { return std::sqrt(d); }), g, 0.5);
  ASSERT_EQ(r.patch_sup.size(), 4u);
  for (double s : r.patch_sup) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(LogProbe, ConstantProfileIsExactLog) {
  const auto r = log_divergence_probe([](double) { return 1.0; }, {1e-2, 1e-4, 1e-6});
  for (std::size_t i = 0; i < r.deltas.size(); ++i) EXPECT_NEAR(r.I[i], -std::log(r.deltas[i]), 1e-12);
  EXPECT_NEAR(r.fit_slope, 1.0, 1e-12);
}

TEST(LogProbe, ExponentialSurrogate) {
  const std::vector<double> deltas{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  const auto r = log_divergence_probe([](double x) { return std::exp(-x); }, deltas);
  // oracle: int_delta^1 e^{-2x}/x dx = E1(2 delta) - E1(2)
  for (std::size_t i = 0; i < deltas.size(); ++i)
    EXPECT_NEAR(r.I[i], -std::expint(-2 * deltas[i]) + std::expint(-2.0), 1e-10);
  EXPECT_NEAR(r.fit_slope, 1.0, 0.01);
  EXPECT_FALSE(r.degenerate);
}

TEST(LogProbe, InterfaceDataMatchesSurrogate) {
  const std::vector<double> deltas{1e-2, 1e-4, 1e-6};
  const auto a = log_divergence_probe(std::vector<double>{3.0}, 0.0, deltas);
  const auto b = log_divergence_probe([](double x) { return std::exp(-x); }, deltas);
  for (std::size_t i = 0; i < deltas.size(); ++i) EXPECT_NEAR(a.I[i], b.I[i], 1e-10);
}

TEST(LogProbe, ZeroDataIsDegenerate) {
  const auto r = log_divergence_probe(std::vector<double>(16, 0.0), 2 * pi, {1e-2, 1e-3});
  EXPECT_TRUE(r.degenerate);
  for (double v : r.I) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(log_divergence_probe([](double) { return 0.0; }, {1e-2, 1e-3}).degenerate);
}

TEST(LogProbe, RejectsBadDeltas) {
  EXPECT_THROW(log_divergence_probe([](double) { return 1.0; }, {1e-2}), argument_error);
  EXPECT_THROW(log_divergence_probe([](double) { return 1.0; }, {1e-3, 1e-2}), argument_error);
  EXPECT_THROW(log_divergence_probe([](double) { return 1.0; }, {2.0, 1e-2}), argument_error);
}

TEST(AsymptoticsProperties, FitInvariantUnderScaling) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ud(0.9, 1.1);
  std::vector<double> v;
  for (int j = 1; j <= 120; ++j) v.push_back(std::pow(j, 0.7) * ud(rng));
  const auto f = weyl_fit(v);
  for (double c : {1e-3, 7.0}) {
    auto w = v;
    for (auto &x : w) x *= c;
    const auto g = weyl_fit(w);
    EXPECT_NEAR(g.exponent, f.exponent, 1e-12);
    EXPECT_NEAR(g.constant / f.constant, c, 1e-12 * c);
  }
}

TEST(AsymptoticsProperties, BoundaryExponentInvariantUnderScaling) {
  auto [u, lines] = sampled_line([](double d) { return std::pow(d, 0.4) * (1 + 3 * d); }, 1e-3, 1e-1, 30);
  const double e = boundary_exponent(u, lines, {1e-3, 1e-1}).exponent;
  for (double c : {-2.0, 1e-6}) {
    const Vec w = c * u;
    EXPECT_NEAR(boundary_exponent(w, lines, {1e-3, 1e-1}).exponent, e, 1e-12);
  }
}

TEST(AsymptoticsProperties, ProbeInvariantUnderScaling) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  std::vector<double> psi(32);
  for (auto &x : psi) x = nd(rng);
  const std::vector<double> deltas{1e-2, 1e-3, 1e-4};
  const auto a = log_divergence_probe(psi, 2 * pi, deltas);
  for (auto &x : psi) x *= -5.0;
  const auto b = log_divergence_probe(psi, 2 * pi, deltas);
  for (std::size_t i = 0; i < deltas.size(); ++i) EXPECT_NEAR(a.I[i], b.I[i], 1e-12 * std::abs(a.I[i]));
  EXPECT_GT(a.fit_slope, 0.0);
}
