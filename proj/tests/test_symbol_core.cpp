#include "fracspec/symbol_core.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fracspec;

namespace {

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

/// Random SPD matrix with eigenvalues in [0.2, 5].
Mat random_spd(int n, std::mt19937_64 &rng) {
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ev(0.2, 5.0);
  Mat G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = nd(rng);
  Eigen::HouseholderQR<Mat> qr(G);
  const Mat Q = qr.householderQ();
  Vec d(n);
  for (int i = 0; i < n; ++i) d(i) = ev(rng);
  return Q * d.asDiagonal() * Q.transpose();
}

Vec random_unit(int n, std::mt19937_64 &rng) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = nd(rng);
  return v.normalized();
}

std::vector<double> to_std(const Vec &v) { return {v.data(), v.data() + v.size()}; }

const std::vector<double> origin2{0.0, 0.0};

} // namespace

TEST(EvalPrincipal, LaplacianGivesSquaredNorm) {
  const auto c = SecondOrderCoeffs::identity(2);
  EXPECT_DOUBLE_EQ(eval_principal(c, origin2, std::vector<double>{3.0, 4.0}), 25.0);
}

TEST(EvalPrincipal, DiagonalCoefficients) {
  const auto c = SecondOrderCoeffs::constant_matrix(mat2(1, 0, 0, 4));
  EXPECT_DOUBLE_EQ(eval_principal(c, origin2, std::vector<double>{1.0, 1.0}), 5.0);
}

TEST(EvalPrincipal, OffDiagonalCoefficients) {
  const auto c = SecondOrderCoeffs::constant_matrix(mat2(2, 1, 1, 2));
  EXPECT_DOUBLE_EQ(eval_principal(c, origin2, std::vector<double>{1.0, 0.0}), 2.0);
}

TEST(EvalPrincipal, DimensionMismatchThrows) {
  const auto c = SecondOrderCoeffs::identity(2);
  EXPECT_THROW(eval_principal(c, origin2, std::vector<double>{1.0, 0.0, 0.0}), argument_error);
}

TEST(EllipticityMargin, Examples) {
  const std::vector<std::vector<double>> pts{{0.1, 0.2}, {0.7, 0.4}};
  const SphereRule rule{1, 1024};
  EXPECT_NEAR(strong_ellipticity_margin(SecondOrderCoeffs::identity(2), pts, rule), 1.0, 1e-12);
  // the 1024-node circle contains theta = 0, where cos^2 + 4 sin^2 = 1
  EXPECT_NEAR(strong_ellipticity_margin(SecondOrderCoeffs::constant_matrix(mat2(1, 0, 0, 4)), pts, rule),
              1.0, 1e-12);
  // smallest eigenvalue 1 along (1, -1)/sqrt 2, reached at theta = 3 pi / 4
  EXPECT_NEAR(strong_ellipticity_margin(SecondOrderCoeffs::constant_matrix(mat2(2, 1, 1, 2)), pts, rule),
              1.0, 1e-12);
}

TEST(EllipticityMargin, IndefiniteIsNonPositive) {
  const std::vector<std::vector<double>> pts{{0.0, 0.0}};
  EXPECT_LE(strong_ellipticity_margin(SecondOrderCoeffs::constant_matrix(mat2(1, 0, 0, -1)), pts, {1, 64}),
            0.0);
}

TEST(BoundaryReduction, Laplacian) {
  const auto c = SecondOrderCoeffs::identity(3);
  const auto f = boundary_reduction(c, std::vector<double>{0.5, 0.5, 0.0}, Frame::axis_aligned(3, 2, 1),
                                    std::vector<double>{0.6, 0.8});
  EXPECT_NEAR(f.kappa0, 1.0, 1e-15);
  EXPECT_NEAR(std::abs(f.kappa_plus - cplx(1.0, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(f.kappa_minus - cplx(1.0, 0.0)), 0.0, 1e-15);
}

TEST(BoundaryReduction, DiagonalCoefficients) {
  const auto c = SecondOrderCoeffs::constant_matrix(mat2(1, 0, 0, 4));
  const auto f = boundary_reduction(c, origin2, Frame::axis_aligned(2, 1, 1), std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(f.a_nn, 4.0);
  EXPECT_DOUBLE_EQ(f.b, 0.0);
  EXPECT_DOUBLE_EQ(f.c, 1.0);
  EXPECT_DOUBLE_EQ(f.kappa0, 2.0);
  EXPECT_DOUBLE_EQ(f.kappa_plus.real(), 0.5);
  EXPECT_DOUBLE_EQ(f.kappa_minus.real(), 0.5);
  EXPECT_DOUBLE_EQ(f.kappa_plus.imag(), 0.0);
}

TEST(BoundaryReduction, OffDiagonalCoefficients) {
  const auto c = SecondOrderCoeffs::constant_matrix(mat2(2, 1, 1, 2));
  const auto f = boundary_reduction(c, origin2, Frame::axis_aligned(2, 1, 1), std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(f.a_nn, 2.0);
  EXPECT_DOUBLE_EQ(f.b, 1.0);
  EXPECT_DOUBLE_EQ(f.c, 2.0);
  EXPECT_DOUBLE_EQ(f.a_prime, 3.0);
  EXPECT_NEAR(f.kappa0, std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(std::abs(f.kappa_plus - cplx(std::sqrt(3.0), 1.0) / 2.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(f.kappa_minus - cplx(std::sqrt(3.0), -1.0) / 2.0), 0.0, 1e-15);
  // i kappa_+ and -i kappa_- solve 2 t^2 + 2 t + 2 = 0
  for (cplx root : {cplx(0, 1) * f.kappa_plus, cplx(0, -1) * f.kappa_minus})
    EXPECT_NEAR(std::abs(2.0 * root * root + 2.0 * root + 2.0), 0.0, 1e-14);
}

TEST(BoundaryReduction, IndefiniteThrows) {
  const auto c = SecondOrderCoeffs::constant_matrix(mat2(1, 0, 0, -1));
  EXPECT_THROW(boundary_reduction(c, origin2, Frame::axis_aligned(2, 1, 1), std::vector<double>{1.0}),
               ellipticity_error);
}

TEST(TangentialFactorization, LaplacianUnitFrequency) {
  const auto f = tangential_factorization(SecondOrderCoeffs::identity(3), std::vector<double>{0, 0, 0},
                                          Frame::axis_aligned(3, 2, 1), std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(f.a_prime_tt, 1.0);
  EXPECT_NEAR(std::abs(f.kappa_t_plus - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(f.kappa_t_minus - 1.0), 0.0, 1e-15);
}

TEST(TangentialFactorization, LaplacianFrequencyTwo) {
  const auto f = tangential_factorization(SecondOrderCoeffs::identity(3), std::vector<double>{0, 0, 0},
                                          Frame::axis_aligned(3, 2, 1), std::vector<double>{2.0});
  EXPECT_NEAR(std::abs(f.kappa_t_plus - 2.0), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(f.kappa_t_minus - 2.0), 0.0, 1e-15);
}

TEST(TangentialFactorization, DiagonalCoefficientsBruteForce) {
  Mat A = Mat::Identity(3, 3);
  A(2, 2) = 4.0;
  const auto c = SecondOrderCoeffs::constant_matrix(A);
  // columns: xi'' along e1, interface normal e2, domain normal e3
  const auto f = tangential_factorization(c, std::vector<double>{0, 0, 0}, Frame::axis_aligned(3, 2, 1),
                                          std::vector<double>{1.0});
  // a'(xi1, xi2) = a_nn (xi1^2 + xi2^2) - 0 = 4 (xi1^2 + xi2^2); expanded by hand
  for (double t : {-3.0, -1.0, 0.0, 0.25, 2.0, 7.0}) {
    const double direct = 4.0 * (1.0 + t * t);
    EXPECT_LE(std::abs(f.tangential_factored(t) - direct) / direct, 1e-12);
  }
  EXPECT_LE(f.tangential_residual, 1e-12);
  EXPECT_LE(f.sqrt_split_residual, 1e-12);
}

TEST(TangentialFactorization, PlanarCaseHasTrivialInterfaceFrequency) {
  const auto f = tangential_factorization(SecondOrderCoeffs::constant_matrix(mat2(2, 1, 1, 2)), origin2,
                                          Frame::axis_aligned(2, 1, 1), std::vector<double>{});
  // kappa0^2 = 3 xi_1^2 with a'_11 = 3, kappa'_pm = 0
  EXPECT_DOUBLE_EQ(f.a_prime_tt, 3.0);
  EXPECT_LE(f.tangential_residual, 1e-12);
}

TEST(DtnPrincipal, Examples) {
  const Frame fr = Frame::axis_aligned(2, 1, 1);
  const std::vector<double> one{1.0};
  EXPECT_DOUBLE_EQ(dtn_principal(SecondOrderCoeffs::identity(2), origin2, fr, one), -1.0);
  EXPECT_DOUBLE_EQ(dtn_principal(SecondOrderCoeffs::constant_matrix(mat2(1, 0, 0, 4)), origin2, fr, one), -2.0);
  EXPECT_NEAR(dtn_principal(SecondOrderCoeffs::constant_matrix(mat2(2, 1, 1, 2)), origin2, fr, one),
              -1.7320508075688772, 1e-15);
}

TEST(DtnPrincipal, ModelPoissonKernelDecays) {
  const auto f = boundary_reduction(SecondOrderCoeffs::constant_matrix(mat2(2, 1, 1, 2)), origin2,
                                    Frame::axis_aligned(2, 1, 1), std::vector<double>{1.0});
  EXPECT_DOUBLE_EQ(std::abs(model_poisson_kernel(f, 0.0)), 1.0);
  EXPECT_NEAR(std::abs(model_poisson_kernel(f, 2.0)), std::exp(-2.0 * std::sqrt(3.0) / 2.0), 1e-14);
}

TEST(Transmission, EvenFractionalSymbolHasZeroResidual) {
  const auto p = fractional_power_symbol(SecondOrderCoeffs::identity(2), 0.3);
  const std::vector<std::vector<double>> pts{{0.5, 0.0}, {0.0, 0.5}};
  const std::vector<std::vector<double>> normals{{0.0, 1.0}, {1.0, 0.0}};
  EXPECT_LE(mu_transmission_residual(p, 0.3, pts, normals), 1e-15);
}

TEST(Transmission, Kappa0HasHalfTransmission) {
  Mat A = Mat::Identity(3, 3);
  A(0, 1) = A(1, 0) = 0.3;
  A(2, 2) = 2.0;
  const auto c = SecondOrderCoeffs::constant_matrix(A);
  const auto p = kappa0_symbol(c, Frame::axis_aligned(3, 2, 1), {0.5, 0.5, 0.0});
  const std::vector<std::vector<double>> pts{{0.5, 0.5}};
  const std::vector<std::vector<double>> normals{{1.0, 0.0}};
  EXPECT_LE(mu_transmission_residual(p, 0.5, pts, normals), 1e-15);
}

TEST(Transmission, OddSymbolIsMaximalViolation) {
  const double a = 0.5;
  const auto p = user_symbol(2, 2 * a,
                             [a](Point, Point xi) {
                               const double r = std::hypot(xi[0], xi[1]);
                               return cplx(xi[0] * std::pow(r, 2 * a - 1), 0.0);
                             },
                             "xi_1 |xi|^{2a-1}");
  const std::vector<std::vector<double>> pts{{0.0, 0.0}};
  const std::vector<std::vector<double>> normals{{1.0, 0.0}};
  EXPECT_NEAR(mu_transmission_residual(p, a, pts, normals), 2.0, 1e-15);
}

TEST(Transmission, DegenerateSymbolThrows) {
  const auto p = user_symbol(2, 1.0, [](Point, Point) { return cplx(0.0, 0.0); }, "zero");
  const std::vector<std::vector<double>> pts{{0.0, 0.0}};
  const std::vector<std::vector<double>> normals{{1.0, 0.0}};
  EXPECT_THROW(mu_transmission_residual(p, 0.5, pts, normals), degenerate_symbol_error);
}

TEST(Transmission, DerivativeConditionsForFractionalLaplacian) {
  const auto p = fractional_power_symbol(SecondOrderCoeffs::identity(2), 0.5);
  const std::vector<std::vector<double>> pts{{0.3, 0.0}};
  const std::vector<std::vector<double>> normals{{0.0, 1.0}};
  const auto rep = mu_transmission_derivative_residual(p, 0.5, pts, normals);
  EXPECT_TRUE(rep.passed);
  for (double r : rep.residual_by_order) EXPECT_LE(r, 1e-6);
}

TEST(Homogeneity, FractionalPowerAndKappa0) {
  const auto c = SecondOrderCoeffs::constant_matrix(mat2(2, 1, 1, 2));
  EXPECT_LE(homogeneity_defect(fractional_power_symbol(c, 0.75)), 1e-12);
  EXPECT_LE(homogeneity_defect(differential_symbol(c)), 1e-12);
}

TEST(SampledCoefficients, MultilinearInterpolationReproducesBilinear) {
  // a11 = 1 + x + 2 y, a12 = 0.1 x y, a22 = 2 sampled on a 3 x 3 lattice
  std::vector<double> v11, v12, v22;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      const double x = 0.5 * i, y = 0.5 * j;
      v11.push_back(1 + x + 2 * y);
      v12.push_back(0.1 * x * y);
      v22.push_back(2.0);
    }
  std::vector<MultilinearField> up;
  for (auto *v : {&v11, &v12, &v22}) up.emplace_back(std::vector<double>{0, 0}, 0.5, std::vector<int>{3, 3}, *v);
  const auto c = SecondOrderCoeffs::from_samples(2, up);
  const Mat m = c.matrix_at(std::vector<double>{0.3, 0.8});
  EXPECT_NEAR(m(0, 0), 1 + 0.3 + 1.6, 1e-14);
  EXPECT_NEAR(m(0, 1), 0.1 * 0.3 * 0.8, 1e-14);
  EXPECT_EQ(c.interpolation, "multilinear");
}

// Properties over random strongly elliptic coefficients, boundary frames and covectors.

TEST(SymbolProperties, FactorizationIdentityRandomSamples) {
  std::mt19937_64 rng(20240611);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int s = 0; s < 10000; ++s) {
    const int n = 2 + s % 2;
    const auto c = SecondOrderCoeffs::constant_matrix(random_spd(n, rng));
    const Frame fr = Frame::from_normal(random_unit(n, rng));
    const Vec xp = random_unit(n - 1, rng) * std::exp(nd(rng));
    const auto f = boundary_reduction(c, std::vector<double>(n, 0.0), fr, to_std(xp));
    const double xn = 3.0 * nd(rng);
    // direct evaluation of the full symbol at xi = sum xi'_k e_k + xi_n N
    Vec xi = fr.basis.leftCols(n - 1) * xp + xn * fr.basis.col(n - 1);
    const double abar = xi.dot(c.matrix_at(std::vector<double>(n, 0.0)) * xi);
    const cplx i(0, 1);
    const cplx fac = f.a_nn * (f.kappa_plus + i * xn) * (f.kappa_minus - i * xn);
    worst = std::max(worst, std::abs(abar - fac) / std::abs(abar));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(SymbolProperties, RootPlacementEvennessHomogeneity) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> ut(0.1, 10.0);
  for (int s = 0; s < 2000; ++s) {
    const int n = 2 + s % 2;
    const auto c = SecondOrderCoeffs::constant_matrix(random_spd(n, rng));
    const Frame fr = Frame::from_normal(random_unit(n, rng));
    const Vec xp = random_unit(n - 1, rng);
    const std::vector<double> x(n, 0.0);
    const auto f = boundary_reduction(c, x, fr, to_std(xp));
    ASSERT_GT(f.kappa_plus.real(), 0.0);
    ASSERT_GT(f.kappa_minus.real(), 0.0);
    EXPECT_DOUBLE_EQ(f.kappa_plus.real(), f.kappa0 / f.a_nn);
    EXPECT_EQ(boundary_reduction(c, x, fr, to_std(-xp)).kappa0, f.kappa0);
    const double t = ut(rng);
    EXPECT_NEAR(boundary_reduction(c, x, fr, to_std(t * xp)).kappa0, t * f.kappa0, 1e-12 * t * f.kappa0);
  }
}

TEST(SymbolProperties, TangentialReconstructionRandomSamples) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int s = 0; s < 10000; ++s) {
    const int n = 2 + s % 2;
    const auto c = SecondOrderCoeffs::constant_matrix(random_spd(n, rng));
    const Frame fr = Frame::from_normal(random_unit(n, rng));
    std::vector<double> xd(n - 2);
    for (double &v : xd) v = nd(rng);
    const auto f = tangential_factorization(c, std::vector<double>(n, 0.0), fr, xd);
    // kappa0^2 at (xi'', t) from boundary_reduction
    const double t = 3.0 * nd(rng);
    std::vector<double> xp = xd;
    xp.push_back(t);
    const double k0 = boundary_reduction(c, std::vector<double>(n, 0.0), fr, xp).kappa0;
    worst = std::max(worst, std::abs(f.tangential_factored(t) - k0 * k0) / (k0 * k0));
    // for n = 2 there is no xi'' and kappa'_pm = 0
    if (n == 3) ASSERT_GT(f.kappa_t_plus.real(), 0.0);
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(SymbolProperties, DtnIsNegativeOnCosphere) {
  std::mt19937_64 rng(5);
  const std::vector<std::vector<double>> pts{{0.0, 0.0, 0.0}};
  for (int s = 0; s < 200; ++s) {
    const auto c = SecondOrderCoeffs::constant_matrix(random_spd(3, rng));
    const double margin = strong_ellipticity_margin(c, pts, SphereRule::default_for(3));
    const Frame fr = Frame::from_normal(random_unit(3, rng));
    const Vec xp = random_unit(2, rng);
    // kappa0^2 = a_nn c - b^2 >= margin^2 |xi'|^2 (Schur complement of the frame matrix)
    EXPECT_LE(dtn_principal(c, pts[0], fr, to_std(xp)), -0.99 * margin);
  }
}
