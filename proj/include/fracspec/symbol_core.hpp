#pragma once

// Principal symbols of second-order strongly elliptic operators, the
// boundary factorization of the symbol into plus/minus factors, the
// tangential refactorization of kappa_0, and mu-transmission residuals.

#include "fracspec/core.hpp"
#include "fracspec/cosphere.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <random>

namespace fracspec {

/// Scalar field on a box, sampled on a uniform lattice and evaluated by
/// multilinear interpolation (clamped outside the box).
class MultilinearField {
public:
  MultilinearField() = default;
  MultilinearField(std::vector<double> origin, double spacing, std::vector<int> dims,
                   std::vector<double> values)
      : origin_(std::move(origin)), spacing_(spacing), dims_(std::move(dims)),
        values_(std::move(values)) {
    std::size_t total = 1;
    for (int d : dims_) {
      if (d < 2) throw argument_error("MultilinearField: need >= 2 samples per axis");
      total *= static_cast<std::size_t>(d);
    }
    if (origin_.size() != dims_.size() || total != values_.size())
      throw argument_error("MultilinearField: sample array does not match lattice");
    if (!(spacing_ > 0)) throw argument_error("MultilinearField: spacing must be positive");
  }

  double operator()(Point x) const {
    const std::size_t n = dims_.size();
    if (x.size() != n) throw argument_error("MultilinearField: dimension mismatch");
    std::vector<int> base(n);
    std::vector<double> frac(n);
    for (std::size_t k = 0; k < n; ++k) {
      double s = (x[k] - origin_[k]) / spacing_;
      s = std::clamp(s, 0.0, static_cast<double>(dims_[k] - 1));
      int i = std::min(static_cast<int>(std::floor(s)), dims_[k] - 2);
      base[k] = i;
      frac[k] = s - i;
    }
    double acc = 0.0;
    for (unsigned corner = 0; corner < (1u << n); ++corner) {
      double w = 1.0;
      std::size_t flat = 0, stride = 1;
      for (std::size_t k = 0; k < n; ++k) {
        const int bit = (corner >> k) & 1u;
        w *= bit ? frac[k] : 1.0 - frac[k];
        flat += static_cast<std::size_t>(base[k] + bit) * stride;
        stride *= static_cast<std::size_t>(dims_[k]);
      }
      acc += w * values_[flat];
    }
    return acc;
  }

private:
  std::vector<double> origin_;
  double spacing_ = 1.0;
  std::vector<int> dims_;
  std::vector<double> values_;
};

/// Coefficients of A = -sum d_j a_jk d_k + a0, plus the Robin coefficient
/// sigma used on the Neumann part of the boundary.
struct SecondOrderCoeffs {
  int dim = 0;
  std::function<Mat(Point)> a;
  std::function<double(Point)> a0;
  std::function<double(Point)> sigma; ///< empty when no Robin part is configured
  bool constant = false;
  std::string interpolation = "closed-form";

  Mat matrix_at(Point x) const {
    if (static_cast<int>(x.size()) != dim)
      throw argument_error("SecondOrderCoeffs: point has dimension " + std::to_string(x.size()) +
                           ", expected " + std::to_string(dim));
    Mat m = a(x);
    if (m.rows() != dim || m.cols() != dim)
      throw argument_error("SecondOrderCoeffs: coefficient matrix has wrong shape");
    return m;
  }
  double a0_at(Point x) const { return a0 ? a0(x) : 0.0; }
  bool has_sigma() const { return static_cast<bool>(sigma); }
  double sigma_at(Point x) const {
    if (!sigma) throw config_error("Robin coefficient sigma is not configured");
    return sigma(x);
  }

  static SecondOrderCoeffs constant_matrix(const Mat &A, double a0 = 0.0,
                                           std::optional<double> sigma = std::nullopt) {
    if (A.rows() != A.cols() || A.rows() < 1)
      throw argument_error("constant_matrix: coefficient matrix must be square");
    SecondOrderCoeffs c;
    c.dim = static_cast<int>(A.rows());
    c.a = [A](Point) { return A; };
    c.a0 = [a0](Point) { return a0; };
    if (sigma) c.sigma = [s = *sigma](Point) { return s; };
    c.constant = true;
    return c;
  }

  static SecondOrderCoeffs identity(int n, double a0 = 0.0,
                                    std::optional<double> sigma = std::nullopt) {
    return constant_matrix(Mat::Identity(n, n), a0, sigma);
  }

  /// Coefficients from sampled upper-triangular entries (row-major order
  /// a11, a12, ..., a1n, a22, ...) with multilinear interpolation.
  static SecondOrderCoeffs from_samples(int n, std::vector<MultilinearField> upper,
                                        std::optional<MultilinearField> a0 = std::nullopt) {
    if (upper.size() != static_cast<std::size_t>(n * (n + 1) / 2))
      throw argument_error("from_samples: need n(n+1)/2 coefficient fields");
    SecondOrderCoeffs c;
    c.dim = n;
    c.a = [n, upper = std::move(upper)](Point x) {
      Mat m(n, n);
      std::size_t k = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) m(i, j) = m(j, i) = upper[k++](x);
      return m;
    };
    if (a0) c.a0 = [f = *a0](Point x) { return f(x); };
    c.interpolation = "multilinear";
    return c;
  }

  SecondOrderCoeffs scaled(double t) const {
    SecondOrderCoeffs c = *this;
    c.a = [f = a, t](Point x) { return Mat(t * f(x)); };
    return c;
  }

  SecondOrderCoeffs with_shift(double s) const {
    SecondOrderCoeffs c = *this;
    c.a0 = [f = a0, s](Point x) { return (f ? f(x) : 0.0) + s; };
    return c;
  }

  SecondOrderCoeffs with_sigma(double s) const {
    SecondOrderCoeffs c = *this;
    c.sigma = [s](Point) { return s; };
    return c;
  }
};

/// max |a_jk - a_kj| over the given sample points.
inline double symmetry_defect(const SecondOrderCoeffs &c, std::span<const std::vector<double>> pts) {
  double d = 0.0;
  for (const auto &p : pts) {
    const Mat m = c.matrix_at(p);
    d = std::max(d, (m - m.transpose()).cwiseAbs().maxCoeff());
  }
  return d;
}

/// sum_jk a_jk(x) xi_j xi_k
inline double eval_principal(const SecondOrderCoeffs &c, Point x, Point xi) {
  if (static_cast<int>(xi.size()) != c.dim)
    throw argument_error("eval_principal: covector has dimension " + std::to_string(xi.size()) +
                         ", expected " + std::to_string(c.dim));
  const Mat m = c.matrix_at(x);
  const Eigen::Map<const Vec> v(xi.data(), c.dim);
  return v.dot(m * v);
}

/// min over sample points and cosphere nodes of a(x, xi) / |xi|^2.
inline double strong_ellipticity_margin(const SecondOrderCoeffs &c,
                                        std::span<const std::vector<double>> pts,
                                        const SphereRule &rule) {
  if (pts.empty()) throw argument_error("strong_ellipticity_margin: empty sample set");
  double margin = std::numeric_limits<double>::infinity();
  std::vector<CosphereNode> nodes;
  if (c.dim == 1)
    nodes = {{{1.0}, 1.0}};
  else
    nodes = sphere_nodes(c.dim, rule);
  for (const auto &p : pts)
    for (const auto &nd : nodes) margin = std::min(margin, eval_principal(c, p, nd.xi));
  return margin;
}

enum class SymbolKind { differential, fractional_power, user };

/// Principal symbol p(x, xi), homogeneous of degree `order` in xi.
struct PrincipalSymbol {
  double order = 2.0;
  std::function<cplx(Point, Point)> eval;
  SymbolKind kind = SymbolKind::user;
  std::string description;
  int dim = 0;
  bool x_independent = false; ///< constant coefficients: p(x, xi) = p(xi)

  cplx operator()(Point x, Point xi) const { return eval(x, xi); }
};

inline PrincipalSymbol differential_symbol(const SecondOrderCoeffs &c) {
  return {2.0, [c](Point x, Point xi) { return cplx(eval_principal(c, x, xi), 0.0); },
          SymbolKind::differential, "sum a_jk xi_j xi_k", c.dim, c.constant};
}

/// Principal symbol of the a-th power of A: (sum a_jk xi_j xi_k)^a.
inline PrincipalSymbol fractional_power_symbol(const SecondOrderCoeffs &c, double a) {
  if (!(a > 0)) throw argument_error("fractional_power_symbol: exponent must be positive");
  return {2.0 * a,
          [c, a](Point x, Point xi) { return cplx(std::pow(eval_principal(c, x, xi), a), 0.0); },
          SymbolKind::fractional_power, "(sum a_jk xi_j xi_k)^" + std::to_string(a), c.dim,
          c.constant};
}

inline PrincipalSymbol user_symbol(int dim, double order, std::function<cplx(Point, Point)> f,
                                   std::string description) {
  return {order, std::move(f), SymbolKind::user, std::move(description), dim};
}

/// Largest relative deviation from p(x, t xi) = t^m p(x, xi) over random samples.
inline double homogeneity_defect(const PrincipalSymbol &p, int samples = 200,
                                 std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 1.0), ut(0.1, 10.0);
  std::normal_distribution<double> nx;
  double worst = 0.0;
  std::vector<double> x(p.dim), xi(p.dim), txi(p.dim);
  for (int s = 0; s < samples; ++s) {
    for (int k = 0; k < p.dim; ++k) {
      x[k] = ux(rng);
      xi[k] = nx(rng);
    }
    const double t = ut(rng);
    for (int k = 0; k < p.dim; ++k) txi[k] = t * xi[k];
    const cplx base = p(x, xi);
    const cplx scaled = p(x, txi);
    const double ref = std::abs(std::pow(t, p.order) * base);
    if (ref == 0.0) continue;
    worst = std::max(worst, std::abs(scaled - std::pow(t, p.order) * base) / ref);
  }
  return worst;
}

/// Orthonormal frame at a boundary point. Columns are the frame vectors;
/// the last column is the interior normal.
struct Frame {
  Mat basis;

  int dim() const { return static_cast<int>(basis.rows()); }

  double orthonormality_defect() const {
    return (basis.transpose() * basis - Mat::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  }

  /// Completes an interior normal to an orthonormal frame (Gram-Schmidt
  /// against the coordinate axes).
  static Frame from_normal(const Vec &normal) {
    const int n = static_cast<int>(normal.size());
    Mat B(n, n);
    B.col(n - 1) = normal.normalized();
    int filled = 0;
    for (int k = 0; k < n && filled < n - 1; ++k) {
      Vec v = Vec::Unit(n, k);
      for (int j = 0; j < filled; ++j) v -= B.col(j).dot(v) * B.col(j);
      v -= B.col(n - 1).dot(v) * B.col(n - 1);
      if (v.norm() < 1e-8) continue;
      B.col(filled++) = v.normalized();
    }
    return {B};
  }

  /// Frame with interior normal e_k (sign +1 or -1) and remaining axes in order.
  static Frame axis_aligned(int n, int normal_axis, int sign) {
    Mat B = Mat::Zero(n, n);
    int col = 0;
    for (int k = 0; k < n; ++k)
      if (k != normal_axis) B(k, col++) = 1.0;
    B(normal_axis, n - 1) = sign;
    return {B};
  }
};

/// Quantities of the boundary factorization of the symbol at one point.
struct BoundaryFactorization {
  double a_nn = 0.0;
  double b = 0.0;
  double c = 0.0;
  double a_prime = 0.0;
  double kappa0 = 0.0;
  cplx kappa_plus;
  cplx kappa_minus;
  double factorization_residual = 0.0;

  // tangential refactorization of kappa0^2 in xi_{n-1}
  bool has_tangential = false;
  double a_prime_tt = 0.0; ///< a'_{n-1,n-1}
  double b_t = 0.0;
  double c_t = 0.0;
  cplx kappa_t_plus;
  cplx kappa_t_minus;
  double tangential_residual = 0.0;
  double sqrt_split_residual = 0.0;

  /// a(x', xi', xi_n) as a polynomial in xi_n
  double symbol(double xi_n) const { return a_nn * xi_n * xi_n + 2.0 * b * xi_n + c; }

  cplx factored(double xi_n) const {
    const cplx i(0.0, 1.0);
    return a_nn * (kappa_plus + i * xi_n) * (kappa_minus - i * xi_n);
  }

  cplx tangential_factored(double xi_t) const {
    const cplx i(0.0, 1.0);
    return a_prime_tt * (kappa_t_plus + i * xi_t) * (kappa_t_minus - i * xi_t);
  }

  /// Principal-branch square-root split of kappa0.
  cplx tangential_sqrt_split(double xi_t) const {
    const cplx i(0.0, 1.0);
    return std::sqrt(a_prime_tt) * std::sqrt(kappa_t_plus + i * xi_t) *
           std::sqrt(kappa_t_minus - i * xi_t);
  }
};

namespace detail {

inline Mat local_coefficients(const SecondOrderCoeffs &c, Point x, const Frame &f) {
  if (f.dim() != c.dim) throw argument_error("frame dimension does not match coefficients");
  if (f.orthonormality_defect() > 1e-10) throw argument_error("frame is not orthonormal");
  return f.basis.transpose() * c.matrix_at(x) * f.basis;
}

inline const std::array<double, 9> &xi_n_probe() {
  static const std::array<double, 9> v{-10.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 10.0};
  return v;
}

} // namespace detail

/// Boundary polynomial a_nn xi_n^2 + 2 b xi_n + c in local coordinates,
/// kappa0 = sqrt(a_nn c - b^2) and kappa_pm = (kappa0 +- i b) / a_nn.
inline BoundaryFactorization boundary_reduction(const SecondOrderCoeffs &coeffs, Point x,
                                                const Frame &frame, Point xi_prime) {
  const int n = coeffs.dim;
  if (static_cast<int>(xi_prime.size()) != n - 1)
    throw argument_error("boundary_reduction: tangential covector must have dimension n-1");
  const Mat al = detail::local_coefficients(coeffs, x, frame);
  const Eigen::Map<const Vec> xp(xi_prime.data(), n - 1);
  if (xp.norm() == 0.0) throw argument_error("boundary_reduction: xi' must be nonzero");

  BoundaryFactorization f;
  f.a_nn = al(n - 1, n - 1);
  f.b = al.col(n - 1).head(n - 1).dot(xp);
  f.c = xp.dot(al.topLeftCorner(n - 1, n - 1) * xp);
  f.a_prime = f.a_nn * f.c - f.b * f.b;
  if (!(f.a_nn > 0.0) || !(f.a_prime > 0.0))
    throw ellipticity_error("boundary_reduction: a' = " + std::to_string(f.a_prime) +
                            " <= 0 at x = " + format_point(x) + "; operator not strongly elliptic");
  f.kappa0 = std::sqrt(f.a_prime);
  f.kappa_plus = cplx(f.kappa0, f.b) / f.a_nn;
  f.kappa_minus = cplx(f.kappa0, -f.b) / f.a_nn;

  const double scale = xp.norm();
  for (double t : detail::xi_n_probe()) {
    const double xn = t * scale;
    const double ref = f.symbol(xn);
    f.factorization_residual =
        std::max(f.factorization_residual, std::abs(f.factored(xn) - ref) / std::abs(ref));
  }
  return f;
}

/// Refactorizes kappa0(x'', 0, xi'', xi_{n-1})^2 in xi_{n-1}. The frame's
/// column n-2 is the normal to the interface inside the boundary, column
/// n-1 the interior normal of the domain; xi_dprime covers columns 0..n-3.
inline BoundaryFactorization tangential_factorization(const SecondOrderCoeffs &coeffs, Point x,
                                                      const Frame &frame, Point xi_dprime) {
  const int n = coeffs.dim;
  if (n < 2) throw argument_error("tangential_factorization: need n >= 2");
  if (static_cast<int>(xi_dprime.size()) != n - 2)
    throw argument_error("tangential_factorization: xi'' must have dimension n-2");
  const Mat al = detail::local_coefficients(coeffs, x, frame);
  const double ann = al(n - 1, n - 1);
  if (!(ann > 0.0)) throw ellipticity_error("tangential_factorization: a_nn <= 0");

  // a'_jk = a_nn a_jk - a_jn a_kn on the boundary directions
  const Vec an = al.col(n - 1).head(n - 1);
  const Mat ap = ann * al.topLeftCorner(n - 1, n - 1) - an * an.transpose();

  const int t = n - 2; // index of the interface-normal direction
  const Eigen::Map<const Vec> xd(xi_dprime.data(), t);

  BoundaryFactorization f;
  f.a_nn = ann;
  f.has_tangential = true;
  f.a_prime_tt = ap(t, t);
  if (!(f.a_prime_tt > 0.0))
    throw ellipticity_error("tangential_factorization: a'_{n-1,n-1} <= 0 at x = " + format_point(x));
  f.b_t = t > 0 ? ap.col(t).head(t).dot(xd) : 0.0;
  f.c_t = t > 0 ? xd.dot(ap.topLeftCorner(t, t) * xd) : 0.0;
  const double disc = f.a_prime_tt * f.c_t - f.b_t * f.b_t;
  if (disc < 0.0 || (t > 0 && xd.norm() > 0.0 && !(disc > 0.0)))
    throw ellipticity_error("tangential_factorization: a'' form not positive at x = " +
                            format_point(x));
  const double k0t = std::sqrt(std::max(disc, 0.0));
  f.kappa_t_plus = cplx(k0t, f.b_t) / f.a_prime_tt;
  f.kappa_t_minus = cplx(k0t, -f.b_t) / f.a_prime_tt;

  // residuals against kappa0^2 = a'(xi'', xi_{n-1}) evaluated directly
  const double scale = t > 0 && xd.norm() > 0 ? xd.norm() : 1.0;
  for (double s : detail::xi_n_probe()) {
    const double xt = s * scale;
    Vec xp(n - 1);
    xp.head(t) = xd;
    xp(t) = xt;
    const double k0sq = xp.dot(ap * xp);
    if (k0sq <= 0.0) continue;
    f.tangential_residual =
        std::max(f.tangential_residual, std::abs(f.tangential_factored(xt) - k0sq) / k0sq);
    f.sqrt_split_residual = std::max(
        f.sqrt_split_residual, std::abs(f.tangential_sqrt_split(xt) - std::sqrt(k0sq)) /
                                   std::sqrt(k0sq));
  }
  return f;
}

/// Principal symbol of the Dirichlet-to-Neumann operator: -kappa0(x', xi').
inline double dtn_principal(const SecondOrderCoeffs &coeffs, Point x, const Frame &frame,
                            Point xi_prime) {
  return -boundary_reduction(coeffs, x, frame, xi_prime).kappa0;
}

/// Model Poisson symbol-kernel x_n -> exp(-kappa_+ x_n).
inline cplx model_poisson_kernel(const BoundaryFactorization &f, double x_n) {
  return std::exp(-f.kappa_plus * x_n);
}

/// kappa0 as an order-1 symbol on the boundary, in the local tangential
/// frame at each point (the point argument is ignored for constant frames).
inline PrincipalSymbol kappa0_symbol(const SecondOrderCoeffs &coeffs, const Frame &frame,
                                     std::vector<double> boundary_point) {
  return {1.0,
          [coeffs, frame, boundary_point](Point, Point xi) {
            return cplx(boundary_reduction(coeffs, boundary_point, frame, xi).kappa0, 0.0);
          },
          SymbolKind::user, "kappa0(x', xi')", coeffs.dim - 1};
}

/// max over points of |p(x,-N) - exp(i pi (m - 2 mu)) p(x,N)| / |p(x,N)|.
inline double mu_transmission_residual(const PrincipalSymbol &p, double mu,
                                       std::span<const std::vector<double>> points,
                                       std::span<const std::vector<double>> normals) {
  if (points.size() != normals.size())
    throw argument_error("mu_transmission_residual: points and normals differ in length");
  const cplx phase = std::exp(cplx(0.0, pi * (p.order - 2.0 * mu)));
  double worst = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto &N = normals[k];
    std::vector<double> minusN(N.size());
    for (std::size_t i = 0; i < N.size(); ++i) minusN[i] = -N[i];
    const cplx plus = p(points[k], N);
    if (std::abs(plus) == 0.0)
      throw degenerate_symbol_error("mu_transmission_residual: p(x, N) = 0 at x = " +
                                    format_point(points[k]));
    worst = std::max(worst, std::abs(p(points[k], minusN) - phase * plus) / std::abs(plus));
  }
  return worst;
}

struct TransmissionDerivativeReport {
  int max_order = 0;
  std::vector<double> residual_by_order; ///< index = |alpha| + |beta|
  double tolerance = 1e-6;
  bool passed = true;
};

/// Finite-difference check of the derivative conditions
/// d_x^beta d_xi^alpha p(x,-N) = exp(i pi (m - 2mu - |alpha|)) d_x^beta d_xi^alpha p(x,N)
/// for |alpha| + |beta| <= max_order (at most 2). Order-1 derivatives use
/// central differences with `step`, order 2 with `step2`; values are
/// approximate and normalized by |p(x,N)|.
inline TransmissionDerivativeReport mu_transmission_derivative_residual(
    const PrincipalSymbol &p, double mu, std::span<const std::vector<double>> points,
    std::span<const std::vector<double>> normals, int max_order = 2, double step = 1e-5,
    double step2 = 1e-4, double tolerance = 1e-6) {
  if (max_order < 0 || max_order > 2)
    throw argument_error("mu_transmission_derivative_residual: max_order must be 0..2");
  TransmissionDerivativeReport rep;
  rep.max_order = max_order;
  rep.tolerance = tolerance;
  rep.residual_by_order.assign(max_order + 1, 0.0);
  rep.residual_by_order[0] = mu_transmission_residual(p, mu, points, normals);

  for (std::size_t k = 0; k < points.size(); ++k) {
    const std::vector<double> &x = points[k];
    const int nx = static_cast<int>(x.size());
    const int nxi = static_cast<int>(normals[k].size());
    const int nv = nx + nxi; // variables: x first, then xi
    const double scale = std::abs(p(x, normals[k]));
    if (scale == 0.0) throw degenerate_symbol_error("mu_transmission: p(x, N) = 0");

    auto eval_at = [&](int sign, const std::vector<double> &dv) {
      std::vector<double> xx(x), xi(nxi);
      for (int i = 0; i < nx; ++i) xx[i] += dv[i];
      for (int i = 0; i < nxi; ++i) xi[i] = sign * normals[k][i] + dv[nx + i];
      return p(xx, xi);
    };
    auto xi_count = [&](int i, int j) { return (i >= nx ? 1 : 0) + (j >= nx ? 1 : 0); };

    if (max_order >= 1) {
      for (int i = 0; i < nv; ++i) {
        std::vector<double> dp(nv, 0.0), dm(nv, 0.0);
        dp[i] = step;
        dm[i] = -step;
        auto deriv = [&](int sign) { return (eval_at(sign, dp) - eval_at(sign, dm)) / (2 * step); };
        const int a = i >= nx ? 1 : 0;
        const cplx phase = std::exp(cplx(0.0, pi * (p.order - 2.0 * mu - a)));
        const double r = std::abs(deriv(-1) - phase * deriv(+1)) / scale;
        rep.residual_by_order[1] = std::max(rep.residual_by_order[1], r);
      }
    }
    if (max_order >= 2) {
      for (int i = 0; i < nv; ++i)
        for (int j = i; j < nv; ++j) {
          auto second = [&](int sign) {
            auto shifted = [&](double si, double sj) {
              std::vector<double> d(nv, 0.0);
              d[i] += si * step2;
              d[j] += sj * step2;
              return eval_at(sign, d);
            };
            return (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) /
                   (4 * step2 * step2);
          };
          const cplx phase = std::exp(cplx(0.0, pi * (p.order - 2.0 * mu - xi_count(i, j))));
          const double r = std::abs(second(-1) - phase * second(+1)) / scale;
          rep.residual_by_order[2] = std::max(rep.residual_by_order[2], r);
        }
    }
  }
  for (double r : rep.residual_by_order) rep.passed = rep.passed && r <= tolerance;
  return rep;
}

} // namespace fracspec
