#pragma once

// Quadrature primitives shared by the symbol and Weyl-constant code:
// Gauss-Legendre rules and product rules on the unit cosphere S^{n-1}.

#include "fracspec/core.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <utility>

namespace fracspec {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0; ///< |Q_k - Q_{k-1}| plus a rounding floor, always >= 0
  std::vector<int> nodes_per_axis;
  std::vector<std::string> notes;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<Vec, Vec> gauss_legendre(int n) {
  if (n < 1) throw argument_error("gauss_legendre: need at least one node");
  Vec x(n), w(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // refresh derivative at the converged node
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    x(i) = -z;
    x(n - 1 - i) = z;
    w(i) = w(n - 1 - i) = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// Gauss-Legendre rule mapped to [lo, hi].
inline std::pair<Vec, Vec> gauss_legendre(int n, double lo, double hi) {
  auto [x, w] = gauss_legendre(n);
  const double half = 0.5 * (hi - lo);
  x = (x.array() + 1.0) * half + lo;
  w *= half;
  return {x, w};
}

/// Cosphere rule. In 1D the "sphere" is the two points {-1, +1} with
/// counting measure; in 2D a composite trapezoid on the circle; in 3D
/// Gauss-Legendre in cos(theta) times trapezoid in phi.
struct SphereRule {
  int n_polar = 64;    ///< used in 3D only
  int n_azimuth = 256; ///< circle nodes (2D) or phi nodes (3D)

  static SphereRule default_for(int dim) {
    if (dim == 3) return {64, 128};
    return {1, 256};
  }
  /// Refinement level k: 8 * 2^k azimuthal nodes, half that many polar nodes.
  static SphereRule level(int k) {
    const int az = 8 << k;
    return {az / 2, az};
  }
  SphereRule coarser() const {
    return {std::max(1, n_polar / 2), std::max(2, n_azimuth / 2)};
  }
  SphereRule refined() const { return {n_polar * 2, n_azimuth * 2}; }
};

struct CosphereNode {
  std::vector<double> xi;
  double weight;
};

inline std::vector<CosphereNode> sphere_nodes(int dim, const SphereRule &rule) {
  std::vector<CosphereNode> out;
  switch (dim) {
  case 1:
    out.push_back({{-1.0}, 1.0});
    out.push_back({{1.0}, 1.0});
    break;
  case 2: {
    const int m = rule.n_azimuth;
    if (m < 2) throw argument_error("sphere_nodes: need >= 2 circle nodes");
    for (int k = 0; k < m; ++k) {
      const double t = 2.0 * pi * k / m;
      out.push_back({{std::cos(t), std::sin(t)}, 2.0 * pi / m});
    }
    break;
  }
  case 3: {
    auto [t, wt] = gauss_legendre(rule.n_polar);
    const int m = rule.n_azimuth;
    for (int i = 0; i < t.size(); ++i) {
      const double s = std::sqrt(1.0 - t(i) * t(i));
      for (int k = 0; k < m; ++k) {
        const double ph = 2.0 * pi * k / m;
        out.push_back({{s * std::cos(ph), s * std::sin(ph), t(i)}, wt(i) * 2.0 * pi / m});
      }
    }
    break;
  }
  default:
    throw argument_error("sphere_nodes: cosphere rules exist for dimensions 1..3, got " +
                         std::to_string(dim));
  }
  return out;
}

inline double sphere_sum(const std::function<double(Point)> &f, int dim, const SphereRule &rule) {
  const auto nodes = sphere_nodes(dim, rule);
  std::vector<double> terms;
  terms.reserve(nodes.size());
  for (const auto &nd : nodes) {
    const double v = f(nd.xi);
    if (!std::isfinite(v))
      throw numeric_error("sphere_integral: non-finite integrand at xi = " + format_point(nd.xi));
    terms.push_back(nd.weight * v);
  }
  return pairwise_sum(terms);
}

inline double rounding_floor(double value) {
  return 8.0 * std::numeric_limits<double>::epsilon() * std::abs(value);
}

/// Integral of f over the unit cosphere in R^dim with a refinement error estimate.
inline QuadratureResult sphere_integral(const std::function<double(Point)> &f, int dim,
                                        const SphereRule &rule) {
  if (dim < 1) throw argument_error("sphere_integral: dimension must be >= 1");
  const double fine = sphere_sum(f, dim, rule);
  const double coarse = dim == 1 ? fine : sphere_sum(f, dim, rule.coarser());
  QuadratureResult r;
  r.value = fine;
  r.error = std::abs(fine - coarse) + rounding_floor(fine);
  if (dim == 2) r.nodes_per_axis = {rule.n_azimuth};
  if (dim == 3) r.nodes_per_axis = {rule.n_polar, rule.n_azimuth};
  if (dim == 1) r.nodes_per_axis = {2};
  return r;
}

inline QuadratureResult sphere_integral(const std::function<double(Point)> &f, int dim) {
  return sphere_integral(f, dim, SphereRule::default_for(dim));
}

/// Surface measure of S^{dim-1} (counting measure for dim = 1).
inline double sphere_area(int dim) {
  return 2.0 * std::pow(pi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

} // namespace fracspec
