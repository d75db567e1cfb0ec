#pragma once

// Geometric domains with a boundary partition, their quadrature rules, and
// the leading Weyl constants computed as domain x cosphere integrals of the
// principal symbol (Dirichlet fractional power), of kappa0^{-(n-1)} (the
// operator L on the Neumann part) and of (a_nn / 2 kappa0^2)^{(n-1)/2}
// (the Krein resolvent difference).

#include "fracspec/cosphere.hpp"
#include "fracspec/symbol_core.hpp"

#include <algorithm>
#include <string>

namespace fracspec {

enum class DomainKind { interval, rectangle, disk, ball, box };

inline std::string to_string(DomainKind k) {
  switch (k) {
  case DomainKind::interval: return "interval";
  case DomainKind::rectangle: return "rectangle";
  case DomainKind::disk: return "disk";
  case DomainKind::ball: return "ball";
  case DomainKind::box: return "box";
  }
  return "?";
}

/// Domain with boundary partition Sigma = Sigma_- u Sigma_+.
///
/// Boxes (interval, rectangle, box) span [0, L_k] on each axis; faces are
/// numbered 2*axis + side with side 0 at x_k = 0 and side 1 at x_k = L_k,
/// and Sigma_+ is the union of the listed faces. Disks and balls are
/// centered at the origin. On a disk Sigma_+ is the arc of polar angles
/// [plus_angle_lo, plus_angle_hi]; on a ball it is the cap of polar angle
/// (from +x_3) at most plus_angle_hi.
///
/// A face patch adds the part of one box face whose tangential coordinates
/// lie in [lo, hi] (tangential axes in increasing order). Its boundary inside
/// the face is a smooth interface between Sigma_+ and Sigma_-.
struct FacePatch {
  int face = 0;
  std::vector<double> lo, hi;
};

struct DomainSpec {
  DomainKind kind = DomainKind::rectangle;
  std::vector<double> lengths{1.0, 1.0};
  double radius = 1.0;
  std::vector<int> plus_faces;
  std::vector<FacePatch> plus_patches;
  double plus_angle_lo = 0.0;
  double plus_angle_hi = 0.0;
  double padding = 2.0; ///< torus side / domain extent for nonlocal embeddings

  int dim() const {
    switch (kind) {
    case DomainKind::interval: return 1;
    case DomainKind::rectangle: return 2;
    case DomainKind::disk: return 2;
    case DomainKind::ball: return 3;
    case DomainKind::box: return 3;
    }
    return 0;
  }

  bool is_box_like() const {
    return kind == DomainKind::interval || kind == DomainKind::rectangle || kind == DomainKind::box;
  }

  /// Extent of the domain along each axis.
  std::vector<double> extents() const {
    if (is_box_like()) return lengths;
    return std::vector<double>(dim(), 2.0 * radius);
  }

  std::vector<double> torus_lengths() const {
    auto e = extents();
    for (double &v : e) v *= padding;
    return e;
  }

  void validate() const {
    if (is_box_like()) {
      if (static_cast<int>(lengths.size()) != dim())
        throw config_error("domain: need " + std::to_string(dim()) + " side lengths for " +
                           to_string(kind));
      for (double L : lengths)
        if (!(L > 0)) throw config_error("domain: side lengths must be positive");
      for (int f : plus_faces)
        if (f < 0 || f >= 2 * dim()) throw config_error("domain: face id out of range");
      for (const auto &p : plus_patches) {
        if (p.face < 0 || p.face >= 2 * dim()) throw config_error("domain: patch face id out of range");
        if (std::find(plus_faces.begin(), plus_faces.end(), p.face) != plus_faces.end())
          throw config_error("domain: patch lies on a face that is already in Sigma_+");
        if (static_cast<int>(p.lo.size()) != dim() - 1 || p.hi.size() != p.lo.size())
          throw config_error("domain: patch needs n-1 tangential bounds");
        int j = 0;
        for (int k = 0; k < dim(); ++k) {
          if (k == p.face / 2) continue;
          if (!(p.lo[j] >= 0 && p.hi[j] > p.lo[j] && p.hi[j] <= lengths[k]))
            throw config_error("domain: patch bounds must satisfy 0 <= lo < hi <= L");
          ++j;
        }
      }
    } else {
      if (!(radius > 0)) throw config_error("domain: radius must be positive");
      if (kind == DomainKind::disk && !(plus_angle_hi >= plus_angle_lo && plus_angle_hi - plus_angle_lo <= 2 * pi))
        throw config_error("domain: Sigma_+ angle range must satisfy lo <= hi <= lo + 2 pi");
      if (kind == DomainKind::ball && !(plus_angle_hi >= 0 && plus_angle_hi <= pi))
        throw config_error("domain: cap angle must lie in [0, pi]");
    }
    if (padding < 1.5) throw config_error("domain: padding factor must be >= 1.5");
  }

  /// Whether x (a point of face `face`) lies in Sigma_+; points on the
  /// interface of a patch (within tol) belong to Sigma_-.
  bool face_point_plus(int face, std::span<const double> x, double tol = 1e-12) const {
    if (std::find(plus_faces.begin(), plus_faces.end(), face) != plus_faces.end()) return true;
    for (const auto &p : plus_patches) {
      if (p.face != face) continue;
      bool inside = true;
      int j = 0;
      for (int k = 0; k < dim(); ++k) {
        if (k == face / 2) continue;
        if (!(x[k] > p.lo[j] + tol && x[k] < p.hi[j] - tol)) inside = false;
        ++j;
      }
      if (inside) return true;
    }
    return false;
  }

  static DomainSpec interval(double L = 1.0) {
    DomainSpec d;
    d.kind = DomainKind::interval;
    d.lengths = {L};
    return d;
  }
  static DomainSpec rectangle(double Lx = 1.0, double Ly = 1.0) {
    DomainSpec d;
    d.kind = DomainKind::rectangle;
    d.lengths = {Lx, Ly};
    return d;
  }
  static DomainSpec box(double Lx = 1.0, double Ly = 1.0, double Lz = 1.0) {
    DomainSpec d;
    d.kind = DomainKind::box;
    d.lengths = {Lx, Ly, Lz};
    return d;
  }
  static DomainSpec disk(double R = 1.0, double lo = 0.0, double hi = 0.0) {
    DomainSpec d;
    d.kind = DomainKind::disk;
    d.radius = R;
    d.lengths.clear();
    d.plus_angle_lo = lo;
    d.plus_angle_hi = hi;
    return d;
  }
  static DomainSpec ball(double R = 1.0, double cap = 0.0) {
    DomainSpec d;
    d.kind = DomainKind::ball;
    d.radius = R;
    d.lengths.clear();
    d.plus_angle_hi = cap;
    return d;
  }
};

enum class MeasurePart { volume, sigma_plus };

/// |Omega| or |Sigma_+| in closed form.
inline QuadratureResult domain_measure(const DomainSpec &d, MeasurePart part) {
  d.validate();
  QuadratureResult r;
  const double R = d.radius;
  if (part == MeasurePart::volume) {
    switch (d.kind) {
    case DomainKind::interval:
    case DomainKind::rectangle:
    case DomainKind::box: {
      double v = 1.0;
      for (double L : d.lengths) v *= L;
      r.value = v;
      break;
    }
    case DomainKind::disk: r.value = pi * R * R; break;
    case DomainKind::ball: r.value = 4.0 / 3.0 * pi * R * R * R; break;
    }
    return r;
  }
  switch (d.kind) {
  case DomainKind::interval: r.value = static_cast<double>(d.plus_faces.size()); break;
  case DomainKind::rectangle:
  case DomainKind::box: {
    double s = 0.0;
    for (int f : d.plus_faces) {
      double a = 1.0;
      for (int k = 0; k < d.dim(); ++k)
        if (k != f / 2) a *= d.lengths[k];
      s += a;
    }
    for (const auto &p : d.plus_patches) {
      double a = 1.0;
      for (std::size_t j = 0; j < p.lo.size(); ++j) a *= p.hi[j] - p.lo[j];
      s += a;
    }
    r.value = s;
    break;
  }
  case DomainKind::disk: r.value = R * (d.plus_angle_hi - d.plus_angle_lo); break;
  case DomainKind::ball: r.value = 2.0 * pi * R * R * (1.0 - std::cos(d.plus_angle_hi)); break;
  }
  return r;
}

struct VolumeNode {
  std::vector<double> x;
  double weight;
};

struct BoundaryNode {
  std::vector<double> x;
  double weight;
  Frame frame; ///< last column is the interior normal
};

/// Tensor Gauss-Legendre on boxes, polar/spherical product rules on disks/balls.
inline std::vector<VolumeNode> volume_quadrature(const DomainSpec &d, int m) {
  d.validate();
  std::vector<VolumeNode> out;
  const int n = d.dim();
  if (d.is_box_like()) {
    std::vector<std::pair<Vec, Vec>> rules;
    for (int k = 0; k < n; ++k) rules.push_back(gauss_legendre(m, 0.0, d.lengths[k]));
    std::vector<int> idx(n, 0);
    while (true) {
      VolumeNode v{std::vector<double>(n), 1.0};
      for (int k = 0; k < n; ++k) {
        v.x[k] = rules[k].first(idx[k]);
        v.weight *= rules[k].second(idx[k]);
      }
      out.push_back(std::move(v));
      int k = 0;
      while (k < n && ++idx[k] == m) idx[k++] = 0;
      if (k == n) break;
    }
    return out;
  }
  auto [r, wr] = gauss_legendre(m, 0.0, d.radius);
  if (d.kind == DomainKind::disk) {
    const int na = 4 * m;
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < na; ++k) {
        const double t = 2.0 * pi * k / na;
        out.push_back({{r(i) * std::cos(t), r(i) * std::sin(t)}, wr(i) * r(i) * 2.0 * pi / na});
      }
    return out;
  }
  const auto sn = sphere_nodes(3, SphereRule{m, 2 * m});
  for (int i = 0; i < m; ++i)
    for (const auto &s : sn)
      out.push_back({{r(i) * s.xi[0], r(i) * s.xi[1], r(i) * s.xi[2]}, wr(i) * r(i) * r(i) * s.weight});
  return out;
}

/// Quadrature nodes on Sigma_+ with local frames.
inline std::vector<BoundaryNode> boundary_quadrature(const DomainSpec &d, int m) {
  d.validate();
  std::vector<BoundaryNode> out;
  const int n = d.dim();
  const double R = d.radius;
  switch (d.kind) {
  case DomainKind::interval:
  case DomainKind::rectangle:
  case DomainKind::box:
    {
      std::vector<FacePatch> pieces;
      for (int f : d.plus_faces) {
        FacePatch p{f, {}, {}};
        for (int k = 0; k < n; ++k)
          if (k != f / 2) p.lo.push_back(0.0), p.hi.push_back(d.lengths[k]);
        pieces.push_back(p);
      }
      pieces.insert(pieces.end(), d.plus_patches.begin(), d.plus_patches.end());
      for (const auto &pc : pieces) {
        const int axis = pc.face / 2, side = pc.face % 2;
        const Frame frame = Frame::axis_aligned(n, axis, side == 0 ? 1 : -1);
        std::vector<int> tang;
        for (int k = 0; k < n; ++k)
          if (k != axis) tang.push_back(k);
        std::vector<std::pair<Vec, Vec>> rules;
        for (std::size_t j = 0; j < tang.size(); ++j) rules.push_back(gauss_legendre(m, pc.lo[j], pc.hi[j]));
        std::vector<int> idx(tang.size(), 0);
        while (true) {
          BoundaryNode b{std::vector<double>(n), 1.0, frame};
          b.x[axis] = side == 0 ? 0.0 : d.lengths[axis];
          for (std::size_t j = 0; j < tang.size(); ++j) {
            b.x[tang[j]] = rules[j].first(idx[j]);
            b.weight *= rules[j].second(idx[j]);
          }
          out.push_back(std::move(b));
          std::size_t j = 0;
          while (j < tang.size() && ++idx[j] == m) idx[j++] = 0;
          if (j == tang.size()) break;
        }
      }
    }
    break;
  case DomainKind::disk: {
    if (d.plus_angle_hi <= d.plus_angle_lo) break;
    auto [t, wt] = gauss_legendre(m, d.plus_angle_lo, d.plus_angle_hi);
    for (int i = 0; i < t.size(); ++i) {
      Mat B(2, 2);
      B << -std::sin(t(i)), -std::cos(t(i)), std::cos(t(i)), -std::sin(t(i));
      out.push_back({{R * std::cos(t(i)), R * std::sin(t(i))}, R * wt(i), Frame{B}});
    }
    break;
  }
  case DomainKind::ball: {
    if (d.plus_angle_hi <= 0) break;
    auto [c, wc] = gauss_legendre(m, std::cos(d.plus_angle_hi), 1.0);
    const int na = 2 * m;
    for (int i = 0; i < c.size(); ++i) {
      const double s = std::sqrt(1.0 - c(i) * c(i));
      for (int k = 0; k < na; ++k) {
        const double ph = 2.0 * pi * k / na;
        Vec rhat(3), eth(3), eph(3);
        rhat << s * std::cos(ph), s * std::sin(ph), c(i);
        eth << c(i) * std::cos(ph), c(i) * std::sin(ph), -s;
        eph << -std::sin(ph), std::cos(ph), 0.0;
        Mat B(3, 3);
        B.col(0) = eth;
        B.col(1) = eph;
        B.col(2) = -rhat;
        out.push_back({{R * rhat(0), R * rhat(1), R * rhat(2)}, R * R * wc(i) * 2.0 * pi / na,
                       Frame{B}});
      }
    }
    break;
  }
  }
  return out;
}

struct WeylQuadratureOptions {
  int domain_nodes = 32; ///< Gauss-Legendre nodes per axis (or radial nodes)
  SphereRule sphere = SphereRule::default_for(2);
  bool sphere_rule_set = false;

  SphereRule rule_for(int dim) const { return sphere_rule_set ? sphere : SphereRule::default_for(dim); }
};

/// Dirichlet Weyl constant C' and the derived C = C'^{-2a/n}.
struct DirichletWeylConstant {
  QuadratureResult c_prime;
  double C = 0.0;
};

namespace detail {

inline double volume_cosphere_integral(const DomainSpec &d, int m, const SphereRule &rule,
                                       const std::function<double(Point, Point)> &f) {
  const int n = d.dim();
  const auto vol = volume_quadrature(d, m);
  const auto sph = n == 1 ? std::vector<CosphereNode>{{{-1.0}, 1.0}, {{1.0}, 1.0}}
                          : sphere_nodes(n, rule);
  std::vector<double> terms;
  terms.reserve(vol.size());
  for (const auto &v : vol) {
    std::vector<double> inner;
    inner.reserve(sph.size());
    for (const auto &s : sph) inner.push_back(s.weight * f(v.x, s.xi));
    terms.push_back(v.weight * pairwise_sum(inner));
  }
  return pairwise_sum(terms);
}

inline double boundary_cosphere_integral(const DomainSpec &d, int m, const SphereRule &rule,
                                         const std::function<double(const BoundaryNode &, Point)> &f) {
  const int n = d.dim();
  const auto bnd = boundary_quadrature(d, m);
  const auto sph = sphere_nodes(n - 1, rule);
  std::vector<double> terms;
  terms.reserve(bnd.size());
  for (const auto &b : bnd) {
    std::vector<double> inner;
    inner.reserve(sph.size());
    for (const auto &s : sph) inner.push_back(s.weight * f(b, s.xi));
    terms.push_back(b.weight * pairwise_sum(inner));
  }
  return pairwise_sum(terms);
}

inline QuadratureResult refine_pair(double fine, double coarse, std::vector<int> nodes) {
  QuadratureResult r;
  r.value = fine;
  r.error = std::abs(fine - coarse) + rounding_floor(fine);
  r.nodes_per_axis = std::move(nodes);
  return r;
}

} // namespace detail

/// C' = 1/(n (2 pi)^n) int_Omega int_{|xi|=1} |p(x, xi)|^{-n/m} dw dx for an
/// order-m symbol (m = 2a), and C = C'^{-m/n}.
inline DirichletWeylConstant weyl_constant_dirichlet(const PrincipalSymbol &p, const DomainSpec &d,
                                                     const WeylQuadratureOptions &opt = {}) {
  const int n = d.dim();
  if (p.dim != n) throw argument_error("weyl_constant_dirichlet: symbol dimension differs from domain");
  if (!(p.order > 0)) throw argument_error("weyl_constant_dirichlet: order must be positive");
  const double expo = -static_cast<double>(n) / p.order;
  auto f = [&](Point x, Point xi) {
    const double v = std::abs(p(x, xi));
    if (!(v > 0) || !std::isfinite(v))
      throw ellipticity_error("weyl_constant_dirichlet: symbol vanishes or is not finite at x = " +
                              format_point(x) + ", xi = " + format_point(xi));
    return std::pow(v, expo);
  };
  const SphereRule rule = opt.rule_for(n);
  const double norm = 1.0 / (n * std::pow(2.0 * pi, n));
  DirichletWeylConstant out;
  if (p.x_independent) {
    // the volume integral factors into |Omega| times one cosphere integral
    const double vol = domain_measure(d, MeasurePart::volume).value;
    const std::vector<double> x0(n, 0.0);
    auto g = [&](Point xi) { return f(x0, xi); };
    const double fine = norm * vol * (n == 1 ? g(std::vector{-1.0}) + g(std::vector{1.0}) : sphere_sum(g, n, rule));
    const double coarse =
        norm * vol * (n == 1 ? g(std::vector{-1.0}) + g(std::vector{1.0}) : sphere_sum(g, n, rule.coarser()));
    out.c_prime = detail::refine_pair(fine, coarse, {0, rule.n_polar, rule.n_azimuth});
    out.c_prime.notes.push_back("constant coefficients: |Omega| times the cosphere integral");
    out.C = std::pow(out.c_prime.value, -p.order / n);
    return out;
  }
  const double fine = norm * detail::volume_cosphere_integral(d, opt.domain_nodes, rule, f);
  const double coarse =
      norm * detail::volume_cosphere_integral(d, std::max(1, opt.domain_nodes / 2), rule.coarser(), f);
  out.c_prime = detail::refine_pair(fine, coarse, {opt.domain_nodes, rule.n_polar, rule.n_azimuth});
  out.C = std::pow(out.c_prime.value, -p.order / n);
  return out;
}

/// c(L) = 1/((n-1)(2 pi)^{n-1}) int_{Sigma_+} int_{|xi'|=1} kappa0^{-(n-1)} dw dx'.
inline QuadratureResult weyl_constant_L(const SecondOrderCoeffs &c, const DomainSpec &d,
                                        const WeylQuadratureOptions &opt = {}) {
  const int n = d.dim();
  if (n < 2) throw argument_error("weyl_constant_L: need n >= 2");
  if (c.dim != n) throw argument_error("weyl_constant_L: coefficient dimension differs from domain");
  auto f = [&](const BoundaryNode &b, Point xi) {
    const double k0 = boundary_reduction(c, b.x, b.frame, xi).kappa0;
    return std::pow(k0, -(n - 1.0));
  };
  const SphereRule rule = opt.rule_for(n - 1);
  const double norm = 1.0 / ((n - 1) * std::pow(2.0 * pi, n - 1));
  const double fine = norm * detail::boundary_cosphere_integral(d, opt.domain_nodes, rule, f);
  const double coarse =
      norm * detail::boundary_cosphere_integral(d, std::max(1, opt.domain_nodes / 2), rule.coarser(), f);
  return detail::refine_pair(fine, coarse, {opt.domain_nodes, rule.n_azimuth});
}

/// c(M) = 1/((n-1)(2 pi)^{n-1}) int_{Sigma_+} int_{|xi'|=1} (a_nn / (2 kappa0^2))^{(n-1)/2} dw dx'.
/// For n = 2 the result carries a note: the asymptotic law is established
/// for n >= 3, the planar case only for principally Laplacian A.
inline QuadratureResult weyl_constant_M(const SecondOrderCoeffs &c, const DomainSpec &d,
                                        const WeylQuadratureOptions &opt = {}) {
  const int n = d.dim();
  if (n < 2) throw argument_error("weyl_constant_M: need n >= 2");
  if (c.dim != n) throw argument_error("weyl_constant_M: coefficient dimension differs from domain");
  auto f = [&](const BoundaryNode &b, Point xi) {
    const auto bf = boundary_reduction(c, b.x, b.frame, xi);
    return std::pow(bf.a_nn / (2.0 * bf.kappa0 * bf.kappa0), 0.5 * (n - 1));
  };
  const SphereRule rule = opt.rule_for(n - 1);
  const double norm = 1.0 / ((n - 1) * std::pow(2.0 * pi, n - 1));
  const double fine = norm * detail::boundary_cosphere_integral(d, opt.domain_nodes, rule, f);
  const double coarse =
      norm * detail::boundary_cosphere_integral(d, std::max(1, opt.domain_nodes / 2), rule.coarser(), f);
  auto r = detail::refine_pair(fine, coarse, {opt.domain_nodes, rule.n_azimuth});
  if (n == 2)
    r.notes.push_back("n = 2: planar case, asymptotic law established only for principally "
                      "Laplacian A; reported for comparison");
  return r;
}

} // namespace fracspec
