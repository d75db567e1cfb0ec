#pragma once

// Grids and matrix realizations: torus embeddings of box and disk domains,
// variational finite-difference forms for second-order operators, restricted
// fractional powers r+ P_a e+, the discrete Poisson operator and the
// boundary Schur complement (Dirichlet-to-Neumann map).

#include "fracspec/eigensolve.hpp"
#include "fracspec/symbol_core.hpp"
#include "fracspec/weyl_quadrature.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

namespace fracspec {

enum class NodeClass : std::uint8_t { interior, sigma_plus, sigma_minus, exterior };

/// Uniform torus grid that embeds a domain. Node coordinates are
/// origin_k + i_k h; box domains occupy [0, L_k], disks and balls are
/// centered at the origin.
struct Grid {
  DomainSpec domain;
  int dim = 0;
  double h = 0.0;
  std::vector<int> dims;        ///< torus nodes per axis
  std::vector<int> cells;       ///< domain cells per axis
  std::vector<int> offset;      ///< torus index of the domain's lower corner
  std::vector<NodeClass> cls;
  /// distance to the boundary of the union of interior node cells (0 off the
  /// interior): zero extension starts half a step outside the last interior node
  std::vector<double> dist;
  std::vector<Index> interior, sigma_plus, sigma_minus, exterior;

  Index size() const { return static_cast<Index>(cls.size()); }

  std::vector<int> multi_index(Index id) const {
    std::vector<int> m(dim);
    for (int k = 0; k < dim; ++k) {
      m[k] = static_cast<int>(id % dims[k]);
      id /= dims[k];
    }
    return m;
  }

  Index flat(std::span<const int> m) const {
    Index id = 0, stride = 1;
    for (int k = 0; k < dim; ++k) {
      const int i = ((m[k] % dims[k]) + dims[k]) % dims[k];
      id += i * stride;
      stride *= dims[k];
    }
    return id;
  }

  std::vector<double> coords(Index id) const {
    const auto m = multi_index(id);
    std::vector<double> x(dim);
    for (int k = 0; k < dim; ++k) x[k] = (m[k] - offset[k]) * h + origin_shift(k);
    return x;
  }

  /// Disks and balls are centered: the lower corner of their bounding box is at -R.
  double origin_shift(int) const { return domain.is_box_like() ? 0.0 : -domain.radius; }
};

/// Builds the torus grid: h = extent_0 / nodes_per_axis, torus side
/// ceil(padding * cells) per axis, cell-center membership.
inline Grid build_grid(const DomainSpec &domain, int nodes_per_axis) {
  domain.validate();
  if (nodes_per_axis < 8) throw config_error("build_grid: need at least 8 nodes per axis");
  Grid g;
  g.domain = domain;
  g.dim = domain.dim();
  const auto ext = domain.extents();
  g.h = ext[0] / nodes_per_axis;
  for (int k = 0; k < g.dim; ++k) {
    const double c = ext[k] / g.h;
    const int ci = static_cast<int>(std::lround(c));
    if (std::abs(c - ci) > 1e-9 * std::max(1.0, c))
      throw config_error("build_grid: side lengths are not commensurate with the spacing");
    const int m = static_cast<int>(std::ceil(domain.padding * ci - 1e-9));
    if (m < ci + 2) throw config_error("build_grid: domain does not fit in the torus");
    g.cells.push_back(ci);
    g.dims.push_back(m);
    g.offset.push_back((m - ci) / 2);
  }
  Index total = 1;
  for (int m : g.dims) total *= m;
  g.cls.assign(total, NodeClass::exterior);
  g.dist.assign(total, 0.0);
  const double snap = 0.5 * g.h;

  for (Index id = 0; id < total; ++id) {
    const auto x = g.coords(id);
    if (domain.is_box_like()) {
      bool inside = true;
      double d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < g.dim; ++k) {
        if (x[k] < -snap || x[k] > domain.lengths[k] + snap) inside = false;
        d = std::min({d, x[k], domain.lengths[k] - x[k]});
      }
      if (!inside) continue;
      if (d > snap) {
        g.cls[id] = NodeClass::interior;
        g.dist[id] = d - 0.5 * g.h;
        continue;
      }
      // a node on several faces (an edge or corner) is in Sigma_+ only if
      // every face it lies on is entirely in Sigma_+
      std::vector<int> on;
      for (int k = 0; k < g.dim; ++k) {
        if (std::abs(x[k]) <= snap) on.push_back(2 * k);
        if (std::abs(domain.lengths[k] - x[k]) <= snap) on.push_back(2 * k + 1);
      }
      bool all_plus = true;
      if (on.size() == 1) {
        std::vector<double> xs(x);
        xs[on[0] / 2] = on[0] % 2 ? domain.lengths[on[0] / 2] : 0.0;
        all_plus = domain.face_point_plus(on[0], xs, 1e-9 * g.h);
      } else {
        for (int f : on)
          if (std::find(domain.plus_faces.begin(), domain.plus_faces.end(), f) == domain.plus_faces.end())
            all_plus = false;
      }
      g.cls[id] = all_plus ? NodeClass::sigma_plus : NodeClass::sigma_minus;
    } else {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      const double r = std::sqrt(r2);
      if (r < domain.radius) {
        g.cls[id] = NodeClass::interior;
        g.dist[id] = std::max(domain.radius - r - 0.5 * g.h, 0.5 * g.h);
      }
    }
  }
  for (Index id = 0; id < total; ++id) {
    switch (g.cls[id]) {
    case NodeClass::interior: g.interior.push_back(id); break;
    case NodeClass::sigma_plus: g.sigma_plus.push_back(id); break;
    case NodeClass::sigma_minus: g.sigma_minus.push_back(id); break;
    case NodeClass::exterior: g.exterior.push_back(id); break;
    }
  }
  return g;
}

/// Nodes along one inward normal line, ordered by distance to the boundary.
struct NormalLine {
  std::vector<Index> nodes; ///< positions in whatever vector the line samples
  std::vector<double> dist;
};

/// Inward normal lines of a torus grid, `per_face` lines per box face at
/// tangential positions spread over the middle half of the face (one line
/// per axis direction and sign for disks and balls, through the center).
/// Node ids are grid ids.
inline std::vector<NormalLine> normal_lines(const Grid &g, int per_face = 1) {
  std::vector<NormalLine> out;
  if (g.domain.is_box_like()) {
    for (int axis = 0; axis < g.dim; ++axis)
      for (int side = 0; side < 2; ++side) {
        // tangential index tuples
        std::vector<std::vector<int>> tang_choices;
        std::vector<int> tang_axes;
        for (int k = 0; k < g.dim; ++k)
          if (k != axis) tang_axes.push_back(k);
        std::vector<std::vector<int>> per_axis;
        for (int k : tang_axes) {
          std::vector<int> picks;
          const int c = g.cells[k];
          for (int p = 0; p < per_face; ++p) {
            const double frac = per_face == 1 ? 0.5 : 0.25 + 0.5 * p / (per_face - 1);
            picks.push_back(static_cast<int>(std::lround(frac * c)));
          }
          std::sort(picks.begin(), picks.end());
          picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
          per_axis.push_back(picks);
        }
        std::vector<std::size_t> idx(per_axis.size(), 0);
        while (true) {
          NormalLine line;
          const int half = g.cells[axis] / 2;
          for (int s = 1; s <= half; ++s) {
            std::vector<int> m(g.dim);
            for (std::size_t j = 0; j < tang_axes.size(); ++j)
              m[tang_axes[j]] = g.offset[tang_axes[j]] + per_axis[j][idx[j]];
            m[axis] = side == 0 ? g.offset[axis] + s : g.offset[axis] + g.cells[axis] - s;
            const Index id = g.flat(m);
            if (g.cls[id] != NodeClass::interior) continue;
            line.nodes.push_back(id);
            line.dist.push_back((s - 0.5) * g.h);
          }
          out.push_back(std::move(line));
          std::size_t j = 0;
          while (j < idx.size() && ++idx[j] == per_axis[j].size()) idx[j++] = 0;
          if (j == idx.size()) break;
        }
      }
    return out;
  }
  const int c = g.cells[0] / 2;
  for (int axis = 0; axis < g.dim; ++axis)
    for (int sign : {-1, 1}) {
      NormalLine line;
      for (int s = 1; s <= c; ++s) {
        std::vector<int> m(g.dim);
        for (int k = 0; k < g.dim; ++k) m[k] = g.offset[k] + c;
        m[axis] += sign * (c - s);
        const Index id = g.flat(m);
        if (g.cls[id] != NodeClass::interior) continue;
        line.nodes.push_back(id);
        line.dist.push_back(std::abs(m[axis] - g.offset[axis] - c) * g.h);
      }
      // distance to the edge of the last interior cell along the line
      double edge = 0.0;
      for (double r : line.dist) edge = std::max(edge, r + 0.5 * g.h);
      for (double &r : line.dist) r = edge - r;
      std::vector<std::size_t> order(line.nodes.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return line.dist[a] < line.dist[b]; });
      NormalLine sorted;
      for (auto o : order) {
        sorted.nodes.push_back(line.nodes[o]);
        sorted.dist.push_back(line.dist[o]);
      }
      out.push_back(std::move(sorted));
    }
  return out;
}

/// Re-expresses lines over grid ids as positions into `nodes`.
inline std::vector<NormalLine> relabel_lines(const std::vector<NormalLine> &lines,
                                             std::span<const Index> nodes) {
  std::unordered_map<Index, Index> pos;
  for (std::size_t i = 0; i < nodes.size(); ++i) pos[nodes[i]] = static_cast<Index>(i);
  std::vector<NormalLine> out;
  for (const auto &l : lines) {
    NormalLine r;
    for (std::size_t i = 0; i < l.nodes.size(); ++i) {
      auto it = pos.find(l.nodes[i]);
      if (it == pos.end()) continue;
      r.nodes.push_back(it->second);
      r.dist.push_back(l.dist[i]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Variational assembly

/// Discrete bilinear form a(u, v) = int (A grad u . grad v + a0 u v) + int_{Sigma_+} sigma u v
/// over a list of nodes, with lumped volume and boundary weights.
///
/// Position sets (`interior`, `sigma_plus`, `sigma_minus`) index into `nodes`.
struct FormSystem {
  SpMat K;
  Vec mass;
  Vec boundary_weight;
  std::vector<Index> nodes;
  std::vector<Index> interior, sigma_plus, sigma_minus;
  int dim = 0;
  double h = 0.0;
  double shift = 0.0;
  std::string descriptor;

  Index size() const { return static_cast<Index>(nodes.size()); }
};

/// Energy matrix of one cell (2^n corners, corner bit k = offset along axis k).
/// Diagonal coefficients act on cell edges, off-diagonal ones on the
/// cell-averaged gradient; the form is positive semidefinite whenever A is.
inline Mat cell_energy_matrix(const Mat &A, double a0, double h) {
  const int n = static_cast<int>(A.rows());
  const int nc = 1 << n;
  const int ne = nc / 2;
  std::vector<Mat> D(n, Mat::Zero(ne, nc));
  for (int j = 0; j < n; ++j) {
    int e = 0;
    for (int c = 0; c < nc; ++c) {
      if (c & (1 << j)) continue;
      D[j](e, c | (1 << j)) = 1.0;
      D[j](e, c) = -1.0;
      ++e;
    }
  }
  const double hn = std::pow(h, n);
  const double hn2 = std::pow(h, n - 2);
  Mat E = Mat::Zero(nc, nc);
  for (int j = 0; j < n; ++j) {
    E += A(j, j) * hn2 / ne * D[j].transpose() * D[j];
    const Vec gj = D[j].colwise().sum().transpose() / ne;
    for (int k = 0; k < n; ++k)
      if (k != j) {
        const Vec gk = D[k].colwise().sum().transpose() / ne;
        E += A(j, k) * hn2 * gj * gk.transpose();
      }
  }
  E.diagonal().array() += a0 * hn / nc;
  return E;
}

namespace detail {

inline SpMat submatrix(const SpMat &K, std::span<const Index> rows, std::span<const Index> cols) {
  std::vector<Index> rmap(K.rows(), -1), cmap(K.cols(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) rmap[rows[i]] = static_cast<Index>(i);
  for (std::size_t i = 0; i < cols.size(); ++i) cmap[cols[i]] = static_cast<Index>(i);
  std::vector<Eigen::Triplet<double>> t;
  for (int c = 0; c < K.outerSize(); ++c)
    for (SpMat::InnerIterator it(K, c); it; ++it) {
      const Index r = rmap[it.row()], cc = cmap[it.col()];
      if (r >= 0 && cc >= 0) t.emplace_back(r, cc, it.value());
    }
  SpMat out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

inline Vec gather(const Vec &v, std::span<const Index> idx) {
  Vec out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

inline Mat cell_center(const Grid &g, std::span<const int> lower, std::vector<double> &x) {
  x.resize(g.dim);
  for (int k = 0; k < g.dim; ++k) x[k] = (lower[k] - g.offset[k] + 0.5) * g.h + g.origin_shift(k);
  return {};
}

} // namespace detail

/// Restricts a form to the given positions; position sets are remapped.
inline FormSystem restrict_form(const FormSystem &f, std::span<const Index> keep) {
  FormSystem r;
  r.K = detail::submatrix(f.K, keep, keep);
  r.mass = detail::gather(f.mass, keep);
  r.boundary_weight = detail::gather(f.boundary_weight, keep);
  std::vector<Index> map(f.size(), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    map[keep[i]] = static_cast<Index>(i);
    r.nodes.push_back(f.nodes[keep[i]]);
  }
  auto remap = [&](const std::vector<Index> &src, std::vector<Index> &dst) {
    for (Index p : src)
      if (map[p] >= 0) dst.push_back(map[p]);
  };
  remap(f.interior, r.interior);
  remap(f.sigma_plus, r.sigma_plus);
  remap(f.sigma_minus, r.sigma_minus);
  r.dim = f.dim;
  r.h = f.h;
  r.shift = f.shift;
  r.descriptor = f.descriptor;
  return r;
}

/// Form over the closed domain (interior, Sigma_+ and Sigma_- nodes) of a
/// box grid. sigma (when configured) enters on the Sigma_+ faces.
inline FormSystem assemble_full_form(const SecondOrderCoeffs &coeffs, const Grid &g) {
  if (!g.domain.is_box_like())
    throw config_error("assemble_full_form: second-order forms on torus grids need box domains");
  if (coeffs.dim != g.dim) throw argument_error("assemble_full_form: coefficient dimension differs from grid");
  const int n = g.dim;
  FormSystem f;
  f.dim = n;
  f.h = g.h;
  std::vector<Index> pos(g.size(), -1);
  for (Index id = 0; id < g.size(); ++id) {
    if (g.cls[id] == NodeClass::exterior) continue;
    pos[id] = static_cast<Index>(f.nodes.size());
    if (g.cls[id] == NodeClass::interior) f.interior.push_back(pos[id]);
    if (g.cls[id] == NodeClass::sigma_plus) f.sigma_plus.push_back(pos[id]);
    if (g.cls[id] == NodeClass::sigma_minus) f.sigma_minus.push_back(pos[id]);
    f.nodes.push_back(id);
  }
  const Index N = f.size();
  f.mass = Vec::Zero(N);
  f.boundary_weight = Vec::Zero(N);
  std::vector<Eigen::Triplet<double>> trip;
  const int nc = 1 << n;
  const double hn = std::pow(g.h, n);

  std::optional<Mat> cached;
  if (coeffs.constant) {
    std::vector<double> x0(n, 0.0);
    cached = cell_energy_matrix(coeffs.matrix_at(x0), coeffs.a0_at(x0), g.h);
  }
  std::vector<int> lower(n, 0);
  std::vector<double> xc;
  while (true) {
    std::vector<int> m(n);
    for (int k = 0; k < n; ++k) m[k] = g.offset[k] + lower[k];
    Mat E;
    if (cached) {
      E = *cached;
    } else {
      detail::cell_center(g, m, xc);
      E = cell_energy_matrix(coeffs.matrix_at(xc), coeffs.a0_at(xc), g.h);
    }
    std::vector<Index> corner(nc);
    for (int c = 0; c < nc; ++c) {
      std::vector<int> mc(m);
      for (int k = 0; k < n; ++k) mc[k] += (c >> k) & 1;
      corner[c] = pos[g.flat(mc)];
      f.mass(corner[c]) += hn / nc;
    }
    for (int a = 0; a < nc; ++a)
      for (int b = 0; b < nc; ++b)
        if (E(a, b) != 0.0) trip.emplace_back(corner[a], corner[b], E(a, b));
    int k = 0;
    while (k < n && ++lower[k] == g.cells[k]) lower[k++] = 0;
    if (k == n) break;
  }

  // boundary faces: surface weights everywhere, sigma on Sigma_+ faces
  const int nfc = 1 << (n - 1);
  const double hb = std::pow(g.h, n - 1);
  for (int axis = 0; axis < n; ++axis)
    for (int side = 0; side < 2; ++side) {
      std::vector<int> tang;
      for (int k = 0; k < n; ++k)
        if (k != axis) tang.push_back(k);
      std::vector<int> low(tang.size(), 0);
      while (true) {
        std::vector<int> m(n);
        m[axis] = g.offset[axis] + (side ? g.cells[axis] : 0);
        for (std::size_t j = 0; j < tang.size(); ++j) m[tang[j]] = g.offset[tang[j]] + low[j];
        std::vector<double> xf(n);
        for (int k = 0; k < n; ++k) xf[k] = (m[k] - g.offset[k]) * g.h;
        for (std::size_t j = 0; j < tang.size(); ++j) xf[tang[j]] += 0.5 * g.h;
        const bool plus = g.domain.face_point_plus(2 * axis + side, xf);
        const double sig = plus && coeffs.has_sigma() ? coeffs.sigma_at(xf) : 0.0;
        for (int c = 0; c < nfc; ++c) {
          std::vector<int> mc(m);
          for (std::size_t j = 0; j < tang.size(); ++j) mc[tang[j]] += (c >> j) & 1;
          const Index p = pos[g.flat(mc)];
          f.boundary_weight(p) += hb / nfc;
          if (sig != 0.0) trip.emplace_back(p, p, sig * hb / nfc);
        }
        std::size_t j = 0;
        while (j < tang.size() && ++low[j] == g.cells[tang[j]]) low[j++] = 0;
        if (j == tang.size() || tang.empty()) break;
      }
    }
  f.K.resize(N, N);
  f.K.setFromTriplets(trip.begin(), trip.end());
  f.descriptor = "variational form, h = " + std::to_string(g.h);
  return f;
}

/// Form on the full torus (periodic cells, no boundary).
inline FormSystem assemble_torus_form(const SecondOrderCoeffs &coeffs, const Grid &g) {
  if (coeffs.dim != g.dim) throw argument_error("assemble_torus_form: coefficient dimension differs from grid");
  const int n = g.dim;
  FormSystem f;
  f.dim = n;
  f.h = g.h;
  f.nodes.resize(g.size());
  std::iota(f.nodes.begin(), f.nodes.end(), Index{0});
  f.interior = f.nodes;
  f.mass = Vec::Zero(g.size());
  f.boundary_weight = Vec::Zero(g.size());
  const int nc = 1 << n;
  const double hn = std::pow(g.h, n);
  std::vector<Eigen::Triplet<double>> trip;
  std::optional<Mat> cached;
  if (coeffs.constant) {
    std::vector<double> x0(n, 0.0);
    cached = cell_energy_matrix(coeffs.matrix_at(x0), coeffs.a0_at(x0), g.h);
  }
  std::vector<double> xc;
  for (Index id = 0; id < g.size(); ++id) {
    const auto m = g.multi_index(id);
    Mat E;
    if (cached) {
      E = *cached;
    } else {
      detail::cell_center(g, m, xc);
      E = cell_energy_matrix(coeffs.matrix_at(xc), coeffs.a0_at(xc), g.h);
    }
    std::vector<Index> corner(nc);
    for (int c = 0; c < nc; ++c) {
      std::vector<int> mc(m);
      for (int k = 0; k < n; ++k) mc[k] += (c >> k) & 1;
      corner[c] = g.flat(mc);
      f.mass(corner[c]) += hn / nc;
    }
    for (int a = 0; a < nc; ++a)
      for (int b = 0; b < nc; ++b)
        if (E(a, b) != 0.0) trip.emplace_back(corner[a], corner[b], E(a, b));
  }
  f.K.resize(g.size(), g.size());
  f.K.setFromTriplets(trip.begin(), trip.end());
  f.descriptor = "periodic torus form, h = " + std::to_string(g.h);
  return f;
}

/// Dense symmetric matrix of a discretized operator on a node set.
struct OperatorMatrix {
  Mat values;
  std::vector<Index> nodes; ///< grid ids of rows/columns
  std::string label;        ///< which node set the matrix acts on
  std::string descriptor;   ///< continuum object and parameters

  Index size() const { return values.rows(); }
  double symmetry_defect() const { return fracspec::symmetry_defect(values); }
};

/// W^{-1/2} K W^{-1/2}: symmetric representation of the operator W^{-1} K.
inline OperatorMatrix to_operator(const FormSystem &f, std::string label) {
  const Vec s = f.mass.cwiseSqrt().cwiseInverse();
  OperatorMatrix op;
  op.values = s.asDiagonal() * Mat(f.K) * s.asDiagonal();
  op.values = 0.5 * (op.values + op.values.transpose()).eval();
  op.nodes = f.nodes;
  op.label = std::move(label);
  op.descriptor = f.descriptor;
  return op;
}

enum class BoundaryCondition { dirichlet_all, mixed, periodic_torus };

/// Realization of A with the chosen boundary condition. Dirichlet: interior
/// nodes. Mixed: interior plus Sigma_+ nodes with Robin sigma, zero on
/// Sigma_-. Periodic: the whole torus.
inline FormSystem assemble_second_order(const SecondOrderCoeffs &coeffs, const Grid &g,
                                        BoundaryCondition bc) {
  switch (bc) {
  case BoundaryCondition::periodic_torus: return assemble_torus_form(coeffs, g);
  case BoundaryCondition::dirichlet_all: {
    const FormSystem full = assemble_full_form(coeffs, g);
    FormSystem r = restrict_form(full, full.interior);
    r.descriptor = "Dirichlet realization, " + full.descriptor;
    return r;
  }
  case BoundaryCondition::mixed: {
    if (!coeffs.has_sigma())
      throw config_error("mixed realization requires a Robin coefficient sigma (use 0 for Neumann)");
    const FormSystem full = assemble_full_form(coeffs, g);
    std::vector<Index> keep = full.interior;
    keep.insert(keep.end(), full.sigma_plus.begin(), full.sigma_plus.end());
    std::sort(keep.begin(), keep.end());
    FormSystem r = restrict_form(full, keep);
    r.descriptor = "mixed realization (Robin on Sigma_+, Dirichlet on Sigma_-), " + full.descriptor;
    return r;
  }
  }
  throw argument_error("assemble_second_order: unknown boundary condition");
}

// ---------------------------------------------------------------------------
// Fractional powers

/// Real symbol of a translation-invariant operator on the torus, one value
/// per DFT frequency in grid-id order.
struct TorusMultiplier {
  std::vector<int> dims;
  std::vector<double> values;
  std::string descriptor;
};

namespace detail {

inline void fft_nd(std::vector<cplx> &data, const std::vector<int> &dims, bool inverse) {
  Eigen::FFT<double> fft;
  Index stride = 1;
  for (std::size_t ax = 0; ax < dims.size(); ++ax) {
    const int m = dims[ax];
    const Index total = static_cast<Index>(data.size());
    std::vector<cplx> line(m), out(m);
    for (Index base = 0; base < total; ++base) {
      // base must have zero digit along this axis
      if ((base / stride) % m != 0) continue;
      for (int i = 0; i < m; ++i) line[i] = data[base + i * stride];
      if (inverse)
        fft.inv(out, line);
      else
        fft.fwd(out, line);
      for (int i = 0; i < m; ++i) data[base + i * stride] = out[i];
    }
    stride *= m;
  }
}

} // namespace detail

/// Symbol of a circulant torus matrix (first row, forward DFT).
inline TorusMultiplier multiplier_from_circulant(const OperatorMatrix &base, const Grid &g) {
  if (base.size() != g.size()) throw argument_error("multiplier_from_circulant: base must act on the full torus");
  std::vector<cplx> row(g.size());
  for (Index j = 0; j < g.size(); ++j) row[j] = base.values(0, j);
  detail::fft_nd(row, g.dims, false);
  TorusMultiplier m;
  m.dims = g.dims;
  m.values.resize(g.size());
  for (Index j = 0; j < g.size(); ++j) m.values[j] = row[j].real();
  m.descriptor = "DFT of circulant: " + base.descriptor;
  return m;
}

/// Exact symbol sum a_jk xi_j xi_k of a constant-coefficient operator at
/// the torus frequencies xi_k = 2 pi k / (M h), k taken as the alias of
/// smallest modulus.
inline TorusMultiplier multiplier_exact(const SecondOrderCoeffs &coeffs, const Grid &g) {
  if (!coeffs.constant) throw argument_error("multiplier_exact: needs constant coefficients");
  std::vector<double> x0(g.dim, 0.0);
  const Mat A = coeffs.matrix_at(x0);
  const double a0 = coeffs.a0_at(x0);
  TorusMultiplier m;
  m.dims = g.dims;
  m.values.resize(g.size());
  Vec xi(g.dim);
  for (Index id = 0; id < g.size(); ++id) {
    const auto k = g.multi_index(id);
    for (int d = 0; d < g.dim; ++d) {
      int kk = k[d];
      if (kk > g.dims[d] / 2) kk -= g.dims[d];
      xi(d) = 2.0 * pi * kk / (g.dims[d] * g.h);
    }
    m.values[id] = xi.dot(A * xi) + a0;
  }
  m.descriptor = "exact symbol on torus";
  return m;
}

/// r+ P_a e+ from a multiplier: P_a has symbol m^a; the result is the
/// principal submatrix on the interior nodes.
inline OperatorMatrix fractional_restricted(const TorusMultiplier &mult, double a, const Grid &g) {
  if (!(a > 0)) throw argument_error("fractional_restricted: exponent must be positive");
  if (mult.dims != g.dims) throw argument_error("fractional_restricted: multiplier does not match grid");
  double top = 0.0;
  for (double v : mult.values) top = std::max(top, std::abs(v));
  std::vector<cplx> spec(g.size());
  for (Index j = 0; j < g.size(); ++j) {
    double v = mult.values[j];
    if (v < -1e-10 * std::max(1.0, top))
      throw numeric_error("fractional_restricted: base operator is not positive semidefinite");
    spec[j] = std::pow(std::max(v, 0.0), a);
  }
  detail::fft_nd(spec, g.dims, true); // Eigen's inverse includes the 1/M normalization
  const Index n = static_cast<Index>(g.interior.size());
  OperatorMatrix op;
  op.values.resize(n, n);
  std::vector<std::vector<int>> mi(n);
  for (Index i = 0; i < n; ++i) mi[i] = g.multi_index(g.interior[i]);
  std::vector<int> diff(g.dim);
  for (Index j = 0; j < n; ++j)
    for (Index i = j; i < n; ++i) {
      for (int d = 0; d < g.dim; ++d) diff[d] = mi[i][d] - mi[j][d];
      const double v = spec[g.flat(diff)].real();
      op.values(i, j) = v;
      op.values(j, i) = v;
    }
  op.nodes = g.interior;
  op.label = "interior";
  op.descriptor = "restricted power a = " + std::to_string(a) + " of " + mult.descriptor;
  return op;
}

/// Dense path: base^a by eigendecomposition on the torus, then the
/// principal submatrix on interior nodes. Capped at 8192 nodes.
inline OperatorMatrix fractional_restricted(const OperatorMatrix &base, double a, const Grid &g) {
  if (!(a > 0)) throw argument_error("fractional_restricted: exponent must be positive");
  if (base.size() != g.size()) throw argument_error("fractional_restricted: base must act on the full torus");
  if (base.size() > 8192) throw numeric_error("fractional_restricted: dense path capped at 8192 nodes");
  if (a == 1.0) {
    OperatorMatrix op;
    const Index n = static_cast<Index>(g.interior.size());
    op.values.resize(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) op.values(i, j) = base.values(g.interior[i], g.interior[j]);
    op.nodes = g.interior;
    op.label = "interior";
    op.descriptor = "restriction of " + base.descriptor;
    return op;
  }
  const Spectrum s = sym_eig(base.values, true);
  const double top = std::max(std::abs(s.values.front()), std::abs(s.values.back()));
  if (s.values.front() < -1e-10 * std::max(1.0, top))
    throw numeric_error("fractional_restricted: base operator has eigenvalue " +
                        std::to_string(s.values.front()) + " < 0");
  const Mat &V = *s.vectors;
  const Index n = static_cast<Index>(g.interior.size());
  Mat Vi(n, V.cols());
  for (Index i = 0; i < n; ++i) Vi.row(i) = V.row(g.interior[i]);
  Vec d(V.cols());
  for (Index k = 0; k < d.size(); ++k) d(k) = std::pow(std::max(s.values[k], 0.0), a);
  OperatorMatrix op;
  op.values = Vi * d.asDiagonal() * Vi.transpose();
  op.values = 0.5 * (op.values + op.values.transpose()).eval();
  op.nodes = g.interior;
  op.label = "interior";
  op.descriptor = "restricted power a = " + std::to_string(a) + " of " + base.descriptor;
  return op;
}

/// (A_Dir)^a via eigendecomposition: the spectral fractional power.
inline OperatorMatrix spectral_fractional_dirichlet(const OperatorMatrix &A_dir, double a) {
  const Spectrum s = sym_eig(A_dir.values, true);
  if (s.size() && !(s.values.front() > 0))
    throw numeric_error("spectral_fractional_dirichlet: operator is not positive definite");
  OperatorMatrix op = A_dir;
  op.values = spectral_function(s, [a](double l) { return std::pow(l, a); });
  op.values = 0.5 * (op.values + op.values.transpose()).eval();
  op.descriptor = "spectral power a = " + std::to_string(a) + " of " + A_dir.descriptor;
  return op;
}

// ---------------------------------------------------------------------------
// Poisson operator and boundary Schur complement

/// Discrete Poisson operator: phi on the boundary positions B maps to
/// [-K_II^{-1} K_IB phi; phi]. Nodes outside I u B are held at zero.
struct PoissonExtension {
  std::vector<Index> interior; ///< positions in the form
  std::vector<Index> boundary;
  Mat X;                       ///< -K_II^{-1} K_IB
  Index form_size = 0;

  Vec apply(const Vec &phi) const {
    if (phi.size() != static_cast<Index>(boundary.size()))
      throw argument_error("PoissonExtension: boundary data has wrong length");
    Vec u = Vec::Zero(form_size);
    const Vec ui = X * phi;
    for (std::size_t i = 0; i < interior.size(); ++i) u(interior[i]) = ui(static_cast<Index>(i));
    for (std::size_t i = 0; i < boundary.size(); ++i) u(boundary[i]) = phi(static_cast<Index>(i));
    return u;
  }
};

namespace detail {

using Ldlt = Eigen::SimplicialLDLT<SpMat>;

inline void factor_interior(Ldlt &ldlt, const SpMat &Kii) {
  ldlt.compute(Kii);
  if (ldlt.info() != Eigen::Success)
    throw numeric_error("interior block factorization failed; add a positivity shift");
  const Vec D = ldlt.vectorD();
  if (D.size() && !(D.minCoeff() > 0.0))
    throw numeric_error("interior block is singular or indefinite; add a positivity shift");
}

} // namespace detail

inline PoissonExtension poisson_extension(const FormSystem &f, std::span<const Index> boundary) {
  PoissonExtension p;
  p.interior = f.interior;
  p.boundary.assign(boundary.begin(), boundary.end());
  p.form_size = f.size();
  const SpMat Kii = detail::submatrix(f.K, p.interior, p.interior);
  const SpMat Kib = detail::submatrix(f.K, p.interior, p.boundary);
  const Mat rhs = -Mat(Kib);
  const double density = static_cast<double>(Kii.nonZeros()) /
                         std::max<double>(1.0, static_cast<double>(Kii.rows()) * Kii.rows());
  if (density > 0.05 && Kii.rows() <= 8192) {
    // high-order forms fill in completely; a dense factorization is faster
    Eigen::LLT<Mat> llt{Mat(Kii)};
    if (llt.info() != Eigen::Success)
      throw numeric_error("interior block is singular or indefinite; add a positivity shift");
    p.X = llt.solve(rhs);
  } else {
    detail::Ldlt ldlt;
    detail::factor_interior(ldlt, Kii);
    p.X = ldlt.solve(rhs);
  }
  return p;
}

/// Algebraic and boundary-weighted Schur complements.
struct SchurDtN {
  std::vector<Index> boundary; ///< positions of Sigma nodes in the form
  std::vector<Index> plus;     ///< positions of Sigma_+ within `boundary`
  Mat S;                       ///< K_BB - K_BI K_II^{-1} K_IB
  OperatorMatrix P_dtn;        ///< -W_S^{-1/2} S W_S^{-1/2}, the discrete P_{gamma,chi}
  OperatorMatrix L;            ///< restriction of -P_dtn to Sigma_+
};

/// Schur complement onto all boundary nodes (Sigma_+ and Sigma_-) of a full
/// form. sigma is already part of the Sigma_+ diagonal block of the form.
inline SchurDtN schur_dtn(const FormSystem &full) {
  SchurDtN r;
  r.boundary = full.sigma_plus;
  r.boundary.insert(r.boundary.end(), full.sigma_minus.begin(), full.sigma_minus.end());
  std::sort(r.boundary.begin(), r.boundary.end());
  for (std::size_t i = 0; i < r.boundary.size(); ++i)
    if (std::binary_search(full.sigma_plus.begin(), full.sigma_plus.end(), r.boundary[i]))
      r.plus.push_back(static_cast<Index>(i));
  const PoissonExtension ext = poisson_extension(full, r.boundary);
  const SpMat Kbb = detail::submatrix(full.K, r.boundary, r.boundary);
  const SpMat Kbi = detail::submatrix(full.K, r.boundary, full.interior);
  r.S = Mat(Kbb) + Kbi * ext.X;
  r.S = 0.5 * (r.S + r.S.transpose()).eval();

  const Vec wb = detail::gather(full.boundary_weight, r.boundary);
  if (wb.size() && !(wb.minCoeff() > 0.0)) throw numeric_error("schur_dtn: boundary node without surface weight");
  const Vec s = wb.cwiseSqrt().cwiseInverse();
  r.P_dtn.values = -(s.asDiagonal() * r.S * s.asDiagonal());
  for (Index p : r.boundary) r.P_dtn.nodes.push_back(full.nodes[p]);
  r.P_dtn.label = "Sigma";
  r.P_dtn.descriptor = "Dirichlet-to-Neumann (negated weighted Schur complement)";

  const Index np = static_cast<Index>(r.plus.size());
  r.L.values.resize(np, np);
  for (Index i = 0; i < np; ++i)
    for (Index j = 0; j < np; ++j) r.L.values(i, j) = -r.P_dtn.values(r.plus[i], r.plus[j]);
  for (Index p : r.plus) r.L.nodes.push_back(r.P_dtn.nodes[p]);
  r.L.label = "Sigma_+";
  r.L.descriptor = "L = -r+ P_dtn e+";
  return r;
}

/// Lines inside the Sigma_+ part of a box face running inward from its
/// boundary (face edges, or the interface of a face patch), `per_edge` lines
/// per edge, as positions into `plus_nodes` (grid ids of the Sigma_+ nodes
/// in the order L uses). Distances are measured inside the face.
inline std::vector<NormalLine> face_normal_lines(const Grid &g, int face,
                                                 std::span<const Index> plus_nodes, int per_edge = 1) {
  const int axis = face / 2, side = face % 2;
  std::vector<int> tang;
  for (int k = 0; k < g.dim; ++k)
    if (k != axis) tang.push_back(k);
  std::vector<double> lo, hi;
  const auto &pf = g.domain.plus_faces;
  if (std::find(pf.begin(), pf.end(), face) != pf.end()) {
    for (int k : tang) lo.push_back(0.0), hi.push_back(g.domain.lengths[k]);
  } else {
    for (const auto &p : g.domain.plus_patches)
      if (p.face == face) lo = p.lo, hi = p.hi;
    if (lo.empty()) throw argument_error("face_normal_lines: face carries no Sigma_+ part");
  }
  std::vector<NormalLine> out;
  std::unordered_map<Index, Index> pos;
  for (std::size_t i = 0; i < plus_nodes.size(); ++i) pos[plus_nodes[i]] = static_cast<Index>(i);
  auto cell = [&](double x) { return static_cast<int>(std::lround(x / g.h)); };
  for (std::size_t t = 0; t < tang.size(); ++t)
    for (int edge_side = 0; edge_side < 2; ++edge_side)
      for (int p = 0; p < per_edge; ++p) {
        NormalLine line;
        const double frac = per_edge == 1 ? 0.5 : 0.25 + 0.5 * p / (per_edge - 1);
        const int c0 = cell(lo[t]), c1 = cell(hi[t]);
        const int half = (c1 - c0) / 2;
        for (int s = 1; s <= half; ++s) {
          std::vector<int> m(g.dim);
          m[axis] = g.offset[axis] + (side ? g.cells[axis] : 0);
          for (std::size_t j = 0; j < tang.size(); ++j)
            if (j != t) m[tang[j]] = g.offset[tang[j]] + cell(lo[j] + frac * (hi[j] - lo[j]));
          m[tang[t]] = g.offset[tang[t]] + (edge_side == 0 ? c0 + s : c1 - s);
          auto it = pos.find(g.flat(m));
          if (it == pos.end()) continue;
          line.nodes.push_back(it->second);
          line.dist.push_back(s * g.h);
        }
        out.push_back(std::move(line));
      }
  return out;
}


// ---------------------------------------------------------------------------
// Polar disk form (second-order problems on disks)

/// Boundary-fitted polar grid on a disk: one center node and rings of
/// n_theta nodes at angles (k + 1/2) dtheta. radii[0] = 0, radii.back() = R.
struct PolarGrid {
  DomainSpec domain;
  std::vector<double> radii;
  int n_theta = 0;

  int rings() const { return static_cast<int>(radii.size()) - 1; }
  Index size() const { return 1 + static_cast<Index>(rings()) * n_theta; }
  Index id(int ring, int k) const {
    if (ring == 0) return 0;
    return 1 + static_cast<Index>(ring - 1) * n_theta + ((k % n_theta) + n_theta) % n_theta;
  }
  double angle(int k) const { return (k + 0.5) * 2.0 * pi / n_theta; }
  double dtheta() const { return 2.0 * pi / n_theta; }
};

/// Radial spacing equals the boundary arc spacing at r = R and grows
/// geometrically (ratio `growth`) inward up to `max_step` * R.
inline PolarGrid build_polar_grid(const DomainSpec &domain, int n_theta, double growth = 1.1,
                                  double max_step = 0.05) {
  domain.validate();
  if (domain.kind != DomainKind::disk) throw config_error("build_polar_grid: needs a disk domain");
  if (n_theta < 8) throw config_error("build_polar_grid: need at least 8 angular nodes");
  if (!(growth >= 1.0)) throw config_error("build_polar_grid: growth ratio must be >= 1");
  PolarGrid g;
  g.domain = domain;
  g.n_theta = n_theta;
  const double R = domain.radius;
  const double cap = std::max(max_step * R, R * g.dtheta());
  std::vector<double> steps;
  double step = R * g.dtheta(), covered = 0.0;
  while (covered + step < R - 0.5 * std::min(step, cap)) {
    steps.push_back(step);
    covered += step;
    step = std::min(step * growth, cap);
  }
  // the innermost ring absorbs the remainder
  g.radii.push_back(0.0);
  double r = R - covered;
  g.radii.push_back(r);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    r += *it;
    g.radii.push_back(r);
  }
  g.radii.back() = R;
  return g;
}

/// Finite-volume form of -Delta + a0 on a polar grid. Outer-ring nodes are
/// boundary nodes; those with angle in [plus_angle_lo, plus_angle_hi]
/// (mod 2 pi) form Sigma_+.
inline FormSystem assemble_disk_form(const PolarGrid &g, double a0 = 0.0) {
  const int nr = g.rings();
  const int nt = g.n_theta;
  const double dt = g.dtheta();
  const auto &r = g.radii;
  FormSystem f;
  f.dim = 2;
  f.h = g.domain.radius * dt;
  f.nodes.resize(g.size());
  std::iota(f.nodes.begin(), f.nodes.end(), Index{0});
  f.mass = Vec::Zero(g.size());
  f.boundary_weight = Vec::Zero(g.size());
  std::vector<Eigen::Triplet<double>> trip;
  auto edge = [&](Index a, Index b, double w) {
    trip.emplace_back(a, a, w);
    trip.emplace_back(b, b, w);
    trip.emplace_back(a, b, -w);
    trip.emplace_back(b, a, -w);
  };
  auto mid = [&](int i) { return 0.5 * (r[i] + r[i + 1]); }; // r_{i+1/2}
  for (int i = 0; i < nr; ++i)
    for (int k = 0; k < nt; ++k) edge(g.id(i, k), g.id(i + 1, k), mid(i) * dt / (r[i + 1] - r[i]));
  for (int i = 1; i <= nr; ++i) {
    const double lo = mid(i - 1), hi = i < nr ? mid(i) : r[nr];
    for (int k = 0; k < nt; ++k) {
      edge(g.id(i, k), g.id(i, k + 1), (hi - lo) / (r[i] * dt));
      f.mass(g.id(i, k)) = 0.5 * dt * (hi * hi - lo * lo);
    }
  }
  f.mass(0) = pi * mid(0) * mid(0);
  if (a0 != 0.0)
    for (Index p = 0; p < g.size(); ++p) trip.emplace_back(p, p, a0 * f.mass(p));
  const double lo = g.domain.plus_angle_lo, span = g.domain.plus_angle_hi - lo;
  const Index first = g.id(nr, 0);
  for (Index p = 0; p < g.size(); ++p) {
    if (p < first) {
      f.interior.push_back(p);
      continue;
    }
    const int k = static_cast<int>(p - first);
    f.boundary_weight(p) = g.domain.radius * dt;
    const double rel = std::fmod(std::fmod(g.angle(k) - lo, 2.0 * pi) + 2.0 * pi, 2.0 * pi);
    (rel < span ? f.sigma_plus : f.sigma_minus).push_back(p);
  }
  f.K.resize(g.size(), g.size());
  f.K.setFromTriplets(trip.begin(), trip.end());
  f.descriptor = "polar finite-volume form on disk, " + std::to_string(nr) + " rings x " +
                 std::to_string(nt) + " angles";
  return f;
}

/// Form given directly by a stiffness matrix (unit mass and boundary weight).
inline FormSystem form_from_matrix(const Mat &K, std::vector<Index> interior,
                                   std::vector<Index> sigma_plus, std::vector<Index> sigma_minus = {}) {
  if (K.rows() != K.cols()) throw argument_error("form_from_matrix: matrix is not square");
  if (symmetry_defect(K) > 1e-12) throw argument_error("form_from_matrix: matrix is not symmetric");
  FormSystem f;
  f.K = K.sparseView();
  f.mass = Vec::Ones(K.rows());
  f.boundary_weight = Vec::Zero(K.rows());
  for (Index p : sigma_plus) f.boundary_weight(p) = 1.0;
  for (Index p : sigma_minus) f.boundary_weight(p) = 1.0;
  f.nodes.resize(K.rows());
  std::iota(f.nodes.begin(), f.nodes.end(), Index{0});
  f.interior = std::move(interior);
  f.sigma_plus = std::move(sigma_plus);
  f.sigma_minus = std::move(sigma_minus);
  std::sort(f.interior.begin(), f.interior.end());
  std::sort(f.sigma_plus.begin(), f.sigma_plus.end());
  std::sort(f.sigma_minus.begin(), f.sigma_minus.end());
  f.descriptor = "explicit matrix";
  return f;
}

/// 1 + max(0, -2 lambda_min), lambda_min estimated by Lanczos on W^{-1/2} K W^{-1/2}.
inline double auto_positivity_shift(const FormSystem &f, int steps = 40) {
  const Vec s = f.mass.cwiseSqrt().cwiseInverse();
  const SpMat A = s.asDiagonal() * f.K * s.asDiagonal();
  return 1.0 + std::max(0.0, -2.0 * lanczos_extremes(A, steps).first);
}

/// K + shift * W, i.e. shift added to a0.
inline FormSystem with_shift(FormSystem f, double shift) {
  SpMat W(f.size(), f.size());
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < f.size(); ++i) t.emplace_back(i, i, f.mass(i));
  W.setFromTriplets(t.begin(), t.end());
  f.K += shift * W;
  f.shift += shift;
  return f;
}


// ---------------------------------------------------------------------------
// Spectral element form on boxes

/// Gauss-Lobatto-Legendre nodes, weights and differentiation matrix of
/// degree p on [0, L].
struct GllRule {
  Vec x, w;
  Mat D; ///< (D u)_i = u'(x_i) for the interpolant of u
};

inline GllRule gll_rule(int p, double L = 1.0) {
  if (p < 2) throw argument_error("gll_rule: degree must be >= 2");
  // interior nodes are the roots of P_p', found by Newton from Chebyshev-Gauss-Lobatto guesses
  auto legendre = [p](double z, double &dp, double &d2p) {
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= p; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    // P_p = p1, P_{p-1} = p0
    dp = p * (z * p1 - p0) / (z * z - 1.0);
    d2p = (2.0 * z * dp - p * (p + 1.0) * p1) / (1.0 - z * z);
    return p1;
  };
  Vec z(p + 1), P(p + 1);
  z(0) = -1.0;
  z(p) = 1.0;
  for (int i = 1; i < p; ++i) {
    double t = -std::cos(pi * i / p);
    for (int it = 0; it < 100; ++it) {
      double dp, d2p;
      legendre(t, dp, d2p);
      const double dt = dp / d2p;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    z(i) = t;
  }
  for (int i = 0; i <= p; ++i) {
    double p0 = 1.0, p1 = z(i);
    for (int k = 2; k <= p; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z(i) * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    P(i) = p == 1 ? z(i) : p1;
  }
  GllRule r;
  r.x = (z.array() + 1.0) * (0.5 * L);
  r.w.resize(p + 1);
  for (int i = 0; i <= p; ++i) r.w(i) = 2.0 / (p * (p + 1.0) * P(i) * P(i)) * (0.5 * L);
  r.D = Mat::Zero(p + 1, p + 1);
  for (int i = 0; i <= p; ++i)
    for (int j = 0; j <= p; ++j)
      if (i != j) r.D(i, j) = P(i) / (P(j) * (z(i) - z(j)));
  r.D(0, 0) = -p * (p + 1.0) / 4.0;
  r.D(p, p) = p * (p + 1.0) / 4.0;
  r.D *= 2.0 / L;
  return r;
}

/// Tensor GLL nodes of one spectral element covering a box.
struct SpectralGrid {
  DomainSpec domain;
  int degree = 0;
  std::vector<GllRule> rules; ///< per axis
  std::vector<NodeClass> cls;

  int dim() const { return static_cast<int>(rules.size()); }
  Index size() const { return static_cast<Index>(cls.size()); }
  std::vector<int> multi_index(Index id) const {
    std::vector<int> m(dim());
    for (int k = 0; k < dim(); ++k) {
      m[k] = static_cast<int>(id % (degree + 1));
      id /= degree + 1;
    }
    return m;
  }
  std::vector<double> coords(Index id) const {
    const auto m = multi_index(id);
    std::vector<double> x(dim());
    for (int k = 0; k < dim(); ++k) x[k] = rules[k].x(m[k]);
    return x;
  }
};

inline SpectralGrid build_spectral_grid(const DomainSpec &domain, int degree) {
  domain.validate();
  if (!domain.is_box_like()) throw config_error("spectral element forms need box domains");
  if (degree < 4) throw config_error("spectral element degree must be >= 4");
  SpectralGrid g;
  g.domain = domain;
  g.degree = degree;
  const int n = domain.dim();
  for (int k = 0; k < n; ++k) g.rules.push_back(gll_rule(degree, domain.lengths[k]));
  Index total = 1;
  for (int k = 0; k < n; ++k) total *= degree + 1;
  g.cls.assign(total, NodeClass::interior);
  for (Index id = 0; id < total; ++id) {
    const auto m = g.multi_index(id);
    std::vector<int> on;
    for (int k = 0; k < n; ++k) {
      if (m[k] == 0) on.push_back(2 * k);
      if (m[k] == degree) on.push_back(2 * k + 1);
    }
    if (on.empty()) continue;
    bool plus = true;
    if (on.size() == 1) {
      plus = domain.face_point_plus(on[0], g.coords(id), 1e-12);
    } else {
      for (int f : on)
        if (std::find(domain.plus_faces.begin(), domain.plus_faces.end(), f) == domain.plus_faces.end())
          plus = false;
    }
    g.cls[id] = plus ? NodeClass::sigma_plus : NodeClass::sigma_minus;
  }
  return g;
}

/// Single-element spectral (GLL) form: a(u, v) evaluated with GLL quadrature,
/// so the mass and the surface weights are diagonal.
inline FormSystem assemble_spectral_form(const SecondOrderCoeffs &coeffs, const SpectralGrid &g) {
  const int n = g.dim();
  if (coeffs.dim != n) throw argument_error("assemble_spectral_form: coefficient dimension differs from grid");
  const int q = g.degree + 1;
  const Index N = g.size();
  FormSystem f;
  f.dim = n;
  f.h = g.domain.lengths[0] / g.degree;
  f.nodes.resize(N);
  std::iota(f.nodes.begin(), f.nodes.end(), Index{0});
  f.mass = Vec::Zero(N);
  f.boundary_weight = Vec::Zero(N);
  std::vector<Index> stride(n, 1);
  for (int k = 1; k < n; ++k) stride[k] = stride[k - 1] * q;

  // gradient rows: G_k u at node i uses the q nodes on the axis-k line through i
  std::vector<Mat> A(N);
  std::vector<double> a0(N);
  for (Index i = 0; i < N; ++i) {
    const auto x = g.coords(i);
    const auto m = g.multi_index(i);
    double w = 1.0;
    for (int k = 0; k < n; ++k) w *= g.rules[k].w(m[k]);
    f.mass(i) = w;
    A[i] = coeffs.matrix_at(x) * w;
    a0[i] = coeffs.a0_at(x) * w;
  }
  std::map<std::pair<Index, Index>, double> acc;
  for (Index i = 0; i < N; ++i) {
    const auto m = g.multi_index(i);
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        const double akl = A[i](k, l);
        if (akl == 0.0) continue;
        const Index base_k = i - m[k] * stride[k], base_l = i - m[l] * stride[l];
        for (int a = 0; a < q; ++a) {
          const double da = g.rules[k].D(m[k], a);
          if (da == 0.0) continue;
          for (int b = 0; b < q; ++b) {
            const double db = g.rules[l].D(m[l], b);
            if (db == 0.0) continue;
            acc[{base_k + a * stride[k], base_l + b * stride[l]}] += akl * da * db;
          }
        }
      }
    acc[{i, i}] += a0[i];
  }
  // surface weights and Robin terms
  for (Index i = 0; i < N; ++i) {
    const auto m = g.multi_index(i);
    const auto x = g.coords(i);
    for (int k = 0; k < n; ++k)
      for (int side = 0; side < 2; ++side) {
        if (m[k] != (side ? g.degree : 0)) continue;
        double w = 1.0;
        for (int j = 0; j < n; ++j)
          if (j != k) w *= g.rules[j].w(m[j]);
        f.boundary_weight(i) += w;
        if (coeffs.has_sigma() && g.domain.face_point_plus(2 * k + side, x, -1e-12))
          acc[{i, i}] += coeffs.sigma_at(x) * w;
      }
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(acc.size());
  for (const auto &[ij, v] : acc) trip.emplace_back(ij.first, ij.second, v);
  f.K.resize(N, N);
  f.K.setFromTriplets(trip.begin(), trip.end());
  f.K = 0.5 * (SpMat(f.K.transpose()) + f.K);
  for (Index i = 0; i < N; ++i) {
    switch (g.cls[i]) {
    case NodeClass::interior: f.interior.push_back(i); break;
    case NodeClass::sigma_plus: f.sigma_plus.push_back(i); break;
    case NodeClass::sigma_minus: f.sigma_minus.push_back(i); break;
    case NodeClass::exterior: break;
    }
  }
  f.descriptor = "spectral element form, GLL degree " + std::to_string(g.degree);
  return f;
}

} // namespace fracspec
