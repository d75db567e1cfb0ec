#pragma once

// Mixed (Zaremba) problem objects: the Krein term M = A_mixed^{-1} - A_gamma^{-1},
// its Schur-complement representation and the flat-strip probe of the
// Dirichlet-to-Neumann symbol.

#include "fracspec/discretize.hpp"

#include <Eigen/Cholesky>

namespace fracspec {

/// Schur-complement pieces of the Krein term on the form space of the
/// mixed realization (interior and Sigma_+ nodes; Sigma_- is Dirichlet).
///
/// With I the interior positions and B the Sigma_+ positions of `mixed`:
/// X = -K_II^{-1} K_IB is the discrete Poisson map, S = K_BB + K_BI X the
/// algebraic L, and M = [X; I] S^{-1} [X; I]^T.
struct KreinAssembly {
  FormSystem mixed;
  std::vector<Index> I, B;
  Mat X;
  Mat S;
  Vec mass_I, mass_B;
  Vec surface_B; ///< boundary quadrature weight of the Sigma_+ nodes
  double shift = 0.0;
  bool planar_flag = false; ///< n = 2 run, outside the n >= 3 theorem's scope
  std::string descriptor;

  Index boundary_size() const { return static_cast<Index>(B.size()); }
};

/// Builds the Krein assembly from a form over interior, Sigma_+ and (optionally)
/// Sigma_- nodes. `shift` is added to a0 before anything is factorized.
inline KreinAssembly krein_term(const FormSystem &full, double shift = 0.0) {
  KreinAssembly k;
  std::vector<Index> keep = full.interior;
  keep.insert(keep.end(), full.sigma_plus.begin(), full.sigma_plus.end());
  std::sort(keep.begin(), keep.end());
  k.mixed = restrict_form(full, keep);
  if (shift != 0.0) k.mixed = with_shift(std::move(k.mixed), shift);
  k.shift = shift;
  k.I = k.mixed.interior;
  k.B = k.mixed.sigma_plus;
  k.planar_flag = full.dim == 2;
  k.descriptor = "Krein term of " + full.descriptor;
  k.mass_I = detail::gather(k.mixed.mass, k.I);
  k.mass_B = detail::gather(k.mixed.mass, k.B);
  k.surface_B = detail::gather(k.mixed.boundary_weight, k.B);
  if (k.B.empty()) {
    k.X = Mat::Zero(static_cast<Index>(k.I.size()), 0);
    k.S = Mat::Zero(0, 0);
    return k;
  }
  const PoissonExtension ext = poisson_extension(k.mixed, k.B);
  k.X = ext.X;
  const SpMat Kbb = detail::submatrix(k.mixed.K, k.B, k.B);
  const SpMat Kbi = detail::submatrix(k.mixed.K, k.B, k.I);
  k.S = Mat(Kbb) + Kbi * k.X;
  k.S = 0.5 * (k.S + k.S.transpose()).eval();
  Eigen::LLT<Mat> llt(k.S);
  if (llt.info() != Eigen::Success)
    throw numeric_error("krein_term: boundary Schur complement is not positive definite; "
                        "increase the positivity shift");
  return k;
}

namespace detail {

/// Eigenvalues of S^{-1} G for SPD S and symmetric G, descending.
inline std::vector<double> pencil_eigenvalues(const Mat &S, const Mat &G) {
  if (S.rows() == 0) return {};
  Eigen::LLT<Mat> llt(S);
  if (llt.info() != Eigen::Success) throw numeric_error("pencil: S is not positive definite");
  const Mat Linv_G = llt.matrixL().solve(G);
  const Mat C = llt.matrixL().solve(Linv_G.transpose());
  Spectrum s = sym_eig(0.5 * (C + C.transpose()), false, 1e-6);
  std::reverse(s.values.begin(), s.values.end());
  return s.values;
}

} // namespace detail

/// Nonzero spectrum of M through the pencil: eig(S^{-1} (X^T W_I X + W_B)) when
/// weighted (the L^2-selfadjoint M), eig(S^{-1} (X^T X + I)) otherwise (the
/// algebraic L^{-1} P_1). Descending.
inline Spectrum krein_spectrum(const KreinAssembly &k, bool weighted = true) {
  Spectrum s;
  s.order = SpectrumOrder::descending;
  s.descriptor = weighted ? "mu_j(M), mass-weighted" : "mu_j(S^-1 (X^T X + I))";
  if (k.B.empty()) return s;
  Mat G;
  if (weighted) {
    G = k.X.transpose() * k.mass_I.asDiagonal() * k.X;
    G.diagonal() += k.mass_B;
  } else {
    G = k.X.transpose() * k.X;
    G.diagonal().array() += 1.0;
  }
  s.values = detail::pencil_eigenvalues(k.S, G);
  return s;
}

/// Dense algebraic M = [X; I] S^{-1} [X; I]^T in the ordering of `mixed`.
inline Mat krein_matrix(const KreinAssembly &k) {
  const Index n = k.mixed.size();
  if (n > 8192) throw numeric_error("krein_matrix: dense M capped at 8192 nodes");
  Mat M = Mat::Zero(n, n);
  if (k.B.empty()) return M;
  const Index nb = k.boundary_size();
  Mat Y(n, nb); // [X; I] in form ordering
  Y.setZero();
  for (std::size_t i = 0; i < k.I.size(); ++i) Y.row(k.I[i]) = k.X.row(static_cast<Index>(i));
  for (Index j = 0; j < nb; ++j) Y(k.B[j], j) = 1.0;
  Eigen::LLT<Mat> llt(k.S);
  M = Y * llt.solve(Y.transpose());
  return 0.5 * (M + M.transpose());
}

/// W^{1/2} M W^{1/2}: the symmetric representation of M as an operator on L^2.
inline Mat krein_matrix_weighted(const KreinAssembly &k) {
  const Vec s = k.mixed.mass.cwiseSqrt();
  return s.asDiagonal() * krein_matrix(k) * s.asDiagonal();
}

/// Continuum-consistent L = W_Sigma^{-1/2} S W_Sigma^{-1/2} on Sigma_+.
inline OperatorMatrix weighted_L(const KreinAssembly &k) {
  OperatorMatrix op;
  if (k.B.empty()) return op;
  if (!(k.surface_B.minCoeff() > 0.0)) throw numeric_error("weighted_L: Sigma_+ node without surface weight");
  const Vec s = k.surface_B.cwiseSqrt().cwiseInverse();
  op.values = s.asDiagonal() * k.S * s.asDiagonal();
  op.values = 0.5 * (op.values + op.values.transpose()).eval();
  for (Index p : k.B) op.nodes.push_back(k.mixed.nodes[p]);
  op.label = "Sigma_+";
  op.descriptor = "weighted L (boundary Schur complement), " + k.descriptor;
  return op;
}

struct KreinIdentityReport {
  double max_relative_mismatch = 0.0;
  std::vector<double> m_values;      ///< leading |B| eigenvalues of the dense M
  std::vector<double> pencil_values; ///< eig S^{-1} (X^T X + I)
  Index rank_M = 0;                  ///< eigenvalues of M above 1e-12 ||M||
};

/// Compares the nonzero spectrum of the dense algebraic M with the pencil
/// spectrum. Both sides are exact representations of the same operator.
inline KreinIdentityReport krein_identity_check(const KreinAssembly &k) {
  KreinIdentityReport r;
  const Index nb = k.boundary_size();
  if (nb == 0) return r;
  const Mat M = krein_matrix(k);
  Spectrum sm = sym_eig(M);
  std::reverse(sm.values.begin(), sm.values.end());
  const double top = std::max(std::abs(sm.values.front()), 1e-300);
  for (double v : sm.values)
    if (v > 1e-12 * top) ++r.rank_M;
  r.m_values.assign(sm.values.begin(), sm.values.begin() + nb);
  r.pencil_values = krein_spectrum(k, false).values;
  for (Index j = 0; j < nb; ++j)
    r.max_relative_mismatch =
        std::max(r.max_relative_mismatch,
                 std::abs(r.m_values[j] - r.pencil_values[j]) / std::abs(r.pencil_values[j]));
  return r;
}

// ---------------------------------------------------------------------------
// Flat-strip probe of the DtN symbol

/// Strip {0 < x_n < height} with tangential period `period` in each
/// tangential direction, spacing h; Dirichlet data at x_n = height.
struct StripSpec {
  double h = 1.0 / 128;
  double height = 20.0;
  double period = 2.0 * pi;
};

struct DtnProbeEntry {
  std::vector<double> xi_prime;
  double measured = 0.0;
  double predicted = 0.0;
  double relative_error = 0.0;
};

struct DtnProbeReport {
  std::vector<DtnProbeEntry> entries;
  double h = 0.0;
  double max_relative_error = 0.0;
};

/// Discrete DtN symbol of the variational form at one tangential frequency.
/// Plane waves e^{i xi'.x'} v(x_n) reduce the strip problem to a Hermitian
/// tridiagonal system in x_n; the result is -S(xi') / h^{n-1}.
inline double strip_dtn_symbol(const SecondOrderCoeffs &coeffs, const StripSpec &strip,
                               std::span<const double> xi_prime) {
  const int n = coeffs.dim;
  if (static_cast<int>(xi_prime.size()) != n - 1)
    throw argument_error("strip_dtn_symbol: xi' must have dimension n-1");
  if (!coeffs.constant) throw argument_error("strip_dtn_symbol: needs constant coefficients");
  const double h = strip.h;
  const int layers = static_cast<int>(std::lround(strip.height / h));
  if (layers < 4) throw argument_error("strip_dtn_symbol: strip too thin for the spacing");
  std::vector<double> x0(n, 0.0);
  const Mat E = cell_energy_matrix(coeffs.matrix_at(x0), coeffs.a0_at(x0), h);
  const int nc = 1 << n;
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(nc, 2);
  for (int c = 0; c < nc; ++c) {
    double phase = 0.0;
    for (int k = 0; k < n - 1; ++k)
      if (c & (1 << k)) phase += xi_prime[k] * h;
    P(c, (c >> (n - 1)) & 1) = std::polar(1.0, phase);
  }
  const Eigen::Matrix2cd Et = P.adjoint() * E.cast<cplx>() * P;

  // nodes j = 0..layers-1 (j = layers is Dirichlet); tridiagonal diag/off
  std::vector<cplx> diag(layers, 0.0), up(layers, 0.0), lo(layers, 0.0);
  for (int j = 0; j < layers; ++j) {
    diag[j] += Et(0, 0);
    if (j + 1 < layers) {
      diag[j + 1] += Et(1, 1);
      up[j] += Et(0, 1);     // (j, j+1)
      lo[j + 1] += Et(1, 0); // (j+1, j)
    }
  }
  // eliminate nodes layers-1 .. 1 from the top (Thomas sweep)
  cplx d = diag[layers - 1];
  for (int j = layers - 2; j >= 0; --j) d = diag[j] - up[j] * lo[j + 1] / d;
  return -d.real() / std::pow(h, n - 1);
}

/// Measured discrete symbol against -kappa0 for each listed tangential
/// frequency. The boundary normal is e_n (interior side x_n > 0).
inline DtnProbeReport dtn_symbol_probe(const SecondOrderCoeffs &coeffs, const StripSpec &strip,
                                       const std::vector<std::vector<double>> &xi_list) {
  DtnProbeReport r;
  r.h = strip.h;
  const int n = coeffs.dim;
  const Frame frame = Frame::axis_aligned(n, n - 1, 1);
  std::vector<double> x0(n, 0.0);
  for (const auto &xi : xi_list) {
    for (double v : xi) {
      const double cycles = v * strip.period / (2.0 * pi);
      if (std::abs(cycles - std::round(cycles)) > 1e-9)
        throw argument_error("dtn_symbol_probe: frequency " + std::to_string(v) +
                             " is not commensurate with the tangential period");
    }
    DtnProbeEntry e;
    e.xi_prime = xi;
    e.measured = strip_dtn_symbol(coeffs, strip, xi);
    e.predicted = dtn_principal(coeffs, x0, frame, xi);
    e.relative_error = std::abs(e.measured - e.predicted) / std::abs(e.predicted);
    r.max_relative_error = std::max(r.max_relative_error, e.relative_error);
    r.entries.push_back(std::move(e));
  }
  return r;
}

} // namespace fracspec
