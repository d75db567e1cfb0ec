#pragma once

// Dense symmetric eigendecomposition and singular values. The heavy lifting
// is LAPACK's divide-and-conquer (dsyevd) and MRRR (dsyevr) drivers.

#include "fracspec/core.hpp"

#include <lapacke.h>

#include <cmath>
#include <functional>
#include <optional>
#include <cstdlib>
#include <random>
#include <unistd.h>

extern "C" char *openblas_get_corename(void);

namespace fracspec {

/// OpenBLAS 0.3.20 selects its Cooperlake kernels on some Xeon hosts and
/// those return wrong eigenvectors from dsyevd/dsyevr above n ~ 100. The
/// kernel is chosen when the library loads, so a process that detects it
/// re-executes itself with OPENBLAS_CORETYPE=SkylakeX. Call first in main.
inline void pin_blas_kernel(char **argv) {
  const char *core = openblas_get_corename();
  if (std::getenv("OPENBLAS_CORETYPE") || !core || std::string_view(core) != "Cooperlake") return;
  ::setenv("OPENBLAS_CORETYPE", "SkylakeX", 1);
  ::execv("/proc/self/exe", argv);
  // exec failed: continue, the eigensolver checks below will report it
}

enum class SpectrumOrder { ascending, descending };

/// Ordered eigenvalue or singular value sequence, repeated per multiplicity.
struct Spectrum {
  std::vector<double> values;
  std::optional<Mat> vectors; ///< column k belongs to values[k]
  SpectrumOrder order = SpectrumOrder::ascending;
  std::string descriptor;

  std::size_t size() const { return values.size(); }

  Spectrum reversed() const {
    Spectrum s = *this;
    std::reverse(s.values.begin(), s.values.end());
    if (s.vectors) s.vectors = s.vectors->rowwise().reverse().eval();
    s.order = order == SpectrumOrder::ascending ? SpectrumOrder::descending : SpectrumOrder::ascending;
    return s;
  }
};

inline double symmetry_defect(const Mat &A) {
  const double scale = A.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (A - A.transpose()).cwiseAbs().maxCoeff() / scale;
}

namespace detail {

/// Trace identity and residuals of a few sampled eigenpairs.
inline void check_decomposition(const Mat &A, const std::vector<double> &values, const Mat *V,
                                const char *who) {
  const Index n = A.rows();
  const double scale = std::max(A.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  double sum = 0.0, abs_sum = 0.0;
  for (double v : values) sum += v, abs_sum += std::abs(v);
  const double tol = 1e-9 * (abs_sum + n * scale);
  const char *hint = " (with OpenBLAS, try OPENBLAS_CORETYPE=SkylakeX)";
  if (std::abs(sum - A.trace()) > tol)
    throw numeric_error(std::string(who) + ": eigenvalues fail the trace identity" + hint);
  if (!V) return;
  for (Index k : {Index{0}, n / 3, (2 * n) / 3, n - 1}) {
    const Vec r = A * V->col(k) - values[k] * V->col(k);
    if (r.norm() > 1e-8 * n * scale)
      throw numeric_error(std::string(who) + ": eigenpair residual " + std::to_string(r.norm()) +
                          " too large" + hint);
  }
}

} // namespace detail

/// Full spectrum of the symmetric part (A + A^T)/2.
inline Spectrum sym_eig(const Mat &A, bool want_vectors = false, double symmetry_tol = 1e-8) {
  if (A.rows() != A.cols()) throw argument_error("sym_eig: matrix is not square");
  if (symmetry_defect(A) > symmetry_tol)
    throw argument_error("sym_eig: matrix is not symmetric within tolerance");
  const lapack_int n = static_cast<lapack_int>(A.rows());
  Spectrum s;
  if (n == 0) return s;
  Mat work = 0.5 * (A + A.transpose());
  Vec w(n);
  const lapack_int lwork = want_vectors ? 1 + 6 * n + 2 * n * n : 2 * n + 1;
  const lapack_int liwork = want_vectors ? 3 + 5 * n : 1;
  std::vector<double> wk(static_cast<std::size_t>(lwork));
  std::vector<lapack_int> iwk(static_cast<std::size_t>(liwork));
  const lapack_int info = LAPACKE_dsyevd_work(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'U', n,
                                              work.data(), n, w.data(), wk.data(), lwork,
                                              iwk.data(), liwork);
  if (info > 0)
    throw numeric_error("sym_eig: eigensolver failed to converge (index " + std::to_string(info) + ")");
  if (info < 0) throw argument_error("sym_eig: invalid argument " + std::to_string(-info));
  s.values.assign(w.data(), w.data() + n);
  detail::check_decomposition(A, s.values, want_vectors ? &work : nullptr, "sym_eig");
  if (want_vectors) s.vectors = std::move(work);
  return s;
}

/// Eigenpairs with ascending indices [lo, hi] (0-based, inclusive).
inline Spectrum sym_eig_range(const Mat &A, Index lo, Index hi, bool want_vectors = true) {
  if (A.rows() != A.cols()) throw argument_error("sym_eig_range: matrix is not square");
  const lapack_int n = static_cast<lapack_int>(A.rows());
  if (lo < 0 || hi < lo || hi >= n) throw argument_error("sym_eig_range: index range out of bounds");
  Mat work = 0.5 * (A + A.transpose());
  Vec w(n);
  const lapack_int count = static_cast<lapack_int>(hi - lo + 1);
  Mat Z(n, want_vectors ? count : 1);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(count));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'I', 'U', n, work.data(), n, 0.0, 0.0,
      static_cast<lapack_int>(lo + 1), static_cast<lapack_int>(hi + 1), 0.0, &found, w.data(),
      Z.data(), n, isuppz.data());
  if (info > 0)
    throw numeric_error("sym_eig_range: eigensolver failed to converge (index " + std::to_string(info) + ")");
  if (info < 0) throw argument_error("sym_eig_range: invalid argument " + std::to_string(-info));
  Spectrum s;
  s.values.assign(w.data(), w.data() + found);
  if (want_vectors) {
    s.vectors = Z.leftCols(found);
    const Mat Ah = 0.5 * (A + A.transpose());
    const double scale = std::max(Ah.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    for (Index k = 0; k < found; ++k)
      if ((Ah * s.vectors->col(k) - s.values[k] * s.vectors->col(k)).norm() > 1e-8 * n * scale)
        throw numeric_error("sym_eig_range: eigenpair residual too large (with OpenBLAS, try "
                            "OPENBLAS_CORETYPE=SkylakeX)");
  }
  return s;
}

/// Singular values in descending order, computed as the nonnegative half
/// of the spectrum of the Jordan-Wielandt embedding [[0, B], [B^T, 0]].
inline Spectrum singular_values(const Mat &B) {
  const Index m = B.rows(), n = B.cols();
  const Index k = std::min(m, n);
  Spectrum s;
  s.order = SpectrumOrder::descending;
  if (k == 0) return s;
  Mat J = Mat::Zero(m + n, m + n);
  J.topRightCorner(m, n) = B;
  J.bottomLeftCorner(n, m) = B.transpose();
  const Spectrum e = sym_eig(J, false);
  // eigenvalues are +-s_j plus |m - n| zeros; the top k are s_1 >= ... >= s_k
  for (Index j = 0; j < k; ++j) s.values.push_back(std::max(0.0, e.values[e.size() - 1 - j]));
  return s;
}

/// f(A) = V f(Lambda) V^T from a decomposition that kept its vectors.
inline Mat spectral_function(const Spectrum &s, const std::function<double(double)> &f) {
  if (!s.vectors) throw argument_error("spectral_function: eigenvectors required");
  const Mat &V = *s.vectors;
  Vec d(static_cast<Index>(s.size()));
  for (Index i = 0; i < d.size(); ++i) d(i) = f(s.values[i]);
  return V * d.asDiagonal() * V.transpose();
}

/// Extremal Ritz values after `steps` Lanczos iterations with full
/// reorthogonalization. Cheap bracket for the spectrum of a sparse matrix.
inline std::pair<double, double> lanczos_extremes(const SpMat &A, int steps = 30,
                                                  std::uint64_t seed = 11) {
  const Index n = A.rows();
  if (n == 0) return {0.0, 0.0};
  steps = static_cast<int>(std::min<Index>(steps, n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Mat Q(n, steps);
  Vec q(n);
  for (Index i = 0; i < n; ++i) q(i) = nd(rng);
  q.normalize();
  std::vector<double> alpha, beta;
  Vec prev = Vec::Zero(n);
  double b = 0.0;
  for (int k = 0; k < steps; ++k) {
    Q.col(k) = q;
    Vec w = A * q - b * prev;
    const double a = q.dot(w);
    w -= a * q;
    for (int j = 0; j <= k; ++j) w -= Q.col(j).dot(w) * Q.col(j);
    alpha.push_back(a);
    b = w.norm();
    if (b < 1e-14 || k + 1 == steps) break;
    beta.push_back(b);
    prev = q;
    q = w / b;
  }
  const Index m = static_cast<Index>(alpha.size());
  Mat T = Mat::Zero(m, m);
  for (Index i = 0; i < m; ++i) T(i, i) = alpha[i];
  for (Index i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = beta[i];
  const Spectrum s = sym_eig(T);
  return {s.values.front(), s.values.back()};
}

} // namespace fracspec
