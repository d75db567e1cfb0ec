#pragma once

// Power-law fits of ordered spectra, boundary exponents of grid functions
// and the log-divergence probe of the singular boundary element.

#include "fracspec/discretize.hpp"

#include <cmath>
#include <optional>

namespace fracspec {

/// value_j ~ constant * j^exponent over the 1-based window [j_lo, j_hi].
struct WeylFit {
  double exponent = 0.0;
  double constant = 0.0;
  Index j_lo = 0, j_hi = 0;
  double residual = 0.0; ///< RMS in log-log coordinates
  bool fixed_exponent = false;
};

/// Middle third of a sequence of length n (1-based, inclusive).
inline std::pair<Index, Index> middle_third(Index n) {
  return {std::max<Index>(2, n / 3 + 1), std::max<Index>(2, (2 * n) / 3)};
}

/// Largest index resolved by a discretization of boundary step h: the Weyl
/// count of boundary frequencies |xi'| <= theta_max / h on a piece of measure
/// `measure` in dimension d = n - 1. theta_max is the largest phase per step at
/// which the discrete symbol tracks the continuum one.
inline Index resolved_count(double measure, int d, double h, double theta_max) {
  if (d < 1 || !(h > 0.0) || !(theta_max > 0.0) || !(measure > 0.0))
    throw argument_error("resolved_count: need d >= 1 and positive h, theta_max, measure");
  const double r = theta_max / h;
  const double ball = std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
  return static_cast<Index>(std::floor(measure * ball * std::pow(r, d) / std::pow(2.0 * pi, d)));
}

/// Fit window [j_lo, min(resolved, available)]; empty (j_hi < j_lo) if the
/// discretization resolves too few modes.
inline std::pair<Index, Index> resolved_window(Index available, double measure, int d, double h,
                                               double theta_max, Index j_lo = 10) {
  return {j_lo, std::min(available, resolved_count(measure, d, h, theta_max))};
}

/// Phase-per-step limits: second-order differences track the symbol to about
/// one percent up to 0.3; GLL elements resolve up to pi points per wavelength.
inline constexpr double theta_max_second_order = 0.3;
inline constexpr double theta_max_gll = 2.0;

/// Least-squares line through (log j, log value_j). With a fixed exponent only
/// the constant is fitted, as the geometric mean of value_j j^{-e}.
inline WeylFit weyl_fit(std::span<const double> values,
                        std::optional<std::pair<Index, Index>> window = std::nullopt,
                        std::optional<double> fixed_exponent = std::nullopt) {
  const Index n = static_cast<Index>(values.size());
  const auto [lo, hi] = window ? *window : middle_third(n);
  if (lo < 2 || hi > n || hi < lo) throw argument_error("weyl_fit: window must satisfy 2 <= j_lo <= j_hi <= length");
  if (hi - lo + 1 < 10) throw argument_error("weyl_fit: need at least 10 values in the window");
  std::vector<double> x, y;
  for (Index j = lo; j <= hi; ++j) {
    const double v = values[j - 1];
    if (!(v > 0.0)) throw numeric_error("weyl_fit: nonpositive value at j = " + std::to_string(j));
    x.push_back(std::log(static_cast<double>(j)));
    y.push_back(std::log(v));
  }
  const double m = static_cast<double>(x.size());
  WeylFit f;
  f.j_lo = lo;
  f.j_hi = hi;
  double intercept = 0.0;
  if (fixed_exponent) {
    f.fixed_exponent = true;
    f.exponent = *fixed_exponent;
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = y[i] - f.exponent * x[i];
    intercept = pairwise_sum(r) / m;
  } else {
    const double mx = pairwise_sum(x) / m, my = pairwise_sum(y) / m;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
    }
    f.exponent = sxy / sxx;
    intercept = my - f.exponent * mx;
  }
  f.constant = std::exp(intercept);
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - intercept - f.exponent * x[i];
    ss += e * e;
  }
  f.residual = std::sqrt(ss / m);
  return f;
}

inline WeylFit weyl_fit(const Spectrum &s, std::optional<std::pair<Index, Index>> window = std::nullopt,
                        std::optional<double> fixed_exponent = std::nullopt) {
  return weyl_fit(std::span<const double>(s.values), window, fixed_exponent);
}

// ---------------------------------------------------------------------------
// Boundary exponents

struct BoundaryExponentReport {
  double exponent = 0.0;
  Index samples = 0;
  Index lines_used = 0;
};

/// Common slope of log|u| against log d over all lines, with a separate
/// intercept per line. `lines` index into u.
inline BoundaryExponentReport boundary_exponent(const Vec &u, const std::vector<NormalLine> &lines,
                                                std::pair<double, double> band) {
  if (!(band.first > 0.0) || !(band.second > band.first))
    throw argument_error("boundary_exponent: band must satisfy 0 < d_min < d_max");
  const double umax = u.cwiseAbs().maxCoeff();
  if (!(umax > 0.0)) throw numeric_error("boundary_exponent: grid function vanishes identically");
  const double dead = 1e-13 * umax;
  BoundaryExponentReport r;
  double sxy = 0.0, sxx = 0.0;
  for (const auto &l : lines) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < l.nodes.size(); ++i) {
      const double d = l.dist[i];
      if (d < band.first * (1 - 1e-12) || d > band.second * (1 + 1e-12)) continue;
      const double v = std::abs(u(l.nodes[i]));
      if (v <= dead) continue;
      x.push_back(std::log(d));
      y.push_back(std::log(v));
    }
    if (x.size() < 2) continue;
    const double m = static_cast<double>(x.size());
    const double mx = pairwise_sum(x) / m, my = pairwise_sum(y) / m;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
    }
    r.samples += static_cast<Index>(x.size());
    ++r.lines_used;
  }
  if (r.samples < 20 || !(sxx > 0.0))
    throw numeric_error("boundary_exponent: only " + std::to_string(r.samples) +
                        " usable nodes in band (need 20)");
  r.exponent = sxy / sxx;
  return r;
}

/// Grid-function form: u holds values on grid.interior (in that order);
/// sampled along `per_face` inward normal lines per face. Default band (2h, 20h).
inline BoundaryExponentReport boundary_exponent(const Vec &u, const Grid &g,
                                                std::optional<std::pair<double, double>> band = std::nullopt,
                                                int per_face = 1) {
  if (u.size() != static_cast<Index>(g.interior.size()))
    throw argument_error("boundary_exponent: u must be sampled on the interior nodes");
  const auto lines = relabel_lines(normal_lines(g, per_face), g.interior);
  return boundary_exponent(u, lines, band.value_or(std::pair{2.0 * g.h, 20.0 * g.h}));
}

struct RatioTraceReport {
  double near_max = 0.0;   ///< max over patches of the patch sup of |u| / d^a
  double global_max = 0.0; ///< sup of |u| / d^a over all interior nodes
  std::vector<double> patch_sup;
  bool nonvanishing = false;
  double band = 0.0;
  double threshold = 0.1;
};

/// |u| / d^a on the band d <= band_cells * h, grouped by the nearest boundary
/// face (one patch per face on boxes, one per quadrant on disks and balls).
inline RatioTraceReport ratio_trace_check(const Vec &u, const Grid &g, double a, double band_cells = 4.0,
                                          double threshold = 0.1) {
  if (u.size() != static_cast<Index>(g.interior.size()))
    throw argument_error("ratio_trace_check: u must be sampled on the interior nodes");
  if (!(a > 0.0)) throw argument_error("ratio_trace_check: exponent must be positive");
  RatioTraceReport r;
  r.band = band_cells * g.h;
  r.threshold = threshold;
  const int patches = g.domain.is_box_like() ? 2 * g.dim : (1 << g.dim);
  r.patch_sup.assign(patches, 0.0);
  Index in_band = 0;
  for (std::size_t i = 0; i < g.interior.size(); ++i) {
    const Index id = g.interior[i];
    const double d = g.dist[id];
    const double ratio = std::abs(u(static_cast<Index>(i))) / std::pow(d, a);
    r.global_max = std::max(r.global_max, ratio);
    if (d > r.band) continue;
    ++in_band;
    const auto x = g.coords(id);
    int patch = 0;
    if (g.domain.is_box_like()) {
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < g.dim; ++k) {
        if (x[k] < best) best = x[k], patch = 2 * k;
        if (g.domain.lengths[k] - x[k] < best) best = g.domain.lengths[k] - x[k], patch = 2 * k + 1;
      }
    } else {
      for (int k = 0; k < g.dim; ++k)
        if (x[k] >= 0) patch |= 1 << k;
    }
    r.patch_sup[patch] = std::max(r.patch_sup[patch], ratio);
  }
  if (in_band == 0) throw numeric_error("ratio_trace_check: no interior nodes in the boundary band");
  r.near_max = *std::max_element(r.patch_sup.begin(), r.patch_sup.end());
  r.nonvanishing = r.near_max > threshold * r.global_max;
  return r;
}

// ---------------------------------------------------------------------------
// Log-divergence probe

struct LogProbeReport {
  std::vector<double> deltas;
  std::vector<double> I;      ///< I(delta), normalized by ||psi||^2
  std::vector<double> slopes; ///< successive slopes dI / d|log delta|
  double fit_slope = 0.0;     ///< least-squares slope over all deltas
  bool degenerate = false;    ///< psi = 0
};

namespace detail {

/// E1(x) = -Ei(-x).
inline double expint_e1(double x) { return -std::expint(-x); }

inline void check_deltas(const std::vector<double> &deltas) {
  if (deltas.size() < 2) throw argument_error("log_divergence_probe: need at least two deltas");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0 && deltas[i] < 1.0))
      throw argument_error("log_divergence_probe: deltas must lie in (0, 1)");
    if (i && !(deltas[i] < deltas[i - 1]))
      throw argument_error("log_divergence_probe: deltas must be decreasing");
  }
}

inline void finish_slopes(LogProbeReport &r) {
  std::vector<double> x;
  for (double d : r.deltas) x.push_back(-std::log(d));
  for (std::size_t i = 1; i < x.size(); ++i) r.slopes.push_back((r.I[i] - r.I[i - 1]) / (x[i] - x[i - 1]));
  const double m = static_cast<double>(x.size());
  const double mx = pairwise_sum(x) / m, my = pairwise_sum(r.I) / m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (r.I[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  r.fit_slope = sxy / sxx;
}

} // namespace detail

/// 1D surrogate: I(delta) = int_delta^1 x^{-1} |zeta(x)|^2 dx, by Gauss-Legendre
/// in log x on unit-length panels.
inline LogProbeReport log_divergence_probe(const std::function<double(double)> &zeta,
                                           const std::vector<double> &deltas) {
  detail::check_deltas(deltas);
  LogProbeReport r;
  r.deltas = deltas;
  auto [t, w] = gauss_legendre(20);
  auto integral = [&](double delta) {
    const double T = -std::log(delta);
    const int panels = std::max(1, static_cast<int>(std::ceil(T)));
    std::vector<double> terms;
    for (int p = 0; p < panels; ++p) {
      const double a = -T + p * T / panels, b = a + T / panels;
      for (Index i = 0; i < t.size(); ++i) {
        const double s = 0.5 * (b - a) * (t(i) + 1.0) + a;
        const double z = zeta(std::exp(s));
        terms.push_back(0.5 * (b - a) * w(i) * z * z);
      }
    }
    return pairwise_sum(terms);
  };
  for (double d : deltas) r.I.push_back(integral(d));
  r.degenerate = std::all_of(r.I.begin(), r.I.end(), [](double v) { return v == 0.0; });
  if (r.degenerate) {
    r.slopes.assign(deltas.size() - 1, 0.0);
    return r;
  }
  detail::finish_slopes(r);
  return r;
}

/// Interface data psi (n >= 3: samples on a period of length `period` along
/// the (n-2)-dimensional interface, taken one-dimensional here; n = 2: a
/// single value). zeta = K_0 psi has Fourier modes c_k e^{-<xi_k> x}, so
/// I(delta) = period * sum |c_k|^2 (E1(2 <xi_k> delta) - E1(2 <xi_k>)),
/// normalized by ||psi||^2.
inline LogProbeReport log_divergence_probe(const std::vector<double> &psi, double period,
                                           const std::vector<double> &deltas) {
  detail::check_deltas(deltas);
  if (psi.empty()) throw argument_error("log_divergence_probe: psi is empty");
  LogProbeReport r;
  r.deltas = deltas;
  std::vector<double> weight, bracket;
  if (psi.size() == 1) {
    weight.push_back(psi[0] * psi[0]);
    bracket.push_back(1.0);
  } else {
    if (!(period > 0.0)) throw argument_error("log_divergence_probe: period must be positive");
    const Index m = static_cast<Index>(psi.size());
    std::vector<cplx> c(psi.begin(), psi.end());
    Eigen::FFT<double> fft;
    std::vector<cplx> out;
    fft.fwd(out, c);
    for (Index k = 0; k < m; ++k) {
      const Index kk = k > m / 2 ? k - m : k;
      const double xi = 2.0 * pi * static_cast<double>(kk) / period;
      const cplx ck = out[k] / static_cast<double>(m);
      weight.push_back(period * std::norm(ck));
      bracket.push_back(std::sqrt(1.0 + xi * xi));
    }
  }
  const double norm2 = pairwise_sum(weight);
  if (!(norm2 > 0.0)) {
    r.degenerate = true;
    r.I.assign(deltas.size(), 0.0);
    r.slopes.assign(deltas.size() - 1, 0.0);
    return r;
  }
  for (double d : deltas) {
    std::vector<double> terms;
    for (std::size_t k = 0; k < weight.size(); ++k) {
      if (weight[k] == 0.0) continue;
      terms.push_back(weight[k] * (detail::expint_e1(2.0 * bracket[k] * d) - detail::expint_e1(2.0 * bracket[k])));
    }
    r.I.push_back(pairwise_sum(terms) / norm2);
  }
  detail::finish_slopes(r);
  return r;
}

} // namespace fracspec
