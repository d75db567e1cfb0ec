// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Diagnostics go to the lines below each verdict.

#include "fracspec/asymptotics.hpp"
#include "fracspec/zaremba.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

using namespace fracspec;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream info;

  void require(bool ok, const std::string &what) {
    if (!ok) pass = false;
    info << "    " << (ok ? "ok   " : "MISS ") << what << "\n";
  }
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

bool within(double v, double target, double rel) { return std::abs(v - target) <= rel * std::abs(target); }

int failures = 0;

void run(int id, const std::string &title, const std::function<void(Verdict &)> &body) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception &e) {
    v.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!v.pass) ++failures;
  std::cout << (v.pass ? "PASS" : "FAIL") << " " << id << " " << title << " (" << num(secs) << " s)\n"
            << v.info.str() << std::flush;
}

SecondOrderCoeffs random_coeffs(int n, std::mt19937_64 &rng) {
  std::normal_distribution<double> nd;
  Mat G(n, n);
  for (Index i = 0; i < G.size(); ++i) G.data()[i] = nd(rng);
  return SecondOrderCoeffs::constant_matrix(G * G.transpose() + 0.1 * Mat::Identity(n, n));
}

Frame random_frame(int n, std::mt19937_64 &rng) {
  std::normal_distribution<double> nd;
  Vec nrm(n);
  for (int k = 0; k < n; ++k) nrm(k) = nd(rng);
  return Frame::from_normal(nrm);
}

std::vector<double> random_point(int n, std::mt19937_64 &rng) {
  std::normal_distribution<double> nd;
  std::vector<double> x(n);
  for (double &v : x) v = nd(rng);
  return x;
}

struct KreinFits {
  WeylFit m_free, m_fixed, m_mid, l_free, l_fixed, l_mid;
  std::pair<Index, Index> window;
  Index boundary_nodes = 0;
};

/// Weighted Krein and L spectra of a full form, fitted over the resolved window.
KreinFits krein_fits(const FormSystem &full, int n, double measure, double h, double theta) {
  std::vector<Index> keep = full.interior;
  keep.insert(keep.end(), full.sigma_plus.begin(), full.sigma_plus.end());
  std::sort(keep.begin(), keep.end());
  const auto k = krein_term(full, auto_positivity_shift(restrict_form(full, keep)));
  const auto mu = krein_spectrum(k, true);
  const auto ls = sym_eig(weighted_L(k).values);
  std::vector<double> linv;
  for (double v : ls.values) linv.push_back(1.0 / v);
  KreinFits f;
  f.boundary_nodes = k.boundary_size();
  f.window = resolved_window(static_cast<Index>(mu.size()), measure, n - 1, h, theta);
  f.m_free = weyl_fit(mu.values, f.window);
  f.m_fixed = weyl_fit(mu.values, f.window, -2.0 / (n - 1));
  f.m_mid = weyl_fit(mu.values);
  f.l_free = weyl_fit(linv, f.window);
  f.l_fixed = weyl_fit(linv, f.window, -1.0 / (n - 1));
  f.l_mid = weyl_fit(linv);
  return f;
}

// restricted (-Delta)^{1/2} on the unit square, N = 64, shared by two criteria
const OperatorMatrix &square_half_laplacian(Grid &g) {
  static Grid grid = build_grid(DomainSpec::rectangle(), 64);
  static const OperatorMatrix op =
      fractional_restricted(multiplier_exact(SecondOrderCoeffs::identity(2), grid), 0.5, grid);
  g = grid;
  return op;
}

} // namespace

int main(int, char **argv) {
  pin_blas_kernel(argv);
  std::cout.setf(std::ios::unitbuf);

  run(1, "symbol factorization over random coefficients", [](Verdict &v) {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
      const int n = 2 + s % 2;
      const auto c = random_coeffs(n, rng);
      const auto x = random_point(n, rng);
      const Frame fr = random_frame(n, rng);
      std::vector<double> xp(n - 1);
      for (double &t : xp) t = nd(rng);
      const double xn = 3.0 * nd(rng);
      const auto f = boundary_reduction(c, x, fr, xp);
      // direct evaluation of a at the covector xi' + xi_n N in global coordinates
      Vec loc(n);
      for (int k = 0; k < n - 1; ++k) loc(k) = xp[k];
      loc(n - 1) = xn;
      const Vec glob = fr.basis * loc;
      const double a = eval_principal(c, x, std::vector<double>(glob.data(), glob.data() + n));
      worst = std::max({worst, f.factorization_residual, std::abs(f.factored(xn) - a) / std::abs(a)});
    }
    v.require(worst <= 1e-12, "max residual " + num(worst) + " <= 1e-12 over 10^4 samples (n = 2, 3)");
  });

  run(2, "tangential factorization of kappa0^2", [](Verdict &v) {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
      const int n = 2 + s % 2;
      const auto c = random_coeffs(n, rng);
      const auto x = random_point(n, rng);
      const Frame fr = random_frame(n, rng);
      std::vector<double> xd(n - 2), xp(n - 1);
      for (double &t : xd) t = nd(rng);
      const double xt = 3.0 * nd(rng);
      for (int k = 0; k < n - 2; ++k) xp[k] = xd[k];
      xp[n - 2] = xt;
      const auto t = tangential_factorization(c, x, fr, xd);
      const double k0sq = boundary_reduction(c, x, fr, xp).a_prime;
      worst = std::max({worst, t.tangential_residual, std::abs(t.tangential_factored(xt) - k0sq) / k0sq});
    }
    v.require(worst <= 1e-12, "max relative reconstruction error " + num(worst) + " <= 1e-12");
  });

  run(3, "Weyl constant quadrature against closed form", [](Verdict &v) {
    double worst = 0.0;
    for (int n : {2, 3}) {
      const DomainSpec d = n == 2 ? DomainSpec::rectangle() : DomainSpec::box();
      const double exact = sphere_area(n) / (n * std::pow(2.0 * pi, n));
      for (double a : {0.25, 0.5, 0.75, 1.0}) {
        const auto r = weyl_constant_dirichlet(fractional_power_symbol(SecondOrderCoeffs::identity(n), a), d);
        worst = std::max(worst, std::abs(r.c_prime.value - exact) / exact);
      }
    }
    v.require(worst <= 1e-8, "max relative difference " + num(worst) + " <= 1e-8 (n = 2, 3; 4 powers)");
  });

  run(4, "Weyl law, restricted (-Delta)^{1/2} on the unit square", [](Verdict &v) {
    Grid g;
    const auto &op = square_half_laplacian(g);
    const auto s = sym_eig(op.values);
    const auto free = weyl_fit(s.values), fixed = weyl_fit(s.values, std::nullopt, 0.5);
    const double C = std::sqrt(4.0 * pi);
    v.info << "    torus " << g.dims[0] << "^2, " << op.size() << " interior nodes, window " << free.j_lo
           << ".." << free.j_hi << "\n";
    v.require(within(free.exponent, 0.5, 0.05), "free exponent " + num(free.exponent) + " within 5% of 0.5");
    v.require(within(fixed.constant, C, 0.15), "fixed constant " + num(fixed.constant) + " within 15% of " + num(C));
  });

  run(5, "Weyl law, (A)^{1/2} with A = diag(1,4)", [](Verdict &v) {
    Mat A = Mat::Zero(2, 2);
    A.diagonal() << 1, 4;
    const auto c = SecondOrderCoeffs::constant_matrix(A);
    const Grid g = build_grid(DomainSpec::rectangle(), 32);
    const auto op = fractional_restricted(to_operator(assemble_torus_form(c, g), "torus"), 0.5, g);
    const auto s = sym_eig(op.values);
    const auto fixed = weyl_fit(s.values, std::nullopt, 0.5), free = weyl_fit(s.values);
    const double C = weyl_constant_dirichlet(fractional_power_symbol(c, 0.5), DomainSpec::rectangle()).C;
    v.info << "    torus " << g.dims[0] << "^2 dense power, free exponent " << num(free.exponent) << "\n";
    v.require(within(fixed.constant, C, 0.2), "fixed constant " + num(fixed.constant) + " within 20% of " + num(C));
  });

  run(6, "first eigenfunction behaves like d^{1/2}", [](Verdict &v) {
    {
      const Grid g = build_grid(DomainSpec::interval(), 2048);
      const auto op = fractional_restricted(multiplier_exact(SecondOrderCoeffs::identity(1), g), 0.5, g);
      const auto s = sym_eig_range(op.values, 0, 0, true);
      const Vec u = s.vectors->col(0);
      const auto be = boundary_exponent(u, g, std::pair{2 * g.h, 20 * g.h}, 3);
      const auto rt = ratio_trace_check(u, g, 0.5);
      v.require(be.exponent >= 0.4 && be.exponent <= 0.6, "1D N = 2048 exponent " + num(be.exponent) + " in [0.4, 0.6]");
      v.require(rt.nonvanishing, "1D u/d^a near boundary " + num(rt.near_max) + " vs global " + num(rt.global_max));
    }
    Grid g;
    const auto &op = square_half_laplacian(g);
    const auto s = sym_eig_range(op.values, 0, 0, true);
    const Vec u = s.vectors->col(0);
    const auto be = boundary_exponent(u, g, std::pair{2 * g.h, 20 * g.h}, 3);
    const auto rt = ratio_trace_check(u, g, 0.5);
    v.require(be.exponent >= 0.4 && be.exponent <= 0.6, "2D N = 64 exponent " + num(be.exponent) + " in [0.4, 0.6]");
    v.require(rt.nonvanishing, "2D u/d^a near boundary " + num(rt.near_max) + " vs global " + num(rt.global_max));
  });

  run(7, "DtN principal symbol on a flat strip", [](Verdict &v) {
    Mat B(2, 2);
    B << 2, 1, 1, 2;
    const std::vector<std::pair<SecondOrderCoeffs, std::vector<double>>> cases{
        {SecondOrderCoeffs::identity(2), {1.0}},
        {SecondOrderCoeffs::identity(3), {1.0, 1.0}},
        {SecondOrderCoeffs::constant_matrix(B), {1.0}}};
    for (const auto &[c, xi] : cases) {
      const auto fine = dtn_symbol_probe(c, StripSpec{1.0 / 128}, {xi});
      const auto coarse = dtn_symbol_probe(c, StripSpec{1.0 / 64}, {xi});
      const double ratio = fine.max_relative_error / coarse.max_relative_error;
      const auto &e = fine.entries[0];
      v.require(fine.max_relative_error <= 0.1, "n = " + std::to_string(c.dim) + ": measured " + num(e.measured) +
                                                    " vs " + num(e.predicted) + ", error " +
                                                    num(fine.max_relative_error));
      v.require(ratio <= 0.7, "n = " + std::to_string(c.dim) + ": refinement error ratio " + num(ratio) + " <= 0.7");
    }
  });

  run(8, "discrete Krein identity", [](Verdict &v) {
    Mat K(2, 2);
    K << 2, -1, -1, 1.5;
    const auto toy = krein_identity_check(krein_term(form_from_matrix(K, {0}, {1})));
    v.require(toy.max_relative_mismatch <= 1e-10 && std::abs(toy.pencil_values[0] - 1.25) <= 1e-12,
              "2-node toy: eigenvalue " + num(toy.pencil_values[0]) + ", mismatch " + num(toy.max_relative_mismatch));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (Index n : {10, 50, 200, 500}) {
      Mat G(n, n);
      for (Index i = 0; i < G.size(); ++i) G.data()[i] = nd(rng);
      Mat S = G * G.transpose() + 0.5 * Mat::Identity(n, n);
      S = 0.5 * (S + S.transpose()).eval();
      std::vector<Index> perm(n);
      std::iota(perm.begin(), perm.end(), Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      const Index nb = n / 5;
      const auto rep = krein_identity_check(krein_term(form_from_matrix(
          S, std::vector<Index>(perm.begin() + nb, perm.end()), std::vector<Index>(perm.begin(), perm.begin() + nb))));
      worst = std::max(worst, rep.max_relative_mismatch);
    }
    v.require(worst <= 1e-10, "random assemblies up to 500 nodes: mismatch " + num(worst) + " <= 1e-10");
  });

  std::optional<KreinFits> cube;
  const auto cube_coeffs = SecondOrderCoeffs::identity(3);
  DomainSpec cube_dom = DomainSpec::box();
  cube_dom.plus_faces = {5};

  run(9, "Krein term asymptotics", [&](Verdict &v) {
    {
      const DomainSpec disk = DomainSpec::disk(1.0, 0.0, pi);
      const auto pg = build_polar_grid(disk, 1024);
      const double meas = domain_measure(disk, MeasurePart::sigma_plus).value;
      const auto f = krein_fits(assemble_disk_form(pg), 2, meas, disk.radius * pg.dtheta(), theta_max_second_order);
      const double target = std::pow(weyl_constant_M(SecondOrderCoeffs::identity(2), disk).value, 2.0);
      v.info << "    disk (n = 2, planar case): " << f.boundary_nodes << " Sigma_+ nodes, window " << f.window.first
             << ".." << f.window.second << ", fixed constant " << num(f.m_fixed.constant) << " vs c(M)^2 = "
             << num(target) << "; middle third " << f.m_mid.j_lo << ".." << f.m_mid.j_hi << " exponent "
             << num(f.m_mid.exponent) << "\n";
      v.require(within(f.m_free.exponent, -2.0, 0.1), "disk free exponent " + num(f.m_free.exponent) + " within 10% of -2");
      v.require(f.m_fixed.residual <= 0.05, "disk fixed-exponent log residual " + num(f.m_fixed.residual) + " <= 0.05");
    }
    const auto sg = build_spectral_grid(cube_dom, 16);
    cube = krein_fits(assemble_spectral_form(cube_coeffs, sg), 3, domain_measure(cube_dom, MeasurePart::sigma_plus).value,
                      1.0 / 16, theta_max_gll);
    const double target = weyl_constant_M(cube_coeffs, cube_dom).value;
    v.info << "    cube GLL degree 16: " << cube->boundary_nodes << " Sigma_+ nodes, window " << cube->window.first
           << ".." << cube->window.second << "; middle third " << cube->m_mid.j_lo << ".." << cube->m_mid.j_hi
           << " exponent " << num(cube->m_mid.exponent) << "\n";
    v.require(within(cube->m_free.exponent, -1.0, 0.15), "cube free exponent " + num(cube->m_free.exponent) + " within 15% of -1");
    v.require(within(cube->m_fixed.constant, target, 0.3),
              "cube fixed constant " + num(cube->m_fixed.constant) + " within 30% of c(M) = " + num(target));
  });

  run(10, "L spectrum asymptotics", [&](Verdict &v) {
    if (!cube) {
      const auto sg = build_spectral_grid(cube_dom, 16);
      cube = krein_fits(assemble_spectral_form(cube_coeffs, sg), 3,
                        domain_measure(cube_dom, MeasurePart::sigma_plus).value, 1.0 / 16, theta_max_gll);
    }
    const double target = std::sqrt(weyl_constant_L(cube_coeffs, cube_dom).value);
    v.info << "    1/lambda_j(L) over window " << cube->window.first << ".." << cube->window.second
           << "; middle third exponent " << num(cube->l_mid.exponent) << "\n";
    v.require(within(cube->l_free.exponent, -0.5, 0.15),
              "free exponent of 1/lambda_j " + num(cube->l_free.exponent) + " within 15% of -1/2");
    v.require(within(cube->l_fixed.constant, target, 0.3),
              "fixed constant " + num(cube->l_fixed.constant) + " within 30% of c(L)^{1/2} = " + num(target));
  });

  run(11, "L eigenfunctions vanish like d^{1/2} at the interface", [](Verdict &v) {
    DomainSpec d = DomainSpec::rectangle();
    d.plus_patches.push_back(FacePatch{3, {0.25}, {0.75}});
    const Grid g = build_grid(d, 256);
    const auto k = krein_term(assemble_full_form(SecondOrderCoeffs::identity(2), g));
    const auto L = weighted_L(k);
    const auto s = sym_eig_range(L.values, 0, 3, true);
    const auto lines = face_normal_lines(g, 3, L.nodes);
    for (Index j = 0; j < 4; ++j) {
      const auto r = boundary_exponent(Vec(s.vectors->col(j)), lines, {2 * g.h, 20 * g.h});
      v.require(r.exponent >= 0.35 && r.exponent <= 0.65,
                "eigenfunction " + std::to_string(j + 1) + ": exponent " + num(r.exponent) + " in [0.35, 0.65]");
    }
  });

  run(12, "log divergence of the singular element", [](Verdict &v) {
    const auto r = log_divergence_probe([](double x) { return std::exp(-x); }, {1e-2, 1e-3, 1e-4, 1e-5, 1e-6});
    for (std::size_t i = 0; i < r.slopes.size(); ++i) v.info << "    slope " << i + 1 << ": " << num(r.slopes[i]) << "\n";
    v.require(std::all_of(r.slopes.begin(), r.slopes.end(), [](double s) { return s > 0.0; }), "all slopes positive");
    v.require(within(r.slopes.back(), 1.0, 0.05), "last slope " + num(r.slopes.back()) + " within 5% of 1");
    v.require(within(r.fit_slope, 1.0, 0.05), "fitted slope " + num(r.fit_slope) + " within 5% of 1");
  });

  run(13, "invariants and properties", [](Verdict &v) {
    // the unit suites cover these in full; this is a condensed in-process pass
    const Grid g = build_grid(DomainSpec::rectangle(), 16);
    const auto op = fractional_restricted(multiplier_exact(SecondOrderCoeffs::identity(2), g), 0.5, g);
    const auto s = sym_eig(op.values);
    v.require(op.symmetry_defect() <= 1e-12, "restricted power symmetric (" + num(op.symmetry_defect()) + ")");
    v.require(s.values.front() > 0.0, "restricted power positive (lambda_1 = " + num(s.values.front()) + ")");

    std::vector<double> pw;
    for (int j = 1; j <= 90; ++j) pw.push_back(2.0 * std::sqrt(j));
    const auto f = weyl_fit(pw);
    for (auto &x : pw) x *= 7.0;
    const auto f7 = weyl_fit(pw);
    v.require(std::abs(f.exponent - 0.5) <= 1e-12 && std::abs(f.constant - 2.0) <= 1e-11, "exact power-law fit");
    v.require(std::abs(f7.exponent - f.exponent) <= 1e-12, "fit exponent invariant under scaling");

    const Mat D = to_operator(assemble_second_order(SecondOrderCoeffs::identity(2), g, BoundaryCondition::dirichlet_all),
                              "interior").values;
    const Mat R = spectral_function(sym_eig(D, true), [](double l) { return std::sqrt(l); });
    v.require((R * R - D).cwiseAbs().maxCoeff() <= 1e-10 * D.cwiseAbs().maxCoeff(), "square root squares back");

    DomainSpec one = DomainSpec::rectangle(), two = DomainSpec::rectangle();
    one.plus_faces = {3};
    two.plus_faces = {1, 3};
    const auto c = SecondOrderCoeffs::identity(2);
    const auto k1 = krein_term(assemble_full_form(c, build_grid(one, 16)), 1.0);
    const auto k2 = krein_term(assemble_full_form(c, build_grid(two, 16)), 1.0);
    const auto m1 = krein_spectrum(k1, true), m2 = krein_spectrum(k2, true);
    bool mono = true;
    for (std::size_t j = 0; j < m1.size(); ++j) mono = mono && m1.values[j] <= m2.values[j] * (1 + 1e-10);
    v.require(mono, "shrinking Sigma_+ lowers every mu_j(M)");
    const auto rep = krein_identity_check(k1);
    v.require(rep.rank_M <= k1.boundary_size() && m1.values.back() > 0.0, "M positive with rank <= |Sigma_+|");
  });

  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criteria failed\n" : "acceptance: all criteria passed\n");
  return failures ? 1 : 0;
}
