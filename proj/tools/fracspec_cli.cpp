// fracspec command-line front end. One pipeline per subcommand; artifacts
// go to output.dir (or $FRACSPEC_OUT) together with a manifest.

#include "fracspec/config.hpp"
#include "fracspec/io.hpp"
#include "fracspec/zaremba.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <random>

extern "C" void openblas_set_num_threads(int);

using namespace fracspec;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;
constexpr int exit_assert = 4;

/// One asserted quantity: passes when value lies in [lo, hi].
struct Check {
  std::string name;
  double value = 0.0;
  double lo = 0.0, hi = 0.0;
  bool ok() const { return value >= lo && value <= hi; }
};

struct Run {
  RunConfig cfg;
  ConfigMap map;
  std::filesystem::path out;
  Manifest manifest;
  std::vector<Check> checks;

  std::filesystem::path file(const std::string &name) {
    manifest.artifacts.push_back(name);
    return out / name;
  }

  void check(const std::string &name, double value, double lo, double hi) {
    checks.push_back({name, value, lo, hi});
    manifest.tolerances[name + ".lo"] = lo;
    manifest.tolerances[name + ".hi"] = hi;
  }

  void report(const std::string &kind, const std::string &formula, const json &body) {
    if (cfg.wants("json")) write_report(file(kind + ".json"), kind, formula, body);
  }

  void sequence(const std::string &stem, std::span<const double> v, const std::optional<WeylFit> &fit,
                const std::string &title) {
    if (cfg.wants("csv")) write_sequence_csv(file(stem + ".csv"), v);
    if (fit && cfg.wants("gnuplot") && cfg.wants("csv")) write_fit_plot(file(stem + ".gp"), stem + ".csv", *fit, title);
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

SecondOrderCoeffs coefficients(const RunConfig &c) {
  const std::string spec = c.op_kind == "coeffs" ? c.coeffs : "identity";
  if (c.op_kind != "coeffs" && c.coeffs != "identity")
    throw config_error("operator.coeffs needs operator.kind = coeffs");
  return parse_coefficients(spec, c.dim(), c.a0, c.sigma);
}

// ---------------------------------------------------------------------------

void cmd_symbol_check(Run &r) {
  const int n = std::max(2, r.cfg.dim());
  const auto c = parse_coefficients(r.cfg.coeffs, n, r.cfg.a0);
  std::mt19937_64 rng(r.cfg.seed);
  std::normal_distribution<double> nd;
  double fact = 0.0, tang = 0.0;
  std::vector<std::vector<double>> pts, normals;
  for (int s = 0; s < 200; ++s) {
    std::vector<double> x(n), xi(n - 1);
    for (double &v : x) v = nd(rng);
    for (double &v : xi) v = nd(rng);
    Vec nrm(n);
    for (int k = 0; k < n; ++k) nrm(k) = nd(rng);
    const Frame fr = Frame::from_normal(nrm);
    fact = std::max(fact, boundary_reduction(c, x, fr, xi).factorization_residual);
    std::vector<double> xdd(xi.begin(), xi.end() - 1);
    tang = std::max(tang, tangential_factorization(c, x, fr, xdd).tangential_residual);
    pts.push_back(x);
    const Vec unit = nrm.normalized();
    normals.emplace_back(unit.data(), unit.data() + n);
  }
  const double trans = mu_transmission_residual(fractional_power_symbol(c, r.cfg.a), r.cfg.a, pts, normals);
  std::cout << "factorization residual " << fmt(fact) << "\n"
            << "tangential residual " << fmt(tang) << "\n"
            << "transmission residual " << fmt(trans) << "\n";
  r.check("factorization_residual", fact, 0.0, 1e-12);
  r.check("tangential_residual", tang, 0.0, 1e-12);
  r.check("transmission_residual", trans, 0.0, 1e-12);
  r.report("symbol_check",
           "a_nn (kappa_+ + i xi_n)(kappa_- - i xi_n) = a(x', xi', xi_n), kappa0^2 refactorized in "
           "xi_{n-1}, p(x,-N) = exp(i pi (2a - 2 mu)) p(x,N) with mu = a",
           json{{"coeffs", r.cfg.coeffs}, {"samples", pts.size()}, {"factorization_residual", fact},
                {"tangential_residual", tang}, {"transmission_residual", trans}});
}

void cmd_weyl_const(Run &r) {
  const auto &c = r.cfg;
  const auto coeffs = coefficients(c);
  const double order = c.op_kind == "frac-laplacian" ? c.a : 1.0;
  const auto d = weyl_constant_dirichlet(fractional_power_symbol(coeffs, order), c.domain);
  std::cout << "C' = " << fmt(d.c_prime.value) << "\n"
            << "C = " << fmt(d.C) << "\n";
  json body{{"operator", c.op_kind}, {"a", order}, {"domain", c.domain_name}, {"n", c.dim()},
            {"C_prime", to_json(d.c_prime)}, {"C", d.C}};
  if (c.domain.is_box_like() && c.op_kind != "coeffs") {
    double vol = 1.0;
    for (double L : c.domain.lengths) vol *= L;
    const double exact = vol * sphere_area(c.dim()) /
                         (c.dim() * std::pow(2.0 * pi, c.dim()));
    const double rel = std::abs(d.c_prime.value - exact) / exact;
    body["C_prime_closed_form"] = exact;
    body["relative_difference"] = rel;
    r.check("C_prime_relative_difference", rel, 0.0, 1e-8);
  }
  if (c.dim() >= 2 && (!c.domain.plus_faces.empty() || !c.domain.plus_patches.empty() ||
                       c.domain.plus_angle_hi > c.domain.plus_angle_lo)) {
    const auto cl = weyl_constant_L(coeffs, c.domain), cm = weyl_constant_M(coeffs, c.domain);
    std::cout << "c(L) = " << fmt(cl.value) << "\n"
              << "c(M) = " << fmt(cm.value) << "\n";
    body["c_L"] = to_json(cl);
    body["c_M"] = to_json(cm);
  }
  r.report("weyl_constant",
           "C' = (n (2pi)^n)^{-1} int_Omega int_{|xi|=1} p^{-n/2a}; c(L) = ((n-1)(2pi)^{n-1})^{-1} "
           "int_{Sigma_+} int kappa0^{-(n-1)}; c(M) = same prefactor int int (a_nn / 2 kappa0^2)^{(n-1)/2}",
           body);
}

/// Eigenvalues (ascending) of the configured operator, plus interior eigenvectors if asked.
struct SpectrumRun {
  Spectrum s;
  Grid g;
  OperatorMatrix op;
  double expected_exponent = 0.0;
  std::string formula;
};

SpectrumRun compute_spectrum(const RunConfig &c, bool vectors, Index count = -1) {
  if (c.method != "fd") throw config_error("spectrum: only grid.method = fd");
  SpectrumRun out;
  const auto coeffs = coefficients(c);
  out.g = build_grid(c.domain, c.nodes);
  OperatorMatrix &op = out.op;
  if (c.op_kind == "frac-laplacian" || (c.op_kind == "coeffs" && c.a < 1.0)) {
    const bool fft = c.fractional_path == "fft" || (c.fractional_path == "auto" && coeffs.constant);
    if (fft) {
      op = fractional_restricted(multiplier_exact(coeffs, out.g), c.a, out.g);
    } else {
      op = fractional_restricted(to_operator(assemble_torus_form(coeffs, out.g), "torus"), c.a, out.g);
    }
    out.expected_exponent = 2.0 * c.a / c.dim();
    out.formula = "restricted power r+ (A)^a e+ on the torus embedding; lambda_j ~ C j^{2a/n}";
  } else {
    op = to_operator(assemble_second_order(coeffs, out.g, BoundaryCondition::dirichlet_all), "interior");
    out.expected_exponent = 2.0 / c.dim();
    out.formula = "Dirichlet realization W^{-1/2} K W^{-1/2}; lambda_j ~ C j^{2/n}";
  }
  if (vectors && count > 0)
    out.s = sym_eig_range(op.values, 0, std::min<Index>(count, op.size()) - 1, true);
  else
    out.s = sym_eig(op.values, vectors);
  return out;
}

void cmd_spectrum(Run &r) {
  const auto sp = compute_spectrum(r.cfg, false);
  std::cout << "eigenvalues " << sp.s.size() << "\n";
  for (std::size_t j = 0; j < std::min<std::size_t>(5, sp.s.size()); ++j)
    std::cout << "lambda_" << j + 1 << " = " << fmt(sp.s.values[j]) << "\n";
  r.sequence("spectrum", sp.s.values, std::nullopt, "");
  const MatrixHeader head{sp.op.descriptor, sp.op.label, sp.g.h, sp.g.dim, sp.op.nodes};
  if (r.cfg.wants("bin")) write_matrix_binary(r.file("operator.fspm"), sp.op.values, head);
  if (r.cfg.wants("txt")) write_matrix_text(r.file("operator.txt"), sp.op.values, head);
  r.check("lambda_1_positive", sp.s.values.empty() ? -1.0 : sp.s.values.front(), 0.0,
          std::numeric_limits<double>::max());
  r.report("spectrum", sp.formula,
           json{{"count", sp.s.size()}, {"lambda_1", sp.s.values.empty() ? 0.0 : sp.s.values.front()},
                {"values_hash_fnv1a", fnv1a(std::span<const double>(sp.s.values))}});
}

void cmd_weyl_fit(Run &r, const std::string &input, std::optional<double> expect_exponent,
                  std::optional<double> expect_constant, double rel_tol) {
  std::vector<double> values;
  std::string formula;
  if (!input.empty()) {
    values = read_sequence_csv(input);
    formula = "least squares log value_j = log c + e log j over the window";
  } else {
    const auto sp = compute_spectrum(r.cfg, false);
    values = sp.s.values;
    formula = sp.formula;
    if (!expect_exponent) expect_exponent = sp.expected_exponent;
    if (!expect_constant && r.cfg.op_kind != "coeffs") {
      const double order = r.cfg.op_kind == "frac-laplacian" ? r.cfg.a : 1.0;
      expect_constant =
          weyl_constant_dirichlet(fractional_power_symbol(coefficients(r.cfg), order), r.cfg.domain).C;
    }
  }
  const auto free = weyl_fit(values, r.cfg.window);
  const double e = r.cfg.fixed_exponent.value_or(expect_exponent.value_or(free.exponent));
  const auto fixed = weyl_fit(values, r.cfg.window, e);
  std::cout << "window " << free.j_lo << ".." << free.j_hi << "\n"
            << "free exponent " << fmt(free.exponent) << "\n"
            << "fixed-exponent constant " << fmt(fixed.constant) << " (exponent " << fmt(e) << ")\n";
  json body{{"free", to_json(free)}, {"fixed", to_json(fixed)}};
  if (expect_exponent) {
    body["expected_exponent"] = *expect_exponent;
    r.check("free_exponent", free.exponent, *expect_exponent * (1 - rel_tol), *expect_exponent * (1 + rel_tol));
  }
  if (expect_constant) {
    std::cout << "expected constant " << fmt(*expect_constant) << "\n";
    body["expected_constant"] = *expect_constant;
    r.check("fixed_constant", fixed.constant, *expect_constant * (1 - rel_tol), *expect_constant * (1 + rel_tol));
  }
  r.sequence("fit_values", values, free, "power-law fit");
  r.report("weyl_fit", formula, body);
}

void cmd_boundary_exp(Run &r) {
  auto cfg = r.cfg;
  if (cfg.op_kind == "laplacian") cfg.op_kind = "frac-laplacian";
  const auto sp = compute_spectrum(cfg, true, cfg.eigenfunctions);
  const double a = cfg.op_kind == "frac-laplacian" || cfg.a < 1.0 ? cfg.a : 1.0;
  const auto band = cfg.band.value_or(std::pair{2.0, 20.0});
  json rows = json::array();
  for (Index k = 0; k < static_cast<Index>(sp.s.size()); ++k) {
    const Vec u = sp.s.vectors->col(k);
    const auto be = boundary_exponent(u, sp.g, std::pair{band.first * sp.g.h, band.second * sp.g.h}, 3);
    const auto rt = ratio_trace_check(u, sp.g, a);
    std::cout << "eigenfunction " << k + 1 << ": exponent " << fmt(be.exponent) << ", u/d^a "
              << (rt.nonvanishing ? "nonvanishing" : "vanishing") << "\n";
    rows.push_back(json{{"index", k + 1}, {"exponent", be.exponent}, {"samples", be.samples},
                        {"ratio_near_max", rt.near_max}, {"ratio_global_max", rt.global_max},
                        {"nonvanishing", rt.nonvanishing}});
    if (k == 0) {
      r.check("first_exponent", be.exponent, a - 0.1, a + 0.1);
      r.check("first_ratio_nonvanishing", rt.nonvanishing ? 1.0 : 0.0, 1.0, 1.0);
    }
  }
  r.report("boundary_exponent", "slope of log|u| against log d near the boundary; u ~ d^a, u/d^a nonvanishing",
           json{{"a", a}, {"band_in_h", {band.first, band.second}}, {"eigenfunctions", rows}});
}

/// Full form for the configured Zaremba problem.
FormSystem zaremba_form(const RunConfig &c, double &h_boundary, double &sigma_measure) {
  const auto coeffs = coefficients(c);
  sigma_measure = domain_measure(c.domain, MeasurePart::sigma_plus).value;
  if (c.method == "polar") {
    if (c.op_kind == "coeffs") throw config_error("grid.method = polar supports the Laplacian only");
    const auto pg = build_polar_grid(c.domain, c.nodes);
    h_boundary = c.domain.radius * pg.dtheta();
    return assemble_disk_form(pg, c.a0);
  }
  if (c.method == "gll") {
    const auto g = build_spectral_grid(c.domain, c.nodes);
    h_boundary = c.domain.lengths[0] / c.nodes;
    return assemble_spectral_form(coeffs, g);
  }
  const auto g = build_grid(c.domain, c.nodes);
  h_boundary = g.h;
  return assemble_full_form(coeffs, g);
}

void cmd_zaremba(Run &r, bool toy) {
  if (toy) {
    Mat K(2, 2);
    K << 2, -1, -1, 1.5;
    const auto k = krein_term(form_from_matrix(K, {0}, {1}));
    const Mat M = krein_matrix(k);
    const auto mu = krein_spectrum(k, false);
    const auto rep = krein_identity_check(k);
    std::cout << "M = [[" << fmt(M(0, 0)) << ", " << fmt(M(0, 1)) << "], [" << fmt(M(1, 0)) << ", "
              << fmt(M(1, 1)) << "]]\n"
              << "M eigenvalue " << fmt(mu.values.at(0)) << "\n"
              << "identity mismatch " << fmt(rep.max_relative_mismatch) << "\n";
    r.check("toy_eigenvalue", mu.values.at(0), 1.25 - 1e-12, 1.25 + 1e-12);
    r.check("identity_mismatch", rep.max_relative_mismatch, 0.0, 1e-10);
    r.report("zaremba_toy", "M = [X; I] S^{-1} [X; I]^T with X = -K_II^{-1} K_IB, S = K_BB + K_BI X",
             json{{"M", {{M(0, 0), M(0, 1)}, {M(1, 0), M(1, 1)}}}, {"eigenvalue", mu.values.at(0)},
                  {"identity_mismatch", rep.max_relative_mismatch}});
    return;
  }
  const auto &c = r.cfg;
  if (c.dim() < 2) throw config_error("zaremba: needs n >= 2");
  double h = 0.0, meas = 0.0;
  const FormSystem full = zaremba_form(c, h, meas);
  double shift = 0.0;
  if (c.shift) {
    shift = *c.shift;
  } else {
    std::vector<Index> keep = full.interior;
    keep.insert(keep.end(), full.sigma_plus.begin(), full.sigma_plus.end());
    std::sort(keep.begin(), keep.end());
    shift = auto_positivity_shift(restrict_form(full, keep));
  }
  const auto k = krein_term(full, shift);
  const auto mu = krein_spectrum(k, true);
  const auto Lop = weighted_L(k);
  const auto ls = sym_eig(Lop.values);
  std::vector<double> linv;
  for (double v : ls.values) linv.push_back(1.0 / v);
  const int n = c.dim();
  const double theta = c.method == "gll" ? theta_max_gll : theta_max_second_order;
  const auto window = c.window.value_or(resolved_window(static_cast<Index>(mu.size()), meas, n - 1, h, theta));
  const auto coeffs = coefficients(c);
  const double cM = weyl_constant_M(coeffs, c.domain).value, cL = weyl_constant_L(coeffs, c.domain).value;
  json body{{"sigma_plus_nodes", k.boundary_size()}, {"shift", shift}, {"planar", k.planar_flag},
            {"window", {window.first, window.second}}, {"c_M", cM}, {"c_L", cL}};
  std::cout << "Sigma_+ nodes " << k.boundary_size() << ", shift " << fmt(shift) << "\n";
  if (k.planar_flag) std::cout << "note: n = 2, outside the n >= 3 asymptotic theorem (Laplacian case only)\n";
  if (window.second - window.first + 1 < 10) {
    std::cout << "resolved window " << window.first << ".." << window.second
              << " holds fewer than 10 eigenvalues; refine the grid\n";
    throw numeric_error("zaremba: discretization resolves too few boundary modes for a fit");
  }
  const auto fm = weyl_fit(mu.values, window), fmf = weyl_fit(mu.values, window, -2.0 / (n - 1));
  const auto fl = weyl_fit(linv, window), flf = weyl_fit(linv, window, -1.0 / (n - 1));
  const double targetM = std::pow(cM, 2.0 / (n - 1)), targetL = std::pow(cL, 1.0 / (n - 1));
  std::cout << "window " << window.first << ".." << window.second << "\n"
            << "mu_j(M): free exponent " << fmt(fm.exponent) << " (law " << fmt(-2.0 / (n - 1))
            << "), constant " << fmt(fmf.constant) << " vs c(M)^{2/(n-1)} = " << fmt(targetM) << "\n"
            << "1/lambda_j(L): free exponent " << fmt(fl.exponent) << " (law " << fmt(-1.0 / (n - 1))
            << "), constant " << fmt(flf.constant) << " vs c(L)^{1/(n-1)} = " << fmt(targetL) << "\n";
  body["M_free"] = to_json(fm);
  body["M_fixed"] = to_json(fmf);
  body["M_target_constant"] = targetM;
  body["Linv_free"] = to_json(fl);
  body["Linv_fixed"] = to_json(flf);
  body["Linv_target_constant"] = targetL;
  if (k.mixed.size() <= 3000) {
    const auto rep = krein_identity_check(k);
    std::cout << "identity mismatch " << fmt(rep.max_relative_mismatch) << "\n";
    body["identity_mismatch"] = rep.max_relative_mismatch;
    r.check("identity_mismatch", rep.max_relative_mismatch, 0.0, 1e-10);
  }
  const double eM = -2.0 / (n - 1), eL = -1.0 / (n - 1);
  r.check("M_free_exponent", fm.exponent, eM * 1.15, eM * 0.85);
  r.check("M_fixed_constant", fmf.constant, targetM * 0.7, targetM * 1.3);
  r.check("Linv_free_exponent", fl.exponent, eL * 1.15, eL * 0.85);
  r.check("Linv_fixed_constant", flf.constant, targetL * 0.7, targetL * 1.3);
  r.sequence("mu_M", mu.values, fm, "mu_j(M)");
  r.sequence("L_inverse", linv, fl, "1/lambda_j(L)");
  r.report("zaremba",
           "M = A_mixed^{-1} - A_gamma^{-1} = K_0 L^{-1} K_0^*; mu_j(M) j^{2/(n-1)} -> c(M)^{2/(n-1)}, "
           "mu_j(L^{-1}) j^{1/(n-1)} -> c(L)^{1/(n-1)}",
           body);
}

void cmd_dtn_probe(Run &r) {
  const int n = std::max(2, r.cfg.dim());
  const auto c = parse_coefficients(r.cfg.coeffs, n, r.cfg.a0);
  std::vector<std::vector<double>> xi = r.cfg.xi;
  if (xi.empty()) xi.push_back(std::vector<double>(n - 1, 1.0));
  StripSpec strip;
  strip.h = r.cfg.strip_h;
  const auto rep = dtn_symbol_probe(c, strip, xi);
  strip.h *= 0.5;
  const auto fine = dtn_symbol_probe(c, strip, xi);
  json rows = json::array();
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    const auto &e = rep.entries[i];
    std::cout << "xi' = " << format_point(e.xi_prime) << ": measured " << fmt(e.measured) << ", -kappa0 "
              << fmt(e.predicted) << ", relative error " << fmt(e.relative_error) << " (h/2: "
              << fmt(fine.entries[i].relative_error) << ")\n";
    rows.push_back(json{{"xi_prime", e.xi_prime}, {"measured", e.measured}, {"predicted", e.predicted},
                        {"relative_error", e.relative_error},
                        {"relative_error_half_step", fine.entries[i].relative_error}});
  }
  const double ratio = rep.max_relative_error > 0 ? fine.max_relative_error / rep.max_relative_error : 0.0;
  r.check("max_relative_error", rep.max_relative_error, 0.0, 0.1);
  r.check("refinement_ratio", ratio, 0.0, 0.7);
  r.report("dtn_probe", "discrete Dirichlet-to-Neumann symbol of a flat strip against -kappa0(xi')",
           json{{"h", rep.h}, {"entries", rows}, {"refinement_ratio", ratio}});
}

void cmd_singular_probe(Run &r, const std::vector<double> &psi, double period) {
  LogProbeReport rep;
  std::string formula;
  if (psi.empty()) {
    rep = log_divergence_probe([](double x) { return std::exp(-x); }, r.cfg.deltas);
    formula = "I(delta) = int_delta^1 x^{-1} |zeta(x)|^2 dx with zeta = e^{-x}; I ~ |log delta|";
    r.check("surrogate_slope", rep.fit_slope, 0.95, 1.05);
  } else {
    rep = log_divergence_probe(psi, period, r.cfg.deltas);
    formula = "I(delta) = sum_k |c_k|^2 (E1(2 <xi_k> delta) - E1(2 <xi_k>)) / ||psi||^2 for zeta = K_0 psi";
    if (!rep.degenerate) r.check("slope", rep.fit_slope, 1e-12, std::numeric_limits<double>::max());
  }
  for (std::size_t i = 0; i < rep.deltas.size(); ++i)
    std::cout << "delta " << fmt(rep.deltas[i]) << ": I = " << fmt(rep.I[i]) << "\n";
  std::cout << "slope " << fmt(rep.fit_slope) << (rep.degenerate ? " (psi = 0)" : "") << "\n";
  r.report("singular_probe", formula,
           json{{"deltas", rep.deltas}, {"I", rep.I}, {"slopes", rep.slopes}, {"fit_slope", rep.fit_slope},
                {"degenerate", rep.degenerate}});
}

} // namespace

int main(int argc, char **argv) {
  pin_blas_kernel(argv);
  CLI::App app{"Spectral asymptotics of fractional and mixed boundary problems"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> sets;
  bool assert_mode = false;
  int jobs = 0;
  std::map<std::string, std::string> flag_values;
  app.add_option("--config", config_file, "configuration file ([section] key = value)")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "override a configuration key: section.key=value");
  app.add_flag("--assert", assert_mode, "exit 4 if a checked quantity is out of tolerance");
  app.add_option("--jobs", jobs, "worker cap for the dense kernels")->check(CLI::PositiveNumber);
  const std::vector<std::pair<std::string, std::string>> shortcuts{
      {"--op", "operator.kind"},       {"--coeffs", "operator.coeffs"},  {"--a", "operator.a"},
      {"--shift", "operator.shift"},   {"--domain", "domain.kind"},      {"--n", "domain.dim"},
      {"--plus-faces", "domain.plus_faces"}, {"--nodes", "grid.nodes"}, {"--method", "grid.method"},
      {"--window", "task.window"},     {"--fixed-exponent", "task.fixed_exponent"},
      {"--xi", "task.xi"},             {"--deltas", "task.deltas"},      {"--out", "output.dir"},
      {"--seed", "output.seed"}};
  for (const auto &[flag, key] : shortcuts) app.add_option(flag, flag_values[key], "sets " + key);

  auto *symbol = app.add_subcommand("symbol-check", "boundary factorization and transmission residuals");
  auto *weyl = app.add_subcommand("weyl-const", "Weyl constants by quadrature");
  auto *spectrum = app.add_subcommand("spectrum", "assemble, eigensolve and export");
  auto *fit = app.add_subcommand("weyl-fit", "power-law fit of an ordered spectrum");
  std::string fit_input;
  std::optional<double> expect_exponent, expect_constant;
  double rel_tol = 0.1;
  fit->add_option("--input", fit_input, "j,value file to fit instead of computing a spectrum");
  fit->add_option("--expect-exponent", expect_exponent);
  fit->add_option("--expect-constant", expect_constant);
  fit->add_option("--rel-tol", rel_tol, "relative tolerance for --assert")->check(CLI::PositiveNumber);
  auto *bexp = app.add_subcommand("boundary-exp", "boundary exponent of leading eigenfunctions");
  auto *zar = app.add_subcommand("zaremba", "Krein term of the mixed problem");
  bool toy = false;
  zar->add_flag("--toy", toy, "two-node worked example");
  auto *dtn = app.add_subcommand("dtn-probe", "flat-strip probe of the Dirichlet-to-Neumann symbol");
  auto *sing = app.add_subcommand("singular-probe", "log divergence of the singular boundary element");
  std::vector<double> psi;
  double period = 2 * pi;
  sing->add_option("--psi", psi, "interface samples (omit for the e^{-x} surrogate)")->delimiter(',');
  sing->add_option("--period", period);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  Run r;
  try {
    if (!config_file.empty()) r.map.load_file(config_file);
    for (const auto &s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw config_error("--set expects section.key=value");
      r.map.set(detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
    }
    for (const auto &[key, v] : flag_values)
      if (!v.empty()) r.map.set(key, v);
    if (jobs > 0) r.map.set("output.jobs", std::to_string(jobs));
    r.cfg = build_config(r.map);
    if (const char *env = std::getenv("FRACSPEC_OUT"); env && *env) r.cfg.out_dir = env;
    r.out = r.cfg.out_dir;
    openblas_set_num_threads(r.cfg.reproducible ? 1 : r.cfg.jobs);
    Eigen::setNbThreads(r.cfg.jobs);

    const std::string name = app.get_subcommands().front()->get_name();
    r.manifest.command = name;
    r.manifest.config_hash = fnv1a(name + "\n" + r.map.canonical());
    r.manifest.extra = json{{"reproducible", r.cfg.reproducible}, {"seed", r.cfg.seed}, {"jobs", r.cfg.jobs}};

    if (*symbol) cmd_symbol_check(r);
    else if (*weyl) cmd_weyl_const(r);
    else if (*spectrum) cmd_spectrum(r);
    else if (*fit) cmd_weyl_fit(r, fit_input, expect_exponent, expect_constant, rel_tol);
    else if (*bexp) cmd_boundary_exp(r);
    else if (*zar) cmd_zaremba(r, toy);
    else if (*dtn) cmd_dtn_probe(r);
    else if (*sing) cmd_singular_probe(r, psi, period);

    bool ok = true;
    for (const auto &c : r.checks) {
      if (assert_mode) std::cout << (c.ok() ? "PASS " : "FAIL ") << c.name << " = " << fmt(c.value) << "\n";
      ok = ok && c.ok();
    }
    r.manifest.extra["checks_passed"] = ok;
    r.manifest.write(r.out / "manifest.json");
    if (assert_mode && !ok) return exit_assert;
    return 0;
  } catch (const config_error &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return exit_config;
  } catch (const argument_error &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return exit_config;
  } catch (const error &e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return exit_numeric;
  } catch (const std::exception &e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return exit_numeric;
  }
}
