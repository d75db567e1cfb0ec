#pragma once

// Run configuration: [section] key = value files, overridable key by key
// from the command line. Every value is validated before any computation.

#include "fracspec/weyl_quadrature.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

namespace fracspec {

struct RunConfig {
  // [operator]
  std::string op_kind = "laplacian"; ///< laplacian | frac-laplacian | coeffs
  std::string coeffs = "identity";   ///< identity | diag:a,b[,c] | matrix:r1;r2[;r3]
  double a = 0.5;
  double a0 = 0.0;
  std::optional<double> sigma;
  std::optional<double> shift; ///< positivity shift; unset means automatic

  // [domain]
  DomainSpec domain = DomainSpec::rectangle();
  std::string domain_name = "square";

  // [grid]
  std::string method = "fd"; ///< fd | gll | polar
  int nodes = 64;            ///< nodes per axis (fd), degree (gll), boundary nodes (polar)
  std::string fractional_path = "auto"; ///< auto | fft | dense

  // [task]
  std::optional<std::pair<Index, Index>> window;
  std::optional<double> fixed_exponent;
  std::vector<std::vector<double>> xi;
  std::vector<double> deltas{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::optional<std::pair<double, double>> band; ///< in units of h
  int eigenfunctions = 4;
  double strip_h = 1.0 / 128;

  // [output]
  std::string out_dir = "fracspec_out";
  std::vector<std::string> formats{"csv", "json", "gnuplot"};
  bool reproducible = true;
  std::uint64_t seed = 11;
  int jobs = 1;

  int dim() const { return domain.dim(); }
  bool wants(const std::string &fmt) const {
    return std::find(formats.begin(), formats.end(), fmt) != formats.end();
  }
};

/// Flat "section.key" -> value store in a fixed key order.
class ConfigMap {
public:
  static const std::vector<std::string> &known_keys() {
    static const std::vector<std::string> k{
        "operator.kind",      "operator.coeffs",      "operator.a",        "operator.a0",
        "operator.sigma",     "operator.shift",       "domain.kind",       "domain.dim",
        "domain.lengths",     "domain.radius",        "domain.plus_faces", "domain.plus_patch",
        "domain.plus_arc",    "domain.plus_cap",      "domain.padding",    "grid.method",
        "grid.nodes",         "grid.fractional_path", "task.window",       "task.fixed_exponent",
        "task.xi",            "task.deltas",          "task.band",         "task.eigenfunctions",
        "task.strip_h",       "output.dir",           "output.formats",    "output.reproducible",
        "output.seed",        "output.jobs"};
    return k;
  }

  void set(const std::string &key, const std::string &value) {
    const auto &k = known_keys();
    if (std::find(k.begin(), k.end(), key) == k.end()) throw config_error("unknown configuration key '" + key + "'");
    values_[key] = value;
  }

  bool has(const std::string &key) const { return values_.count(key) != 0; }
  const std::string &get(const std::string &key) const { return values_.at(key); }

  void load_file(const std::filesystem::path &p) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(p.string(), tree);
    } catch (const boost::property_tree::ini_parser_error &e) {
      throw config_error(std::string("config file: ") + e.what());
    }
    for (const auto &[section, body] : tree) {
      if (body.empty() && !body.data().empty())
        throw config_error("config file: key '" + section + "' outside a section");
      for (const auto &[key, leaf] : body) set(section + "." + key, leaf.data());
    }
  }

  /// Canonical text: explicitly set keys in fixed order. Hash input.
  std::string canonical() const {
    std::ostringstream s;
    for (const auto &k : known_keys())
      if (has(k)) s << k << " = " << get(k) << "\n";
    return s.str();
  }

private:
  std::map<std::string, std::string> values_;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string &key, const std::string &v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || trim(v.substr(used)) != "" || !std::isfinite(d))
    throw config_error(key + ": expected a number, got '" + v + "'");
  return d;
}

inline long long parse_int(const std::string &key, const std::string &v) {
  std::size_t used = 0;
  long long d = 0;
  try {
    d = std::stoll(v, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || trim(v.substr(used)) != "") throw config_error(key + ": expected an integer, got '" + v + "'");
  return d;
}

inline std::vector<double> parse_list(const std::string &key, const std::string &v) {
  std::vector<double> out;
  for (const auto &t : split(v, ',')) out.push_back(parse_double(key, t));
  return out;
}

inline bool parse_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw config_error(key + ": expected true or false, got '" + v + "'");
}

} // namespace detail

/// Coefficient matrix from "identity", "diag:1,4" or "matrix:2,1;1,2".
inline SecondOrderCoeffs parse_coefficients(const std::string &spec, int n, double a0 = 0.0,
                                            std::optional<double> sigma = std::nullopt) {
  if (spec == "identity") return SecondOrderCoeffs::identity(n, a0, sigma);
  Mat A;
  if (spec.rfind("diag:", 0) == 0) {
    const auto d = detail::parse_list("operator.coeffs", spec.substr(5));
    if (static_cast<int>(d.size()) != n) throw config_error("operator.coeffs: diag needs " + std::to_string(n) + " entries");
    A = Eigen::Map<const Vec>(d.data(), n).asDiagonal();
  } else if (spec.rfind("matrix:", 0) == 0) {
    const auto rows = detail::split(spec.substr(7), ';');
    if (static_cast<int>(rows.size()) != n) throw config_error("operator.coeffs: matrix needs " + std::to_string(n) + " rows");
    A.resize(n, n);
    for (int i = 0; i < n; ++i) {
      const auto r = detail::parse_list("operator.coeffs", rows[i]);
      if (static_cast<int>(r.size()) != n) throw config_error("operator.coeffs: row " + std::to_string(i + 1) + " has wrong length");
      for (int j = 0; j < n; ++j) A(i, j) = r[j];
    }
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * A.cwiseAbs().maxCoeff())
      throw config_error("operator.coeffs: matrix must be symmetric");
  } else {
    throw config_error("operator.coeffs: expected identity, diag:... or matrix:..., got '" + spec + "'");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw config_error("operator.coeffs: matrix is not positive definite");
  return SecondOrderCoeffs::constant_matrix(A, a0, sigma);
}

inline RunConfig build_config(const ConfigMap &m) {
  using namespace detail;
  RunConfig c;
  auto str = [&](const char *k, const std::string &dflt) { return m.has(k) ? m.get(k) : dflt; };

  c.op_kind = str("operator.kind", c.op_kind);
  if (c.op_kind != "laplacian" && c.op_kind != "frac-laplacian" && c.op_kind != "coeffs")
    throw config_error("operator.kind: expected laplacian, frac-laplacian or coeffs");
  c.coeffs = str("operator.coeffs", c.coeffs);
  if (m.has("operator.a")) c.a = parse_double("operator.a", m.get("operator.a"));
  if (!(c.a > 0.0 && c.a < 1.0) && !(c.a == 1.0)) throw config_error("operator.a: must lie in (0, 1]");
  if (m.has("operator.a0")) c.a0 = parse_double("operator.a0", m.get("operator.a0"));
  if (m.has("operator.sigma")) c.sigma = parse_double("operator.sigma", m.get("operator.sigma"));
  if (m.has("operator.shift")) {
    const auto v = m.get("operator.shift");
    if (v != "auto") c.shift = parse_double("operator.shift", v);
    if (c.shift && *c.shift < 0.0) throw config_error("operator.shift: must be nonnegative");
  }

  c.domain_name = str("domain.kind", c.domain_name);
  int n = 2;
  if (m.has("domain.dim")) {
    n = static_cast<int>(parse_int("domain.dim", m.get("domain.dim")));
    if (n < 1 || n > 3) throw config_error("domain.dim: must be 1, 2 or 3");
  }
  const auto &dn = c.domain_name;
  if (dn == "square" || dn == "cube") {
    if (dn == "cube" && !m.has("domain.dim")) n = 3;
    c.domain = n == 1 ? DomainSpec::interval() : n == 2 ? DomainSpec::rectangle() : DomainSpec::box();
  } else if (dn == "interval") {
    c.domain = DomainSpec::interval();
  } else if (dn == "rectangle") {
    c.domain = DomainSpec::rectangle();
  } else if (dn == "box") {
    c.domain = DomainSpec::box();
  } else if (dn == "disk") {
    c.domain = DomainSpec::disk(1.0, 0.0, pi);
  } else if (dn == "ball") {
    c.domain = DomainSpec::ball(1.0, 0.5 * pi);
  } else {
    throw config_error("domain.kind: expected interval, square, cube, rectangle, box, disk or ball");
  }
  if (m.has("domain.lengths")) {
    if (!c.domain.is_box_like()) throw config_error("domain.lengths: only for box-like domains");
    c.domain.lengths = parse_list("domain.lengths", m.get("domain.lengths"));
  }
  if (m.has("domain.radius")) {
    if (c.domain.is_box_like()) throw config_error("domain.radius: only for disks and balls");
    c.domain.radius = parse_double("domain.radius", m.get("domain.radius"));
  }
  if (m.has("domain.plus_faces")) {
    c.domain.plus_faces.clear();
    for (double f : parse_list("domain.plus_faces", m.get("domain.plus_faces"))) {
      if (f != std::floor(f)) throw config_error("domain.plus_faces: face ids are integers");
      c.domain.plus_faces.push_back(static_cast<int>(f));
    }
  } else if (c.domain.is_box_like() && !m.has("domain.plus_patch")) {
    c.domain.plus_faces = {2 * c.domain.dim() - 1};
  }
  if (m.has("domain.plus_patch")) {
    // face:lo,hi[;lo,hi]
    const auto v = m.get("domain.plus_patch");
    const auto colon = v.find(':');
    if (colon == std::string::npos) throw config_error("domain.plus_patch: expected face:lo,hi[;lo,hi]");
    FacePatch p;
    p.face = static_cast<int>(parse_int("domain.plus_patch", v.substr(0, colon)));
    for (const auto &r : split(v.substr(colon + 1), ';')) {
      const auto b = parse_list("domain.plus_patch", r);
      if (b.size() != 2) throw config_error("domain.plus_patch: each range is lo,hi");
      p.lo.push_back(b[0]);
      p.hi.push_back(b[1]);
    }
    c.domain.plus_patches.push_back(p);
  }
  if (m.has("domain.plus_arc")) {
    if (c.domain.kind != DomainKind::disk) throw config_error("domain.plus_arc: only for disks");
    const auto b = parse_list("domain.plus_arc", m.get("domain.plus_arc"));
    if (b.size() != 2) throw config_error("domain.plus_arc: expected lo,hi in radians");
    c.domain.plus_angle_lo = b[0];
    c.domain.plus_angle_hi = b[1];
  }
  if (m.has("domain.plus_cap")) {
    if (c.domain.kind != DomainKind::ball) throw config_error("domain.plus_cap: only for balls");
    c.domain.plus_angle_hi = parse_double("domain.plus_cap", m.get("domain.plus_cap"));
  }
  if (m.has("domain.padding")) c.domain.padding = parse_double("domain.padding", m.get("domain.padding"));
  c.domain.validate();

  c.method = str("grid.method", c.domain.kind == DomainKind::disk ? "polar" : c.method);
  if (c.method != "fd" && c.method != "gll" && c.method != "polar")
    throw config_error("grid.method: expected fd, gll or polar");
  if (c.method == "polar" && c.domain.kind != DomainKind::disk) throw config_error("grid.method: polar needs a disk");
  if (c.method == "gll" && c.domain.kind != DomainKind::box && c.domain.kind != DomainKind::rectangle)
    throw config_error("grid.method: gll needs a rectangle or box");
  if (c.method == "polar") c.nodes = 1024;
  if (c.method == "gll") c.nodes = 16;
  if (m.has("grid.nodes")) c.nodes = static_cast<int>(parse_int("grid.nodes", m.get("grid.nodes")));
  if (c.nodes < 4) throw config_error("grid.nodes: must be >= 4");
  c.fractional_path = str("grid.fractional_path", c.fractional_path);
  if (c.fractional_path != "auto" && c.fractional_path != "fft" && c.fractional_path != "dense")
    throw config_error("grid.fractional_path: expected auto, fft or dense");

  if (m.has("task.window")) {
    const auto w = parse_list("task.window", m.get("task.window"));
    if (w.size() != 2 || w[0] != std::floor(w[0]) || w[1] != std::floor(w[1]) || w[0] < 2 || w[1] < w[0])
      throw config_error("task.window: expected j_lo,j_hi with 2 <= j_lo <= j_hi");
    c.window = {static_cast<Index>(w[0]), static_cast<Index>(w[1])};
  }
  if (m.has("task.fixed_exponent")) c.fixed_exponent = parse_double("task.fixed_exponent", m.get("task.fixed_exponent"));
  if (m.has("task.xi"))
    for (const auto &t : split(m.get("task.xi"), ';')) c.xi.push_back(parse_list("task.xi", t));
  if (m.has("task.deltas")) c.deltas = parse_list("task.deltas", m.get("task.deltas"));
  if (m.has("task.band")) {
    const auto b = parse_list("task.band", m.get("task.band"));
    if (b.size() != 2 || !(b[0] > 0 && b[1] > b[0])) throw config_error("task.band: expected d_min,d_max in units of h");
    c.band = {b[0], b[1]};
  }
  if (m.has("task.eigenfunctions")) {
    c.eigenfunctions = static_cast<int>(parse_int("task.eigenfunctions", m.get("task.eigenfunctions")));
    if (c.eigenfunctions < 1) throw config_error("task.eigenfunctions: must be >= 1");
  }
  if (m.has("task.strip_h")) {
    c.strip_h = parse_double("task.strip_h", m.get("task.strip_h"));
    if (!(c.strip_h > 0 && c.strip_h < 1)) throw config_error("task.strip_h: must lie in (0, 1)");
  }

  c.out_dir = str("output.dir", c.out_dir);
  if (m.has("output.formats")) {
    c.formats = split(m.get("output.formats"), ',');
    for (const auto &f : c.formats)
      if (f != "csv" && f != "json" && f != "gnuplot" && f != "bin" && f != "txt")
        throw config_error("output.formats: unknown format '" + f + "'");
  }
  if (m.has("output.reproducible")) c.reproducible = parse_bool("output.reproducible", m.get("output.reproducible"));
  if (m.has("output.seed")) {
    const auto s = parse_int("output.seed", m.get("output.seed"));
    if (s < 0) throw config_error("output.seed: must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (m.has("output.jobs")) {
    c.jobs = static_cast<int>(parse_int("output.jobs", m.get("output.jobs")));
    if (c.jobs < 1) throw config_error("output.jobs: must be >= 1");
  }
  return c;
}

} // namespace fracspec
