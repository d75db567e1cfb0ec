#pragma once

// Matrix and spectrum export, JSON report records, plot scripts and the run
// manifest. Reports carry no timestamps so reruns are byte-identical.

#include "fracspec/asymptotics.hpp"

#include <json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace fracspec {

using json = nlohmann::ordered_json;

/// Metadata written ahead of an exported matrix.
struct MatrixHeader {
  std::string descriptor;
  std::string label;
  double h = 0.0;
  int dim = 0;
  std::vector<Index> nodes;

  json to_json() const {
    return json{{"descriptor", descriptor}, {"label", label}, {"h", h}, {"dim", dim}, {"nodes", nodes}};
  }
  static MatrixHeader from_json(const json &j) {
    MatrixHeader m;
    m.descriptor = j.value("descriptor", "");
    m.label = j.value("label", "");
    m.h = j.value("h", 0.0);
    m.dim = j.value("dim", 0);
    m.nodes = j.value("nodes", std::vector<Index>{});
    return m;
  }
};

namespace detail {

inline constexpr char matrix_magic[4] = {'F', 'S', 'P', 'M'};
inline constexpr std::uint32_t matrix_version = 1;

inline std::ofstream open_out(const std::filesystem::path &p, std::ios::openmode mode = std::ios::out) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, mode | std::ios::trunc);
  if (!f) throw config_error("cannot open " + p.string() + " for writing");
  return f;
}

/// Shortest decimal that round-trips.
inline std::string exact(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

} // namespace detail

/// Binary layout: "FSPM", u32 version, u64 header length, JSON header,
/// i64 rows, i64 cols, column-major doubles (host byte order).
inline void write_matrix_binary(const std::filesystem::path &p, const Mat &A, const MatrixHeader &h) {
  auto f = detail::open_out(p, std::ios::binary);
  const std::string head = h.to_json().dump();
  const std::uint64_t len = head.size();
  const std::int64_t rows = A.rows(), cols = A.cols();
  f.write(detail::matrix_magic, 4);
  f.write(reinterpret_cast<const char *>(&detail::matrix_version), sizeof detail::matrix_version);
  f.write(reinterpret_cast<const char *>(&len), sizeof len);
  f.write(head.data(), static_cast<std::streamsize>(len));
  f.write(reinterpret_cast<const char *>(&rows), sizeof rows);
  f.write(reinterpret_cast<const char *>(&cols), sizeof cols);
  f.write(reinterpret_cast<const char *>(A.data()), static_cast<std::streamsize>(sizeof(double) * A.size()));
  if (!f) throw numeric_error("write_matrix_binary: write failed for " + p.string());
}

inline std::pair<Mat, MatrixHeader> read_matrix_binary(const std::filesystem::path &p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw config_error("cannot open " + p.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char *>(&version), sizeof version);
  if (!f || std::memcmp(magic, detail::matrix_magic, 4) != 0 || version != detail::matrix_version)
    throw config_error(p.string() + " is not a matrix file of this version");
  f.read(reinterpret_cast<char *>(&len), sizeof len);
  std::string head(len, '\0');
  f.read(head.data(), static_cast<std::streamsize>(len));
  std::int64_t rows = 0, cols = 0;
  f.read(reinterpret_cast<char *>(&rows), sizeof rows);
  f.read(reinterpret_cast<char *>(&cols), sizeof cols);
  if (!f || rows < 0 || cols < 0) throw config_error(p.string() + ": truncated header");
  Mat A(rows, cols);
  f.read(reinterpret_cast<char *>(A.data()), static_cast<std::streamsize>(sizeof(double) * A.size()));
  if (!f) throw config_error(p.string() + ": truncated data");
  return {std::move(A), MatrixHeader::from_json(json::parse(head))};
}

/// Text layout: "# key: value" header lines, then one row per line.
inline void write_matrix_text(const std::filesystem::path &p, const Mat &A, const MatrixHeader &h) {
  auto f = detail::open_out(p);
  f << "# format: fracspec matrix text 1\n";
  f << "# header: " << h.to_json().dump() << "\n";
  f << "# rows: " << A.rows() << "\n# cols: " << A.cols() << "\n";
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) f << (j ? " " : "") << detail::exact(A(i, j));
    f << "\n";
  }
}

inline std::pair<Mat, MatrixHeader> read_matrix_text(const std::filesystem::path &p) {
  std::ifstream f(p);
  if (!f) throw config_error("cannot open " + p.string());
  std::map<std::string, std::string> meta;
  std::string line;
  std::vector<double> data;
  while (std::getline(f, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto colon = line.find(": ");
      if (colon != std::string::npos) meta[line.substr(2, colon - 2)] = line.substr(colon + 2);
      continue;
    }
    std::istringstream s(line);
    double v;
    while (s >> v) data.push_back(v);
  }
  if (!meta.count("rows") || !meta.count("cols")) throw config_error(p.string() + ": missing size header");
  const Index rows = std::stoll(meta["rows"]), cols = std::stoll(meta["cols"]);
  if (static_cast<Index>(data.size()) != rows * cols) throw config_error(p.string() + ": entry count mismatch");
  Mat A(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) A(i, j) = data[i * cols + j];
  MatrixHeader h = meta.count("header") ? MatrixHeader::from_json(json::parse(meta["header"])) : MatrixHeader{};
  return {std::move(A), std::move(h)};
}

/// Delimited sequence with header `j,value`, j 1-based.
inline void write_sequence_csv(const std::filesystem::path &p, std::span<const double> values) {
  auto f = detail::open_out(p);
  f << "j,value\n";
  for (std::size_t j = 0; j < values.size(); ++j) f << (j + 1) << "," << detail::exact(values[j]) << "\n";
}

inline std::vector<double> read_sequence_csv(const std::filesystem::path &p) {
  std::ifstream f(p);
  if (!f) throw config_error("cannot open " + p.string());
  std::string line;
  if (!std::getline(f, line) || line != "j,value") throw config_error(p.string() + ": expected header j,value");
  std::vector<double> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw config_error(p.string() + ": malformed line '" + line + "'");
    if (std::stoll(line.substr(0, comma)) != static_cast<long long>(out.size() + 1))
      throw config_error(p.string() + ": indices must run 1, 2, ...");
    out.push_back(std::stod(line.substr(comma + 1)));
  }
  return out;
}

inline json to_json(const WeylFit &f) {
  return json{{"exponent", f.exponent}, {"constant", f.constant}, {"window", {f.j_lo, f.j_hi}},
              {"log_residual", f.residual}, {"fixed_exponent", f.fixed_exponent}};
}

inline json to_json(const QuadratureResult &q) {
  return json{{"value", q.value}, {"error", q.error}, {"nodes", q.nodes_per_axis}, {"notes", q.notes}};
}

/// JSON record: `formula` states what is computed in closed form.
inline void write_report(const std::filesystem::path &p, const std::string &kind, const std::string &formula,
                         const json &body) {
  json r;
  r["report"] = kind;
  r["formula"] = formula;
  r["result"] = body;
  auto f = detail::open_out(p);
  f << r.dump(2) << "\n";
}

/// gnuplot script plotting `csv` on log-log axes with the fitted power law.
inline void write_fit_plot(const std::filesystem::path &script, const std::string &csv, const WeylFit &fit,
                           const std::string &title) {
  auto f = detail::open_out(script);
  f << "set datafile separator ','\n"
    << "set logscale xy\nset key top left\n"
    << "set title '" << title << "'\n"
    << "set xlabel 'j'\nset ylabel 'value'\n"
    << "c = " << detail::exact(fit.constant) << "\ne = " << detail::exact(fit.exponent) << "\n"
    << "set arrow from " << fit.j_lo << ", graph 0 to " << fit.j_lo << ", graph 1 nohead dt 2\n"
    << "set arrow from " << fit.j_hi << ", graph 0 to " << fit.j_hi << ", graph 1 nohead dt 2\n"
    << "plot '" << csv << "' using 1:2 skip 1 with points pt 7 ps 0.4 title 'values', \\\n"
    << "     c * x**e with lines lw 2 title sprintf('%.4g j^{%.4g}', c, e)\n";
}

/// Run manifest: configuration hash, versions and every tolerance used.
struct Manifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::map<std::string, double> tolerances;
  std::vector<std::string> artifacts;
  json extra = json::object();

  json to_json() const {
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << config_hash;
    json j;
    j["command"] = command;
    j["config_hash_fnv1a"] = hash.str();
    j["version"] = FRACSPEC_VERSION;
    j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    j["tolerances"] = tolerances;
    j["artifacts"] = artifacts;
    if (!extra.empty()) j["extra"] = extra;
    return j;
  }

  void write(const std::filesystem::path &p) const {
    auto f = detail::open_out(p);
    f << to_json().dump(2) << "\n";
  }
};

} // namespace fracspec
