#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef FRACSPEC_VERSION
#define FRACSPEC_VERSION "0.3.0"
#endif

namespace fracspec {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using cplx = std::complex<double>;
using Index = std::ptrdiff_t;

/// Points and covectors are passed as plain coordinate spans.
using Point = std::span<const double>;

inline constexpr double pi = 3.14159265358979323846;

// Error hierarchy. The CLI maps these onto exit codes.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class argument_error : public error {
public:
  using error::error;
};

class config_error : public error {
public:
  using error::error;
};

class numeric_error : public error {
public:
  using error::error;
};

/// Raised when a quadratic form that must be positive is not.
class ellipticity_error : public numeric_error {
public:
  using numeric_error::numeric_error;
};

class degenerate_symbol_error : public numeric_error {
public:
  using numeric_error::numeric_error;
};

inline std::vector<double> to_vector(Point p) { return {p.begin(), p.end()}; }

inline std::string format_point(Point p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(p[i]);
  }
  return s + ")";
}

/// Pairwise summation; result does not depend on thread count.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// FNV-1a, used for stable config/input hashes in reports.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(std::span<const double> v) {
  return fnv1a(std::string_view(reinterpret_cast<const char *>(v.data()),
                                v.size() * sizeof(double)));
}

} // namespace fracspec
