#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastkm {

/// Dense real coordinate vector. Dimension is its size; all entries are
/// expected to be finite whenever a vector enters an operator or a scheme.
using Vector = std::vector<double>;

inline void require_same_dim(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

inline bool is_finite(const Vector& x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline void require_finite(const Vector& x, const char* what) {
  if (!is_finite(x)) {
    throw std::domain_error(std::string(what) + ": non-finite coordinate");
  }
}

inline double dot(const Vector& a, const Vector& b) {
  require_same_dim(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_sq(const Vector& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline double norm(const Vector& x) { return std::sqrt(norm_sq(x)); }

inline double dist(const Vector& a, const Vector& b) {
  require_same_dim(a, b, "dist");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline Vector sub(const Vector& a, const Vector& b) {
  require_same_dim(a, b, "sub");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Vector add(const Vector& a, const Vector& b) {
  require_same_dim(a, b, "add");
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Vector scaled(double c, const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
  return out;
}

}  // namespace fastkm
