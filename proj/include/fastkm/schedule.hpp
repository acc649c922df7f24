#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace fastkm {

namespace detail {
inline std::string compact_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}
}  // namespace detail

/// Relaxation sequence k |-> s_k. Covers the constant and constant +/- 1/(k+2)
/// families plus the anchored 1 - 1/(k+2) schedule.
struct StepSchedule {
  enum class Kind { constant, constant_plus_inverse, constant_minus_inverse, halpern_lieder };

  Kind kind = Kind::constant;
  double c = 1.0;

  double operator()(std::size_t k) const {
    const double kk = static_cast<double>(k);
    switch (kind) {
      case Kind::constant: return c;
      case Kind::constant_plus_inverse: return c + 1.0 / (kk + 2.0);
      case Kind::constant_minus_inverse: return c - 1.0 / (kk + 2.0);
      case Kind::halpern_lieder: return 1.0 - 1.0 / (kk + 2.0);
    }
    throw std::logic_error("StepSchedule: unknown kind");
  }

  static StepSchedule constant(double c) { return {Kind::constant, c}; }
  static StepSchedule plus_inverse(double c) { return {Kind::constant_plus_inverse, c}; }
  static StepSchedule minus_inverse(double c) { return {Kind::constant_minus_inverse, c}; }
  static StepSchedule lieder() { return {Kind::halpern_lieder, 1.0}; }

  std::string describe() const {
    switch (kind) {
      case Kind::constant: return "s_k = " + detail::compact_number(c);
      case Kind::constant_plus_inverse: return "s_k = " + detail::compact_number(c) + " + 1/(k+2)";
      case Kind::constant_minus_inverse: return "s_k = " + detail::compact_number(c) + " - 1/(k+2)";
      case Kind::halpern_lieder: return "s_k = 1 - 1/(k+2)";
    }
    return "?";
  }
};

}  // namespace fastkm
