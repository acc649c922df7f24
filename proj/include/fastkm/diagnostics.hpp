#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fastkm/trace.hpp"
#include "fastkm/vec.hpp"

namespace fastkm {

/// Parameters of the discrete energy function E_{lambda,k} attached to a
/// fixed point x_star. Requires alpha > 2 and 0 <= lambda <= alpha - 1;
/// nonnegativity of the energy additionally needs lambda <= 3 alpha/4 - 1/2.
struct EnergySpec {
  Vector x_star;
  double lambda = 0.0;
  double alpha = 3.0;
  double s = 1.0;
};

struct OmegaConstants {
  double w1 = 0.0;
  double w2 = 0.0;
  double w3 = 0.0;
  double w4 = 0.0;
};

namespace detail {
inline void require_energy_params(double alpha, double lambda, const char* what) {
  if (!(alpha > 2.0)) throw std::invalid_argument(std::string(what) + ": requires alpha > 2");
  if (!(lambda >= 0.0 && lambda <= alpha - 1.0)) {
    throw std::invalid_argument(std::string(what) + ": requires 0 <= lambda <= alpha - 1");
  }
}
}  // namespace detail

/// w1 = 4(lambda+1-alpha)
/// w2 = (4(alpha-1)(lambda+1-alpha) + alpha(2-alpha)) / (alpha-1)
/// w3 = (2 alpha (alpha-1)(lambda+1-alpha) + alpha - 2(alpha-1)^2
///       + 2(2-alpha)(alpha-1)) / (alpha-1)
/// w4 = (2-alpha)(3 alpha-2) / (2(alpha-1))
/// w1, w2, w4 are nonpositive throughout the admissible lambda range.
inline OmegaConstants omega_constants(double alpha, double lambda) {
  detail::require_energy_params(alpha, lambda, "omega_constants");
  const double xi = lambda + 1.0 - alpha;
  OmegaConstants w;
  w.w1 = 4.0 * xi;
  w.w2 = (4.0 * (alpha - 1.0) * xi + alpha * (2.0 - alpha)) / (alpha - 1.0);
  w.w3 = (2.0 * alpha * (alpha - 1.0) * xi + alpha - 2.0 * (alpha - 1.0) * (alpha - 1.0) +
          2.0 * (2.0 - alpha) * (alpha - 1.0)) /
         (alpha - 1.0);
  w.w4 = (2.0 - alpha) * (3.0 * alpha - 2.0) / (2.0 * (alpha - 1.0));
  return w;
}

/// Discrete energy at index k >= 1. res_km1 = (Id - T)(x_{k-1}) is supplied
/// by the caller; diagnostics never evaluate the operator themselves.
inline double energy(const EnergySpec& spec, std::size_t k, const Vector& x_k,
                     const Vector& x_km1, const Vector& res_km1) {
  detail::require_energy_params(spec.alpha, spec.lambda, "energy");
  if (k < 1) throw std::invalid_argument("energy: requires k >= 1");
  require_same_dim(x_k, spec.x_star, "energy");
  require_same_dim(x_k, x_km1, "energy");
  require_same_dim(x_k, res_km1, "energy");
  const double a = spec.alpha;
  const double lam = spec.lambda;
  const double sk = spec.s * static_cast<double>(k);
  const double kk = static_cast<double>(k);
  const double c1 = (3.0 * a - 2.0) / (2.0 * (a - 1.0));
  double lead = 0.0, dsq = 0.0, cross = 0.0, rsq = 0.0;
  for (std::size_t i = 0; i < x_k.size(); ++i) {
    const double d = x_k[i] - spec.x_star[i];
    const double v = 2.0 * lam * d + 2.0 * kk * (x_k[i] - x_km1[i]) + c1 * sk * res_km1[i];
    lead += v * v;
    dsq += d * d;
    cross += d * res_km1[i];
    rsq += res_km1[i] * res_km1[i];
  }
  return 0.5 * lead + 2.0 * lam * (a - 1.0 - lam) * dsq +
         (a - 2.0) / (a - 1.0) * lam * sk * cross +
         (a - 2.0) * (3.0 * a - 2.0) / (8.0 * (a - 1.0) * (a - 1.0)) * sk * sk * rsq;
}

/// Energy at index k of a trace that retained its vectors.
inline double energy_at(const Trace& tr, const EnergySpec& spec, std::size_t k) {
  if (!tr.has_vectors()) throw std::invalid_argument("energy_at: trace has no stored vectors");
  if (k < 1 || k >= tr.rows()) throw std::out_of_range("energy_at: k out of range");
  return energy(spec, k, tr.iterates[k], tr.iterates[k - 1], tr.residual_vectors[k - 1]);
}

struct LambdaWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// The open interval of lambda values for which the truncation argument
/// applies:
///   lo = alpha^2/(8(alpha-1)) + (alpha-1)/2
///        - (alpha-2) sqrt((alpha-2)(5 alpha-2)) / (8(alpha-1))
///   hi = min{ 3 alpha/4 - 1/2, same expression with + }.
/// Satisfies 0 < lo < hi < alpha - 1 for every alpha > 2.
inline LambdaWindow lambda_window(double alpha) {
  if (!(alpha > 2.0)) throw std::invalid_argument("lambda_window: requires alpha > 2");
  const double base = alpha * alpha / (8.0 * (alpha - 1.0)) + (alpha - 1.0) / 2.0;
  const double spread =
      (alpha - 2.0) * std::sqrt((alpha - 2.0) * (5.0 * alpha - 2.0)) / (8.0 * (alpha - 1.0));
  LambdaWindow w;
  w.lo = base - spread;
  w.hi = std::min(0.75 * alpha - 0.5, base + spread);
  return w;
}

/// Smallest integer k >= 1 from which the sign certificate
///   Delta_k / s^2 = (w2 k + w3)^2 - (2(5 alpha-2)/(3 alpha-2)) w1 w4 k^2
/// is nonpositive. Computed from the larger real root of the quadratic;
/// independent of s. Requires lambda strictly inside lambda_window(alpha),
/// which makes the leading coefficient negative.
inline std::size_t threshold_index(double alpha, double lambda) {
  const LambdaWindow window = lambda_window(alpha);
  if (!(lambda > window.lo && lambda < window.hi)) {
    throw std::domain_error("threshold_index: lambda = " + std::to_string(lambda) +
                            " is outside the open window (" + std::to_string(window.lo) + ", " +
                            std::to_string(window.hi) + "); no finite threshold is guaranteed");
  }
  const OmegaConstants w = omega_constants(alpha, lambda);
  const double c = 2.0 * (5.0 * alpha - 2.0) / (3.0 * alpha - 2.0);
  const double lead = w.w2 * w.w2 - c * w.w1 * w.w4;
  if (!(lead < 0.0)) {
    // possible only by rounding when lambda sits at the very edge
    throw std::domain_error(
        "threshold_index: leading coefficient is not negative at lambda = " +
        std::to_string(lambda));
  }
  const double b = 2.0 * w.w2 * w.w3;
  const double c0 = w.w3 * w.w3;
  const double disc = b * b - 4.0 * lead * c0;
  if (disc <= 0.0) return 1;  // Delta_k < 0 for every k
  const double r1 = (-b + std::sqrt(disc)) / (2.0 * lead);
  const double r2 = (-b - std::sqrt(disc)) / (2.0 * lead);
  const double rmax = std::max(r1, r2);
  if (rmax < 1.0) return 1;
  return static_cast<std::size_t>(std::ceil(rmax));
}

/// The truncated quadratic form
///   R_k = p w1 k ||dx||^2 + s (w2 k + w3) <dx, res_k> + p w4 s^2 k ||res_k||^2,
/// with p = sqrt((5 alpha-2)/(2(3 alpha-2))). Nonpositive for k >=
/// threshold_index(alpha, lambda) along any admissible trajectory.
inline double evaluate_rk(double alpha, double lambda, double s, std::size_t k, const Vector& dx,
                          const Vector& res_k) {
  require_same_dim(dx, res_k, "evaluate_rk");
  const OmegaConstants w = omega_constants(alpha, lambda);
  const double p = std::sqrt((5.0 * alpha - 2.0) / (2.0 * (3.0 * alpha - 2.0)));
  const double kk = static_cast<double>(k);
  return p * w.w1 * kk * norm_sq(dx) + s * (w.w2 * kk + w.w3) * dot(dx, res_k) +
         p * w.w4 * s * s * kk * norm_sq(res_k);
}

/// Cumulative partial sums of the four summable series along a trace:
///   s1[j]: sum_{k=1..j+1} k ||x_{k+1} - x_k||^2
///   s2[j]: sum_{k=1..j+1} k ||res_k||^2
///   s3[j]: sum_{k=1..j+1} k^2 ||res_k - res_{k-1}||^2
///   s4[j]: sum_{k=1..j+1} <x_k - x_star, res_k>      (needs a fixed point)
/// Each plateau ratio is (sum over the last 20% of indices) / (total sum).
struct SummabilityReport {
  std::vector<double> s1, s2, s3, s4;
  std::optional<double> plateau_s1, plateau_s2, plateau_s3, plateau_s4;
};

namespace detail {
inline std::optional<double> plateau_ratio(const std::vector<double>& cum) {
  if (cum.empty()) return std::nullopt;
  const double total = cum.back();
  if (!(total > 0.0)) return 0.0;  // identically zero series
  const std::size_t cut = static_cast<std::size_t>(0.8 * static_cast<double>(cum.size()));
  if (cut == 0 || cut >= cum.size()) return 0.0;
  return (total - cum[cut - 1]) / total;
}
}  // namespace detail

/// theta and s identify the vacuous case: when |1/theta - s| < 1e-12 the
/// series behind s3 carries no information, so its plateau check is omitted.
inline SummabilityReport summability_report(const Trace& tr, const std::optional<Vector>& x_star,
                                            double theta, double s) {
  if (!tr.has_vectors()) {
    throw std::invalid_argument("summability_report: trace has no stored vectors");
  }
  const std::size_t last = tr.rows() - 1;
  SummabilityReport rep;
  double a1 = 0.0, a2 = 0.0, a3 = 0.0, a4 = 0.0;
  for (std::size_t k = 1; k <= last; ++k) {
    const double kk = static_cast<double>(k);
    if (k + 1 <= last) {
      a1 += kk * norm_sq(sub(tr.iterates[k + 1], tr.iterates[k]));
      rep.s1.push_back(a1);
    }
    a2 += kk * norm_sq(tr.residual_vectors[k]);
    rep.s2.push_back(a2);
    a3 += kk * kk * norm_sq(sub(tr.residual_vectors[k], tr.residual_vectors[k - 1]));
    rep.s3.push_back(a3);
    if (x_star) {
      a4 += dot(sub(tr.iterates[k], *x_star), tr.residual_vectors[k]);
      rep.s4.push_back(a4);
    }
  }
  rep.plateau_s1 = detail::plateau_ratio(rep.s1);
  rep.plateau_s2 = detail::plateau_ratio(rep.s2);
  if (std::abs(1.0 / theta - s) >= 1e-12) {
    rep.plateau_s3 = detail::plateau_ratio(rep.s3);
  }
  if (x_star) rep.plateau_s4 = detail::plateau_ratio(rep.s4);
  return rep;
}

/// Tail statistics of a residual trace. loglog_slope is absent when the
/// tail residuals are identically zero ("converged").
struct RateFit {
  double sup_tail_k_res = 0.0;
  std::optional<double> loglog_slope;
};

inline RateFit rate_fit(const Trace& tr, std::size_t burn_in) {
  if (tr.rows() <= 2 * burn_in) {
    throw std::invalid_argument("rate_fit: requires trace length > 2 * burn_in");
  }
  const std::size_t last = tr.rows() - 1;
  RateFit fit;
  for (std::size_t k = burn_in; k <= last; ++k) {
    fit.sup_tail_k_res = std::max(fit.sup_tail_k_res, tr.k_times_residual[k]);
  }
  // least squares on log(residual) vs log(k), zero residuals excluded
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (std::size_t k = std::max<std::size_t>(burn_in, 1); k <= last; ++k) {
    if (tr.residual[k] <= 0.0) continue;
    const double lx = std::log(static_cast<double>(k));
    const double ly = std::log(tr.residual[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2) {
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    if (denom > 0.0) fit.loglog_slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
  }
  return fit;
}

/// Count the indices k in [k_start, rows-2] violating the assembled descent
/// inequality
///   E_{k+1} - E_k <= 2(2-alpha) lambda s <x_k - x_star, res_k>
///                    + (1 - p) (w1 k ||dx_k||^2 + w4 s^2 k ||res_k||^2)
///                    + 1e-9 * max(1, E_1),
/// which holds from the threshold index onward whenever s <= 1/theta.
inline std::size_t count_descent_violations(const Trace& tr, const EnergySpec& spec,
                                            std::size_t k_start) {
  if (!tr.has_vectors()) {
    throw std::invalid_argument("count_descent_violations: trace has no stored vectors");
  }
  if (tr.rows() < 3) return 0;
  const OmegaConstants w = omega_constants(spec.alpha, spec.lambda);
  const double p = std::sqrt((5.0 * spec.alpha - 2.0) / (2.0 * (3.0 * spec.alpha - 2.0)));
  const double scale = std::max(1.0, energy_at(tr, spec, 1));
  const double tol = 1e-9 * scale;
  std::size_t violations = 0;
  double e_k = 0.0;
  bool have_e = false;
  for (std::size_t k = std::max<std::size_t>(k_start, 1); k + 1 < tr.rows(); ++k) {
    if (!have_e) {
      e_k = energy_at(tr, spec, k);
      have_e = true;
    }
    const double e_next = energy_at(tr, spec, k + 1);
    const Vector dx = sub(tr.iterates[k + 1], tr.iterates[k]);
    const Vector& res = tr.residual_vectors[k];
    const double kk = static_cast<double>(k);
    const double rhs =
        2.0 * (2.0 - spec.alpha) * spec.lambda * spec.s * dot(sub(tr.iterates[k], spec.x_star), res) +
        (1.0 - p) * (w.w1 * kk * norm_sq(dx) + w.w4 * spec.s * spec.s * kk * norm_sq(res));
    if (e_next - e_k > rhs + tol) ++violations;
    e_k = e_next;
  }
  return violations;
}

}  // namespace fastkm
