#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>

#include "fastkm/rng.hpp"
#include "fastkm/vec.hpp"

namespace fastkm {

using VectorMap = std::function<Vector(const Vector&)>;

/// A theta-averaged self-map of R^dim. Immutable after construction and
/// safe for concurrent evaluation; composition copies configuration.
struct AveragedOperator {
  std::size_t dim = 0;
  double theta = 1.0;  // averagedness constant in (0, 1]
  VectorMap map;
  std::optional<Vector> fixed_point;  // a known element of Fix T, if any
};

/// Apply T to x with dimension and finiteness checks.
inline Vector evaluate(const AveragedOperator& op, const Vector& x) {
  if (x.size() != op.dim) {
    throw std::invalid_argument("evaluate: input dimension " + std::to_string(x.size()) +
                                " does not match operator dimension " + std::to_string(op.dim));
  }
  require_finite(x, "evaluate: input");
  Vector out = op.map(x);
  if (out.size() != op.dim) {
    throw std::runtime_error("evaluate: operator produced wrong dimension");
  }
  if (!is_finite(out)) {
    throw std::runtime_error("evaluate: operator produced non-finite output");
  }
  return out;
}

/// x - T(x), the fixed point residual map.
inline Vector residual_map(const AveragedOperator& op, const Vector& x) {
  return sub(x, evaluate(op, x));
}

inline AveragedOperator identity_operator(std::size_t dim) {
  return AveragedOperator{dim, 1.0, [](const Vector& x) { return x; }, Vector(dim, 0.0)};
}

/// Skew block map x |-> (1/(M-1)) * (x_bot, -x_top) on R^{2n}.
/// <A x, x> = 0 for all x; its resolvent rotates and contracts each
/// coordinate pair (x_i, x_{n+i}).
struct RotationMap {
  std::size_t n = 1;
  double m_const = 2.0;  // M > 1

  Vector apply(const Vector& x) const {
    if (x.size() != 2 * n) throw std::invalid_argument("RotationMap: dimension mismatch");
    const double a = 1.0 / (m_const - 1.0);
    Vector out(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = a * x[n + i];
      out[n + i] = -a * x[i];
    }
    return out;
  }
};

/// Resolvent (Id + A)^{-1} of the skew rotation map, in closed form per
/// coordinate pair:
///   (x_i, x_{n+i}) |-> ((x_i - a x_{n+i})/(1+a^2), (a x_i + x_{n+i})/(1+a^2)),
/// with a = 1/(M-1). Firmly nonexpansive, hence theta = 1/2; the unique
/// fixed point is 0.
inline AveragedOperator make_rotation_resolvent(std::size_t n, double m_const) {
  if (n < 1) throw std::invalid_argument("make_rotation_resolvent: requires n >= 1");
  if (!(m_const > 1.0)) throw std::invalid_argument("make_rotation_resolvent: requires M > 1");
  const double a = 1.0 / (m_const - 1.0);
  const double denom = 1.0 + a * a;
  auto map = [n, a, denom](const Vector& x) {
    Vector out(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = (x[i] - a * x[n + i]) / denom;
      out[n + i] = (a * x[i] + x[n + i]) / denom;
    }
    return out;
  };
  return AveragedOperator{2 * n, 0.5, std::move(map), Vector(2 * n, 0.0)};
}

/// Coordinatewise projection onto the nonnegative orthant.
inline Vector project_nonnegative(const Vector& x) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

/// Projection onto the hyperplane {z : <z, u> = nu}.
inline Vector project_hyperplane(const Vector& u, double nu, const Vector& x) {
  require_same_dim(u, x, "project_hyperplane");
  const double usq = norm_sq(u);
  if (usq == 0.0) throw std::invalid_argument("project_hyperplane: requires u != 0");
  const double c = (dot(x, u) - nu) / usq;
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - c * u[i];
  return out;
}

/// T_DR = J_A o (2 J_B - Id) + Id - J_B, a 1/2-averaged composition of two
/// resolvents.
inline AveragedOperator make_douglas_rachford(VectorMap resolvent_a, VectorMap resolvent_b,
                                              std::size_t dim) {
  auto map = [ja = std::move(resolvent_a), jb = std::move(resolvent_b)](const Vector& x) {
    const Vector jbx = jb(x);
    Vector reflected(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) reflected[i] = 2.0 * jbx[i] - x[i];
    const Vector jax = ja(reflected);
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = jax[i] + x[i] - jbx[i];
    return out;
  };
  return AveragedOperator{dim, 0.5, std::move(map), std::nullopt};
}

/// A beta-cocoercive forward term. Its absence (C == 0) is modelled by
/// std::nullopt rather than beta = infinity, so no 1/inf arithmetic occurs.
struct ForwardTerm {
  VectorMap map;
  double beta = 1.0;  // cocoercivity constant, > 0
};

inline double averagedness_with_forward(double gamma, const std::optional<ForwardTerm>& forward) {
  if (!forward) return 0.5;
  if (!(forward->beta > 0.0)) throw std::invalid_argument("forward term requires beta > 0");
  if (!(gamma > 0.0 && gamma <= 2.0 * forward->beta)) {
    throw std::invalid_argument("requires 0 < gamma <= 2*beta");
  }
  return 2.0 * forward->beta / (4.0 * forward->beta - gamma);
}

/// T_FB = J_{gamma A} o (Id - gamma C); 2beta/(4beta-gamma)-averaged, and
/// 1/2-averaged when the forward term is absent.
inline AveragedOperator make_forward_backward(VectorMap resolvent_a,
                                              std::optional<ForwardTerm> forward, double gamma,
                                              std::size_t dim) {
  const double theta = averagedness_with_forward(gamma, forward);
  if (!(gamma > 0.0)) throw std::invalid_argument("make_forward_backward: requires gamma > 0");
  auto map = [ja = std::move(resolvent_a), fw = std::move(forward), gamma](const Vector& x) {
    Vector arg = x;
    if (fw) {
      const Vector cx = fw->map(x);
      for (std::size_t i = 0; i < x.size(); ++i) arg[i] -= gamma * cx[i];
    }
    return ja(arg);
  };
  return AveragedOperator{dim, theta, std::move(map), std::nullopt};
}

/// Three-operator splitting map
///   T_DY = J_{gamma A} o (2 J_{gamma B} - Id - gamma C o J_{gamma B}) + Id - J_{gamma B}.
/// Collapses to T_DR when C == 0 and to T_FB when J_{gamma B} == Id.
inline AveragedOperator make_davis_yin(VectorMap resolvent_a, VectorMap resolvent_b,
                                       std::optional<ForwardTerm> forward, double gamma,
                                       std::size_t dim) {
  const double theta = averagedness_with_forward(gamma, forward);
  if (!(gamma > 0.0)) throw std::invalid_argument("make_davis_yin: requires gamma > 0");
  auto map = [ja = std::move(resolvent_a), jb = std::move(resolvent_b), fw = std::move(forward),
              gamma](const Vector& x) {
    const Vector jbx = jb(x);
    Vector arg(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) arg[i] = 2.0 * jbx[i] - x[i];
    if (fw) {
      const Vector cjbx = fw->map(jbx);
      for (std::size_t i = 0; i < x.size(); ++i) arg[i] -= gamma * cjbx[i];
    }
    const Vector jax = ja(arg);
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = jax[i] + x[i] - jbx[i];
    return out;
  };
  return AveragedOperator{dim, theta, std::move(map), std::nullopt};
}

struct CocoercivityReport {
  std::size_t violations = 0;
  double worst_margin = 0.0;  // minimum of the sampled margins
};

/// Sample pairs (x, y) with standard normal coordinates and test the
/// cocoercivity of Id - T implied by theta-averagedness:
///   <x-y, (Id-T)x - (Id-T)y> >= 1/(2 theta) ||(Id-T)x - (Id-T)y||^2.
/// A pair counts as a violation when the margin drops below
/// -1e-9 * max(1, ||x-y||^2).
inline CocoercivityReport check_cocoercivity(const AveragedOperator& op, std::size_t num_pairs,
                                             std::uint64_t rng_seed) {
  if (num_pairs < 1) throw std::invalid_argument("check_cocoercivity: requires num_pairs >= 1");
  auto rng = make_rng(rng_seed);
  CocoercivityReport report;
  bool first = true;
  for (std::size_t p = 0; p < num_pairs; ++p) {
    const Vector x = sample_standard_normal(op.dim, rng);
    const Vector y = sample_standard_normal(op.dim, rng);
    const Vector rx = residual_map(op, x);
    const Vector ry = residual_map(op, y);
    const Vector dxy = sub(x, y);
    const Vector dr = sub(rx, ry);
    const double margin = dot(dxy, dr) - norm_sq(dr) / (2.0 * op.theta);
    if (first || margin < report.worst_margin) {
      report.worst_margin = margin;
      first = false;
    }
    const double scale = std::max(1.0, norm_sq(dxy));
    if (margin < -1e-9 * scale) ++report.violations;
  }
  return report;
}

}  // namespace fastkm
