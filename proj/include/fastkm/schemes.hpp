#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "fastkm/operators.hpp"
#include "fastkm/schedule.hpp"
#include "fastkm/trace.hpp"
#include "fastkm/vec.hpp"

namespace fastkm {

enum class Method { banach_picard, km, halpern, appm, fast_km, fast_ogda };

enum class StopRule { none, residual_norm, feasibility_shadow };

/// Predicate consulted at every recorded row when StopRule::feasibility_shadow
/// is selected; returning true terminates the run at that index.
using StopPredicate = std::function<bool(const Vector& x, std::size_t k)>;

struct SchemeConfig {
  Method method = Method::banach_picard;
  double alpha = 3.0;  // momentum parameter, > 2 (fast_km, fast_ogda)
  double step = 1.0;   // step size s (fast_km, fast_ogda)
  std::optional<StepSchedule> schedule;  // km, halpern; method defaults apply
  std::optional<double> schedule_cap;    // km: overrides the (0, 1/theta] check
  std::size_t kmax = 1000;
  double stop_tol = 0.0;
  StopRule stop_rule = StopRule::none;
  bool keep_vectors = false;  // retain iterates + residual vectors in the trace
};

/// Largest admissible step size of the momentum-relaxation scheme: s <= 1/theta.
inline double max_step_fast_km(double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("max_step_fast_km: requires theta in (0, 1]");
  }
  return 1.0 / theta;
}

/// Strict upper bound for the extrapolated-gradient scheme:
/// s < max{1/(4 theta), (1-theta)/(2 theta)}.
inline double max_step_fast_ogda(double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("max_step_fast_ogda: requires theta in (0, 1]");
  }
  return std::max(1.0 / (4.0 * theta), (1.0 - theta) / (2.0 * theta));
}

inline Vector step_banach_picard(const Vector& tx) { return tx; }

/// x_{k+1} = (1 - s_k) x_k + s_k T(x_k)
inline Vector step_km(const Vector& x, const Vector& tx, double sk) {
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (1.0 - sk) * x[i] + sk * tx[i];
  return out;
}

/// x_{k+1} = (1 - s_k) x_0 + s_k T(x_k), anchored at the starting point
inline Vector step_halpern(const Vector& anchor, const Vector& tx, double sk) {
  Vector out(anchor.size());
  for (std::size_t i = 0; i < anchor.size(); ++i) out[i] = (1.0 - sk) * anchor[i] + sk * tx[i];
  return out;
}

/// x_{k+1} = y_{k+1} + k/(k+2) (y_{k+1} - y_k) - k/(k+2) (y_k - x_{k-1}),
/// where y_{k+1} = J(x_k) is supplied by the caller.
inline Vector step_appm(std::size_t k, const Vector& y_next, const Vector& y,
                        const Vector& x_prev) {
  const double w = static_cast<double>(k) / (static_cast<double>(k) + 2.0);
  Vector out(y_next.size());
  for (std::size_t i = 0; i < y_next.size(); ++i) {
    out[i] = y_next[i] + w * (y_next[i] - y[i]) - w * (y[i] - x_prev[i]);
  }
  return out;
}

/// Momentum-relaxation update: a convex pair of weights on x_k and T(x_k)
/// plus velocity and operator-difference extrapolation,
///   x_{k+1} = (1 - c) x_k + ((1-s)k/(k+a))(x_k - x_{k-1})
///             + c T(x_k) + (sk/(k+a))(T(x_k) - T(x_{k-1})),
/// with c = s a / (2(k+a)). T values are supplied by the caller so that one
/// fresh evaluation per iteration suffices.
inline Vector step_fast_km(double alpha, double s, std::size_t k, const Vector& x,
                           const Vector& x_prev, const Vector& tx, const Vector& tx_prev) {
  const double kk = static_cast<double>(k);
  const double c = s * alpha / (2.0 * (kk + alpha));
  const double w_vel = (1.0 - s) * kk / (kk + alpha);
  const double w_dt = s * kk / (kk + alpha);
  assert(std::abs((1.0 - c) + c - 1.0) <= 1e-15);  // weights on x_k and T(x_k) sum to 1
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = (1.0 - c) * x[i] + w_vel * (x[i] - x_prev[i]) + c * tx[i] +
             w_dt * (tx[i] - tx_prev[i]);
  }
  return out;
}

struct FastOgdaState {
  Vector x_prev;
  Vector x;
  Vector g_prev;  // (Id - T)(y_{k-1})
};

struct FastOgdaStep {
  Vector y;       // evaluation point y_k
  Vector g;       // (Id - T)(y_k)
  Vector x_next;  // x_{k+1}
};

/// Extrapolated-gradient update on the residual operator g = Id - T:
///   y_k     = x_k + (1 - a/(k+a))(x_k - x_{k-1}) - (a s / (2(k+a))) g_{k-1}
///   x_{k+1} = y_k - (s/2)(1 + k/(k+a)) (g_k - g_{k-1}).
/// Performs exactly one operator evaluation (at y_k).
inline FastOgdaStep step_fast_ogda(const AveragedOperator& op, double alpha, double s,
                                   std::size_t k, const FastOgdaState& st) {
  const double kk = static_cast<double>(k);
  const double w_vel = 1.0 - alpha / (kk + alpha);
  const double w_g = alpha * s / (2.0 * (kk + alpha));
  FastOgdaStep out;
  out.y.resize(st.x.size());
  for (std::size_t i = 0; i < st.x.size(); ++i) {
    out.y[i] = st.x[i] + w_vel * (st.x[i] - st.x_prev[i]) - w_g * st.g_prev[i];
  }
  out.g = sub(out.y, evaluate(op, out.y));
  const double w_corr = 0.5 * s * (1.0 + kk / (kk + alpha));
  out.x_next.resize(st.x.size());
  for (std::size_t i = 0; i < st.x.size(); ++i) {
    out.x_next[i] = out.y[i] - w_corr * (out.g[i] - st.g_prev[i]);
  }
  return out;
}

namespace detail {

inline void validate_schedule(const StepSchedule& sched, std::size_t kmax, double cap,
                              const char* method) {
  for (std::size_t k = 0; k <= kmax; ++k) {
    const double sk = sched(k);
    if (!std::isfinite(sk) || !(sk > 0.0 && sk <= cap)) {
      throw std::invalid_argument(std::string(method) + " requires s_k in (0, " +
                                  std::to_string(cap) + "]; schedule " + sched.describe() +
                                  " gives s_" + std::to_string(k) + " = " + std::to_string(sk));
    }
  }
}

[[noreturn]] inline void throw_blowup(std::size_t last_valid_k) {
  throw std::runtime_error("numerical blowup: non-finite iterate; last valid k = " +
                           std::to_string(last_valid_k));
}

}  // namespace detail

/// Run one scheme until kmax or the stop rule fires, recording every index.
/// x1 (two-point methods) defaults to x0; y0 (extrapolated-gradient scheme)
/// defaults to x0. Parameter bounds are validated before the first step and
/// violations name the broken inequality.
inline Trace run(const AveragedOperator& op, const SchemeConfig& cfg, const Vector& x0,
                 std::optional<Vector> x1 = std::nullopt,
                 const StopPredicate& shadow_stop = nullptr,
                 std::optional<Vector> y0 = std::nullopt) {
  if (x0.size() != op.dim) throw std::invalid_argument("run: x0 dimension mismatch");
  require_finite(x0, "run: x0");
  if (x1) {
    if (x1->size() != op.dim) throw std::invalid_argument("run: x1 dimension mismatch");
    require_finite(*x1, "run: x1");
  }
  if (cfg.stop_rule == StopRule::feasibility_shadow && !shadow_stop) {
    throw std::invalid_argument("run: feasibility_shadow stop rule requires a predicate");
  }
  if (cfg.stop_rule == StopRule::residual_norm && !(cfg.stop_tol >= 0.0)) {
    throw std::invalid_argument("run: requires stop_tol >= 0");
  }

  // method-specific run-start validation
  StepSchedule sched = StepSchedule::constant(1.0);
  switch (cfg.method) {
    case Method::banach_picard:
      break;
    case Method::km: {
      sched = cfg.schedule.value_or(StepSchedule::constant(0.5));
      const double cap = cfg.schedule_cap.value_or(1.0 / op.theta);
      detail::validate_schedule(sched, cfg.kmax, cap, "km");
      break;
    }
    case Method::halpern: {
      sched = cfg.schedule.value_or(StepSchedule::lieder());
      detail::validate_schedule(sched, cfg.kmax, 1.0, "halpern");
      break;
    }
    case Method::appm:
      if (x1 && *x1 != x0) {
        throw std::invalid_argument("appm requires x1 = x0 (initialization y1 = x0 = x1)");
      }
      break;
    case Method::fast_km:
      if (!(cfg.alpha > 2.0)) throw std::invalid_argument("fast_km requires alpha > 2");
      if (!(cfg.step > 0.0 && cfg.step <= max_step_fast_km(op.theta))) {
        throw std::invalid_argument("fast_km requires 0 < s <= 1/theta = " +
                                    std::to_string(max_step_fast_km(op.theta)) +
                                    "; got s = " + std::to_string(cfg.step));
      }
      break;
    case Method::fast_ogda: {
      if (!(cfg.alpha > 2.0)) throw std::invalid_argument("fast_ogda requires alpha > 2");
      const double bound = max_step_fast_ogda(op.theta);
      if (!(cfg.step > 0.0 && cfg.step < bound)) {
        throw std::invalid_argument(
            "fast_ogda requires 0 < s < max{1/(4 theta), (1-theta)/(2 theta)} = " +
            std::to_string(bound) + "; got s = " + std::to_string(cfg.step));
      }
      break;
    }
  }

  Trace tr;
  tr.dim = op.dim;
  const std::size_t expected_rows = cfg.kmax + 1;
  tr.residual.reserve(expected_rows);
  tr.velocity.reserve(expected_rows);
  tr.k_times_residual.reserve(expected_rows);
  if (cfg.keep_vectors) {
    tr.iterates.reserve(expected_rows);
    tr.residual_vectors.reserve(expected_rows);
  }

  bool stopped = false;
  auto eval_at = [&](const Vector& x, std::size_t last_valid_k) {
    try {
      ++tr.eval_count;
      return evaluate(op, x);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(std::string(e.what()) +
                               "; last valid k = " + std::to_string(last_valid_k));
    }
  };
  auto record = [&](std::size_t k, const Vector& x, const Vector& res_vec, double vel) {
    const double r = norm(res_vec);
    tr.residual.push_back(r);
    tr.velocity.push_back(vel);
    tr.k_times_residual.push_back(static_cast<double>(k) * r);
    if (cfg.keep_vectors) {
      tr.iterates.push_back(x);
      tr.residual_vectors.push_back(res_vec);
    }
    tr.wall_iterations = k;
    tr.final_iterate = x;
    if (cfg.stop_rule == StopRule::residual_norm && r <= cfg.stop_tol) {
      tr.terminated_at = k;
      stopped = true;
    } else if (cfg.stop_rule == StopRule::feasibility_shadow && shadow_stop(x, k)) {
      tr.terminated_at = k;
      stopped = true;
    }
  };

  switch (cfg.method) {
    case Method::banach_picard:
    case Method::km:
    case Method::halpern: {
      Vector x = x0;
      Vector tx = eval_at(x, 0);
      record(0, x, sub(x, tx), 0.0);
      for (std::size_t k = 0; !stopped && k < cfg.kmax; ++k) {
        Vector x_next;
        if (cfg.method == Method::banach_picard) {
          x_next = step_banach_picard(tx);
        } else if (cfg.method == Method::km) {
          x_next = step_km(x, tx, sched(k));
        } else {
          x_next = step_halpern(x0, tx, sched(k));
        }
        if (!is_finite(x_next)) detail::throw_blowup(k);
        const double vel = dist(x_next, x);
        x = std::move(x_next);
        tx = eval_at(x, k);
        record(k + 1, x, sub(x, tx), vel);
      }
      break;
    }

    case Method::appm: {
      // y1 = x0 = x1; J(x1) = J(x0) is reused, so row 1 costs no evaluation
      Vector jx = eval_at(x0, 0);
      record(0, x0, sub(x0, jx), 0.0);
      if (stopped || cfg.kmax == 0) break;
      record(1, x0, sub(x0, jx), 0.0);
      Vector x_prev = x0;
      Vector x = x0;
      Vector y = x0;  // y_1
      for (std::size_t k = 1; !stopped && k < cfg.kmax; ++k) {
        Vector y_next = jx;  // J(x_k)
        Vector x_next = step_appm(k, y_next, y, x_prev);
        if (!is_finite(x_next)) detail::throw_blowup(k);
        const double vel = dist(x_next, x);
        x_prev = std::move(x);
        x = std::move(x_next);
        y = std::move(y_next);
        jx = eval_at(x, k);
        record(k + 1, x, sub(x, jx), vel);
      }
      break;
    }

    case Method::fast_km: {
      Vector x_prev = x0;
      Vector tx_prev = eval_at(x_prev, 0);
      record(0, x_prev, sub(x_prev, tx_prev), 0.0);
      if (stopped || cfg.kmax == 0) break;
      Vector x = x1.value_or(x0);
      Vector tx = eval_at(x, 0);
      record(1, x, sub(x, tx), dist(x, x_prev));
      for (std::size_t k = 1; !stopped && k < cfg.kmax; ++k) {
        Vector x_next = step_fast_km(cfg.alpha, cfg.step, k, x, x_prev, tx, tx_prev);
        if (!is_finite(x_next)) detail::throw_blowup(k);
        const double vel = dist(x_next, x);
        x_prev = std::move(x);
        x = std::move(x_next);
        tx_prev = std::move(tx);
        tx = eval_at(x, k);
        record(k + 1, x, sub(x, tx), vel);
      }
      break;
    }

    case Method::fast_ogda: {
      FastOgdaState st;
      st.x_prev = x0;
      st.x = x1.value_or(x0);
      const Vector y_init = y0.value_or(x0);
      st.g_prev = sub(y_init, eval_at(y_init, 0));
      record(0, x0, st.g_prev, 0.0);
      for (std::size_t k = 1; !stopped && k <= cfg.kmax; ++k) {
        FastOgdaStep stepped = [&] {
          try {
            ++tr.eval_count;
            return step_fast_ogda(op, cfg.alpha, cfg.step, k, st);
          } catch (const std::runtime_error& e) {
            throw std::runtime_error(std::string(e.what()) +
                                     "; last valid k = " + std::to_string(k - 1));
          }
        }();
        if (!is_finite(stepped.x_next)) detail::throw_blowup(k);
        record(k, st.x, stepped.g, dist(st.x, st.x_prev));
        st.x_prev = std::move(st.x);
        st.x = std::move(stepped.x_next);
        st.g_prev = std::move(stepped.g);
      }
      break;
    }
  }

  return tr;
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::banach_picard: return "bp";
    case Method::km: return "km";
    case Method::halpern: return "halpern";
    case Method::appm: return "appm";
    case Method::fast_km: return "fast-km";
    case Method::fast_ogda: return "fast-ogda";
  }
  return "?";
}

inline std::optional<Method> method_from_name(const std::string& name) {
  if (name == "bp") return Method::banach_picard;
  if (name == "km") return Method::km;
  if (name == "halpern") return Method::halpern;
  if (name == "appm") return Method::appm;
  if (name == "fast-km") return Method::fast_km;
  if (name == "fast-ogda") return Method::fast_ogda;
  return std::nullopt;
}

}  // namespace fastkm
