#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "fastkm/operators.hpp"
#include "fastkm/schemes.hpp"

using namespace fastkm;

namespace {

AveragedOperator counting_rotation(std::size_t n, double m, std::shared_ptr<int> counter) {
  AveragedOperator op = make_rotation_resolvent(n, m);
  auto inner = op.map;
  op.map = [inner, counter](const Vector& x) {
    ++*counter;
    return inner(x);
  };
  return op;
}

}  // namespace

TEST(MaxStep, FastKm) {
  EXPECT_DOUBLE_EQ(max_step_fast_km(0.5), 2.0);
  EXPECT_DOUBLE_EQ(max_step_fast_km(1.0), 1.0);
  // theta = 2 beta/(4 beta - gamma)  =>  1/theta = 2 - gamma/(2 beta)
  const double beta = 1.5, gamma = 1.0;
  const double theta = 2.0 * beta / (4.0 * beta - gamma);
  EXPECT_NEAR(max_step_fast_km(theta), 2.0 - gamma / (2.0 * beta), 1e-15);
  EXPECT_THROW(max_step_fast_km(0.0), std::invalid_argument);
  EXPECT_THROW(max_step_fast_km(1.5), std::invalid_argument);
}

TEST(MaxStep, FastOgda) {
  EXPECT_DOUBLE_EQ(max_step_fast_ogda(0.5), 0.5);
  EXPECT_DOUBLE_EQ(max_step_fast_ogda(1.0), 0.25);
  EXPECT_DOUBLE_EQ(max_step_fast_ogda(0.25), 1.5);
  EXPECT_THROW(max_step_fast_ogda(-1.0), std::invalid_argument);
}

TEST(StepKernels, KmExamples) {
  // T = -Id at s = 1/2 lands on the midpoint of x and -x
  EXPECT_EQ(step_km({4}, {-4}, 0.5)[0], 0.0);
  // s = 1 collapses to the plain fixed point step
  const Vector x{2, -1}, tx{0.5, 0.25};
  EXPECT_EQ(step_km(x, tx, 1.0), step_banach_picard(tx));
  // T = Id is stationary for any s (up to recombination rounding)
  const Vector st = step_km(x, x, 0.37);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(st[i], x[i], 1e-15 * std::abs(x[i]));
}

TEST(StepKernels, HalpernExamples) {
  // anchored at x0 with T = Id stays at x0
  const Vector x0{3, 1};
  EXPECT_EQ(step_halpern(x0, x0, 0.8), x0);
  // s = 1 ignores the anchor
  EXPECT_EQ(step_halpern(x0, {7, 7}, 1.0), (Vector{7, 7}));
  // Lieder schedule at k = 0 with T = -Id from x0 = (2): midpoint is 0
  const double s0 = StepSchedule::lieder()(0);
  EXPECT_DOUBLE_EQ(s0, 0.5);
  EXPECT_EQ(step_halpern({2}, {-2}, s0)[0], 0.0);
}

TEST(StepKernels, FastKmFrozenExample) {
  // alpha = 3, s = 1, x0 = x1 = (1,0), T = rotation resolvent (M = 2), k = 1
  const Vector x{1, 0};
  const Vector tx{0.5, 0.5};
  const Vector next = step_fast_km(3.0, 1.0, 1, x, x, tx, tx);
  EXPECT_NEAR(next[0], 0.8125, 1e-14);
  EXPECT_NEAR(next[1], 0.1875, 1e-14);
}

TEST(StepKernels, FastKmStationaryAtFixedPoint) {
  // the correction terms vanish exactly; the convex recombination of x with
  // itself may wobble by an ulp
  const Vector x{2, -3};
  for (std::size_t k = 1; k < 40; ++k) {
    const Vector next = step_fast_km(4.0, 0.7, k, x, x, x, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(next[i], x[i], 1e-15 * std::abs(x[i]));
    }
  }
}

TEST(StepKernels, FastKmWeightsFormConvexPair) {
  for (std::size_t k = 1; k < 2000; k += 13) {
    for (double s : {0.3, 1.0, 2.0}) {
      const double c = s * 3.0 / (2.0 * (static_cast<double>(k) + 3.0));
      EXPECT_LE(std::abs((1.0 - c) + c - 1.0), 1e-15);
    }
  }
}

// At s = 1 the velocity term drops out and the update must match the
// plain extrapolated form
//   x+ = (1 - a/(2(k+a))) x + (a/(2(k+a))) Tx + (k/(k+a)) (Tx - Tx_prev).
TEST(StepKernels, FastKmUnitStepClosedForm) {
  auto rng = make_rng(12);
  const double alpha = 3.4;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + static_cast<std::size_t>(trial) * 7;
    const Vector x = sample_standard_normal(5, rng);
    const Vector x_prev = sample_standard_normal(5, rng);
    const Vector tx = sample_standard_normal(5, rng);
    const Vector tx_prev = sample_standard_normal(5, rng);
    const Vector got = step_fast_km(alpha, 1.0, k, x, x_prev, tx, tx_prev);
    const double kk = static_cast<double>(k);
    const double c = alpha / (2.0 * (kk + alpha));
    const double w = kk / (kk + alpha);
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double want = (1.0 - c) * x[i] + c * tx[i] + w * (tx[i] - tx_prev[i]);
      EXPECT_LE(std::abs(got[i] - want), 1e-15 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST(StepKernels, FastOgdaFrozenExample) {
  const auto op = make_rotation_resolvent(1, 2.0);
  FastOgdaState st{{1, 0}, {1, 0}, {0.5, -0.5}};
  const FastOgdaStep stepped = step_fast_ogda(op, 3.0, 0.4, 1, st);
  EXPECT_NEAR(stepped.y[0], 0.925, 1e-14);
  EXPECT_NEAR(stepped.y[1], 0.075, 1e-14);
  EXPECT_NEAR(stepped.g[0], 0.5, 1e-14);
  EXPECT_NEAR(stepped.g[1], -0.425, 1e-14);
  EXPECT_NEAR(stepped.x_next[0], 0.925, 1e-14);
  EXPECT_NEAR(stepped.x_next[1], 0.05625, 1e-14);
}

TEST(Run, BanachPicardOscillatesOnMinusIdentity) {
  AveragedOperator neg{1, 1.0, [](const Vector& x) { return scaled(-1.0, x); }, Vector{0.0}};
  SchemeConfig cfg;
  cfg.method = Method::banach_picard;
  cfg.kmax = 11;
  cfg.keep_vectors = true;
  const Trace tr = run(neg, cfg, {1});
  EXPECT_EQ(tr.iterates[1][0], -1.0);
  EXPECT_EQ(tr.iterates[2][0], 1.0);
  for (std::size_t k = 0; k < tr.rows(); ++k) EXPECT_EQ(tr.residual[k], 2.0);
}

TEST(Run, BanachPicardMatchesEvaluate) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::banach_picard;
  cfg.kmax = 1;
  cfg.keep_vectors = true;
  const Trace tr = run(op, cfg, {1, 0});
  EXPECT_NEAR(tr.iterates[1][0], 0.5, 1e-14);
  EXPECT_NEAR(tr.iterates[1][1], 0.5, 1e-14);
}

TEST(Run, KmaxZeroRecordsOnlyInitialPoint) {
  const auto op = make_rotation_resolvent(1, 2.0);
  for (Method m : {Method::banach_picard, Method::km, Method::halpern, Method::appm,
                   Method::fast_km, Method::fast_ogda}) {
    SchemeConfig cfg;
    cfg.method = m;
    cfg.step = m == Method::fast_ogda ? 0.4 : 2.0;
    cfg.kmax = 0;
    const Trace tr = run(op, cfg, {1, 0});
    EXPECT_EQ(tr.rows(), 1u) << method_name(m);
    EXPECT_EQ(tr.wall_iterations, 0u);
    EXPECT_NEAR(tr.residual[0], std::sqrt(0.5), 1e-14);
  }
}

TEST(Run, StartingAtFixedPointStaysThere) {
  const auto op = make_rotation_resolvent(2, 2.0);
  for (Method m : {Method::banach_picard, Method::km, Method::halpern, Method::appm,
                   Method::fast_km, Method::fast_ogda}) {
    SchemeConfig cfg;
    cfg.method = m;
    cfg.step = m == Method::fast_ogda ? 0.4 : 1.0;
    cfg.kmax = 25;
    const Trace tr = run(op, cfg, Vector(4, 0.0));
    for (std::size_t k = 0; k < tr.rows(); ++k) {
      EXPECT_LE(tr.residual[k], 1e-12) << method_name(m) << " row " << k;
    }
  }
}

TEST(Run, AppmFrozenExample) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::appm;
  cfg.kmax = 2;
  cfg.keep_vectors = true;
  const Trace tr = run(op, cfg, {1, 0});
  ASSERT_EQ(tr.rows(), 3u);
  EXPECT_NEAR(tr.iterates[2][0], 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(tr.iterates[2][1], 2.0 / 3.0, 1e-14);
}

TEST(Run, AppmRejectsDistinctSecondPoint) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::appm;
  cfg.kmax = 3;
  EXPECT_THROW(run(op, cfg, {1, 0}, Vector{0.5, 0.5}), std::invalid_argument);
  EXPECT_NO_THROW(run(op, cfg, {1, 0}, Vector{1, 0}));
}

TEST(Run, AppmStationaryWhenResolventIsIdentity) {
  const auto id = identity_operator(2);
  SchemeConfig cfg;
  cfg.method = Method::appm;
  cfg.kmax = 10;
  cfg.keep_vectors = true;
  const Trace tr = run(id, cfg, {2, -1});
  for (const auto& x : tr.iterates) {
    EXPECT_EQ(x[0], 2.0);
    EXPECT_EQ(x[1], -1.0);
  }
}

TEST(Run, FastKmFrozenIterate) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::fast_km;
  cfg.alpha = 3.0;
  cfg.step = 1.0;
  cfg.kmax = 2;
  cfg.keep_vectors = true;
  const Trace tr = run(op, cfg, {1, 0});
  EXPECT_NEAR(tr.iterates[2][0], 0.8125, 1e-14);
  EXPECT_NEAR(tr.iterates[2][1], 0.1875, 1e-14);
}

TEST(Run, FastOgdaFrozenIterate) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::fast_ogda;
  cfg.alpha = 3.0;
  cfg.step = 0.4;
  cfg.kmax = 2;
  cfg.keep_vectors = true;
  const Trace tr = run(op, cfg, {1, 0});
  ASSERT_EQ(tr.rows(), 3u);
  EXPECT_NEAR(tr.iterates[2][0], 0.925, 1e-14);
  EXPECT_NEAR(tr.iterates[2][1], 0.05625, 1e-14);
}

TEST(Run, FastKmPerformsExactlyKmaxPlusOneEvaluations) {
  auto counter = std::make_shared<int>(0);
  const auto op = counting_rotation(2, 2.0, counter);
  SchemeConfig cfg;
  cfg.method = Method::fast_km;
  cfg.alpha = 3.0;
  cfg.step = 2.0;
  cfg.kmax = 57;
  const Trace tr = run(op, cfg, {1, 1, 0, 0});
  EXPECT_EQ(*counter, 58);
  EXPECT_EQ(tr.eval_count, 58u);
  EXPECT_EQ(tr.rows(), 58u);
}

TEST(Run, DeterministicAcrossRepeats) {
  const auto op = make_rotation_resolvent(3, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::fast_km;
  cfg.alpha = 5.0;
  cfg.step = 2.0;
  cfg.kmax = 200;
  const Vector x0{1, 1, 1, 0, 0, 0};
  const Trace a = run(op, cfg, x0);
  const Trace b = run(op, cfg, x0);
  EXPECT_EQ(a.residual, b.residual);
  EXPECT_EQ(a.velocity, b.velocity);
  EXPECT_EQ(a.k_times_residual, b.k_times_residual);
  EXPECT_EQ(a.final_iterate, b.final_iterate);
}

TEST(Run, KmIsFejerMonotoneTowardFixedPoint) {
  const auto op = make_rotation_resolvent(2, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::km;  // default schedule s_k = 1/2
  cfg.kmax = 300;
  cfg.keep_vectors = true;
  const Trace tr = run(op, cfg, {1, -2, 0.5, 3});
  for (std::size_t k = 0; k + 1 < tr.rows(); ++k) {
    EXPECT_LE(norm(tr.iterates[k + 1]), norm(tr.iterates[k]) + 1e-10);
  }
}

TEST(Run, TraceColumnsAreConsistent) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::fast_km;
  cfg.step = 2.0;
  cfg.kmax = 50;
  cfg.keep_vectors = true;
  const Trace tr = run(op, cfg, {1, 0});
  EXPECT_EQ(tr.velocity[0], 0.0);
  for (std::size_t k = 0; k < tr.rows(); ++k) {
    EXPECT_EQ(tr.k_times_residual[k], static_cast<double>(k) * tr.residual[k]);
    EXPECT_NEAR(tr.residual[k], norm(tr.residual_vectors[k]), 0.0);
    if (k > 0) {
      EXPECT_NEAR(tr.velocity[k], dist(tr.iterates[k], tr.iterates[k - 1]), 0.0);
    }
  }
}

TEST(Run, ParameterValidation) {
  const auto rot = make_rotation_resolvent(1, 2.0);  // theta = 1/2
  const auto id = identity_operator(2);              // theta = 1

  SchemeConfig cfg;
  cfg.method = Method::fast_km;
  cfg.alpha = 2.0;
  cfg.step = 1.0;
  EXPECT_THROW(run(rot, cfg, {1, 0}), std::invalid_argument);  // alpha > 2 violated

  cfg.alpha = 3.0;
  cfg.step = 3.0;
  EXPECT_THROW(run(rot, cfg, {1, 0}), std::invalid_argument);  // s <= 1/theta violated
  cfg.step = 2.0;
  EXPECT_NO_THROW(run(rot, cfg, {1, 0}));  // inclusive bound

  cfg.method = Method::fast_ogda;
  cfg.step = 0.5;
  EXPECT_THROW(run(rot, cfg, {1, 0}), std::invalid_argument);  // strict bound
  cfg.step = 0.499;
  EXPECT_NO_THROW(run(rot, cfg, {1, 0}));

  cfg.method = Method::km;
  cfg.schedule = StepSchedule::constant(1.5);
  EXPECT_THROW(run(id, cfg, {1, 1}), std::invalid_argument);  // 1.5 > 1/theta = 1
  EXPECT_NO_THROW(run(rot, cfg, {1, 0}));                     // 1.5 <= 1/theta = 2

  cfg.schedule = StepSchedule::constant(2.5);
  EXPECT_THROW(run(rot, cfg, {1, 0}), std::invalid_argument);
  cfg.schedule_cap = 2.5;
  EXPECT_NO_THROW(run(rot, cfg, {1, 0}));  // relaxed cap admits the schedule
  cfg.schedule_cap.reset();

  cfg.schedule = StepSchedule::minus_inverse(0.5);  // s_0 = 0
  EXPECT_THROW(run(rot, cfg, {1, 0}), std::invalid_argument);

  cfg.method = Method::halpern;
  cfg.schedule = StepSchedule::constant(1.2);
  EXPECT_THROW(run(rot, cfg, {1, 0}), std::invalid_argument);
  cfg.schedule = StepSchedule::lieder();
  EXPECT_NO_THROW(run(rot, cfg, {1, 0}));
}

TEST(Run, ResidualStopRuleTerminatesEarly) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::banach_picard;
  cfg.kmax = 500;
  cfg.stop_rule = StopRule::residual_norm;
  cfg.stop_tol = 1e-6;
  const Trace tr = run(op, cfg, {1, 0});
  ASSERT_TRUE(tr.terminated_at.has_value());
  EXPECT_LT(*tr.terminated_at, 500u);
  EXPECT_LE(tr.residual.back(), 1e-6);
  EXPECT_EQ(tr.rows(), *tr.terminated_at + 1);
}

TEST(Run, ShadowStopRuleNeedsPredicate) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::banach_picard;
  cfg.stop_rule = StopRule::feasibility_shadow;
  EXPECT_THROW(run(op, cfg, {1, 0}), std::invalid_argument);
  cfg.kmax = 10;
  const Trace tr =
      run(op, cfg, {1, 0}, std::nullopt, [](const Vector&, std::size_t k) { return k >= 4; });
  ASSERT_TRUE(tr.terminated_at.has_value());
  EXPECT_EQ(*tr.terminated_at, 4u);
}

TEST(Run, NumericalBlowupIsReported) {
  AveragedOperator expanding{1, 1.0, [](const Vector& x) { return scaled(3.0, x); },
                             std::nullopt};
  SchemeConfig cfg;
  cfg.method = Method::banach_picard;
  cfg.kmax = 2000;
  EXPECT_THROW(run(expanding, cfg, {1}), std::runtime_error);
}

// momentum acceleration vs. plain relaxation on a slowly contracting
// instance (M large makes the resolvent nearly isometric)
TEST(Run, FastKmOutrunsKmOnSlowInstance) {
  const auto op = make_rotation_resolvent(1, 100.0);
  SchemeConfig fkm;
  fkm.method = Method::fast_km;
  fkm.alpha = 3.0;
  fkm.step = 2.0;
  fkm.kmax = 2000;
  SchemeConfig km;
  km.method = Method::km;
  km.kmax = 2000;
  const Vector x0{1, 0};
  const double res_fkm = run(op, fkm, x0).residual.back();
  const double res_km = run(op, km, x0).residual.back();
  EXPECT_LT(res_fkm, res_km);
}

TEST(Run, FastKmAcceptsCustomSecondPoint) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::fast_km;
  cfg.step = 2.0;
  cfg.kmax = 5;
  cfg.keep_vectors = true;
  const Trace tr = run(op, cfg, {1, 0}, Vector{0.9, 0.1});
  EXPECT_EQ(tr.iterates[1][0], 0.9);
  EXPECT_NEAR(tr.velocity[1], dist({0.9, 0.1}, {1, 0}), 0.0);
}

TEST(Run, FastOgdaAcceptsCustomGradientAnchor) {
  const auto op = make_rotation_resolvent(1, 2.0);
  SchemeConfig cfg;
  cfg.method = Method::fast_ogda;
  cfg.step = 0.4;
  cfg.kmax = 3;
  const Vector x0{1, 0};
  const Vector y0{0, 0};  // fixed point: g_0 = 0, so row 0 reports zero residual
  const Trace tr = run(op, cfg, x0, std::nullopt, nullptr, y0);
  EXPECT_EQ(tr.residual[0], 0.0);
  const Trace def = run(op, cfg, x0);
  EXPECT_GT(def.residual[0], 0.5);  // default anchor is x0 itself
}

TEST(MethodNames, RoundTrip) {
  for (Method m : {Method::banach_picard, Method::km, Method::halpern, Method::appm,
                   Method::fast_km, Method::fast_ogda}) {
    const auto back = method_from_name(method_name(m));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, m);
  }
  EXPECT_FALSE(method_from_name("nope").has_value());
}
