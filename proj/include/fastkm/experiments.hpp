#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fastkm/csv.hpp"
#include "fastkm/operators.hpp"
#include "fastkm/rng.hpp"
#include "fastkm/schemes.hpp"

namespace fastkm {

/// One feasibility problem: find x >= 0 with <x, u> = nu. The stored witness
/// satisfies both constraints by construction, so the intersection is
/// nonempty.
struct FeasibilityInstance {
  std::size_t n = 1;  // ambient dimension is 2n
  Vector u;
  double nu = 0.0;
  Vector witness;
};

/// u and the witness are sampled entrywise as |N(0,1)|; nu := <u, witness>.
/// An all-zero u draw is resampled.
inline FeasibilityInstance gen_feasibility(std::size_t n, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("gen_feasibility: requires n >= 1");
  FeasibilityInstance inst;
  inst.n = n;
  do {
    inst.u = sample_standard_normal(2 * n, rng);
    for (auto& v : inst.u) v = std::abs(v);
  } while (norm_sq(inst.u) == 0.0);
  inst.witness = sample_standard_normal(2 * n, rng);
  for (auto& v : inst.witness) v = std::abs(v);
  inst.nu = dot(inst.u, inst.witness);
  return inst;
}

/// Normally distributed starting point scaled by 100.
inline Vector gen_start(std::size_t n, std::mt19937_64& rng) {
  Vector x = sample_standard_normal(2 * n, rng);
  for (auto& v : x) v *= 100.0;
  return x;
}

/// Shadow termination test: || P_H(x) - P_+(P_H(x)) || <= tol.
inline bool feasibility_stop(const Vector& x, const FeasibilityInstance& inst, double tol) {
  const Vector shadow = project_hyperplane(inst.u, inst.nu, x);
  return dist(shadow, project_nonnegative(shadow)) <= tol;
}

/// T_DR built from the orthant projection (as J_A) and the hyperplane
/// projection (as J_B). gamma is immaterial for normal-cone resolvents.
inline AveragedOperator make_feasibility_dr_operator(const FeasibilityInstance& inst) {
  const Vector u = inst.u;
  const double nu = inst.nu;
  return make_douglas_rachford(
      [](const Vector& x) { return project_nonnegative(x); },
      [u, nu](const Vector& x) { return project_hyperplane(u, nu, x); }, 2 * inst.n);
}

/// The nine relaxation presets of the benchmark:
///   1 - 1/(k+2); 1; 1 + 1/(k+2); 7/5; 3/2; 7/4; 9/5 - 1/(k+2); 9/5; 9/5 + 1/(k+2).
/// The last one reaches 2.3 at k = 0, above the usual (0, 2] range for a
/// 1/2-averaged target; it is reproduced as printed and run with a relaxed
/// range check.
inline std::array<StepSchedule, 9> dr_step_schedules() {
  return {StepSchedule::minus_inverse(1.0), StepSchedule::constant(1.0),
          StepSchedule::plus_inverse(1.0),  StepSchedule::constant(1.4),
          StepSchedule::constant(1.5),      StepSchedule::constant(1.75),
          StepSchedule::minus_inverse(1.8), StepSchedule::constant(1.8),
          StepSchedule::plus_inverse(1.8)};
}

struct MethodSpec {
  std::string name;
  SchemeConfig config;
  std::string note;  // metadata, e.g. a relaxed range check
};

/// Build a batch method from its preset name: dr1..dr9 (relaxation presets
/// above), halpern, fast-km (uses alpha and step).
inline MethodSpec batch_method_from_name(const std::string& name, double alpha = 30.0,
                                         double step = 2.0) {
  MethodSpec spec;
  spec.name = name;
  if (name.size() == 3 && name.rfind("dr", 0) == 0 && name[2] >= '1' && name[2] <= '9') {
    const auto presets = dr_step_schedules();
    const StepSchedule sched = presets[static_cast<std::size_t>(name[2] - '1')];
    spec.config.method = Method::km;
    spec.config.schedule = sched;
    const double s0 = sched(0);
    if (s0 > 2.0) {
      spec.config.schedule_cap = s0;
      spec.note =
          "range check relaxed to (0, " + detail::compact_number(s0) + "]: preset exceeds 2 at k=0";
    }
    spec.name = "DR " + sched.describe();
    return spec;
  }
  if (name == "halpern") {
    spec.config.method = Method::halpern;
    spec.name = "Halpern s_k = 1 - 1/(k+2)";
    return spec;
  }
  if (name == "fast-km") {
    spec.config.method = Method::fast_km;
    spec.config.alpha = alpha;
    spec.config.step = step;
    spec.name = "Fast KM alpha = " + format_double(alpha);
    return spec;
  }
  throw std::invalid_argument("unknown feasibility method '" + name +
                              "' (expected dr1..dr9, halpern or fast-km)");
}

struct BatchConfig {
  std::size_t n = 1;
  std::size_t n_test = 10;
  std::size_t n_init = 100;
  double tol = 1e-12;
  std::size_t kmax = 100;
  std::vector<MethodSpec> methods;
  std::uint64_t seed = 42;
  std::size_t jobs = 0;  // 0: hardware concurrency
};

struct MethodStats {
  std::string method;
  double ratio = 0.0;
  std::size_t successes = 0;
  std::size_t trials = 0;
  std::optional<double> mean_iters;  // over successful trials; absent when ratio = 0
  std::optional<double> std_iters;
  std::string note;
};

struct BatchResult {
  std::vector<MethodStats> rows;
};

namespace detail {

// stream tags for counter-based seed splitting
inline constexpr std::uint64_t kInstanceStream = 0x1;
inline constexpr std::uint64_t kStartStream = 0x2;

inline void parallel_for(std::size_t count, std::size_t jobs,
                         const std::function<void(std::size_t)>& body) {
  if (jobs == 0) jobs = std::max<unsigned>(1, std::thread::hardware_concurrency());
  jobs = std::min(jobs, count > 0 ? count : 1);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& t : workers) t.join();
}

}  // namespace detail

/// Run every method on every (instance, start) pair. Instances and starts
/// come from independent seeded streams split off the master seed, so the
/// method list never perturbs the sampled problems. Trials execute
/// concurrently; aggregation is by trial index, hence order-independent.
inline BatchResult run_feasibility_batch(const BatchConfig& cfg) {
  if (cfg.n_test < 1 || cfg.n_init < 1) {
    throw std::invalid_argument("run_feasibility_batch: requires n_test, n_init >= 1");
  }
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("run_feasibility_batch: requires tol > 0");

  std::vector<FeasibilityInstance> instances;
  instances.reserve(cfg.n_test);
  for (std::size_t i = 0; i < cfg.n_test; ++i) {
    auto rng = make_rng(split_seed(cfg.seed, detail::kInstanceStream, i));
    instances.push_back(gen_feasibility(cfg.n, rng));
  }

  const std::size_t trials = cfg.n_test * cfg.n_init;
  // iterations-to-success per (method, trial); -1 marks failure
  std::vector<std::vector<long long>> outcome(cfg.methods.size(),
                                              std::vector<long long>(trials, -1));

  detail::parallel_for(trials, cfg.jobs, [&](std::size_t t) {
    const std::size_t i = t / cfg.n_init;
    const std::size_t j = t % cfg.n_init;
    const FeasibilityInstance& inst = instances[i];
    const AveragedOperator op = make_feasibility_dr_operator(inst);
    auto rng = make_rng(split_seed(cfg.seed, detail::kStartStream, i, j));
    const Vector x0 = gen_start(cfg.n, rng);
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      SchemeConfig run_cfg = cfg.methods[m].config;
      run_cfg.kmax = cfg.kmax;
      run_cfg.stop_rule = StopRule::feasibility_shadow;
      run_cfg.keep_vectors = false;
      const Trace tr = run(op, run_cfg, x0, std::nullopt,
                           [&](const Vector& x, std::size_t) {
                             return feasibility_stop(x, inst, cfg.tol);
                           });
      if (tr.terminated_at) {
        outcome[m][t] = static_cast<long long>(*tr.terminated_at);
      }
    }
  });

  BatchResult result;
  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    MethodStats stats;
    stats.method = cfg.methods[m].name;
    stats.note = cfg.methods[m].note;
    stats.trials = trials;
    double sum = 0.0;
    for (long long it : outcome[m]) {
      if (it >= 0) {
        ++stats.successes;
        sum += static_cast<double>(it);
      }
    }
    stats.ratio = static_cast<double>(stats.successes) / static_cast<double>(trials);
    if (stats.successes > 0) {
      const double mean = sum / static_cast<double>(stats.successes);
      double ssq = 0.0;
      for (long long it : outcome[m]) {
        if (it >= 0) {
          const double d = static_cast<double>(it) - mean;
          ssq += d * d;
        }
      }
      stats.mean_iters = mean;
      stats.std_iters = std::sqrt(ssq / static_cast<double>(stats.successes));
    }
    result.rows.push_back(std::move(stats));
  }
  return result;
}

/// Batch CSV row convention: mean/std print as -//- when no trial succeeded.
inline void write_batch_csv(std::ostream& os, const BatchConfig& cfg, const BatchResult& result) {
  os << "method,ratio,mean_iters,std_iters,n,n_test,n_init,tol,kmax,seed\n";
  for (const auto& row : result.rows) {
    os << row.method << ',' << format_double(row.ratio) << ','
       << (row.mean_iters ? format_double(*row.mean_iters) : "-//-") << ','
       << (row.std_iters ? format_double(*row.std_iters) : "-//-") << ',' << cfg.n << ','
       << cfg.n_test << ',' << cfg.n_init << ',' << format_double(cfg.tol) << ',' << cfg.kmax
       << ',' << cfg.seed << "\n";
  }
}

struct RotationRunSpec {
  std::string name;
  SchemeConfig config;
};

struct RotationRunResult {
  std::string name;
  std::filesystem::path csv_path;
  double final_residual = 0.0;
  std::size_t rows = 0;
};

namespace detail {
inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream ofs(path);
  if (!ofs) throw std::runtime_error("cannot open output file: " + path.string());
  return ofs;
}
}  // namespace detail

/// Run the requested methods on the rotation-resolvent problem from the
/// starting point (1_n; 0_n). Writes one trace CSV per method plus a
/// combined residual table. Trajectory coordinates are included when the
/// ambient dimension is at most 4.
inline std::vector<RotationRunResult> run_rotation_experiment(
    std::size_t n, double m_const, const std::vector<RotationRunSpec>& methods,
    const std::filesystem::path& out_dir) {
  const AveragedOperator op = make_rotation_resolvent(n, m_const);
  Vector x0(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) x0[i] = 1.0;

  std::filesystem::create_directories(out_dir);
  std::vector<RotationRunResult> results;
  std::vector<Trace> traces;
  for (const auto& spec : methods) {
    SchemeConfig cfg = spec.config;
    cfg.keep_vectors = cfg.keep_vectors || 2 * n <= 4;
    Trace tr = run(op, cfg, x0);
    RotationRunResult res;
    res.name = spec.name;
    res.csv_path = out_dir / ("rotation_" + spec.name + ".csv");
    res.final_residual = tr.residual.back();
    res.rows = tr.rows();
    auto ofs = detail::open_output(res.csv_path);
    write_trace_csv(ofs, tr);
    results.push_back(std::move(res));
    traces.push_back(std::move(tr));
  }

  auto combined = detail::open_output(out_dir / "rotation_residuals.csv");
  combined << "k";
  for (const auto& spec : methods) combined << ',' << spec.name;
  combined << "\n";
  std::size_t max_rows = 0;
  for (const auto& tr : traces) max_rows = std::max(max_rows, tr.rows());
  for (std::size_t k = 0; k < max_rows; ++k) {
    combined << k;
    for (const auto& tr : traces) {
      combined << ',';
      if (k < tr.rows()) combined << format_double(tr.residual[k]);
    }
    combined << "\n";
  }
  return results;
}

}  // namespace fastkm
