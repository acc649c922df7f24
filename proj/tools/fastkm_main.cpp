#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fastkm/fastkm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_run_json(const fs::path& out_dir, const json& resolved) {
  fs::create_directories(out_dir);
  std::ofstream ofs(out_dir / "run.json");
  if (!ofs) throw std::runtime_error("cannot open output file: " + (out_dir / "run.json").string());
  ofs << resolved.dump(2) << "\n";
}

struct RotationArgs {
  std::size_t n = 5000;
  double m_const = 2.0;
  std::string methods = "bp,km,halpern,appm,fast-km";
  double alpha = 3.0;
  double step = 0.0;
  bool step_given = false;
  std::size_t kmax = 10000;
  std::string out = ".";
};

int cmd_rotation(const RotationArgs& args) {
  const double theta = 0.5;  // rotation resolvent averagedness
  std::vector<fastkm::RotationRunSpec> specs;
  json resolved_steps = json::object();
  for (const auto& name : split_list(args.methods)) {
    const auto method = fastkm::method_from_name(name);
    if (!method) throw std::invalid_argument("unknown method '" + name + "'");
    fastkm::SchemeConfig cfg;
    cfg.method = *method;
    cfg.kmax = args.kmax;
    cfg.alpha = args.alpha;
    if (*method == fastkm::Method::fast_km) {
      cfg.step = args.step_given ? args.step : fastkm::max_step_fast_km(theta);
      resolved_steps["resolved_step_" + name] = cfg.step;
    } else if (*method == fastkm::Method::fast_ogda) {
      cfg.step = args.step_given ? args.step : 0.5 * fastkm::max_step_fast_ogda(theta);
      resolved_steps["resolved_step_" + name] = cfg.step;
    }
    specs.push_back({name, cfg});
  }

  const auto results =
      fastkm::run_rotation_experiment(args.n, args.m_const, specs, fs::path(args.out));

  json run = {{"version", fastkm::kVersion}, {"subcommand", "rotation"},
              {"n", args.n},                 {"m_const", args.m_const},
              {"methods", args.methods},     {"alpha", args.alpha},
              {"step", args.step_given ? json(args.step) : json()},
              {"kmax", args.kmax},           {"out", args.out}};
  run.update(resolved_steps);
  write_run_json(args.out, run);

  for (const auto& r : results) {
    std::cout << r.name << ": " << r.rows - 1 << " iterations, final residual "
              << fastkm::format_double(r.final_residual) << " -> " << r.csv_path.string() << "\n";
  }
  return 0;
}

struct FeasibilityArgs {
  std::size_t n = 1;
  std::size_t ntest = 10;
  std::size_t ninit = 100;
  double tol = 1e-12;
  std::size_t kmax = 100;
  std::uint64_t seed = 42;
  std::string methods = "dr1,dr2,dr3,dr4,dr5,dr6,dr7,dr8,dr9,halpern,fast-km";
  std::string alpha = "30";
  double step = 2.0;
  std::size_t jobs = 0;
  std::string out = ".";
};

int cmd_feasibility(const FeasibilityArgs& args) {
  fastkm::BatchConfig cfg;
  cfg.n = args.n;
  cfg.n_test = args.ntest;
  cfg.n_init = args.ninit;
  cfg.tol = args.tol;
  cfg.kmax = args.kmax;
  cfg.seed = args.seed;
  cfg.jobs = args.jobs;
  for (const auto& name : split_list(args.methods)) {
    if (name == "fast-km") {
      for (const auto& alpha_str : split_list(args.alpha)) {
        cfg.methods.push_back(
            fastkm::batch_method_from_name(name, std::stod(alpha_str), args.step));
      }
    } else {
      cfg.methods.push_back(fastkm::batch_method_from_name(name));
    }
  }

  const fastkm::BatchResult result = fastkm::run_feasibility_batch(cfg);

  fs::create_directories(args.out);
  const fs::path csv_path = fs::path(args.out) / "feasibility_batch.csv";
  std::ofstream ofs(csv_path);
  if (!ofs) throw std::runtime_error("cannot open output file: " + csv_path.string());
  fastkm::write_batch_csv(ofs, cfg, result);

  std::string notes;
  for (const auto& row : result.rows) {
    if (!row.note.empty()) notes += (notes.empty() ? "" : "; ") + row.method + ": " + row.note;
  }
  json run = {{"version", fastkm::kVersion},
              {"subcommand", "feasibility"},
              {"n", args.n},
              {"ntest", args.ntest},
              {"ninit", args.ninit},
              {"tol", args.tol},
              {"kmax", args.kmax},
              {"seed", args.seed},
              {"methods", args.methods},
              {"alpha", args.alpha},
              {"step", args.step},
              {"jobs", args.jobs},
              {"out", args.out},
              {"notes", notes}};
  write_run_json(args.out, run);

  std::printf("%-34s  %-8s  %s\n", "method", "ratio", "iterations");
  for (const auto& row : result.rows) {
    if (row.mean_iters) {
      std::printf("%-34s  %.4f    %.4f +/- %.2f\n", row.method.c_str(), row.ratio,
                  *row.mean_iters, *row.std_iters);
    } else {
      std::printf("%-34s  %.4f    -//-\n", row.method.c_str(), row.ratio);
    }
  }
  std::cout << "batch written to " << csv_path.string() << "\n";
  return 0;
}

struct DiagnoseArgs {
  double alpha = 3.0;
  double lambda = 0.0;
  bool lambda_given = false;
  std::string trace;
  std::size_t n = 1;
  double m_const = 2.0;
  double step = 2.0;
  std::size_t kmax = 2000;
  std::size_t burn_in = 0;
  bool burn_in_given = false;
  std::string out = ".";
};

int cmd_diagnose(const DiagnoseArgs& args) {
  const fastkm::LambdaWindow window = fastkm::lambda_window(args.alpha);
  const double lambda = args.lambda_given ? args.lambda : 0.5 * (window.lo + window.hi);
  // validates lambda against the open window; throws std::domain_error outside
  const std::size_t k_lambda = fastkm::threshold_index(args.alpha, lambda);

  json report = {{"alpha", args.alpha},
                 {"lambda", lambda},
                 {"lambda_window", {window.lo, window.hi}},
                 {"k_lambda", k_lambda},
                 {"sup_tail_k_res", nullptr},
                 {"loglog_slope", nullptr},
                 {"plateau_ratios", nullptr},
                 {"energy_min", nullptr},
                 {"descent_violations", nullptr}};

  std::optional<fastkm::Trace> trace;
  std::optional<fastkm::EnergySpec> espec;
  double theta = 0.5;
  if (!args.trace.empty()) {
    std::ifstream ifs(args.trace);
    if (!ifs) throw std::runtime_error("cannot open trace file: " + args.trace);
    trace = fastkm::read_trace_csv(ifs);
    // norm-only columns: rate diagnostics apply, energy diagnostics need
    // the residual vectors and are skipped
  } else {
    const auto op = fastkm::make_rotation_resolvent(args.n, args.m_const);
    theta = op.theta;
    fastkm::SchemeConfig cfg;
    cfg.method = fastkm::Method::fast_km;
    cfg.alpha = args.alpha;
    cfg.step = args.step;
    cfg.kmax = args.kmax;
    cfg.keep_vectors = true;
    // start from (1_n; 0_n), matching the rotation experiment
    fastkm::Vector x0(2 * args.n, 0.0);
    for (std::size_t i = 0; i < args.n; ++i) x0[i] = 1.0;
    trace = fastkm::run(op, cfg, x0);
    espec = fastkm::EnergySpec{fastkm::Vector(2 * args.n, 0.0), lambda, args.alpha, args.step};
  }

  const std::size_t burn_in = args.burn_in_given ? args.burn_in : trace->rows() / 5;
  const fastkm::RateFit fit = fastkm::rate_fit(*trace, burn_in);
  report["burn_in"] = burn_in;
  report["sup_tail_k_res"] = fit.sup_tail_k_res;
  report["loglog_slope"] = fit.loglog_slope ? json(*fit.loglog_slope) : json("converged");

  if (espec && trace->has_vectors()) {
    double energy_min = fastkm::energy_at(*trace, *espec, 1);
    for (std::size_t k = 2; k < trace->rows(); ++k) {
      energy_min = std::min(energy_min, fastkm::energy_at(*trace, *espec, k));
    }
    report["energy_min"] = energy_min;
    report["descent_violations"] = fastkm::count_descent_violations(*trace, *espec, k_lambda);
    const auto summ = fastkm::summability_report(*trace, espec->x_star, theta, espec->s);
    json plateau = json::object();
    plateau["s1"] = summ.plateau_s1 ? json(*summ.plateau_s1) : json();
    plateau["s2"] = summ.plateau_s2 ? json(*summ.plateau_s2) : json();
    plateau["s3"] = summ.plateau_s3 ? json(*summ.plateau_s3) : json();
    plateau["s4"] = summ.plateau_s4 ? json(*summ.plateau_s4) : json();
    report["plateau_ratios"] = plateau;
  }

  fs::create_directories(args.out);
  const fs::path report_path = fs::path(args.out) / "diagnostics.json";
  std::ofstream ofs(report_path);
  if (!ofs) throw std::runtime_error("cannot open output file: " + report_path.string());
  ofs << report.dump(2) << "\n";

  json run = {{"version", fastkm::kVersion},
              {"subcommand", "diagnose"},
              {"alpha", args.alpha},
              {"lambda", lambda},
              {"trace", args.trace.empty() ? json() : json(args.trace)},
              {"n", args.n},
              {"m_const", args.m_const},
              {"step", args.step},
              {"kmax", args.kmax},
              {"burn_in", burn_in},
              {"out", args.out}};
  write_run_json(args.out, run);

  std::cout << report.dump(2) << "\n";
  return 0;
}

struct CheckArgs {
  std::string op_name = "rotation";
  std::size_t pairs = 1000;
  std::uint64_t seed = 7;
  std::size_t n = 2;
  double m_const = 2.0;
  std::string out = ".";
};

int cmd_check(const CheckArgs& args) {
  std::size_t failures = 0;
  auto report_cocoercivity = [&](const char* label, const fastkm::AveragedOperator& op) {
    const auto rep = fastkm::check_cocoercivity(op, args.pairs, args.seed);
    std::printf("%-24s pairs=%zu violations=%zu worst_margin=%s\n", label, args.pairs,
                rep.violations, fastkm::format_double(rep.worst_margin).c_str());
    failures += rep.violations;
  };

  auto rng = fastkm::make_rng(fastkm::split_seed(args.seed, 0xC0));
  if (args.op_name == "rotation") {
    const auto op = fastkm::make_rotation_resolvent(args.n, args.m_const);
    report_cocoercivity("rotation resolvent", op);
    // resolvent identity (Id + A) o J_A = Id and skewness of A
    const fastkm::RotationMap amap{args.n, args.m_const};
    std::size_t identity_bad = 0;
    double worst_skew = 0.0;
    for (int i = 0; i < 100; ++i) {
      const auto x = fastkm::sample_standard_normal(op.dim, rng);
      const auto jx = fastkm::evaluate(op, x);
      const auto back = fastkm::add(jx, amap.apply(jx));
      if (fastkm::dist(back, x) > 1e-12 * (1.0 + fastkm::norm(x))) ++identity_bad;
      worst_skew = std::max(worst_skew,
                            std::abs(fastkm::dot(amap.apply(x), x)) / (1.0 + fastkm::norm_sq(x)));
    }
    std::printf("%-24s failures=%zu worst_skew=%s\n", "resolvent identity", identity_bad,
                fastkm::format_double(worst_skew).c_str());
    failures += identity_bad;
    if (worst_skew > 1e-12) ++failures;
  } else if (args.op_name == "dr-feasibility") {
    auto inst_rng = fastkm::make_rng(fastkm::split_seed(args.seed, 0x1, 0));
    const auto inst = fastkm::gen_feasibility(args.n, inst_rng);
    report_cocoercivity("feasibility T_DR", fastkm::make_feasibility_dr_operator(inst));
    // three-operator reductions: no forward term gives T_DR, trivial second
    // resolvent gives T_FB
    const std::size_t dim = 2 * args.n;
    auto ja = [](const fastkm::Vector& x) { return fastkm::project_nonnegative(x); };
    auto jb = [u = inst.u, nu = inst.nu](const fastkm::Vector& x) {
      return fastkm::project_hyperplane(u, nu, x);
    };
    auto ident = [](const fastkm::Vector& x) { return x; };
    fastkm::ForwardTerm fw{[](const fastkm::Vector& x) { return fastkm::scaled(0.5, x); }, 2.0};
    const auto t_dy0 = fastkm::make_davis_yin(ja, jb, std::nullopt, 1.0, dim);
    const auto t_dr = fastkm::make_douglas_rachford(ja, jb, dim);
    const auto t_dyfb = fastkm::make_davis_yin(ja, ident, fw, 1.0, dim);
    const auto t_fb = fastkm::make_forward_backward(ja, fw, 1.0, dim);
    std::size_t reduction_bad = 0;
    for (int i = 0; i < 100; ++i) {
      const auto x = fastkm::sample_standard_normal(dim, rng);
      if (fastkm::dist(fastkm::evaluate(t_dy0, x), fastkm::evaluate(t_dr, x)) > 1e-12)
        ++reduction_bad;
      if (fastkm::dist(fastkm::evaluate(t_dyfb, x), fastkm::evaluate(t_fb, x)) > 1e-12)
        ++reduction_bad;
    }
    std::printf("%-24s failures=%zu\n", "splitting reductions", reduction_bad);
    failures += reduction_bad;
  } else if (args.op_name == "bad-theta") {
    // deliberately mis-declared averagedness: -Id is not 1/2-averaged
    fastkm::AveragedOperator op{args.n, 0.5,
                                [](const fastkm::Vector& x) { return fastkm::scaled(-1.0, x); },
                                std::nullopt};
    report_cocoercivity("bad-theta fixture", op);
  } else {
    throw std::invalid_argument("unknown operator '" + args.op_name +
                                "' (expected rotation, dr-feasibility or bad-theta)");
  }

  json run = {{"version", fastkm::kVersion}, {"subcommand", "check"},
              {"operator", args.op_name},    {"pairs", args.pairs},
              {"seed", args.seed},           {"n", args.n},
              {"m_const", args.m_const},     {"out", args.out}};
  write_run_json(args.out, run);

  if (failures > 0) {
    std::cout << "CHECK FAILED (" << failures << " violations)\n";
    return 1;
  }
  std::cout << "all checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fixed point solvers for averaged operators: momentum-accelerated "
               "Krasnosel'skii-Mann iteration, baselines, and rate diagnostics"};
  app.require_subcommand(1);

  RotationArgs rot;
  auto* rot_cmd = app.add_subcommand("rotation", "run solvers on the rotation-resolvent problem");
  rot_cmd->add_option("--n", rot.n, "pair count; ambient dimension is 2n")->capture_default_str();
  rot_cmd->add_option("--m-const", rot.m_const, "rotation constant M > 1")->capture_default_str();
  rot_cmd->add_option("--methods", rot.methods, "comma list: bp,km,halpern,appm,fast-km,fast-ogda")
      ->capture_default_str();
  rot_cmd->add_option("--alpha", rot.alpha, "momentum parameter (> 2)")->capture_default_str();
  rot_cmd->add_option("--step", rot.step, "step size for fast-km/fast-ogda (default: largest admissible)");
  rot_cmd->add_option("--kmax", rot.kmax, "iteration budget")->capture_default_str();
  rot_cmd->add_option("--out", rot.out, "output directory")->envname("FASTKM_OUT")
      ->capture_default_str();

  FeasibilityArgs fea;
  auto* fea_cmd = app.add_subcommand("feasibility", "orthant/hyperplane feasibility benchmark");
  fea_cmd->add_option("--n", fea.n, "pair count; ambient dimension is 2n")->capture_default_str();
  fea_cmd->add_option("--ntest", fea.ntest, "number of generated instances")->capture_default_str();
  fea_cmd->add_option("--ninit", fea.ninit, "starting points per instance")->capture_default_str();
  fea_cmd->add_option("--tol", fea.tol, "shadow-distance tolerance")->capture_default_str();
  fea_cmd->add_option("--kmax", fea.kmax, "iteration budget per trial")->capture_default_str();
  fea_cmd->add_option("--seed", fea.seed, "master seed")->capture_default_str();
  fea_cmd->add_option("--methods", fea.methods, "comma list: dr1..dr9, halpern, fast-km")
      ->capture_default_str();
  fea_cmd->add_option("--alpha", fea.alpha, "comma list of alphas for fast-km")
      ->capture_default_str();
  fea_cmd->add_option("--step", fea.step, "fast-km step size")->capture_default_str();
  fea_cmd->add_option("--jobs", fea.jobs, "worker threads (0 = all processors)")
      ->capture_default_str();
  fea_cmd->add_option("--out", fea.out, "output directory")->envname("FASTKM_OUT")
      ->capture_default_str();

  DiagnoseArgs dia;
  auto* dia_cmd = app.add_subcommand("diagnose", "energy/rate diagnostics for a trace");
  dia_cmd->add_option("--alpha", dia.alpha, "momentum parameter (> 2)")->capture_default_str();
  auto* lambda_opt = dia_cmd->add_option("--lambda", dia.lambda,
                                         "energy parameter (default: window midpoint)");
  dia_cmd->add_option("--trace", dia.trace, "trace CSV to analyze (norm diagnostics only)");
  dia_cmd->add_option("--n", dia.n, "rotation pair count for a fresh run")->capture_default_str();
  dia_cmd->add_option("--m-const", dia.m_const, "rotation constant M > 1")->capture_default_str();
  dia_cmd->add_option("--step", dia.step, "step size for the fresh run")->capture_default_str();
  dia_cmd->add_option("--kmax", dia.kmax, "iteration budget for the fresh run")
      ->capture_default_str();
  auto* burn_opt = dia_cmd->add_option("--burn-in", dia.burn_in, "tail start (default kmax/5)");
  dia_cmd->add_option("--out", dia.out, "output directory")->envname("FASTKM_OUT")
      ->capture_default_str();

  CheckArgs chk;
  auto* chk_cmd = app.add_subcommand("check", "operator self-tests (cocoercivity, reductions)");
  chk_cmd->add_option("--operator", chk.op_name, "rotation | dr-feasibility | bad-theta")
      ->capture_default_str();
  chk_cmd->add_option("--pairs", chk.pairs, "sampled pairs")->capture_default_str();
  chk_cmd->add_option("--seed", chk.seed, "sampling seed")->capture_default_str();
  chk_cmd->add_option("--n", chk.n, "pair count; ambient dimension is 2n")->capture_default_str();
  chk_cmd->add_option("--m-const", chk.m_const, "rotation constant M > 1")->capture_default_str();
  chk_cmd->add_option("--out", chk.out, "output directory")->envname("FASTKM_OUT")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  rot.step_given = rot_cmd->count("--step") > 0;
  dia.lambda_given = lambda_opt->count() > 0;
  dia.burn_in_given = burn_opt->count() > 0;

  try {
    if (rot_cmd->parsed()) return cmd_rotation(rot);
    if (fea_cmd->parsed()) return cmd_feasibility(fea);
    if (dia_cmd->parsed()) return cmd_diagnose(dia);
    if (chk_cmd->parsed()) return cmd_check(chk);
  } catch (const std::invalid_argument& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
