#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "lqrfit/bench.hpp"
#include "lqrfit/errors.hpp"
#include "lqrfit/fitting.hpp"
#include "lqrfit/json_io.hpp"
#include "lqrfit/kalman_fit.hpp"
#include "lqrfit/riccati.hpp"

namespace {

using namespace lqrfit;

constexpr int kConfigError = 1;
constexpr int kSolverError = 2;

struct SystemArgs {
  std::string path;
  std::string builtin;
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--system", path,
                    "JSON with A, B and optional W, Q, R, Sigma");
    cmd->add_option("--experiment", builtin,
                    "Built-in system instead: small_random or aircraft");
    cmd->add_option("--seed", seed, "Seed for the built-in random system");
  }

  SystemSetup load() const {
    if (!path.empty() && !builtin.empty()) {
      throw ValidationError("give either --system or --experiment, not both");
    }
    if (!path.empty()) return setup_from_json(read_json_file(path));
    if (builtin == "small_random" || builtin == "outliers") {
      return build_small_random(seed);
    }
    if (builtin == "aircraft") return build_aircraft();
    if (builtin.empty()) throw ValidationError("--system is required");
    throw ValidationError("no built-in system named '" + builtin + "'");
  }
};

struct FitArgs {
  std::string demos;
  std::string loss = "quadratic";
  double huber_M = 0.5;
  double lambda = 0.01;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--demos", demos, "JSON with states and inputs")->required();
    cmd->add_option("--loss", loss, "quadratic or huber")
        ->check(CLI::IsMember({"quadratic", "huber"}));
    cmd->add_option("--huber-M", huber_M, "Huber threshold");
    cmd->add_option("--lambda", lambda, "Ridge weight");
  }

  LossSpec loss_spec() const {
    return loss == "huber" ? LossSpec::huber(huber_M) : LossSpec::quadratic();
  }
};

void emit(const Json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json_file(out, j);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear policy fitting with Kalman constraints"};
  app.require_subcommand(1);

  std::string out;
  SystemArgs sys_args;
  FitArgs fit_args;

  auto* lqr = app.add_subcommand("lqr", "Solve the discrete LQR problem");
  sys_args.add_to(lqr);
  std::string method = "doubling";
  lqr->add_option("--method", method, "doubling or value_iteration")
      ->check(CLI::IsMember({"doubling", "value_iteration"}));
  lqr->add_option("--out", out, "Output JSON (default stdout)");

  auto* demos = app.add_subcommand("demos", "Sample expert demonstrations");
  sys_args.add_to(demos);
  int count = 20;
  double outlier_prob = 0.0;
  std::uint64_t demo_seed = 0;
  demos->add_option("--count", count, "Number of demonstrations");
  demos->add_option("--outlier-prob", outlier_prob, "Sign-flip probability");
  demos->add_option("--demo-seed", demo_seed, "Seed for the samples");
  demos->add_option("--out", out, "Output JSON (default stdout)");

  auto* fit = app.add_subcommand("fit", "Plain policy fitting");
  fit_args.add_to(fit);
  fit->add_option("--out", out, "Output JSON (default stdout)");

  auto* fitk = app.add_subcommand("fit-kalman",
                                  "Policy fitting with a Kalman constraint");
  sys_args.add_to(fitk);
  fit_args.add_to(fitk);
  AdmmConfig admm;
  bool certify = false;
  fitk->add_option("--rho", admm.rho, "ADMM penalty");
  fitk->add_option("--iters", admm.n_iter, "ADMM iterations per start");
  fitk->add_option("--eps", admm.eps, "Stop when ||dK||_F < eps");
  fitk->add_option("--inits", admm.n_random_inits, "Random starts");
  fitk->add_option("--admm-seed", admm.seed, "Seed for the random starts");
  fitk->add_flag("--certify", certify,
                 "Report the Riccati re-solved gain as the policy");
  fitk->add_option("--out", out, "Output JSON (default stdout)");

  auto* check = app.add_subcommand("check-kalman",
                                   "Decide whether a gain is LQR-optimal");
  sys_args.add_to(check);
  std::string gain_path;
  std::optional<double> tol;
  int max_iter = 20000;
  check->add_option("--gain", gain_path, "JSON gain matrix")->required();
  check->add_option("--tol", tol, "Residual tolerance");
  check->add_option("--max-iter", max_iter, "Solver iteration cap");
  check->add_option("--out", out, "Output JSON (default stdout)");

  auto* exp = app.add_subcommand("experiment", "Run a benchmark sweep");
  std::string config_path;
  std::string exp_name;
  std::optional<std::uint64_t> master_seed;
  std::optional<double> rho, eps;
  std::optional<int> iters;
  std::optional<bool> exp_certify;
  exp->add_option("--config", config_path, "JSON experiment config");
  exp->add_option("--experiment", exp_name,
                  "small_random, aircraft, outliers or custom");
  exp->add_option("--seed", master_seed, "Master seed");
  exp->add_option("--rho", rho, "ADMM penalty");
  exp->add_option("--iters", iters, "ADMM iterations per start");
  exp->add_option("--eps", eps, "ADMM stopping threshold");
  exp->add_flag("--certify,!--no-certify", exp_certify,
                "Evaluate the Riccati re-solved Kalman gain");
  exp->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*lqr) {
      const SystemSetup sys = sys_args.load();
      RiccatiOptions opts;
      if (method == "value_iteration") {
        opts.method = RiccatiMethod::kValueIteration;
      }
      const LqrSolution sol = solve_lqr(sys.dyn, sys.cost, opts);
      Json j = to_json(sol);
      j["closed_loop_cost"] = closed_loop_cost(sys.dyn, sys.cost, sol.K);
      j["spectral_radius"] = spectral_radius(sys.dyn.closed_loop(sol.K));
      emit(j, out);
    } else if (*demos) {
      const SystemSetup sys = sys_args.load();
      const LqrSolution sol = solve_lqr(sys.dyn, sys.cost);
      emit(demos_to_json(generate_demos(sys.dyn, sol.K, sys.input_noise, count,
                                        outlier_prob, demo_seed)),
           out);
    } else if (*fit) {
      const DemoSet d = demos_from_json(read_json_file(fit_args.demos));
      emit(to_json(policy_fit(d, fit_args.loss_spec(),
                              RegularizerSpec::ridge(fit_args.lambda))),
           out);
    } else if (*fitk) {
      const SystemSetup sys = sys_args.load();
      const DemoSet d = demos_from_json(read_json_file(fit_args.demos));
      const KalmanFitReport report =
          fit_kalman(d, fit_args.loss_spec(),
                     RegularizerSpec::ridge(fit_args.lambda), sys.dyn, admm);
      Json j = to_json(report);
      const Gain& policy = certify ? report.K_certified : report.K;
      j["policy"] = matrix_to_json(policy);
      j["closed_loop_cost"] = closed_loop_cost(sys.dyn, sys.cost, policy);
      emit(j, out);
    } else if (*check) {
      const SystemSetup sys = sys_args.load();
      const Gain K = gain_from_json(read_json_file(gain_path));
      emit(to_json(check_kalman_feasible(sys.dyn, K, tol, max_iter)), out);
    } else if (*exp) {
      ExperimentConfig config;
      if (!config_path.empty()) {
        config = config_from_json(read_json_file(config_path));
        if (!config.dynamics_path.empty()) {
          const std::filesystem::path p(config.dynamics_path);
          if (p.is_relative()) {
            config.dynamics_path =
                (std::filesystem::path(config_path).parent_path() / p).string();
          }
        }
      }
      if (!exp_name.empty()) config.experiment = parse_experiment_kind(exp_name);
      if (master_seed) config.master_seed = *master_seed;
      if (rho) config.admm.rho = *rho;
      if (iters) config.admm.n_iter = *iters;
      if (eps) config.admm.eps = *eps;
      if (exp_certify) config.certify = *exp_certify;
      config.validate();
      const ExperimentResult result = run_experiment(config, out);
      std::cout << summary_to_json(result).dump(2) << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverError;
  }
  return 0;
}
