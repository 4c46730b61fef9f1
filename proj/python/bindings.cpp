#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lqrfit/bench.hpp"
#include "lqrfit/errors.hpp"
#include "lqrfit/fitting.hpp"
#include "lqrfit/json_io.hpp"
#include "lqrfit/kalman_fit.hpp"
#include "lqrfit/riccati.hpp"

namespace py = pybind11;
using namespace lqrfit;

namespace {

LinearDynamics make_dynamics(const Matrix& A, const Matrix& B,
                             const std::optional<Matrix>& W) {
  if (W) return LinearDynamics(A, B, *W);
  return LinearDynamics(A, B);
}

LossSpec make_loss(const std::string& loss, double M) {
  if (loss == "quadratic") return LossSpec::quadratic();
  if (loss == "huber") return LossSpec::huber(M);
  throw ValidationError("loss must be 'quadratic' or 'huber'");
}

py::dict certificate_dict(const KalmanCertificate& c) {
  py::dict d;
  d["P"] = c.P;
  d["Q"] = c.Q;
  d["R"] = c.R;
  d["residual"] = c.residual;
  return d;
}

py::dict setup_dict(const SystemSetup& s) {
  py::dict d;
  d["A"] = s.dyn.A();
  d["B"] = s.dyn.B();
  d["W"] = s.dyn.W();
  d["Q"] = s.cost.Q();
  d["R"] = s.cost.R();
  d["Sigma"] = s.input_noise;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Linear policy fitting with Kalman constraints";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<SingularSystemError>(m, "SingularSystemError",
                                              base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<SolverError>(m, "SolverError", base.ptr());

  m.def(
      "solve_lqr",
      [](const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
         const std::string& method) {
        RiccatiOptions opts;
        if (method == "value_iteration") {
          opts.method = RiccatiMethod::kValueIteration;
        } else if (method != "doubling") {
          throw ValidationError("method must be 'doubling' or 'value_iteration'");
        }
        const LqrSolution s = solve_lqr(LinearDynamics(A, B), CostMatrices(Q, R), opts);
        py::dict d;
        d["K"] = s.K;
        d["P"] = s.P;
        d["iterations"] = s.iterations;
        d["residual"] = s.residual;
        return d;
      },
      py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"),
      py::arg("method") = "doubling");

  m.def(
      "closed_loop_cost",
      [](const Matrix& A, const Matrix& B, const Matrix& W, const Matrix& Q,
         const Matrix& R, const Matrix& K) {
        return closed_loop_cost(LinearDynamics(A, B, W), CostMatrices(Q, R), K);
      },
      py::arg("A"), py::arg("B"), py::arg("W"), py::arg("Q"), py::arg("R"),
      py::arg("K"), "Average cost tr(W P_cl); inf when A + BK is unstable.");

  m.def("spectral_radius", [](const Matrix& M) { return spectral_radius(M); });

  m.def(
      "kalman_residual",
      [](const Matrix& A, const Matrix& B, const Matrix& K, const Matrix& P,
         const Matrix& Q, const Matrix& R) {
        return kalman_residual(LinearDynamics(A, B), K, P, Q, R);
      },
      py::arg("A"), py::arg("B"), py::arg("K"), py::arg("P"), py::arg("Q"),
      py::arg("R"));

  m.def(
      "check_kalman_feasible",
      [](const Matrix& A, const Matrix& B, const Matrix& K,
         std::optional<double> tol, int max_iter) {
        const FeasibilityReport r =
            check_kalman_feasible(LinearDynamics(A, B), K, tol, max_iter);
        py::dict d = certificate_dict(r.certificate);
        d["feasible"] = r.feasible;
        d["tolerance"] = r.tolerance;
        d["iterations"] = r.iterations;
        return d;
      },
      py::arg("A"), py::arg("B"), py::arg("K"), py::arg("tol") = py::none(),
      py::arg("max_iter") = 20000);

  m.def("project_psd", [](const Matrix& S, double floor) { return project_psd(S, floor); },
        py::arg("S"), py::arg("floor") = 0.0);
  m.def("huber_value", &huber_value, py::arg("a"), py::arg("M"));

  m.def(
      "policy_fit",
      [](const Matrix& states, const Matrix& inputs, const std::string& loss,
         double M, double lam) {
        const FitReport r = policy_fit(DemoSet(states, inputs),
                                       make_loss(loss, M),
                                       RegularizerSpec::ridge(lam));
        py::dict d;
        d["K"] = r.K;
        d["objective"] = r.objective;
        return d;
      },
      py::arg("states"), py::arg("inputs"), py::arg("loss") = "quadratic",
      py::arg("M") = 0.5, py::arg("lam") = 0.01,
      "states is n x N and inputs is m x N, one column per demonstration.");

  m.def(
      "fit_kalman",
      [](const Matrix& A, const Matrix& B, const Matrix& states,
         const Matrix& inputs, const std::optional<Matrix>& W,
         const std::string& loss, double M, double lam, double rho, int n_iter,
         double eps, int n_random_inits, std::uint64_t seed) {
        AdmmConfig cfg;
        cfg.rho = rho;
        cfg.n_iter = n_iter;
        cfg.eps = eps;
        cfg.n_random_inits = n_random_inits;
        cfg.seed = seed;
        const KalmanFitReport r =
            fit_kalman(DemoSet(states, inputs), make_loss(loss, M),
                       RegularizerSpec::ridge(lam), make_dynamics(A, B, W), cfg);
        py::dict d = certificate_dict(r.certificate);
        d["K"] = r.K;
        d["K_certified"] = r.K_certified;
        d["objective"] = r.objective;
        d["converged"] = r.converged;
        d["iterations"] = r.iterations;
        d["init_index"] = r.init_index;
        d["q_shift"] = r.q_shift;
        d["certified_certificate"] = certificate_dict(r.certified_certificate);
        return d;
      },
      py::arg("A"), py::arg("B"), py::arg("states"), py::arg("inputs"),
      py::arg("W") = py::none(), py::arg("loss") = "quadratic",
      py::arg("M") = 0.5, py::arg("lam") = 0.01, py::arg("rho") = 1.0,
      py::arg("n_iter") = 200, py::arg("eps") = 1e-6,
      py::arg("n_random_inits") = 5, py::arg("seed") = 0);

  m.def(
      "generate_demos",
      [](const Matrix& A, const Matrix& B, const Matrix& W, const Matrix& K,
         const Matrix& Sigma, long count, double outlier_prob,
         std::uint64_t seed) {
        const DemoSet d = generate_demos(LinearDynamics(A, B, W), K, Sigma,
                                         count, outlier_prob, seed);
        return py::make_tuple(d.states(), d.inputs());
      },
      py::arg("A"), py::arg("B"), py::arg("W"), py::arg("K"),
      py::arg("Sigma"), py::arg("count"), py::arg("outlier_prob") = 0.0,
      py::arg("seed") = 0, "Returns (states n x N, inputs m x N).");

  m.def("build_small_random", [](std::uint64_t seed) {
    return setup_dict(build_small_random(seed));
  }, py::arg("seed"));
  m.def("build_aircraft", [] { return setup_dict(build_aircraft()); });

  m.def(
      "_run_experiment",
      [](const std::string& config_json, const std::string& output_dir) {
        const ExperimentConfig cfg = config_from_json(Json::parse(config_json));
        const ExperimentResult r = output_dir.empty()
                                       ? run_experiment(cfg)
                                       : run_experiment(cfg, output_dir);
        return summary_to_json(r).dump();
      },
      py::arg("config_json"), py::arg("output_dir") = "");
}
