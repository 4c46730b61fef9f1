#include "lqrfit/kalman_fit.hpp"

#include <cmath>
#include <random>

#include "lqrfit/errors.hpp"
#include "lqrfit/fitting.hpp"

namespace lqrfit {

void AdmmConfig::validate() const {
  if (!(rho > 0.0 && std::isfinite(rho))) {
    throw ValidationError("rho must be positive");
  }
  if (n_iter < 1) throw ValidationError("n_iter must be at least 1");
  if (!(eps >= 0.0)) throw ValidationError("eps must be nonnegative");
  if (n_random_inits < 0) {
    throw ValidationError("n_random_inits must be nonnegative");
  }
}

AdmmState AdmmState::zero(const LinearDynamics& dyn) {
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  return {Matrix::Zero(m, n),      Matrix::Zero(n, n), Matrix::Zero(n, n),
          Matrix::Identity(m, m),  Matrix::Zero(n, n), Matrix::Zero(m, n),
          0};
}

AdmmState AdmmState::random(const LinearDynamics& dyn, std::uint64_t seed) {
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
    return M;
  };
  AdmmState state = zero(dyn);
  state.K = draw(m, n);
  const Matrix G = draw(n, n);
  const Matrix H = draw(n, n);
  const Matrix J = draw(m, m);
  state.P = symmetrize(G * G.transpose() / double(n));
  state.Q = symmetrize(H * H.transpose() / double(n));
  state.R = symmetrize(Matrix::Identity(m, m) + J * J.transpose() / double(m));
  return state;
}

AdmmState admm_iterate(const AdmmState& state, const DemoSet& demos,
                       const LossSpec& loss, const RegularizerSpec& reg,
                       const LinearDynamics& dyn, double rho,
                       const PqrOptions& pqr, const KStepOptions& k_step) {
  const Eigen::Index n = dyn.states();
  AdmmState next;
  next.iter = state.iter + 1;
  try {
    const KStepPenalty pen{rho, state.P, state.Q, state.R, state.Y1, state.Y2};
    next.K = solve_k_step(demos, loss, reg, pen, dyn, k_step);
    const PqrWarmStart warm{state.P, state.Q, state.R};
    PqrResult step =
        solve_pqr_step(dyn, next.K, state.Y1, state.Y2, rho, pqr, &warm);
    next.P = std::move(step.P);
    next.Q = std::move(step.Q);
    next.R = std::move(step.R);
  } catch (const Error& e) {
    throw SolverError("ADMM iteration " + std::to_string(next.iter) + ": " +
                      e.what());
  }
  const Matrix M = kalman_constraint_stack(dyn, next.K, next.P, next.Q, next.R);
  next.Y1 = state.Y1 + rho * M.topRows(n);
  next.Y2 = state.Y2 + rho * M.bottomRows(dyn.inputs());
  return next;
}

CertifiedGain certify_gain(const LinearDynamics& dyn,
                           const Eigen::Ref<const Matrix>& Q,
                           const Eigen::Ref<const Matrix>& R) {
  const Eigen::Index n = dyn.states();
  const double unit = 1.0 + Q.norm();
  const Matrix Qs = symmetrize(Q);
  const Matrix Rs = symmetrize(R);
  double shift = 0.0;
  std::string last_error = "not stabilizing";
  for (int attempt = 0; attempt < 8; ++attempt) {
    try {
      const Matrix shifted = Qs + shift * Matrix::Identity(n, n);
      const LqrSolution sol = solve_lqr(dyn, CostMatrices(shifted, Rs));
      if (is_stabilizing(dyn, sol.K)) {
        CertifiedGain out;
        out.K = sol.K;
        out.certificate = make_certificate(dyn, sol.K, sol.P, shifted, Rs);
        out.q_shift = shift;
        return out;
      }
    } catch (const Error& e) {
      last_error = e.what();
    }
    shift = shift == 0.0 ? 1e-8 * unit : shift * 100.0;
  }
  throw SolverError("no stabilizing Riccati gain for recovered (Q, R): " +
                    last_error);
}

namespace {

std::uint64_t run_seed(std::uint64_t master, int init_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master),
                    static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(init_index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (std::uint64_t(words[0]) << 32) | words[1];
}

bool finite_state(const AdmmState& s) {
  return s.K.allFinite() && s.P.allFinite() && s.Q.allFinite() &&
         s.R.allFinite() && s.Y1.allFinite() && s.Y2.allFinite();
}

}  // namespace

KalmanFitReport fit_kalman(const DemoSet& demos, const LossSpec& loss,
                           const RegularizerSpec& reg,
                           const LinearDynamics& dyn,
                           const AdmmConfig& config) {
  config.validate();
  loss.validate();
  reg.validate();
  if (demos.state_dim() != dyn.states() || demos.input_dim() != dyn.inputs()) {
    throw DimensionError("demonstrations do not match the dynamics");
  }

  KalmanFitReport report;
  int best = -1;
  AdmmState best_state;
  for (int start = 0; start <= config.n_random_inits; ++start) {
    AdmmRun run;
    run.init_index = start;
    AdmmState state = start == 0
                          ? AdmmState::zero(dyn)
                          : AdmmState::random(dyn, run_seed(config.seed, start));
    try {
      for (int k = 0; k < config.n_iter; ++k) {
        AdmmState next = admm_iterate(state, demos, loss, reg, dyn,
                                      config.rho, config.pqr, config.k_step);
        if (!finite_state(next)) {
          run.failure = "non-finite iterate at iteration " +
                        std::to_string(next.iter);
          break;
        }
        const double change = (next.K - state.K).norm();
        state = std::move(next);
        if (change < config.eps) {
          run.converged = true;
          break;
        }
      }
    } catch (const Error& e) {
      run.failure = e.what();
    }
    run.iterations = state.iter;
    run.final_state = state;
    if (run.failure.empty()) {
      run.objective = policy_objective(demos, loss, reg, state.K);
      run.residual =
          kalman_residual(dyn, state.K, state.P, state.Q, state.R);
      if (best < 0 || run.objective < report.runs[best].objective) {
        best = start;
        best_state = state;
      }
    }
    report.runs.push_back(std::move(run));
  }

  if (best < 0) {
    std::string msg = "every ADMM run failed:";
    for (const AdmmRun& run : report.runs) {
      msg += " [start " + std::to_string(run.init_index) + ": " + run.failure +
             "]";
    }
    throw SolverError(msg);
  }

  const AdmmRun& winner = report.runs[best];
  report.K = best_state.K;
  report.certificate = make_certificate(dyn, best_state.K, best_state.P,
                                        best_state.Q, best_state.R);
  report.objective = winner.objective;
  report.converged = winner.converged;
  report.iterations = winner.iterations;
  report.init_index = winner.init_index;

  CertifiedGain cert = certify_gain(dyn, best_state.Q, best_state.R);
  report.K_certified = std::move(cert.K);
  report.certified_certificate = std::move(cert.certificate);
  report.q_shift = cert.q_shift;
  return report;
}

}  // namespace lqrfit
