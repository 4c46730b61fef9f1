#include <doctest.h>

#include "lqrfit/bench.hpp"
#include "lqrfit/errors.hpp"
#include "lqrfit/fitting.hpp"
#include "lqrfit/kalman_fit.hpp"
#include "support/oracles.hpp"

using namespace lqrfit;

TEST_SUITE("kalman_fit") {

TEST_CASE("config validation") {
  AdmmConfig c;
  CHECK_NOTHROW(c.validate());
  c.rho = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = AdmmConfig();
  c.n_iter = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = AdmmConfig();
  c.n_random_inits = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("exact LQR data is a fixed point") {
  SystemSetup sys = build_small_random(1);
  LqrSolution sol = solve_lqr(sys.dyn, sys.cost);
  DemoSet demos = generate_demos(sys.dyn, sol.K, Matrix::Zero(2, 2), 30, 0.0, 2);
  AdmmState s{sol.K, sol.P, sys.cost.Q(), sys.cost.R(), Matrix::Zero(4, 4),
              Matrix::Zero(2, 4), 0};
  AdmmState next = admm_iterate(s, demos, LossSpec::quadratic(),
                                RegularizerSpec::ridge(0.0), sys.dyn, 1.0);
  CHECK(next.iter == 1);
  CHECK((next.K - s.K).norm() <= 1e-8);
  CHECK(kalman_residual(sys.dyn, next.K, next.P, next.Q, next.R) <= 1e-8);
  CHECK(next.Y1.norm() <= 1e-8);
  CHECK(next.Y2.norm() <= 1e-8);
}

TEST_CASE("one iterate from zero is cone-feasible and updates the duals") {
  SystemSetup sys = build_small_random(2);
  Gain Kstar = solve_lqr(sys.dyn, sys.cost).K;
  DemoSet demos = generate_demos(sys.dyn, Kstar, sys.input_noise, 10, 0.0, 3);
  AdmmState s = AdmmState::zero(sys.dyn);
  AdmmState next = admm_iterate(s, demos, LossSpec::quadratic(),
                                RegularizerSpec::ridge(0.01), sys.dyn, 1.0);
  CHECK(cone_feasible(next.P, next.Q, next.R));
  Matrix M = kalman_constraint_stack(sys.dyn, next.K, next.P, next.Q, next.R);
  CHECK((next.Y1 - M.topRows(4)).norm() <= 1e-12);
  CHECK((next.Y2 - M.bottomRows(2)).norm() <= 1e-12);
}

TEST_CASE("zero demonstrations give the zero solution") {
  SystemSetup sys = build_small_random(4);
  DemoSet demos(Matrix::Zero(4, 5), Matrix::Zero(2, 5));
  KalmanFitReport r = fit_kalman(demos, LossSpec::quadratic(),
                                 RegularizerSpec::ridge(0.01), sys.dyn);
  CHECK(r.certificate.residual <= 1e-6);
  CHECK(r.K.norm() <= 1e-6);
}

TEST_CASE("noiseless recovery") {
  SystemSetup sys = build_small_random(0);
  LqrSolution sol = solve_lqr(sys.dyn, sys.cost);
  DemoSet demos = generate_demos(sys.dyn, sol.K, Matrix::Zero(2, 2), 50, 0.0, 6);
  KalmanFitReport r = fit_kalman(demos, LossSpec::quadratic(),
                                 RegularizerSpec::ridge(0.01), sys.dyn);
  CHECK((r.K - sol.K).norm() <= 1e-2);
  CHECK(r.certificate.residual <= 1e-3);
  CHECK(r.certificate.residual ==
        doctest::Approx(kalman_residual(sys.dyn, r.K, r.certificate)).epsilon(1e-12));
}

TEST_CASE("report invariants") {
  SystemSetup sys = build_small_random(5);
  Gain Kstar = solve_lqr(sys.dyn, sys.cost).K;
  DemoSet demos = generate_demos(sys.dyn, Kstar, sys.input_noise, 3, 0.0, 7);
  AdmmConfig cfg;
  cfg.n_iter = 60;
  cfg.seed = 99;
  KalmanFitReport r = fit_kalman(demos, LossSpec::quadratic(), RegularizerSpec::ridge(0.01),
                                 sys.dyn, cfg);
  CHECK(r.runs.size() == 6);
  for (const AdmmRun& run : r.runs) {
    if (run.failure.empty()) CHECK(r.objective <= run.objective);
  }
  CHECK(r.objective == doctest::Approx(policy_objective(demos, LossSpec::quadratic(),
                                                        RegularizerSpec::ridge(0.01), r.K))
                           .epsilon(1e-12));
  CHECK(is_stabilizing(sys.dyn, r.K_certified));
  CHECK(r.certified_certificate.residual <= 1e-8 * (1 + r.certified_certificate.P.norm()));
  CHECK(kalman_residual(sys.dyn, r.K_certified, r.certified_certificate) <=
        1e-8 * (1 + r.certified_certificate.P.norm()));
  CHECK(cone_feasible(r.certificate.P, r.certificate.Q, r.certificate.R));

  KalmanFitReport again = fit_kalman(demos, LossSpec::quadratic(),
                                     RegularizerSpec::ridge(0.01), sys.dyn, cfg);
  CHECK(again.K == r.K);
  CHECK(again.K_certified == r.K_certified);
  CHECK(again.certificate.P == r.certificate.P);
  CHECK(again.objective == r.objective);
}

TEST_CASE("single demonstration still yields a stabilizing certified gain") {
  AdmmConfig cfg;
  cfg.n_iter = 80;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SystemSetup sys = build_small_random(seed);
    Gain Kstar = solve_lqr(sys.dyn, sys.cost).K;
    DemoSet demos = generate_demos(sys.dyn, Kstar, sys.input_noise, 1, 0.0, seed + 50);
    KalmanFitReport r = fit_kalman(demos, LossSpec::quadratic(),
                                   RegularizerSpec::ridge(0.01), sys.dyn, cfg);
    CHECK(spectral_radius(sys.dyn.closed_loop(r.K_certified)) < 1.0);
  }
}

TEST_CASE("fixed point restatement of the second block") {
  SystemSetup sys = build_small_random(8);
  LqrSolution sol = solve_lqr(sys.dyn, sys.cost);
  DemoSet demos = generate_demos(sys.dyn, sol.K, Matrix::Zero(2, 2), 40, 0.0, 8);
  KalmanFitReport r = fit_kalman(demos, LossSpec::quadratic(), RegularizerSpec::ridge(0.0),
                                 sys.dyn);
  const Matrix& P = r.certificate.P;
  const Matrix& B = sys.dyn.B();
  Matrix lhs = (r.certificate.R + B.transpose() * P * B) * r.K;
  Matrix rhs = -B.transpose() * P * sys.dyn.A();
  CHECK((lhs - rhs).norm() <= 1e-6 + r.certificate.residual);
}

TEST_CASE("certify_gain") {
  SystemSetup sys = build_small_random(9);
  CertifiedGain c = certify_gain(sys.dyn, Matrix::Identity(4, 4), Matrix::Identity(2, 2));
  CHECK(c.q_shift == 0.0);
  CHECK((c.K - solve_lqr(sys.dyn, sys.cost).K).norm() <= 1e-10);
  // A marginal mode invisible to Q = 0 has no stabilizing Riccati solution.
  LinearDynamics marginal(Matrix::Identity(1, 1), Matrix::Identity(1, 1));
  CertifiedGain z = certify_gain(marginal, Matrix::Zero(1, 1), Matrix::Identity(1, 1));
  CHECK(z.q_shift > 0.0);
  CHECK(is_stabilizing(marginal, z.K));
}

TEST_CASE("dimension mismatch") {
  SystemSetup sys = build_small_random(1);
  DemoSet demos(Matrix::Zero(3, 5), Matrix::Zero(2, 5));
  CHECK_THROWS_AS(fit_kalman(demos, LossSpec::quadratic(), RegularizerSpec::ridge(0.01), sys.dyn),
                  DimensionError);
}

}  // TEST_SUITE
