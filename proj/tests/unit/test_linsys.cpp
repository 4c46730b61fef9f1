#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lqrfit/errors.hpp"
#include "lqrfit/linsys.hpp"
#include "lqrfit/riccati.hpp"
#include "support/oracles.hpp"

using namespace lqrfit;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Matrix permutation(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  Matrix T = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) T(i, idx[i]) = 1.0;
  return T;
}

}  // namespace

TEST_SUITE("linsys") {

TEST_CASE("dynamics validation") {
  CHECK_THROWS_AS(LinearDynamics(Matrix::Identity(2, 3), Matrix::Ones(2, 1)),
                  DimensionError);
  CHECK_THROWS_AS(LinearDynamics(Matrix::Identity(2, 2), Matrix::Ones(3, 1)),
                  DimensionError);
  Matrix W(2, 2);
  W << 1, 0, 0, -0.1;
  CHECK_THROWS_AS(LinearDynamics(Matrix::Identity(2, 2), Matrix::Ones(2, 1), W),
                  ValidationError);
  // Within the roundoff allowance.
  W(1, 1) = -1e-12;
  CHECK_NOTHROW(LinearDynamics(Matrix::Identity(2, 2), Matrix::Ones(2, 1), W));
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 1) = std::nan("");
  CHECK_THROWS_AS(LinearDynamics(nan, Matrix::Ones(2, 1)), ValidationError);
}

TEST_CASE("controllability") {
  Matrix A(2, 2);
  A << 1, 1, 0, 1;
  Matrix B(2, 1);
  B << 0, 1;
  CHECK(LinearDynamics(A, B).controllable());
  B << 1, 0;
  CHECK_FALSE(LinearDynamics(A, B).controllable());
}

TEST_CASE("spectral radius examples") {
  Matrix N(2, 2);
  N << 0, 1, 0, 0;
  CHECK(spectral_radius(N) <= 1e-12);
  CHECK(spectral_radius(Matrix::Identity(3, 3)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spectral_radius(scalar(0.5)) == doctest::Approx(0.5).epsilon(1e-12));
  Matrix rot(2, 2);
  rot << 0, -2, 2, 0;
  CHECK(spectral_radius(rot) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(spectral_radius(Matrix::Ones(2, 3)), DimensionError);
}

TEST_CASE("closed loop cost scalar examples") {
  LinearDynamics dyn(scalar(0.5), scalar(1), scalar(1));
  CostMatrices cost(scalar(1), scalar(1));
  CHECK(closed_loop_cost(dyn, cost, scalar(0)) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(closed_loop_cost(dyn, cost, scalar(-0.5)) == doctest::Approx(1.25).epsilon(1e-12));
  LinearDynamics marginal(scalar(1), scalar(1), scalar(1));
  CHECK(std::isinf(closed_loop_cost(marginal, cost, scalar(0))));
  CHECK(closed_loop_cost(marginal, cost, scalar(0)) > 0);
  // Just inside the stability margin.
  CHECK(std::isinf(closed_loop_cost(marginal, cost, scalar(-1e-10))));
  CHECK(std::isfinite(closed_loop_cost(marginal, cost, scalar(-1e-6))));
}

TEST_CASE("lyapunov solver agrees with the Kronecker oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 5;
    Matrix F = oracle::random_matrix(rng, n, n);
    F *= (0.3 + 0.65 * (trial / 20.0)) / spectral_radius(F);
    Matrix G = oracle::random_matrix(rng, n, n);
    Matrix C = G * G.transpose();
    Matrix P = solve_discrete_lyapunov(F, C);
    Matrix ref = oracle::lyapunov_kron(F, C);
    CHECK((P - ref).norm() <= 1e-9 * (1 + ref.norm()));
    CHECK((P - P.transpose()).norm() == 0.0);
    CHECK(min_eigenvalue(P) >= -1e-8 * (1 + P.norm()));
  }
  CHECK_THROWS_AS(solve_discrete_lyapunov(scalar(1.0), scalar(1.0)), ValidationError);
}

TEST_CASE("rollout estimate matches the analytic cost") {
  LinearDynamics dyn(scalar(0.5), scalar(1), scalar(1));
  CostMatrices cost(scalar(1), scalar(1));
  CHECK(rollout_cost_estimate(dyn, cost, scalar(0), 1000000, 1) ==
        doctest::Approx(4.0 / 3.0).epsilon(0.02));
  CHECK(rollout_cost_estimate(dyn, cost, scalar(-0.5), 1000000, 2) ==
        doctest::Approx(1.25).epsilon(0.02));
  LinearDynamics quiet(scalar(0.5), scalar(1));
  CHECK(rollout_cost_estimate(quiet, cost, scalar(0), 1000, 3) == 0.0);
  LinearDynamics unstable(scalar(1.5), scalar(1), scalar(1));
  CHECK_THROWS_AS(rollout_cost_estimate(unstable, cost, scalar(0), 10, 0), ValidationError);
}

TEST_CASE("independent simulation agrees with the Lyapunov cost") {
  std::mt19937_64 rng(5);
  Matrix A = oracle::random_matrix(rng, 3, 3);
  A /= spectral_radius(A);
  Matrix B = oracle::random_matrix(rng, 3, 2);
  LinearDynamics dyn(A, B, 0.25 * Matrix::Identity(3, 3));
  CostMatrices cost(Matrix::Identity(3, 3), Matrix::Identity(2, 2));
  Gain K = solve_lqr(dyn, cost).K;
  double exact = closed_loop_cost(dyn, cost, K);
  double sim = oracle::simulate_cost(A, B, dyn.W(), cost.Q(), cost.R(), K,
                                     Matrix(), 1000000, 17);
  CHECK(sim == doctest::Approx(exact).epsilon(0.05));
}

TEST_CASE("noisy policy cost against simulation") {
  std::mt19937_64 rng(8);
  Matrix A = oracle::random_matrix(rng, 4, 4);
  A /= spectral_radius(A);
  Matrix B = oracle::random_matrix(rng, 4, 2);
  LinearDynamics dyn(A, B, 0.25 * Matrix::Identity(4, 4));
  CostMatrices cost(Matrix::Identity(4, 4), Matrix::Identity(2, 2));
  Gain K = solve_lqr(dyn, cost).K;
  Matrix S = 4.0 * Matrix::Identity(2, 2);
  double analytic = noisy_policy_cost(dyn, cost, K, S);
  double sim = oracle::simulate_cost(A, B, dyn.W(), cost.Q(), cost.R(), K, S,
                                     1000000, 23);
  CHECK(sim == doctest::Approx(analytic).epsilon(0.05));
  CHECK(analytic > closed_loop_cost(dyn, cost, K));
  CHECK(noisy_policy_cost(dyn, cost, K, Matrix::Zero(2, 2)) ==
        doctest::Approx(closed_loop_cost(dyn, cost, K)).epsilon(1e-12));
}

TEST_CASE("cost is invariant under a consistent state permutation") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix A = oracle::random_matrix(rng, 4, 4);
    A *= 0.9 / spectral_radius(A);
    Matrix B = oracle::random_matrix(rng, 4, 2);
    Matrix G = oracle::random_matrix(rng, 4, 4);
    Matrix W = G * G.transpose();
    Matrix H = oracle::random_matrix(rng, 4, 4);
    Matrix Q = H * H.transpose();
    Matrix K = 0.01 * oracle::random_matrix(rng, 2, 4);
    Matrix T = permutation(4, rng);
    double base = closed_loop_cost(LinearDynamics(A, B, W),
                                   CostMatrices(Q, Matrix::Identity(2, 2)), K);
    double perm = closed_loop_cost(
        LinearDynamics(T * A * T.transpose(), T * B, T * W * T.transpose()),
        CostMatrices(T * Q * T.transpose(), Matrix::Identity(2, 2)),
        K * T.transpose());
    CHECK(perm == doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("demonstration generation") {
  std::mt19937_64 rng(1);
  Matrix A = oracle::random_matrix(rng, 4, 4);
  A /= spectral_radius(A);
  Matrix B = oracle::random_matrix(rng, 4, 2);
  LinearDynamics dyn(A, B, 0.25 * Matrix::Identity(4, 4));
  Gain K = solve_lqr(dyn, CostMatrices(Matrix::Identity(4, 4), Matrix::Identity(2, 2))).K;

  SUBCASE("noiseless expert") {
    DemoSet d = generate_demos(dyn, K, Matrix::Zero(2, 2), 30, 0.0, 4);
    CHECK(d.size() == 30);
    CHECK((d.inputs() - K * d.states()).norm() == 0.0);
  }
  SUBCASE("certain flip negates every entry") {
    DemoSet clean = generate_demos(dyn, K, 4.0 * Matrix::Identity(2, 2), 25, 0.0, 9);
    DemoSet flipped = generate_demos(dyn, K, 4.0 * Matrix::Identity(2, 2), 25, 1.0, 9);
    CHECK(clean.states() == flipped.states());
    CHECK(flipped.inputs() == -clean.inputs());
  }
  SUBCASE("flip count is binomial") {
    const int N = 100;
    DemoSet clean = generate_demos(dyn, K, 4.0 * Matrix::Identity(2, 2), N, 0.0, 12);
    DemoSet noisy = generate_demos(dyn, K, 4.0 * Matrix::Identity(2, 2), N, 0.1, 12);
    int flips = 0;
    for (Eigen::Index i = 0; i < noisy.inputs().size(); ++i) {
      flips += noisy.inputs().data()[i] != clean.inputs().data()[i];
    }
    // 200 entries, p = 0.1: mean 20, sd sqrt(18).
    CHECK(std::abs(flips - 20) <= 3.0 * std::sqrt(18.0));
  }
  SUBCASE("bit-reproducible") {
    DemoSet a = generate_demos(dyn, K, 4.0 * Matrix::Identity(2, 2), 10, 0.1, 77);
    DemoSet b = generate_demos(dyn, K, 4.0 * Matrix::Identity(2, 2), 10, 0.1, 77);
    CHECK(a.states() == b.states());
    CHECK(a.inputs() == b.inputs());
  }
  SUBCASE("stationary state covariance") {
    DemoSet d = generate_demos(dyn, K, Matrix::Zero(2, 2), 200000, 0.0, 5);
    Matrix emp = d.states() * d.states().transpose() / double(d.size());
    Matrix X = stationary_covariance(dyn, K);
    CHECK((emp - X).norm() <= 0.02 * X.norm());
  }
  SUBCASE("unstable expert is rejected") {
    CHECK_THROWS_AS(generate_demos(dyn, Matrix::Zero(2, 4), Matrix::Zero(2, 2), 5, 0.0, 1),
                    ValidationError);
    CHECK_NOTHROW(generate_demos(dyn, Matrix::Zero(2, 4), Matrix::Zero(2, 2), 5, 0.0, 1,
                                 StateSampling::kStandardNormal));
  }
}

TEST_CASE("cost matrices") {
  CHECK_THROWS_AS(CostMatrices(-Matrix::Identity(2, 2), Matrix::Identity(1, 1)),
                  ValidationError);
  CHECK_THROWS_AS(CostMatrices(Matrix::Identity(2, 2), Matrix::Zero(1, 1)),
                  ValidationError);
  Matrix R(2, 2);
  R << 0.5, 0, 0, 2;
  CostMatrices c = CostMatrices(Matrix::Identity(3, 3), R).normalized();
  CHECK(min_eigenvalue(c.R()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.Q()(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

}  // TEST_SUITE
