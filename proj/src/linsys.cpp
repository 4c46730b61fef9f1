#include "lqrfit/linsys.hpp"

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lqrfit/errors.hpp"

namespace lqrfit {

namespace {

constexpr double kPsdTol = 1e-10;

// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void require_gain_shape(const LinearDynamics& dyn,
                        const Eigen::Ref<const Matrix>& K) {
  require_shape(K, dyn.inputs(), dyn.states(), "K");
}

}  // namespace

LinearDynamics::LinearDynamics(Matrix A, Matrix B, Matrix W)
    : A_(std::move(A)), B_(std::move(B)), W_(std::move(W)) {
  if (A_.rows() == 0 || A_.rows() != A_.cols()) {
    throw DimensionError("A must be square and nonempty");
  }
  require_shape(B_, A_.rows(), B_.cols(), "B");
  if (B_.cols() == 0) throw DimensionError("B must have at least one column");
  require_shape(W_, A_.rows(), A_.rows(), "W");
  require_symmetric_above(W_, 0.0, kPsdTol, "W");
  if (!A_.allFinite() || !B_.allFinite() || !W_.allFinite()) {
    throw ValidationError("dynamics contain non-finite entries");
  }
}

LinearDynamics::LinearDynamics(Matrix A, Matrix B)
    : LinearDynamics(A, B, Matrix::Zero(A.rows(), A.rows())) {}

Matrix LinearDynamics::closed_loop(const Eigen::Ref<const Matrix>& K) const {
  require_gain_shape(*this, K);
  return A_ + B_ * K;
}

bool LinearDynamics::controllable() const {
  // Popov-Belevitch-Hautus: rank [A - lambda I, B] = n for every eigenvalue.
  const Eigen::Index n = states();
  const Eigen::Index m = inputs();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(A_.cast<std::complex<double>>(),
                                                  false);
  const double scale = std::max(1.0, std::max(A_.norm(), B_.norm()));
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::MatrixXcd pencil(n, n + m);
    pencil.leftCols(n) = A_.cast<std::complex<double>>();
    pencil.leftCols(n).diagonal().array() -= eig.eigenvalues()(k);
    pencil.rightCols(m) = B_.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
    if (svd.singularValues()(n - 1) <= 1e-10 * scale) return false;
  }
  return true;
}

LinearDynamics LinearDynamics::with_disturbance(Matrix W) const {
  return LinearDynamics(A_, B_, std::move(W));
}

CostMatrices::CostMatrices(Matrix Q, Matrix R)
    : Q_(std::move(Q)), R_(std::move(R)) {
  if (Q_.rows() == 0 || R_.rows() == 0) {
    throw DimensionError("cost matrices must be nonempty");
  }
  require_symmetric_above(Q_, 0.0, kPsdTol, "Q");
  require_symmetric_above(R_, 0.0, 0.0, "R");
  if (min_eigenvalue(R_) <= 0.0) {
    throw ValidationError("R must be positive definite");
  }
}

CostMatrices CostMatrices::normalized() const {
  const double scale = 1.0 / min_eigenvalue(R_);
  return CostMatrices(scale * Q_, scale * R_);
}

DemoSet::DemoSet(Matrix states, Matrix inputs)
    : states_(std::move(states)), inputs_(std::move(inputs)) {
  if (states_.cols() != inputs_.cols()) {
    throw DimensionError("states and inputs must have the same count");
  }
  if (states_.cols() < 1) throw ValidationError("at least one demonstration");
  if (!states_.allFinite() || !inputs_.allFinite()) {
    throw ValidationError("demonstrations contain non-finite entries");
  }
}

GaussianSampler::GaussianSampler(const Eigen::Ref<const Matrix>& covariance) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(covariance));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * root.asDiagonal();
}

double spectral_radius(const Eigen::Ref<const Matrix>& M) {
  if (M.rows() != M.cols()) throw DimensionError("matrix must be square");
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> eig(M, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_stabilizing(const LinearDynamics& dyn,
                    const Eigen::Ref<const Matrix>& K) {
  return spectral_radius(dyn.closed_loop(K)) < 1.0 - kStabilityMargin;
}

Matrix solve_discrete_lyapunov(const Eigen::Ref<const Matrix>& F,
                               const Eigen::Ref<const Matrix>& C, double tol,
                               int max_iter) {
  if (F.rows() != F.cols()) throw DimensionError("F must be square");
  require_shape(C, F.rows(), F.rows(), "C");
  if (spectral_radius(F) >= 1.0 - kStabilityMargin) {
    throw ValidationError("Lyapunov equation needs a stable F");
  }
  Matrix P = symmetrize(C);
  Matrix power = F;
  double residual = 0.0;
  int k = 0;
  for (; k < max_iter; ++k) {
    const Matrix step = power.transpose() * P * power;
    P += step;
    P = symmetrize(P);
    power = power * power;
    residual = (P - C - F.transpose() * P * F).norm();
    const double scale = std::max(P.norm(), std::numeric_limits<double>::min());
    if (residual <= tol * scale || step.norm() <= 1e-17 * scale) break;
  }
  const double scale = std::max(P.norm(), std::numeric_limits<double>::min());
  if (residual > 1e-9 * scale) {
    throw ConvergenceError("discrete Lyapunov iteration", residual / scale, k);
  }
  return P;
}

Matrix stationary_covariance(const LinearDynamics& dyn,
                             const Eigen::Ref<const Matrix>& K) {
  const Matrix F = dyn.closed_loop(K);
  return solve_discrete_lyapunov(F.transpose(), dyn.W());
}

double closed_loop_cost(const LinearDynamics& dyn, const CostMatrices& cost,
                        const Eigen::Ref<const Matrix>& K) {
  require_gain_shape(dyn, K);
  require_shape(cost.Q(), dyn.states(), dyn.states(), "Q");
  require_shape(cost.R(), dyn.inputs(), dyn.inputs(), "R");
  const Matrix F = dyn.closed_loop(K);
  if (spectral_radius(F) >= 1.0 - kStabilityMargin) return kInfiniteCost;
  const Matrix stage = cost.Q() + K.transpose() * cost.R() * K;
  const Matrix P = solve_discrete_lyapunov(F, stage);
  return (dyn.W() * P).trace();
}

double noisy_policy_cost(const LinearDynamics& dyn, const CostMatrices& cost,
                         const Eigen::Ref<const Matrix>& K,
                         const Eigen::Ref<const Matrix>& input_noise) {
  require_gain_shape(dyn, K);
  require_shape(input_noise, dyn.inputs(), dyn.inputs(), "Sigma");
  require_symmetric_above(input_noise, 0.0, kPsdTol, "Sigma");
  const Matrix F = dyn.closed_loop(K);
  if (spectral_radius(F) >= 1.0 - kStabilityMargin) return kInfiniteCost;
  const Matrix stage = cost.Q() + K.transpose() * cost.R() * K;
  const Matrix P = solve_discrete_lyapunov(F, stage);
  const Matrix excitation =
      dyn.W() + dyn.B() * input_noise * dyn.B().transpose();
  return (excitation * P).trace() + (cost.R() * input_noise).trace();
}

double rollout_cost_estimate(const LinearDynamics& dyn,
                             const CostMatrices& cost,
                             const Eigen::Ref<const Matrix>& K, long horizon,
                             std::uint64_t seed, const Matrix& input_noise) {
  require_gain_shape(dyn, K);
  if (horizon < 1) throw ValidationError("horizon must be positive");
  const Eigen::Index m = dyn.inputs();
  const Matrix sigma =
      input_noise.size() == 0 ? Matrix::Zero(m, m) : input_noise;
  require_shape(sigma, m, m, "Sigma");
  if (!is_stabilizing(dyn, K)) {
    throw ValidationError("rollout needs a stabilizing gain");
  }
  const Matrix F = dyn.closed_loop(K);
  const Matrix excitation = dyn.W() + dyn.B() * sigma * dyn.B().transpose();
  const Matrix X = solve_discrete_lyapunov(F.transpose(), excitation);

  std::mt19937_64 rng(seed);
  const GaussianSampler initial(X);
  const GaussianSampler disturbance(dyn.W());
  const GaussianSampler noise(sigma);

  Vector x = initial(rng);
  Vector u(m);
  double total = 0.0;
  for (long t = 0; t < horizon; ++t) {
    u.noalias() = K * x;
    u += noise(rng);
    total += x.dot(cost.Q() * x) + u.dot(cost.R() * u);
    x = dyn.A() * x + dyn.B() * u + disturbance(rng);
  }
  return total / static_cast<double>(horizon);
}

DemoSet generate_demos(const LinearDynamics& dyn,
                       const Eigen::Ref<const Matrix>& expert,
                       const Eigen::Ref<const Matrix>& input_noise,
                       Eigen::Index count, double outlier_prob,
                       std::uint64_t seed, StateSampling sampling) {
  require_gain_shape(dyn, expert);
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  require_shape(input_noise, m, m, "Sigma");
  require_symmetric_above(input_noise, 0.0, kPsdTol, "Sigma");
  if (count < 1) throw ValidationError("need at least one demonstration");
  if (!(outlier_prob >= 0.0 && outlier_prob <= 1.0)) {
    throw ValidationError("outlier probability must lie in [0, 1]");
  }

  Matrix state_cov = Matrix::Identity(n, n);
  if (sampling == StateSampling::kStationary) {
    if (!is_stabilizing(dyn, expert)) {
      throw ValidationError(
          "expert gain is not stabilizing; no stationary distribution");
    }
    state_cov = stationary_covariance(dyn, expert);
  }

  std::mt19937_64 rng(seed);
  const GaussianSampler state_sampler(state_cov);
  const GaussianSampler noise_sampler(input_noise);
  Matrix states(n, count);
  Matrix inputs(m, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    states.col(i) = state_sampler(rng);
    inputs.col(i) = expert * states.col(i) + noise_sampler(rng);
    for (Eigen::Index j = 0; j < m; ++j) {
      if (uniform01(rng) < outlier_prob) inputs(j, i) = -inputs(j, i);
    }
  }
  return DemoSet(std::move(states), std::move(inputs));
}

}  // namespace lqrfit
