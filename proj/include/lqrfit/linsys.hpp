#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lqrfit/types.hpp"

namespace lqrfit {

/// Stochastic linear system x_{t+1} = A x_t + B u_t + w_t with E[w w^T] = W.
class LinearDynamics {
 public:
  /// Validates shapes and that W is symmetric positive semidefinite.
  LinearDynamics(Matrix A, Matrix B, Matrix W);
  /// Same as above with W = 0.
  LinearDynamics(Matrix A, Matrix B);

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& W() const { return W_; }
  Eigen::Index states() const { return A_.rows(); }
  Eigen::Index inputs() const { return B_.cols(); }

  /// Closed-loop matrix A + B K.
  Matrix closed_loop(const Eigen::Ref<const Matrix>& K) const;

  /// Rank test on [B, AB, ..., A^{n-1}B].
  bool controllable() const;

  /// Copy with a different disturbance covariance.
  LinearDynamics with_disturbance(Matrix W) const;

 private:
  Matrix A_;
  Matrix B_;
  Matrix W_;
};

/// Stage-cost weights of x^T Q x + u^T R u. Q is PSD and R positive definite.
class CostMatrices {
 public:
  CostMatrices(Matrix Q, Matrix R);

  const Matrix& Q() const { return Q_; }
  const Matrix& R() const { return R_; }

  /// Both weights scaled by 1 / lambda_min(R), so that R >= I with equality
  /// attained. The optimal gain does not change.
  CostMatrices normalized() const;

 private:
  Matrix Q_;
  Matrix R_;
};

/// N state/input pairs (x^i, u^i) stored column-wise.
class DemoSet {
 public:
  /// `states` is n x N and `inputs` is m x N.
  DemoSet(Matrix states, Matrix inputs);

  const Matrix& states() const { return states_; }
  const Matrix& inputs() const { return inputs_; }
  Eigen::Index size() const { return states_.cols(); }
  Eigen::Index state_dim() const { return states_.rows(); }
  Eigen::Index input_dim() const { return inputs_.rows(); }

 private:
  Matrix states_;
  Matrix inputs_;
};

/// Draws from N(0, Sigma) for a PSD (possibly singular) covariance.
class GaussianSampler {
 public:
  explicit GaussianSampler(const Eigen::Ref<const Matrix>& covariance);

  template <class Rng>
  Vector operator()(Rng& rng) const {
    std::normal_distribution<double> normal;
    Vector xi(factor_.cols());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
    return factor_ * xi;
  }

  const Matrix& factor() const { return factor_; }

 private:
  Matrix factor_;
};

/// Largest eigenvalue modulus. Throws DimensionError for non-square input.
double spectral_radius(const Eigen::Ref<const Matrix>& M);

/// Closed loops at or beyond this spectral radius are treated as unstable.
inline constexpr double kStabilityMargin = 1e-9;

bool is_stabilizing(const LinearDynamics& dyn, const Eigen::Ref<const Matrix>& K);

/// Solves P = C + F^T P F for a Schur-stable F by squaring iteration.
/// Throws ValidationError if F is not stable and ConvergenceError if the
/// relative residual does not reach `tol` within `max_iter` squarings.
Matrix solve_discrete_lyapunov(const Eigen::Ref<const Matrix>& F,
                               const Eigen::Ref<const Matrix>& C,
                               double tol = 1e-12, int max_iter = 200);

/// Stationary covariance X = F X F^T + W of the closed loop F = A + B K.
Matrix stationary_covariance(const LinearDynamics& dyn,
                             const Eigen::Ref<const Matrix>& K);

/// Infinite-horizon average of x^T Q x + u^T R u under u = K x, i.e.
/// trace(W P) with P = Q + K^T R K + F^T P F. Returns kInfiniteCost when
/// A + B K is not stable.
double closed_loop_cost(const LinearDynamics& dyn, const CostMatrices& cost,
                        const Eigen::Ref<const Matrix>& K);

/// Average cost of the randomized policy u = K x + z, z ~ N(0, Sigma) drawn
/// independently each step: trace((W + B Sigma B^T) P) + trace(R Sigma).
double noisy_policy_cost(const LinearDynamics& dyn, const CostMatrices& cost,
                         const Eigen::Ref<const Matrix>& K,
                         const Eigen::Ref<const Matrix>& input_noise);

/// Monte-Carlo estimate of the average cost from one trajectory of length
/// `horizon`, with x_0 drawn from the stationary distribution. An optional
/// input noise covariance adds z_t ~ N(0, Sigma) to every input. Throws
/// ValidationError for an unstable closed loop.
double rollout_cost_estimate(const LinearDynamics& dyn,
                             const CostMatrices& cost,
                             const Eigen::Ref<const Matrix>& K, long horizon,
                             std::uint64_t seed,
                             const Matrix& input_noise = Matrix());

enum class StateSampling { kStationary, kStandardNormal };

/// Demonstrations u^i = K x^i + z^i with z^i ~ N(0, Sigma); afterwards every
/// scalar input entry is negated independently with probability
/// `outlier_prob`. States come from the expert's stationary distribution
/// unless `sampling` says otherwise.
DemoSet generate_demos(const LinearDynamics& dyn,
                       const Eigen::Ref<const Matrix>& expert,
                       const Eigen::Ref<const Matrix>& input_noise,
                       Eigen::Index count, double outlier_prob,
                       std::uint64_t seed,
                       StateSampling sampling = StateSampling::kStationary);

}  // namespace lqrfit
