#pragma once

#include "lqrfit/linsys.hpp"
#include "lqrfit/types.hpp"

namespace lqrfit {

enum class LossKind { kQuadratic, kHuber };

/// Per-demonstration loss l(Kx, u): ||Kx - u||_2^2, or the sum of Huber
/// penalties of the entries of Kx - u.
struct LossSpec {
  LossKind kind = LossKind::kQuadratic;
  double huber_M = 1.0;

  static LossSpec quadratic() { return {}; }
  static LossSpec huber(double M) { return {LossKind::kHuber, M}; }
  void validate() const;
};

/// Ridge penalty lambda ||K||_F^2.
struct RegularizerSpec {
  double lambda = 0.0;

  static RegularizerSpec ridge(double lambda) { return {lambda}; }
  void validate() const;
};

/// Frobenius-nearest symmetric matrix with every eigenvalue >= floor.
Matrix project_psd(const Eigen::Ref<const Matrix>& S, double floor = 0.0);

/// a^2/2 for |a| <= M, M|a| - M^2/2 otherwise.
double huber_value(double a, double M);

/// L(K) = sum_i l(K x^i, u^i).
double loss_value(const DemoSet& demos, const LossSpec& loss,
                  const Eigen::Ref<const Matrix>& K);

double regularizer_value(const RegularizerSpec& reg,
                         const Eigen::Ref<const Matrix>& K);

/// Augmented-Lagrangian terms that the K step sees: the current cost triple,
/// the two dual blocks and the penalty parameter. rho = 0 drops the penalty.
struct KStepPenalty {
  double rho = 0.0;
  Matrix P, Q, R;
  Matrix Y1, Y2;

  /// rho = 0, i.e. plain policy fitting.
  static KStepPenalty none(const LinearDynamics& dyn);
};

struct KStepOptions {
  double irls_tol = 1e-9;
  int irls_max_iter = 100;
};

/// L(K) + r(K) + rho/2 ||M(K, P, Q, R) + Y/rho||_F^2.
double k_step_objective(const DemoSet& demos, const LossSpec& loss,
                        const RegularizerSpec& reg, const KStepPenalty& pen,
                        const LinearDynamics& dyn,
                        const Eigen::Ref<const Matrix>& K);

/// Global minimizer of k_step_objective. The quadratic case is one linear
/// solve in vec(K); Huber runs IRLS around the same solve. Throws
/// SingularSystemError when the normal equations are singular.
Gain solve_k_step(const DemoSet& demos, const LossSpec& loss,
                  const RegularizerSpec& reg, const KStepPenalty& pen,
                  const LinearDynamics& dyn, const KStepOptions& options = {});

struct PqrOptions {
  /// Stop when the suboptimality estimate falls below this.
  double tol = 1e-10;
  int max_iter = 20000;
  /// Also stop as soon as the objective is at or below this value.
  double target_objective = 0.0;
};

struct PqrResult {
  Matrix P, Q, R;
  double objective = 0.0;
  /// Norm of the projected-gradient step at the returned point, scaled by
  /// (1 + ||(P, Q, R)||); zero exactly at the constrained optimum.
  double suboptimality = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Starting point for solve_pqr_step.
struct PqrWarmStart {
  Matrix P, Q, R;
};

/// ||M(K, P, Q, R) + Y/rho||_F^2 with Y = [Y1; Y2].
double pqr_objective(const LinearDynamics& dyn,
                     const Eigen::Ref<const Matrix>& K,
                     const Eigen::Ref<const Matrix>& Y1,
                     const Eigen::Ref<const Matrix>& Y2, double rho,
                     const Eigen::Ref<const Matrix>& P,
                     const Eigen::Ref<const Matrix>& Q,
                     const Eigen::Ref<const Matrix>& R);

/// Minimizes pqr_objective over symmetric P >= 0, Q >= 0, R >= I. The output
/// is always cone-feasible and exactly symmetric; `converged` is false when
/// the iteration cap was hit first.
PqrResult solve_pqr_step(const LinearDynamics& dyn,
                         const Eigen::Ref<const Matrix>& K,
                         const Eigen::Ref<const Matrix>& Y1,
                         const Eigen::Ref<const Matrix>& Y2, double rho,
                         const PqrOptions& options = {},
                         const PqrWarmStart* warm = nullptr);

}  // namespace lqrfit
