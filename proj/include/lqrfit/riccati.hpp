#pragma once

#include <optional>

#include "lqrfit/linsys.hpp"
#include "lqrfit/types.hpp"

namespace lqrfit {

/// Optimal infinite-horizon LQR gain and the stabilizing ARE solution.
struct LqrSolution {
  Gain K;
  Matrix P;
  int iterations = 0;
  /// ||P - (Q + A'PA - A'PB(R + B'PB)^{-1}B'PA)||_F.
  double residual = 0.0;
};

enum class RiccatiMethod {
  /// Structure-preserving doubling; quadratic convergence.
  kDoubling,
  /// P <- Q + A'PA - A'PB(R + B'PB)^{-1}B'PA from P = Q.
  kValueIteration,
};

struct RiccatiOptions {
  RiccatiMethod method = RiccatiMethod::kDoubling;
  double tol = 1e-12;
  int max_iter = 10000;
};

/// Residual of the discrete algebraic Riccati equation at P.
double riccati_residual(const Eigen::Ref<const Matrix>& A,
                        const Eigen::Ref<const Matrix>& B,
                        const Eigen::Ref<const Matrix>& Q,
                        const Eigen::Ref<const Matrix>& R,
                        const Eigen::Ref<const Matrix>& P);

/// K = -(R + B'PB)^{-1} B'PA.
Gain riccati_gain(const Eigen::Ref<const Matrix>& A,
                  const Eigen::Ref<const Matrix>& B,
                  const Eigen::Ref<const Matrix>& R,
                  const Eigen::Ref<const Matrix>& P);

/// Solves the discrete ARE for the given weights. W is never read. Throws
/// ValidationError when (A, B) is not controllable and ConvergenceError when
/// the iteration stalls or the residual exceeds 1e-8 (1 + ||P||_F).
LqrSolution solve_lqr(const LinearDynamics& dyn, const CostMatrices& cost,
                      const RiccatiOptions& options = {});

/// (P, Q, R) witnessing that a gain is LQR-optimal.
struct KalmanCertificate {
  Matrix P;
  Matrix Q;
  Matrix R;
  /// ||M||_F of the constraint stack at the associated gain.
  double residual = 0.0;
};

/// M = [Q + A'P(A + BK) - P; RK + B'P(A + BK)], an (n + m) x n matrix.
Matrix kalman_constraint_stack(const LinearDynamics& dyn,
                               const Eigen::Ref<const Matrix>& K,
                               const Eigen::Ref<const Matrix>& P,
                               const Eigen::Ref<const Matrix>& Q,
                               const Eigen::Ref<const Matrix>& R);

/// ||M||_F for the given gain and cost triple.
double kalman_residual(const LinearDynamics& dyn,
                       const Eigen::Ref<const Matrix>& K,
                       const Eigen::Ref<const Matrix>& P,
                       const Eigen::Ref<const Matrix>& Q,
                       const Eigen::Ref<const Matrix>& R);

double kalman_residual(const LinearDynamics& dyn,
                       const Eigen::Ref<const Matrix>& K,
                       const KalmanCertificate& cert);

/// Fills in `residual` from the other fields.
KalmanCertificate make_certificate(const LinearDynamics& dyn,
                                   const Eigen::Ref<const Matrix>& K, Matrix P,
                                   Matrix Q, Matrix R);

/// P >= 0, Q >= 0 and R >= I, each to 1e-8 (1 + ||.||_F).
bool cone_feasible(const Eigen::Ref<const Matrix>& P,
                   const Eigen::Ref<const Matrix>& Q,
                   const Eigen::Ref<const Matrix>& R);

struct FeasibilityReport {
  bool feasible = false;
  KalmanCertificate certificate;
  double tolerance = 0.0;
  int iterations = 0;
};

/// Default acceptance threshold on ||M||_F: 1e-6 (1 + ||K||_F).
double default_feasibility_tol(const Eigen::Ref<const Matrix>& K);

/// Searches for a cone-feasible (P, Q, R) with ||M||_F <= tol by
/// cone-constrained least squares with K fixed. When none is found the
/// best iterate is returned with feasible = false.
FeasibilityReport check_kalman_feasible(const LinearDynamics& dyn,
                                        const Eigen::Ref<const Matrix>& K,
                                        std::optional<double> tol = {},
                                        int max_iter = 20000);

}  // namespace lqrfit
