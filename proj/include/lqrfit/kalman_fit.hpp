#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lqrfit/conic_ls.hpp"
#include "lqrfit/linsys.hpp"
#include "lqrfit/riccati.hpp"

namespace lqrfit {

struct AdmmConfig {
  /// Penalty parameter of the augmented Lagrangian.
  double rho = 1.0;
  int n_iter = 200;
  /// A run stops early once ||K^{k+1} - K^k||_F < eps.
  double eps = 1e-6;
  /// Random starts in addition to the zero start.
  int n_random_inits = 5;
  std::uint64_t seed = 0;
  PqrOptions pqr{1e-10, 500, 0.0};
  KStepOptions k_step;

  void validate() const;
};

/// One ADMM iterate (K, P, Q, R, Y1, Y2).
struct AdmmState {
  Gain K;
  Matrix P, Q, R;
  /// Dual blocks for the n x n and m x n halves of the constraint stack.
  Matrix Y1, Y2;
  int iter = 0;

  /// K = 0, P = 0, Q = 0, R = I, Y = 0.
  static AdmmState zero(const LinearDynamics& dyn);
  /// K with standard normal entries; P = G G'/n, Q = H H'/n and
  /// R = I + J J'/m for standard normal G, H, J; Y = 0.
  static AdmmState random(const LinearDynamics& dyn, std::uint64_t seed);
};

/// One sweep: K step, (P, Q, R) step warm-started at the current triple,
/// then Y <- Y + rho M(K, P, Q, R) at the new iterates.
AdmmState admm_iterate(const AdmmState& state, const DemoSet& demos,
                       const LossSpec& loss, const RegularizerSpec& reg,
                       const LinearDynamics& dyn, double rho,
                       const PqrOptions& pqr = {},
                       const KStepOptions& k_step = {});

/// Outcome of one start of the multi-start search.
struct AdmmRun {
  int init_index = 0;
  int iterations = 0;
  bool converged = false;
  /// Empty unless the run failed or produced non-finite iterates.
  std::string failure;
  double objective = 0.0;
  double residual = 0.0;
  /// Last iterate; meaningful only when `failure` is empty.
  AdmmState final_state;
};

struct KalmanFitReport {
  /// Last ADMM gain of the winning run.
  Gain K;
  /// LQR-optimal gain for the recovered (Q, R), re-solved from the Riccati
  /// equation.
  Gain K_certified;
  /// Final (P, Q, R) of the winning run; residual measured at K.
  KalmanCertificate certificate;
  /// Riccati (P, Q + shift I, R) for K_certified.
  KalmanCertificate certified_certificate;
  /// Multiple of I added to Q when the recovered Q alone admits no
  /// stabilizing Riccati solution. Zero in the common case.
  double q_shift = 0.0;
  /// L(K) + r(K).
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  int init_index = 0;
  std::vector<AdmmRun> runs;
};

/// Policy fitting under a Kalman constraint. Runs ADMM from the zero start
/// and `n_random_inits` random starts and keeps the run whose final K has
/// the lowest L(K) + r(K), ties going to the lower start index. Throws
/// SolverError when every run fails.
KalmanFitReport fit_kalman(const DemoSet& demos, const LossSpec& loss,
                           const RegularizerSpec& reg,
                           const LinearDynamics& dyn,
                           const AdmmConfig& config = {});

/// Riccati gain for (Q + shift I, R), with the smallest shift from
/// {0, 1e-8, 1e-6, ...} * (1 + ||Q||_F) that yields a stabilizing solution.
struct CertifiedGain {
  Gain K;
  KalmanCertificate certificate;
  double q_shift = 0.0;
};
CertifiedGain certify_gain(const LinearDynamics& dyn,
                           const Eigen::Ref<const Matrix>& Q,
                           const Eigen::Ref<const Matrix>& R);

}  // namespace lqrfit
