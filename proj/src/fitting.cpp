#include "lqrfit/fitting.hpp"

#include <Eigen/QR>

#include "lqrfit/errors.hpp"

namespace lqrfit {

double policy_objective(const DemoSet& demos, const LossSpec& loss,
                        const RegularizerSpec& reg,
                        const Eigen::Ref<const Matrix>& K) {
  return loss_value(demos, loss, K) + regularizer_value(reg, K);
}

FitReport policy_fit(const DemoSet& demos, const LossSpec& loss,
                     const RegularizerSpec& reg) {
  const Eigen::Index n = demos.state_dim();
  const Eigen::Index m = demos.input_dim();
  // The K step with rho = 0 reads only the shapes of the dynamics.
  const LinearDynamics shape_only(Matrix::Zero(n, n), Matrix::Zero(n, m));
  FitReport report{Gain(), 0.0, loss, reg};
  try {
    report.K = solve_k_step(demos, loss, reg, KStepPenalty::none(shape_only),
                            shape_only);
  } catch (const SingularSystemError&) {
    if (loss.kind != LossKind::kQuadratic) throw;
    // K X = U in the least-squares sense with minimum ||K||_F.
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(
        demos.states().transpose());
    report.K = cod.solve(demos.inputs().transpose()).transpose();
  }
  report.objective = policy_objective(demos, loss, reg, report.K);
  return report;
}

}  // namespace lqrfit
