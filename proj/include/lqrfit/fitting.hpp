#pragma once

#include "lqrfit/conic_ls.hpp"
#include "lqrfit/linsys.hpp"

namespace lqrfit {

/// Result of plain policy fitting.
struct FitReport {
  Gain K;
  /// L(K) + r(K).
  double objective = 0.0;
  LossSpec loss;
  RegularizerSpec reg;
};

/// L(K) + r(K).
double policy_objective(const DemoSet& demos, const LossSpec& loss,
                        const RegularizerSpec& reg,
                        const Eigen::Ref<const Matrix>& K);

/// Minimizes L(K) + r(K) over all gains. With quadratic loss and a singular
/// problem (no ridge, rank-deficient states) the minimum-norm least-squares
/// gain is returned; for Huber loss that case throws SingularSystemError.
FitReport policy_fit(const DemoSet& demos, const LossSpec& loss,
                     const RegularizerSpec& reg);

}  // namespace lqrfit
