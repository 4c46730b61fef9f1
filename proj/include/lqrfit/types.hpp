#pragma once

#include <limits>
#include <string_view>

#include <Eigen/Core>

namespace lqrfit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Gain matrix K (m x n) of the linear policy u = K x.
using Gain = Eigen::MatrixXd;

/// Average cost of a closed loop that is not asymptotically stable.
inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

/// (S + S^T) / 2.
Matrix symmetrize(const Eigen::Ref<const Matrix>& S);

/// Smallest eigenvalue of the symmetric part of S.
double min_eigenvalue(const Eigen::Ref<const Matrix>& S);

/// True when S is symmetric and its eigenvalues are all at least
/// `floor - tol * (1 + ||S||_F)`.
bool is_psd_above(const Eigen::Ref<const Matrix>& S, double floor, double tol);

/// Throws DimensionError unless `M` is rows x cols.
void require_shape(const Eigen::Ref<const Matrix>& M, Eigen::Index rows,
                   Eigen::Index cols, std::string_view name);

/// Throws ValidationError if S is not symmetric or has an eigenvalue below
/// `floor - tol * (1 + ||S||_F)`.
void require_symmetric_above(const Eigen::Ref<const Matrix>& S, double floor,
                             double tol, std::string_view name);

}  // namespace lqrfit
