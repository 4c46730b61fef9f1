#include "lqrfit/types.hpp"

#include <string>

#include <Eigen/Eigenvalues>

#include "lqrfit/errors.hpp"

namespace lqrfit {

namespace {
constexpr double kSymmetryTol = 1e-9;
}

Matrix symmetrize(const Eigen::Ref<const Matrix>& S) {
  return 0.5 * (S + S.transpose());
}

double min_eigenvalue(const Eigen::Ref<const Matrix>& S) {
  if (S.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(S),
                                            Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool is_psd_above(const Eigen::Ref<const Matrix>& S, double floor,
                  double tol) {
  if (S.rows() != S.cols()) return false;
  const double scale = 1.0 + S.norm();
  if ((S - S.transpose()).norm() > kSymmetryTol * scale) return false;
  return min_eigenvalue(S) >= floor - tol * scale;
}

void require_shape(const Eigen::Ref<const Matrix>& M, Eigen::Index rows,
                   Eigen::Index cols, std::string_view name) {
  if (M.rows() != rows || M.cols() != cols) {
    throw DimensionError(std::string(name) + " must be " +
                         std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(M.rows()) + "x" +
                         std::to_string(M.cols()));
  }
}

void require_symmetric_above(const Eigen::Ref<const Matrix>& S, double floor,
                             double tol, std::string_view name) {
  if (S.rows() != S.cols()) {
    throw DimensionError(std::string(name) + " must be square");
  }
  const double scale = 1.0 + S.norm();
  if ((S - S.transpose()).norm() > kSymmetryTol * scale) {
    throw ValidationError(std::string(name) + " is not symmetric");
  }
  const double lo = min_eigenvalue(S);
  if (lo < floor - tol * scale) {
    throw ValidationError(std::string(name) + " has eigenvalue " +
                          std::to_string(lo) + " below " +
                          std::to_string(floor));
  }
}

}  // namespace lqrfit
