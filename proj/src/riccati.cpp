#include "lqrfit/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "lqrfit/conic_ls.hpp"
#include "lqrfit/errors.hpp"

namespace lqrfit {

namespace {

constexpr double kConeTol = 1e-8;

void require_cost_shapes(const LinearDynamics& dyn, const CostMatrices& cost) {
  require_shape(cost.Q(), dyn.states(), dyn.states(), "Q");
  require_shape(cost.R(), dyn.inputs(), dyn.inputs(), "R");
}

Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q,
                   const Matrix& R, const Matrix& P) {
  const Matrix BtP = B.transpose() * P;
  const Matrix S = R + BtP * B;
  const Matrix gain_term = S.ldlt().solve(BtP * A);
  return symmetrize(Q + A.transpose() * P * A -
                    A.transpose() * BtP.transpose() * gain_term);
}

// Structure-preserving doubling: H_k increases monotonically to the
// stabilizing solution.
Matrix doubling(const Matrix& A, const Matrix& B, const Matrix& Q,
                const Matrix& R, const RiccatiOptions& options,
                int& iterations) {
  const Eigen::Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  Matrix Ak = A;
  Matrix Gk = symmetrize(B * R.ldlt().solve(B.transpose()));
  Matrix Hk = Q;
  double change = std::numeric_limits<double>::infinity();
  for (iterations = 1; iterations <= options.max_iter; ++iterations) {
    const Eigen::PartialPivLU<Matrix> lu(I + Gk * Hk);
    const Matrix inv_A = lu.solve(Ak);
    const Matrix inv_G = lu.solve(Gk);
    Matrix H_next = symmetrize(Hk + Ak.transpose() * Hk * inv_A);
    Matrix G_next = symmetrize(Gk + Ak * inv_G * Ak.transpose());
    Ak = Ak * inv_A;
    if (!H_next.allFinite() || !G_next.allFinite() || !Ak.allFinite()) {
      throw ConvergenceError("Riccati doubling diverged", change, iterations);
    }
    change = (H_next - Hk).norm();
    Hk = std::move(H_next);
    Gk = std::move(G_next);
    if (change <= options.tol * std::max(1.0, Hk.norm())) return Hk;
  }
  throw ConvergenceError("Riccati doubling did not converge", change,
                         options.max_iter);
}

Matrix value_iteration(const Matrix& A, const Matrix& B, const Matrix& Q,
                       const Matrix& R, const RiccatiOptions& options,
                       int& iterations) {
  Matrix P = Q;
  double change = std::numeric_limits<double>::infinity();
  for (iterations = 1; iterations <= options.max_iter; ++iterations) {
    Matrix next = riccati_map(A, B, Q, R, P);
    if (!next.allFinite()) {
      throw ConvergenceError("Riccati value iteration diverged", change,
                             iterations);
    }
    change = (next - P).norm();
    P = std::move(next);
    if (change <= options.tol * std::max(1.0, P.norm())) return P;
  }
  throw ConvergenceError("Riccati value iteration did not converge", change,
                         options.max_iter);
}

}  // namespace

double riccati_residual(const Eigen::Ref<const Matrix>& A,
                        const Eigen::Ref<const Matrix>& B,
                        const Eigen::Ref<const Matrix>& Q,
                        const Eigen::Ref<const Matrix>& R,
                        const Eigen::Ref<const Matrix>& P) {
  return (P - riccati_map(A, B, Q, R, P)).norm();
}

Gain riccati_gain(const Eigen::Ref<const Matrix>& A,
                  const Eigen::Ref<const Matrix>& B,
                  const Eigen::Ref<const Matrix>& R,
                  const Eigen::Ref<const Matrix>& P) {
  const Matrix BtP = B.transpose() * P;
  return -(R + BtP * B).ldlt().solve(BtP * A);
}

LqrSolution solve_lqr(const LinearDynamics& dyn, const CostMatrices& cost,
                      const RiccatiOptions& options) {
  require_cost_shapes(dyn, cost);
  if (!dyn.controllable()) {
    throw ValidationError("(A, B) is not controllable");
  }
  const Matrix& A = dyn.A();
  const Matrix& B = dyn.B();
  LqrSolution out;
  out.P = options.method == RiccatiMethod::kDoubling
              ? doubling(A, B, cost.Q(), cost.R(), options, out.iterations)
              : value_iteration(A, B, cost.Q(), cost.R(), options,
                                out.iterations);
  out.K = riccati_gain(A, B, cost.R(), out.P);
  out.residual = riccati_residual(A, B, cost.Q(), cost.R(), out.P);
  if (!(out.residual <= 1e-8 * (1.0 + out.P.norm()))) {
    throw ConvergenceError("Riccati solution inaccurate", out.residual,
                           out.iterations);
  }
  return out;
}

Matrix kalman_constraint_stack(const LinearDynamics& dyn,
                               const Eigen::Ref<const Matrix>& K,
                               const Eigen::Ref<const Matrix>& P,
                               const Eigen::Ref<const Matrix>& Q,
                               const Eigen::Ref<const Matrix>& R) {
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  require_shape(K, m, n, "K");
  require_shape(P, n, n, "P");
  require_shape(Q, n, n, "Q");
  require_shape(R, m, m, "R");
  const Matrix PF = P * dyn.closed_loop(K);
  Matrix M(n + m, n);
  M.topRows(n) = Q + dyn.A().transpose() * PF - P;
  M.bottomRows(m) = R * K + dyn.B().transpose() * PF;
  return M;
}

double kalman_residual(const LinearDynamics& dyn,
                       const Eigen::Ref<const Matrix>& K,
                       const Eigen::Ref<const Matrix>& P,
                       const Eigen::Ref<const Matrix>& Q,
                       const Eigen::Ref<const Matrix>& R) {
  return kalman_constraint_stack(dyn, K, P, Q, R).norm();
}

double kalman_residual(const LinearDynamics& dyn,
                       const Eigen::Ref<const Matrix>& K,
                       const KalmanCertificate& cert) {
  return kalman_residual(dyn, K, cert.P, cert.Q, cert.R);
}

KalmanCertificate make_certificate(const LinearDynamics& dyn,
                                   const Eigen::Ref<const Matrix>& K, Matrix P,
                                   Matrix Q, Matrix R) {
  KalmanCertificate cert{std::move(P), std::move(Q), std::move(R), 0.0};
  cert.residual = kalman_residual(dyn, K, cert);
  return cert;
}

bool cone_feasible(const Eigen::Ref<const Matrix>& P,
                   const Eigen::Ref<const Matrix>& Q,
                   const Eigen::Ref<const Matrix>& R) {
  return is_psd_above(P, 0.0, kConeTol) && is_psd_above(Q, 0.0, kConeTol) &&
         is_psd_above(R, 1.0, kConeTol);
}

double default_feasibility_tol(const Eigen::Ref<const Matrix>& K) {
  return 1e-6 * (1.0 + K.norm());
}

namespace {

struct SymSlot {
  int block;
  Eigen::Index i;
  Eigen::Index j;
};

std::vector<SymSlot> sym_slots(Eigen::Index n, Eigen::Index m) {
  std::vector<SymSlot> slots;
  const Eigen::Index sizes[3] = {n, n, m};
  for (int b = 0; b < 3; ++b) {
    for (Eigen::Index j = 0; j < sizes[b]; ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) slots.push_back({b, i, j});
    }
  }
  return slots;
}

// Largest t with blockdiag(P, Q, R) >= t I over the null space of
// (P, Q, R) -> M, normalized by tr R = m; log-barrier Newton.
std::optional<KalmanCertificate> null_space_certificate(
    const LinearDynamics& dyn, const Eigen::Ref<const Matrix>& K) {
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  const std::vector<SymSlot> slots = sym_slots(n, m);
  const auto d = static_cast<Eigen::Index>(slots.size());
  const Eigen::Index size = 2 * n + m;
  const Eigen::Index offset[3] = {0, n, 2 * n};
  auto embed = [&](const Vector& v) {
    Matrix G = Matrix::Zero(size, size);
    for (Eigen::Index k = 0; k < d; ++k) {
      const Eigen::Index o = offset[slots[k].block];
      G(o + slots[k].i, o + slots[k].j) += v(k);
      if (slots[k].i != slots[k].j) G(o + slots[k].j, o + slots[k].i) += v(k);
    }
    return G;
  };

  Matrix L((n + m) * n, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Matrix G = embed(Vector::Unit(d, k));
    L.col(k) = kalman_constraint_stack(dyn, K, G.topLeftCorner(n, n),
                                       G.block(n, n, n, n),
                                       G.bottomRightCorner(m, m))
                   .reshaped();
  }
  const Eigen::JacobiSVD<Matrix> svd(L, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cut = 1e-9 * std::max(sv.size() > 0 ? sv(0) : 0.0, 1e-300);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cut) ++rank;
  if (rank >= d) return std::nullopt;
  const Matrix N = svd.matrixV().rightCols(d - rank);
  const Eigen::Index k = N.cols();

  std::vector<Matrix> basis;
  Vector trace_R(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    basis.push_back(embed(N.col(j)));
    trace_R(j) = basis.back().bottomRightCorner(m, m).trace();
  }
  if (trace_R.norm() < 1e-12) return std::nullopt;

  // c = c0 + Z y on the affine slice tr R = m; variables x = (y, t).
  const Vector c0 = (double(m) / trace_R.squaredNorm()) * trace_R;
  const Eigen::JacobiSVD<Matrix> perp(trace_R.transpose(), Eigen::ComputeFullV);
  const Matrix Z = perp.matrixV().rightCols(k - 1);
  const Eigen::Index dim = k;
  auto blocks_at = [&](const Vector& c) {
    Matrix G = Matrix::Zero(size, size);
    for (Eigen::Index j = 0; j < k; ++j) G += c(j) * basis[j];
    return G;
  };
  std::vector<Matrix> F(dim);
  for (Eigen::Index i = 0; i + 1 < dim; ++i) F[i] = blocks_at(Z.col(i));
  F[dim - 1] = -Matrix::Identity(size, size);
  const Matrix F0 = blocks_at(c0);
  auto affine = [&](const Vector& x) {
    Matrix G = F0;
    for (Eigen::Index i = 0; i < dim; ++i) G += x(i) * F[i];
    return G;
  };

  Vector x = Vector::Zero(dim);
  x(dim - 1) =
      Eigen::SelfAdjointEigenSolver<Matrix>(F0).eigenvalues().minCoeff() - 1.0;
  auto barrier = [&](const Vector& at, double mu, double& value) {
    const Eigen::LLT<Matrix> llt(affine(at));
    if (llt.info() != Eigen::Success) return false;
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < size; ++i) {
      const double diag = llt.matrixL()(i, i);
      if (!(diag > 0.0)) return false;
      logdet += 2.0 * std::log(diag);
    }
    value = -at(dim - 1) - mu * logdet;
    return std::isfinite(value);
  };

  double mu = std::max(1.0, std::abs(x(dim - 1)));
  for (int outer = 0; outer < 80 && x(dim - 1) <= 0.0; ++outer) {
    for (int newton = 0; newton < 50; ++newton) {
      const Matrix G = affine(x);
      const Eigen::LLT<Matrix> llt(G);
      std::vector<Matrix> S(dim);
      for (Eigen::Index i = 0; i < dim; ++i) S[i] = llt.solve(F[i]);
      Vector grad(dim);
      Matrix hess(dim, dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        grad(i) = -mu * S[i].trace();
        for (Eigen::Index j = 0; j <= i; ++j) {
          hess(i, j) = hess(j, i) = mu * (S[i] * S[j]).trace();
        }
      }
      grad(dim - 1) -= 1.0;
      const Vector step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (!(decrement > 1e-12)) break;
      double current = 0.0;
      barrier(x, mu, current);
      double alpha = 1.0;
      double trial = 0.0;
      while (alpha > 1e-12 &&
             !(barrier(x + alpha * step, mu, trial) &&
               trial <= current - 0.25 * alpha * decrement)) {
        alpha *= 0.5;
      }
      if (alpha <= 1e-12) break;
      x += alpha * step;
      if (x(dim - 1) > 0.0) break;
    }
    mu *= 0.2;
  }
  if (!(x(dim - 1) > 0.0)) return std::nullopt;

  auto stack = [&](const Matrix& G) {
    return kalman_constraint_stack(dyn, K, G.topLeftCorner(n, n),
                                   G.block(n, n, n, n),
                                   G.bottomRightCorner(m, m));
  };
  const Matrix U = svd.matrixU().leftCols(rank);
  const Matrix V = svd.matrixV().leftCols(rank);
  const Vector inv_sv = sv.head(rank).cwiseInverse();
  Vector z = N * (c0 + Z * x.head(dim - 1));
  const double scale =
      1.0 / Eigen::SelfAdjointEigenSolver<Matrix>(embed(z).bottomRightCorner(m, m))
                .eigenvalues()
                .minCoeff();
  z *= scale;
  for (int pass = 0; pass < 3; ++pass) {
    const Vector r = stack(embed(z)).reshaped();
    z -= V * inv_sv.cwiseProduct(U.transpose() * r);
  }
  Matrix G = embed(z);
  const double floor =
      Eigen::SelfAdjointEigenSolver<Matrix>(G.bottomRightCorner(m, m))
          .eigenvalues()
          .minCoeff();
  if (!(floor > 0.0)) return std::nullopt;
  if (floor < 1.0) G /= floor;
  return make_certificate(dyn, K, project_psd(G.topLeftCorner(n, n)),
                          project_psd(G.block(n, n, n, n)),
                          project_psd(G.bottomRightCorner(m, m), 1.0));
}

}  // namespace

FeasibilityReport check_kalman_feasible(const LinearDynamics& dyn,
                                        const Eigen::Ref<const Matrix>& K,
                                        std::optional<double> tol,
                                        int max_iter) {
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  require_shape(K, m, n, "K");
  FeasibilityReport report;
  report.tolerance = tol.value_or(default_feasibility_tol(K));

  PqrOptions options;
  options.max_iter = max_iter;
  // Stop once the residual itself is certified below the threshold.
  options.target_objective = 0.01 * report.tolerance * report.tolerance;
  const PqrResult pqr = solve_pqr_step(dyn, K, Matrix::Zero(n, n),
                                       Matrix::Zero(m, n), 1.0, options);
  report.iterations = pqr.iterations;
  report.certificate = make_certificate(dyn, K, pqr.P, pqr.Q, pqr.R);
  report.feasible = report.certificate.residual <= report.tolerance &&
                    cone_feasible(pqr.P, pqr.Q, pqr.R);
  if (report.feasible) return report;
  std::optional<KalmanCertificate> exact = null_space_certificate(dyn, K);
  if (exact && exact->residual < report.certificate.residual &&
      cone_feasible(exact->P, exact->Q, exact->R)) {
    report.certificate = std::move(*exact);
  }
  report.feasible = report.certificate.residual <= report.tolerance &&
                    cone_feasible(report.certificate.P, report.certificate.Q,
                                  report.certificate.R);
  return report;
}

}  // namespace lqrfit
