#include "lqrfit/conic_ls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "lqrfit/errors.hpp"
#include "lqrfit/riccati.hpp"

namespace lqrfit {

void LossSpec::validate() const {
  if (kind == LossKind::kHuber && !(huber_M > 0.0 && std::isfinite(huber_M))) {
    throw ValidationError("Huber parameter M must be positive");
  }
}

void RegularizerSpec::validate() const {
  if (!(lambda >= 0.0 && std::isfinite(lambda))) {
    throw ValidationError("ridge weight must be nonnegative");
  }
}

Matrix project_psd(const Eigen::Ref<const Matrix>& S, double floor) {
  if (S.rows() != S.cols()) throw DimensionError("matrix must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(S));
  const Vector clamped = eig.eigenvalues().cwiseMax(floor);
  return symmetrize(eig.eigenvectors() * clamped.asDiagonal() *
                    eig.eigenvectors().transpose());
}

double huber_value(double a, double M) {
  const double mag = std::abs(a);
  return mag <= M ? 0.5 * a * a : M * mag - 0.5 * M * M;
}

double loss_value(const DemoSet& demos, const LossSpec& loss,
                  const Eigen::Ref<const Matrix>& K) {
  require_shape(K, demos.input_dim(), demos.state_dim(), "K");
  const Matrix residual = K * demos.states() - demos.inputs();
  if (loss.kind == LossKind::kQuadratic) return residual.squaredNorm();
  double total = 0.0;
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    total += huber_value(residual.data()[i], loss.huber_M);
  }
  return total;
}

double regularizer_value(const RegularizerSpec& reg,
                         const Eigen::Ref<const Matrix>& K) {
  return reg.lambda * K.squaredNorm();
}

KStepPenalty KStepPenalty::none(const LinearDynamics& dyn) {
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  return {0.0,
          Matrix::Zero(n, n),
          Matrix::Zero(n, n),
          Matrix::Identity(m, m),
          Matrix::Zero(n, n),
          Matrix::Zero(m, n)};
}

namespace {

void require_penalty_shapes(const KStepPenalty& pen,
                            const LinearDynamics& dyn) {
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  require_shape(pen.P, n, n, "P");
  require_shape(pen.Q, n, n, "Q");
  require_shape(pen.R, m, m, "R");
  require_shape(pen.Y1, n, n, "Y1");
  require_shape(pen.Y2, m, n, "Y2");
  if (!(pen.rho >= 0.0 && std::isfinite(pen.rho))) {
    throw ValidationError("rho must be nonnegative");
  }
}

// Normal equations H vec(K) = g of
//   sum_ij c_ij (K x^i - u^i)_j^2 + lambda ||K||^2 + rho/2 ||G K - C||^2
// with G = [A'PB; R + B'PB] and C = [P - Q - A'PA - Y1/rho; -B'PA - Y2/rho].
// vec is column-major: entry (j, a) of K sits at j + m a.
struct NormalEquations {
  Matrix hessian;
  Vector rhs;
};

NormalEquations assemble(const DemoSet& demos, const Matrix& weights,
                         const RegularizerSpec& reg, const KStepPenalty& pen,
                         const LinearDynamics& dyn) {
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  const Matrix& X = demos.states();
  const Matrix& U = demos.inputs();
  NormalEquations eq{Matrix::Zero(m * n, m * n), Vector::Zero(m * n)};

  for (Eigen::Index j = 0; j < m; ++j) {
    const Vector c = weights.row(j).transpose();
    const Matrix gram = 2.0 * X * c.asDiagonal() * X.transpose();
    const Vector cross = 2.0 * X * (c.array() * U.row(j).transpose().array()).matrix();
    for (Eigen::Index a = 0; a < n; ++a) {
      eq.rhs(j + m * a) += cross(a);
      for (Eigen::Index b = 0; b < n; ++b) {
        eq.hessian(j + m * a, j + m * b) += gram(a, b);
      }
    }
  }
  eq.hessian.diagonal().array() += 2.0 * reg.lambda;

  if (pen.rho > 0.0) {
    const Matrix& A = dyn.A();
    const Matrix& B = dyn.B();
    const Matrix PA = pen.P * A;
    const Matrix PB = pen.P * B;
    Matrix G(n + m, m);
    G.topRows(n) = A.transpose() * PB;
    G.bottomRows(m) = pen.R + B.transpose() * PB;
    Matrix C(n + m, n);
    C.topRows(n) = pen.P - pen.Q - A.transpose() * PA - pen.Y1 / pen.rho;
    C.bottomRows(m) = -B.transpose() * PA - pen.Y2 / pen.rho;
    const Matrix GtG = pen.rho * G.transpose() * G;
    const Matrix GtC = pen.rho * G.transpose() * C;
    for (Eigen::Index a = 0; a < n; ++a) {
      eq.hessian.block(m * a, m * a, m, m) += GtG;
      eq.rhs.segment(m * a, m) += GtC.col(a);
    }
  }
  eq.hessian = symmetrize(eq.hessian);
  return eq;
}

Gain solve_normal(const NormalEquations& eq, Eigen::Index m, Eigen::Index n) {
  const Eigen::LDLT<Matrix> ldlt(eq.hessian);
  const Vector d = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || d.size() == 0 ||
      d.minCoeff() <= 1e-13 * std::max(d.maxCoeff(), 1e-300)) {
    throw SingularSystemError(
        "K-step normal equations are singular (no ridge, no penalty and "
        "rank-deficient demonstrations)");
  }
  const Vector k = ldlt.solve(eq.rhs);
  return Eigen::Map<const Matrix>(k.data(), m, n);
}

Matrix huber_weights(const DemoSet& demos, const Matrix& K, double M) {
  const Matrix residual = K * demos.states() - demos.inputs();
  Matrix w(residual.rows(), residual.cols());
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    const double mag = std::abs(residual.data()[i]);
    // Quadratic majorizer (w/2) r^2 of the Huber penalty at the current r.
    w.data()[i] = 0.5 * (mag <= M ? 1.0 : M / mag);
  }
  return w;
}

// Pairs sorted lexicographically by (x, u), so that sums over
// demonstrations do not depend on their order.
DemoSet canonical_order(const DemoSet& demos) {
  const Eigen::Index N = demos.size();
  Matrix stacked(demos.state_dim() + demos.input_dim(), N);
  stacked << demos.states(), demos.inputs();
  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < stacked.rows(); ++r) {
      if (stacked(r, a) != stacked(r, b)) return stacked(r, a) < stacked(r, b);
    }
    return false;
  });
  Matrix sorted(stacked.rows(), N);
  for (Eigen::Index i = 0; i < N; ++i) sorted.col(i) = stacked.col(order[i]);
  return DemoSet(sorted.topRows(demos.state_dim()),
                 sorted.bottomRows(demos.input_dim()));
}

}  // namespace

double k_step_objective(const DemoSet& demos, const LossSpec& loss,
                        const RegularizerSpec& reg, const KStepPenalty& pen,
                        const LinearDynamics& dyn,
                        const Eigen::Ref<const Matrix>& K) {
  double value = loss_value(demos, loss, K) + regularizer_value(reg, K);
  if (pen.rho > 0.0) {
    Matrix shifted = kalman_constraint_stack(dyn, K, pen.P, pen.Q, pen.R);
    shifted.topRows(dyn.states()) += pen.Y1 / pen.rho;
    shifted.bottomRows(dyn.inputs()) += pen.Y2 / pen.rho;
    value += 0.5 * pen.rho * shifted.squaredNorm();
  }
  return value;
}

Gain solve_k_step(const DemoSet& unordered, const LossSpec& loss,
                  const RegularizerSpec& reg, const KStepPenalty& pen,
                  const LinearDynamics& dyn, const KStepOptions& options) {
  loss.validate();
  reg.validate();
  require_penalty_shapes(pen, dyn);
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  if (unordered.state_dim() != n || unordered.input_dim() != m) {
    throw DimensionError("demonstrations do not match the dynamics");
  }
  const DemoSet demos = canonical_order(unordered);

  if (loss.kind == LossKind::kQuadratic) {
    const Matrix ones = Matrix::Ones(m, demos.size());
    return solve_normal(assemble(demos, ones, reg, pen, dyn), m, n);
  }

  // IRLS: start from the all-quadratic-branch fit.
  Matrix weights = Matrix::Constant(m, demos.size(), 0.5);
  Gain K = solve_normal(assemble(demos, weights, reg, pen, dyn), m, n);
  for (int it = 0; it < options.irls_max_iter; ++it) {
    weights = huber_weights(demos, K, loss.huber_M);
    Gain next = solve_normal(assemble(demos, weights, reg, pen, dyn), m, n);
    const double change = (next - K).norm();
    K = std::move(next);
    if (change < options.irls_tol * std::max(1.0, K.norm())) break;
  }
  return K;
}

double pqr_objective(const LinearDynamics& dyn,
                     const Eigen::Ref<const Matrix>& K,
                     const Eigen::Ref<const Matrix>& Y1,
                     const Eigen::Ref<const Matrix>& Y2, double rho,
                     const Eigen::Ref<const Matrix>& P,
                     const Eigen::Ref<const Matrix>& Q,
                     const Eigen::Ref<const Matrix>& R) {
  Matrix shifted = kalman_constraint_stack(dyn, K, P, Q, R);
  shifted.topRows(dyn.states()) += Y1 / rho;
  shifted.bottomRows(dyn.inputs()) += Y2 / rho;
  return shifted.squaredNorm();
}

namespace {

// Isometric coordinates for symmetric matrices: diagonal entries as is,
// off-diagonal pairs scaled by sqrt(2), so Euclidean norm = Frobenius norm.
Eigen::Index svec_size(Eigen::Index n) { return n * (n + 1) / 2; }

void svec_into(const Matrix& S, Eigen::Ref<Vector> out) {
  const Eigen::Index n = S.rows();
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    out(k++) = S(j, j);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      out(k++) = M_SQRT2 * 0.5 * (S(i, j) + S(j, i));
    }
  }
}

Matrix smat(const Eigen::Ref<const Vector>& v, Eigen::Index n) {
  Matrix S(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    S(j, j) = v(k++);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      S(i, j) = S(j, i) = v(k++) / M_SQRT2;
    }
  }
  return S;
}

// Cone-constrained least squares min ||A z - c||^2 over z = (p, q, r) with
// smat(p) >= 0, smat(q) >= 0, smat(r) >= I.
class PqrProblem {
 public:
  PqrProblem(const LinearDynamics& dyn, const Matrix& K, const Matrix& Y1,
             const Matrix& Y2, double rho)
      : n_(dyn.states()), m_(dyn.inputs()) {
    const Eigen::Index sp = svec_size(n_);
    const Eigen::Index sr = svec_size(m_);
    const Eigen::Index rows = (n_ + m_) * n_;
    op_.resize(rows, 2 * sp + sr);
    const Matrix F = dyn.closed_loop(K);
    const Matrix At = dyn.A().transpose();
    const Matrix Bt = dyn.B().transpose();

    Matrix block(n_ + m_, n_);
    Vector unit;
    auto column = [&](Eigen::Index col) {
      op_.col(col) = Eigen::Map<const Vector>(block.data(), rows);
    };
    unit = Vector::Zero(sp);
    for (Eigen::Index k = 0; k < sp; ++k) {
      unit.setZero();
      unit(k) = 1.0;
      const Matrix E = smat(unit, n_);
      block.topRows(n_) = At * E * F - E;
      block.bottomRows(m_) = Bt * E * F;
      column(k);
      block.topRows(n_) = E;
      block.bottomRows(m_).setZero();
      column(sp + k);
    }
    unit = Vector::Zero(sr);
    for (Eigen::Index k = 0; k < sr; ++k) {
      unit.setZero();
      unit(k) = 1.0;
      block.topRows(n_).setZero();
      block.bottomRows(m_) = smat(unit, m_) * K;
      column(2 * sp + k);
    }

    block.topRows(n_) = -Y1 / rho;
    block.bottomRows(m_) = -Y2 / rho;
    target_ = Eigen::Map<const Vector>(block.data(), rows);
    gram_ = op_.transpose() * op_;
    cross_ = op_.transpose() * target_;
    lipschitz_ = 2.0 * std::max(
        Eigen::SelfAdjointEigenSolver<Matrix>(gram_, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .maxCoeff(),
        1e-300);
  }

  Eigen::Index dim() const { return op_.cols(); }
  const Matrix& gram() const { return gram_; }
  const Vector& cross() const { return cross_; }
  double lipschitz() const { return lipschitz_; }

  double objective(const Vector& z) const {
    return (op_ * z - target_).squaredNorm();
  }

  Vector gradient(const Vector& z) const {
    return 2.0 * (gram_ * z - cross_);
  }

  Vector project(const Vector& z) const {
    const Eigen::Index sp = svec_size(n_);
    const Eigen::Index sr = svec_size(m_);
    Vector out(z.size());
    svec_into(project_psd(smat(z.segment(0, sp), n_), 0.0),
              out.segment(0, sp));
    svec_into(project_psd(smat(z.segment(sp, sp), n_), 0.0),
              out.segment(sp, sp));
    svec_into(project_psd(smat(z.segment(2 * sp, sr), m_), 1.0),
              out.segment(2 * sp, sr));
    return out;
  }

  // L ||z - proj(z - grad/L)|| (1 + ||z||): zero exactly at optimality.
  double suboptimality(const Vector& z) const {
    const Vector step = project(z - gradient(z) / lipschitz_);
    return lipschitz_ * (z - step).norm() * (1.0 + z.norm());
  }

  Vector pack(const Matrix& P, const Matrix& Q, const Matrix& R) const {
    const Eigen::Index sp = svec_size(n_);
    Vector z(dim());
    svec_into(P, z.segment(0, sp));
    svec_into(Q, z.segment(sp, sp));
    svec_into(R, z.segment(2 * sp, svec_size(m_)));
    return z;
  }

  void unpack(const Vector& z, PqrResult& out) const {
    const Eigen::Index sp = svec_size(n_);
    out.P = smat(z.segment(0, sp), n_);
    out.Q = smat(z.segment(sp, sp), n_);
    out.R = smat(z.segment(2 * sp, svec_size(m_)), m_);
  }

 private:
  Eigen::Index n_;
  Eigen::Index m_;
  Matrix op_;
  Vector target_;
  Matrix gram_;
  Vector cross_;
  double lipschitz_ = 1.0;
};

}  // namespace

PqrResult solve_pqr_step(const LinearDynamics& dyn,
                         const Eigen::Ref<const Matrix>& K,
                         const Eigen::Ref<const Matrix>& Y1,
                         const Eigen::Ref<const Matrix>& Y2, double rho,
                         const PqrOptions& options, const PqrWarmStart* warm) {
  const Eigen::Index n = dyn.states();
  const Eigen::Index m = dyn.inputs();
  require_shape(K, m, n, "K");
  require_shape(Y1, n, n, "Y1");
  require_shape(Y2, m, n, "Y2");
  if (!(rho > 0.0)) throw ValidationError("rho must be positive");

  const PqrProblem problem(dyn, K, Y1, Y2, rho);
  const Eigen::Index d = problem.dim();

  // ADMM on  min ||A z - c||^2 + indicator(w)  s.t.  z = w,  scaled dual u.
  Vector w = warm ? problem.project(problem.pack(warm->P, warm->Q, warm->R))
                  : problem.project(Vector::Zero(d));
  Vector u = Vector::Zero(d);
  double sigma = std::max(2.0 * problem.gram().trace() / double(d), 1e-8);
  Eigen::LLT<Matrix> factor;
  auto refactor = [&] {
    Matrix lhs = 2.0 * problem.gram();
    lhs.diagonal().array() += sigma;
    factor.compute(lhs);
  };
  refactor();

  constexpr double kRelax = 1.6;
  constexpr int kCheckEvery = 10;
  constexpr int kAdaptEvery = 50;

  Vector best = w;
  double best_value = problem.objective(w);
  PqrResult out;
  auto finished = [&](const Vector& z) {
    const double value = problem.objective(z);
    if (value < best_value) {
      best_value = value;
      best = z;
    }
    return value <= options.target_objective ||
           problem.suboptimality(z) <= options.tol;
  };

  constexpr int kStallWindow = 1000;
  double best_sub = kInfiniteCost;
  double gain_value = kInfiniteCost;
  int last_gain = 0;
  int it = 0;
  if (finished(w)) {
    out.converged = true;
  } else {
    while (it < options.max_iter) {
      ++it;
      const Vector z =
          factor.solve(2.0 * problem.cross() + sigma * (w - u));
      const Vector relaxed = kRelax * z + (1.0 - kRelax) * w;
      const Vector w_next = problem.project(relaxed + u);
      u += relaxed - w_next;
      const double primal = (z - w_next).norm();
      const double dual = sigma * (w_next - w).norm();
      w = w_next;

      if (it % kCheckEvery == 0) {
        if (finished(w)) {
          out.converged = true;
          break;
        }
        const double sub = problem.suboptimality(w);
        if (sub < 0.5 * best_sub || best_value < 0.5 * gain_value) {
          best_sub = std::min(best_sub, sub);
          gain_value = best_value;
          last_gain = it;
        } else if (it - last_gain >= kStallWindow) {
          break;
        }
      }
      if (it % kAdaptEvery == 0) {
        const double p_scale = std::max({z.norm(), w.norm(), 1e-12});
        const double d_scale = std::max(sigma * u.norm(), 1e-12);
        const double ratio =
            std::sqrt((primal / p_scale) / std::max(dual / d_scale, 1e-300));
        if (ratio > 5.0 || ratio < 0.2) {
          const double next = std::clamp(sigma * ratio, 1e-10, 1e10);
          u *= sigma / next;
          sigma = next;
          refactor();
        }
      }
    }
  }

  // ADMM stalled: accelerated projected gradient with function-value
  // restarts from the best point, for the remaining budget.
  if (!out.converged && it < options.max_iter) {
    const double step = 1.0 / problem.lipschitz();
    Vector x = best;
    Vector y = x;
    double fx = problem.objective(x);
    double t = 1.0;
    while (it < options.max_iter) {
      ++it;
      const Vector next = problem.project(y - step * problem.gradient(y));
      const double fn = problem.objective(next);
      if (fn > fx) {
        y = x;
        t = 1.0;
        continue;
      }
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = next + ((t - 1.0) / tn) * (next - x);
      x = next;
      fx = fn;
      t = tn;
      if (it % kCheckEvery == 0 && finished(x)) {
        out.converged = true;
        break;
      }
    }
    finished(x);
  }
  out.iterations = it;

  problem.unpack(best, out);
  out.objective = pqr_objective(dyn, K, Y1, Y2, rho, out.P, out.Q, out.R);
  out.suboptimality = problem.suboptimality(best);
  return out;
}

}  // namespace lqrfit
