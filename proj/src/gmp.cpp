#include <Eigen/Cholesky>

#include "papyrid/errors.hpp"
#include "papyrid/numerics.hpp"

namespace papyrid {

Eigen::VectorXd gmp_solve(const Eigen::MatrixXd& phi, double gamma, const GmpOptions& options) {
  const Eigen::Index d = phi.rows(), n = phi.cols();
  if (n < 1) throw Error(ErrorCode::EmptySetForGmp, "GMP needs at least one descriptor");
  if (!(gamma > 0)) throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
  if (!phi.allFinite() || !std::isfinite(gamma)) {
    throw Error(ErrorCode::NonFiniteInput, "GMP input has NaN/Inf");
  }

  GmpSolver solver = options.solver;
  if (solver == GmpSolver::Auto) {
    solver = (n < d && static_cast<std::size_t>(n) < options.dual_max_n) ? GmpSolver::Dual
                                                                          : GmpSolver::Primal;
  }

  Eigen::VectorXd xi;
  if (solver == GmpSolver::Dual) {
    // xi = Phi (Phi^T Phi + gamma I)^-1 1
    Eigen::MatrixXd gram = phi.transpose() * phi;
    gram.diagonal().array() += gamma;
    const Eigen::VectorXd alpha = gram.ldlt().solve(Eigen::VectorXd::Ones(n));
    xi = phi * alpha;
  } else {
    // (Phi Phi^T + gamma I) xi = Phi 1
    const Eigen::VectorXd rhs = phi.rowwise().sum();
    if (static_cast<std::size_t>(d) <= options.dense_primal_max_d) {
      Eigen::MatrixXd a = phi * phi.transpose();
      a.diagonal().array() += gamma;
      xi = a.ldlt().solve(rhs);
    } else {
      int iters = 0;
      xi = conjugate_gradient(
          [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
            return phi * (phi.transpose() * v) + gamma * v;
          },
          rhs, options.cg_tol, options.cg_max_iters, &iters);
      if (iters >= options.cg_max_iters) {
        const double rel = ((phi * (phi.transpose() * xi) + gamma * xi) - rhs).norm() / rhs.norm();
        if (rel > options.cg_tol * 100) {
          throw Error(ErrorCode::NoConvergence, "GMP conjugate gradients did not converge");
        }
      }
    }
  }
  if (!xi.allFinite()) throw Error(ErrorCode::NonFiniteInput, "GMP solution is not finite");
  return xi;
}

}  // namespace papyrid
