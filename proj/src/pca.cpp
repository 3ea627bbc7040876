#include <cmath>

#include <Eigen/Eigenvalues>

#include "papyrid/errors.hpp"
#include "papyrid/numerics.hpp"

namespace papyrid {

Eigen::VectorXd PcaModel::transform(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (!fitted()) throw Error(ErrorCode::NotFitted, "PCA model not fitted");
  if (static_cast<std::size_t>(x.size()) != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "PCA input has dim " + std::to_string(x.size()) +
                                                  ", expected " + std::to_string(input_dim()));
  }
  Eigen::VectorXd y = basis.transpose() * (x - mean);
  if (whiten) y.array() /= (eigenvalues.array() + eps).sqrt();
  return y;
}

RowMatrix PcaModel::transform_rows(const RowMatrix& rows) const {
  if (!fitted()) throw Error(ErrorCode::NotFitted, "PCA model not fitted");
  if (static_cast<std::size_t>(rows.cols()) != input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "PCA input dimension mismatch");
  }
  RowMatrix y = (rows.rowwise() - mean.transpose()) * basis;
  if (whiten) {
    const Eigen::RowVectorXd scale = (eigenvalues.array() + eps).sqrt().inverse().matrix().transpose();
    y.array().rowwise() *= scale.array();
  }
  return y;
}

PcaModel fit_pca(const RowMatrix& data, std::size_t components, bool whiten, double eps) {
  const Eigen::Index n = data.rows(), d = data.cols();
  if (n < 2) throw Error(ErrorCode::InsufficientSample, "PCA needs at least 2 samples");
  const auto m = static_cast<Eigen::Index>(components);
  if (m < 1 || m > std::min(d, n - 1)) {
    throw Error(ErrorCode::InvalidArgument,
                "PCA components " + std::to_string(m) + " must be in [1, min(d, n-1)] = [1, " +
                    std::to_string(std::min(d, n - 1)) + "]");
  }
  if (!data.allFinite()) throw Error(ErrorCode::NonFiniteInput, "PCA input has NaN/Inf");

  PcaModel model;
  model.whiten = whiten;
  model.eps = eps;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centred = data.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(n - 1);

  Eigen::MatrixXd basis(d, m);
  Eigen::VectorXd values(m);
  if (d <= n) {
    const Eigen::MatrixXd cov = centred.transpose() * centred / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "eigendecomposition failed");
    for (Eigen::Index i = 0; i < m; ++i) {
      values[i] = es.eigenvalues()[d - 1 - i];
      basis.col(i) = es.eigenvectors().col(d - 1 - i);
    }
  } else {
    // Gram route: eigenvectors of X X^T map to those of X^T X.
    const Eigen::MatrixXd gram = centred * centred.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::RankDeficient, "eigendecomposition failed");
    for (Eigen::Index i = 0; i < m; ++i) {
      const double lambda = es.eigenvalues()[n - 1 - i];
      values[i] = lambda;
      Eigen::VectorXd v = centred.transpose() * es.eigenvectors().col(n - 1 - i);
      const double norm = v.norm();
      if (norm > 0) v /= norm;
      basis.col(i) = v;
    }
  }
  if (!(values[0] > eps)) {
    throw Error(ErrorCode::RankDeficient, "all retained eigenvalues are <= eps");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    values[i] = std::max(values[i], 0.0);
    Eigen::Index arg = 0;
    basis.col(i).cwiseAbs().maxCoeff(&arg);
    if (basis(arg, i) < 0) basis.col(i) *= -1.0;
  }
  model.basis = std::move(basis);
  model.eigenvalues = std::move(values);
  return model;
}

}  // namespace papyrid
