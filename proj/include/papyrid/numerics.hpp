#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace papyrid {

/// n x d sample matrix, one sample per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------- k-means

struct KMeansParams {
  std::size_t k = 100;
  std::uint64_t seed = 1;
  int max_iters = 100;
  double tol = 1e-4;  // relative inertia decrease
  int jobs = 1;
};

struct Codebook {
  RowMatrix centers;  // k x d
  std::uint64_t seed = 0;
  double inertia = 0;
  std::vector<double> inertia_history;  // one entry per assignment step

  std::size_t k() const { return static_cast<std::size_t>(centers.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centers.cols()); }

  /// Nearest centre by Euclidean distance, smallest index on ties.
  std::size_t nearest(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// k-means++ seeding followed by Lloyd iterations. Assignment runs over fixed
/// chunks that are merged in order, so results do not depend on `jobs`.
Codebook kmeans(const RowMatrix& data, const KMeansParams& params);

// ---------------------------------------------------------------- PCA

struct PcaModel {
  Eigen::VectorXd mean;         // d
  Eigen::MatrixXd basis;        // d x m, orthonormal columns
  Eigen::VectorXd eigenvalues;  // m, descending
  bool whiten = false;
  double eps = 1e-8;

  bool fitted() const { return basis.size() > 0; }
  std::size_t input_dim() const { return static_cast<std::size_t>(basis.rows()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(basis.cols()); }

  Eigen::VectorXd transform(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  RowMatrix transform_rows(const RowMatrix& rows) const;
};

/// Eigendecomposition of the sample covariance (or of the Gram matrix when
/// d > n). Each basis column is signed so its largest-magnitude entry is
/// positive.
PcaModel fit_pca(const RowMatrix& data, std::size_t components, bool whiten, double eps = 1e-8);

// ---------------------------------------------------------------- GMP

enum class GmpSolver { Auto, Primal, Dual };

struct GmpOptions {
  GmpSolver solver = GmpSolver::Auto;
  std::size_t dual_max_n = 512;
  std::size_t dense_primal_max_d = 512;
  double cg_tol = 1e-8;
  int cg_max_iters = 1000;
};

/// xi = argmin ||Phi^T xi - 1||^2 + gamma ||xi||^2 for Phi (d x n) holding one
/// embedded descriptor per column.
Eigen::VectorXd gmp_solve(const Eigen::MatrixXd& phi, double gamma, const GmpOptions& options = {});

/// Conjugate gradients for a symmetric positive definite operator.
template <typename Apply>
Eigen::VectorXd conjugate_gradient(Apply&& apply, const Eigen::VectorXd& rhs, double tol,
                                   int max_iters, int* iterations = nullptr);

// ---------------------------------------------------------------- I/O

// PWMD model file: "PWMD", u8 kind, u32 ndims, ndims x u32, float64 payload.
// All integers and floats little-endian.
enum class ModelKind : std::uint8_t { Codebook = 1, Pca = 2 };

void save_codebook(const std::filesystem::path& file, const Codebook& codebook);
Codebook load_codebook(const std::filesystem::path& file);
void save_pca(const std::filesystem::path& file, const PcaModel& model);
PcaModel load_pca(const std::filesystem::path& file);

// ---------------------------------------------------------------- template impl

template <typename Apply>
Eigen::VectorXd conjugate_gradient(Apply&& apply, const Eigen::VectorXd& rhs, double tol,
                                   int max_iters, int* iterations) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd p = r;
  const double rhs_norm = rhs.norm();
  double rr = r.squaredNorm();
  int it = 0;
  if (rhs_norm == 0) {
    if (iterations) *iterations = 0;
    return x;
  }
  for (; it < max_iters && std::sqrt(rr) > tol * rhs_norm; ++it) {
    const Eigen::VectorXd ap = apply(p);
    const double alpha = rr / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  if (iterations) *iterations = it;
  return x;
}

}  // namespace papyrid
