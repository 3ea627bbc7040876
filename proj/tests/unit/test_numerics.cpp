#include <functional>
#include <cmath>
#include <random>

#include "doctest.h"
#include "papyrid/descriptor_transform.hpp"
#include "papyrid/errors.hpp"
#include "papyrid/numerics.hpp"
#include "test_util.hpp"

using namespace papyrid;

namespace {

RowMatrix gaussian_rows(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

Eigen::MatrixXd covariance(const RowMatrix& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const RowMatrix c = x.rowwise() - mean;
  return (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

}  // namespace

// ---------------------------------------------------------------- k-means

TEST_CASE("kmeans: k = 1 gives the mean") {
  const RowMatrix x = gaussian_rows(200, 3, 1);
  KMeansParams p;
  p.k = 1;
  const auto cb = kmeans(x, p);
  CHECK((cb.centers.row(0) - x.colwise().mean()).norm() < 1e-12);
}

TEST_CASE("kmeans: n = k distinct points become the centres") {
  RowMatrix x(4, 2);
  x << 0, 0, 5, 1, -3, 7, 2, 2;
  KMeansParams p;
  p.k = 4;
  const auto cb = kmeans(x, p);
  CHECK(cb.inertia == doctest::Approx(0.0));
  for (Eigen::Index i = 0; i < 4; ++i) {
    double best = 1e9;
    for (Eigen::Index j = 0; j < 4; ++j) best = std::min(best, (cb.centers.row(j) - x.row(i)).norm());
    CHECK(best < 1e-12);
  }
  p.k = 5;
  CHECK(code_of([&] { kmeans(x, p); }) == ErrorCode::TooFewPoints);
}

TEST_CASE("kmeans: two separated blobs") {
  RowMatrix x = gaussian_rows(400, 2, 3, 0.5);
  for (Eigen::Index i = 200; i < 400; ++i) x(i, 0) += 20;
  const Eigen::RowVectorXd m0 = x.topRows(200).colwise().mean();
  const Eigen::RowVectorXd m1 = x.bottomRows(200).colwise().mean();
  KMeansParams p;
  p.k = 2;
  const auto cb = kmeans(x, p);
  const bool order = cb.centers(0, 0) < cb.centers(1, 0);
  CHECK((cb.centers.row(order ? 0 : 1) - m0).norm() < 0.1);
  CHECK((cb.centers.row(order ? 1 : 0) - m1).norm() < 0.1);
}

TEST_CASE("kmeans: inertia never increases, results are seed-determined and job-independent") {
  const RowMatrix x = gaussian_rows(5000, 8, 4);
  KMeansParams p;
  p.k = 20;
  p.seed = 7;
  const auto a = kmeans(x, p);
  for (std::size_t i = 1; i < a.inertia_history.size(); ++i) {
    CHECK(a.inertia_history[i] <= a.inertia_history[i - 1] * (1 + 1e-12));
  }
  p.jobs = 3;
  const auto b = kmeans(x, p);
  CHECK(a.centers == b.centers);
  CHECK(a.inertia == b.inertia);
  p.seed = 8;
  const auto c = kmeans(x, p);
  CHECK(a.centers != c.centers);
}

TEST_CASE("kmeans: nearest prefers the smaller index on ties") {
  Codebook cb;
  cb.centers.resize(2, 1);
  cb.centers << -1, 1;
  CHECK(cb.nearest(Eigen::VectorXd::Zero(1)) == 0);
}

// ---------------------------------------------------------------- PCA

TEST_CASE("pca: whitening diag(4, 1) data") {
  RowMatrix x = gaussian_rows(10000, 2, 5);
  x.col(0) *= 2.0;
  const auto pca = fit_pca(x, 2, true);
  CHECK(pca.eigenvalues[0] == doctest::Approx(4.0).epsilon(0.1));
  CHECK(pca.eigenvalues[1] == doctest::Approx(1.0).epsilon(0.1));
  const RowMatrix y = pca.transform_rows(x);
  const Eigen::MatrixXd c = covariance(y);
  CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(c(1, 1) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(c(0, 1)) < 0.05);
}

TEST_CASE("pca: isotropic data, orthonormal basis, sign convention") {
  const RowMatrix x = gaussian_rows(20000, 5, 6);
  const auto pca = fit_pca(x, 5, false);
  CHECK((pca.basis.transpose() * pca.basis - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-10);
  CHECK(pca.eigenvalues.maxCoeff() / pca.eigenvalues.minCoeff() < 1.15);
  for (Eigen::Index j = 0; j < 5; ++j) {
    Eigen::Index arg;
    pca.basis.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(pca.basis(arg, j) > 0);
  }
}

TEST_CASE("pca: Gram route agrees with the covariance route") {
  const RowMatrix x = gaussian_rows(12, 30, 7);  // d > n: Gram route
  const auto g = fit_pca(x, 5, true);
  // covariance route computed directly
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance(x));
  for (int j = 0; j < 5; ++j) {
    const double lam = es.eigenvalues()[29 - j];
    CHECK(g.eigenvalues[j] == doctest::Approx(lam).epsilon(1e-9));
    CHECK(std::abs(std::abs(g.basis.col(j).dot(es.eigenvectors().col(29 - j))) - 1.0) < 1e-9);
  }
}

TEST_CASE("pca: preconditions") {
  const RowMatrix x = gaussian_rows(10, 4, 8);
  CHECK(code_of([&] { fit_pca(x, 10, true); }) == ErrorCode::InvalidArgument);
  const RowMatrix same = RowMatrix::Ones(10, 4);
  CHECK(code_of([&] { fit_pca(same, 2, true); }) == ErrorCode::RankDeficient);
  RowMatrix bad = x;
  bad(0, 0) = std::nan("");
  CHECK(code_of([&] { fit_pca(bad, 2, true); }) == ErrorCode::NonFiniteInput);
}

// ---------------------------------------------------------------- GMP

TEST_CASE("gmp: closed forms") {
  Eigen::MatrixXd one = Eigen::MatrixXd::Zero(4, 1);
  one(0, 0) = 1;
  const auto xi = gmp_solve(one, 1.0);
  CHECK(xi(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(xi.tail(3).norm() < 1e-15);

  Eigen::MatrixXd three = Eigen::MatrixXd::Zero(4, 3);
  three.row(0).setOnes();
  const auto xi3 = gmp_solve(three, 1.0);
  CHECK(xi3(0) == doctest::Approx(0.75).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd phi(10);
    for (auto& v : phi) v = g(rng);
    const double gamma = std::pow(10.0, trial % 5 - 1);
    const auto r1 = gmp_solve(phi, gamma);
    CHECK((r1 - phi / (phi.squaredNorm() + gamma)).norm() <= 1e-8 * r1.norm());
    const int n = 1 + trial % 6;
    const Eigen::MatrixXd rep = phi.replicate(1, n);
    const auto rn = gmp_solve(rep, gamma);
    const Eigen::VectorXd want = n / (n * phi.squaredNorm() + gamma) * phi;
    CHECK((rn - want).norm() <= 1e-8 * want.norm());
  }
}

TEST_CASE("gmp: primal, dual and CG solves agree") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (auto [d, n] : {std::pair{20, 8}, std::pair{8, 20}, std::pair{600, 40}}) {
    Eigen::MatrixXd phi(d, n);
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = g(rng);
    GmpOptions primal, dual;
    primal.solver = GmpSolver::Primal;
    dual.solver = GmpSolver::Dual;
    const auto a = gmp_solve(phi, 10.0, primal);
    const auto b = gmp_solve(phi, 10.0, dual);
    CAPTURE(d);
    CHECK((a - b).norm() <= 1e-6 * b.norm());
    // normal equations
    const Eigen::VectorXd resid = (phi * phi.transpose() + 10.0 * Eigen::MatrixXd::Identity(d, d)) * a -
                                  phi * Eigen::VectorXd::Ones(n);
    CHECK(resid.norm() <= 1e-6 * phi.norm());
  }
}

TEST_CASE("gmp: large gamma approaches sum pooling") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::MatrixXd phi(30, 12);
  for (Eigen::Index i = 0; i < phi.size(); ++i) phi.data()[i] = g(rng);
  const auto xi = gmp_solve(phi, 1e9);
  const Eigen::VectorXd sum = phi.rowwise().sum();
  CHECK(xi.dot(sum) / (xi.norm() * sum.norm()) >= 0.999);
}

TEST_CASE("gmp: errors") {
  CHECK(code_of([] { gmp_solve(Eigen::MatrixXd(3, 0), 1.0); }) == ErrorCode::EmptySetForGmp);
  CHECK(code_of([] { gmp_solve(Eigen::MatrixXd::Ones(3, 2), 0.0); }) == ErrorCode::InvalidArgument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(3, 2);
  bad(1, 1) = INFINITY;
  CHECK(code_of([&] { gmp_solve(bad, 1.0); }) == ErrorCode::NonFiniteInput);
}

// ---------------------------------------------------------------- model files

TEST_CASE("model files round-trip bit-exactly") {
  testutil::TempDir dir("pwmd");
  KMeansParams p;
  p.k = 5;
  p.seed = 99;
  const auto cb = kmeans(gaussian_rows(100, 6, 9), p);
  save_codebook(dir / "cb.pwmd", cb);
  const auto cb2 = load_codebook(dir / "cb.pwmd");
  CHECK(cb2.centers == cb.centers);
  CHECK(cb2.seed == 99);
  CHECK(cb2.inertia == cb.inertia);

  const auto pca = fit_pca(gaussian_rows(50, 6, 10), 4, true, 1e-6);
  save_pca(dir / "pca.pwmd", pca);
  const auto pca2 = load_pca(dir / "pca.pwmd");
  CHECK(pca2.basis == pca.basis);
  CHECK(pca2.mean == pca.mean);
  CHECK(pca2.eigenvalues == pca.eigenvalues);
  CHECK(pca2.whiten);
  CHECK(pca2.eps == 1e-6);

  CHECK(code_of([&] { load_pca(dir / "cb.pwmd"); }) == ErrorCode::IoError);
  CHECK(code_of([&] { load_codebook(dir / "missing.pwmd"); }) == ErrorCode::IoError);
}

// ---------------------------------------------------------------- descriptor transform

TEST_CASE("descriptor transform: power step and scale invariance") {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(128);
  d(0) = 0.64;
  d(1) = 0.36;
  const auto p = power_normalize(d, 0.5);
  CHECK(p(0) == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(p(1) == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(p.tail(126).norm() == 0);

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  RowMatrix x(2000, 128);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng) * u(rng);
  const auto t = fit_descriptor_transform(x, 64);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd v = x.row(i).transpose();
    const auto a = apply_descriptor_transform(t, v);
    const auto b = apply_descriptor_transform(t, 2.0 * v);
    CHECK(a.size() == 64);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((a - b).norm() < 1e-12);
  }
  const auto t2 = fit_descriptor_transform(x, 64);
  CHECK(t2.pca.basis == t.pca.basis);
}

TEST_CASE("descriptor transform: whitened covariance is the identity") {
  std::mt19937_64 rng(13);
  std::gamma_distribution<double> gam(0.7, 1.0);
  RowMatrix x(10000, 128);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gam(rng);
  const auto t = fit_descriptor_transform(x, 64);
  RowMatrix y(x.rows(), 64);
  for (Eigen::Index i = 0; i < x.rows(); ++i) y.row(i) = whiten_descriptor(t, x.row(i).transpose()).transpose();
  const Eigen::MatrixXd c = covariance(y);
  CHECK((c.diagonal().array() - 1.0).abs().maxCoeff() < 0.1);
  Eigen::MatrixXd off = c;
  off.diagonal().setZero();
  CHECK(off.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("descriptor transform: sample size and persistence") {
  const RowMatrix small = gaussian_rows(100, 128, 14).cwiseAbs();
  CHECK(code_of([&] { fit_descriptor_transform(small, 64); }) == ErrorCode::InsufficientSample);

  testutil::TempDir dir("dt");
  const RowMatrix x = gaussian_rows(800, 128, 15).cwiseAbs();
  const auto t = fit_descriptor_transform(x, 64);
  save_descriptor_transform(dir / "d.pwmd", t);
  const auto back = load_descriptor_transform(dir / "d.pwmd", 0.5);
  const Eigen::VectorXd v = x.row(3).transpose();
  CHECK(apply_descriptor_transform(back, v) == apply_descriptor_transform(t, v));
}
