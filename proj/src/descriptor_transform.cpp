#include "papyrid/descriptor_transform.hpp"

#include <cmath>

#include "papyrid/errors.hpp"

namespace papyrid {

Eigen::VectorXd power_normalize(const Eigen::Ref<const Eigen::VectorXd>& d, double power,
                                double eps) {
  const double l1 = d.cwiseAbs().sum();
  Eigen::VectorXd out = d / (l1 + eps);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double v = out[i];
    out[i] = std::copysign(std::pow(std::abs(v), power), v);
  }
  return out;
}

DescriptorTransform fit_descriptor_transform(const RowMatrix& descriptors, std::size_t out_dim,
                                             double power) {
  if (static_cast<std::size_t>(descriptors.rows()) < 10 * out_dim) {
    throw Error(ErrorCode::InsufficientSample,
                std::to_string(descriptors.rows()) + " descriptors, need at least " +
                    std::to_string(10 * out_dim));
  }
  if (!(power > 0)) throw Error(ErrorCode::InvalidArgument, "power must be positive");
  DescriptorTransform t;
  t.hellinger_power = power;
  RowMatrix mapped(descriptors.rows(), descriptors.cols());
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) {
    mapped.row(i) = power_normalize(descriptors.row(i).transpose(), power, t.eps).transpose();
  }
  t.pca = fit_pca(mapped, out_dim, /*whiten=*/true);
  return t;
}

Eigen::VectorXd whiten_descriptor(const DescriptorTransform& t,
                                  const Eigen::Ref<const Eigen::VectorXd>& d) {
  if (!t.fitted()) throw Error(ErrorCode::NotFitted, "descriptor transform not fitted");
  return t.pca.transform(power_normalize(d, t.hellinger_power, t.eps));
}

Eigen::VectorXd apply_descriptor_transform(const DescriptorTransform& t,
                                           const Eigen::Ref<const Eigen::VectorXd>& d) {
  Eigen::VectorXd y = whiten_descriptor(t, d);
  const double n = y.norm();
  if (n > 0) y /= n;
  return y;
}

RowMatrix apply_descriptor_transform_rows(const DescriptorTransform& t, const RowMatrix& rows) {
  RowMatrix out(rows.rows(), static_cast<Eigen::Index>(t.pca.output_dim()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out.row(i) = apply_descriptor_transform(t, rows.row(i).transpose()).transpose();
  }
  return out;
}

void save_descriptor_transform(const std::filesystem::path& file, const DescriptorTransform& t) {
  save_pca(file, t.pca);
}

DescriptorTransform load_descriptor_transform(const std::filesystem::path& file, double power,
                                              double eps) {
  DescriptorTransform t;
  t.pca = load_pca(file);
  t.hellinger_power = power;
  t.eps = eps;
  return t;
}

}  // namespace papyrid
