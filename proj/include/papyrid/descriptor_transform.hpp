#pragma once

#include <filesystem>

#include "papyrid/numerics.hpp"

namespace papyrid {

/// 128-D SIFT -> 64-D: l1 normalisation, signed power (Hellinger map for
/// power 0.5), whitening PCA, l2 normalisation.
struct DescriptorTransform {
  PcaModel pca;
  double hellinger_power = 0.5;
  double eps = 1e-10;

  bool fitted() const { return pca.fitted(); }
};

/// l1 normalisation followed by the element-wise signed power.
Eigen::VectorXd power_normalize(const Eigen::Ref<const Eigen::VectorXd>& d, double power,
                                double eps = 1e-10);

/// Needs at least 10 * out_dim samples.
DescriptorTransform fit_descriptor_transform(const RowMatrix& descriptors, std::size_t out_dim = 64,
                                             double power = 0.5);

/// Whitened projection before the final l2 step.
Eigen::VectorXd whiten_descriptor(const DescriptorTransform& t, const Eigen::Ref<const Eigen::VectorXd>& d);

/// Unit-norm output (zero vector stays zero).
Eigen::VectorXd apply_descriptor_transform(const DescriptorTransform& t,
                                           const Eigen::Ref<const Eigen::VectorXd>& d);
RowMatrix apply_descriptor_transform_rows(const DescriptorTransform& t, const RowMatrix& rows);

// The PCA goes to a PWMD file; the power and eps ride along in the encoder config.
void save_descriptor_transform(const std::filesystem::path& file, const DescriptorTransform& t);
DescriptorTransform load_descriptor_transform(const std::filesystem::path& file, double power,
                                              double eps = 1e-10);

}  // namespace papyrid
