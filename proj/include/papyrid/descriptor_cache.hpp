#pragma once

#include <filesystem>
#include <vector>

#include "papyrid/features.hpp"
#include "papyrid/numerics.hpp"

namespace papyrid {

/// Per-document descriptor file:
///   "PWID" | u8 version = 1 | u32 count | u32 dim |
///   count x dim float32 (row-major) | count x 4 float32 (x, y, scale, orientation)
/// All little-endian.
struct DescriptorSet {
  RowMatrix descriptors;  // count x dim
  RowMatrix keypoints;    // count x 4

  std::size_t size() const { return static_cast<std::size_t>(descriptors.rows()); }
};

DescriptorSet to_descriptor_set(const std::vector<LocalDescriptor>& descriptors);

void write_descriptor_file(const std::filesystem::path& file, const DescriptorSet& set);
DescriptorSet read_descriptor_file(const std::filesystem::path& file);

}  // namespace papyrid
