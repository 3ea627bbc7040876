#include "papyrid/descriptor_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "papyrid/errors.hpp"

namespace papyrid {

namespace {
static_assert(std::endian::native == std::endian::little, "PWID I/O assumes a little-endian host");
constexpr char kMagic[4] = {'P', 'W', 'I', 'D'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

DescriptorSet to_descriptor_set(const std::vector<LocalDescriptor>& descriptors) {
  DescriptorSet set;
  const auto n = static_cast<Eigen::Index>(descriptors.size());
  const auto dim = descriptors.empty() ? Eigen::Index{kSiftDim}
                                       : static_cast<Eigen::Index>(descriptors.front().values.size());
  set.descriptors.resize(n, dim);
  set.keypoints.resize(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& d = descriptors[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(d.values.size()) != dim) {
      throw Error(ErrorCode::DimensionMismatch, "descriptors of different length");
    }
    for (Eigen::Index j = 0; j < dim; ++j) set.descriptors(i, j) = d.values[static_cast<std::size_t>(j)];
    set.keypoints.row(i) << d.keypoint.x, d.keypoint.y, d.keypoint.scale, d.keypoint.orientation;
  }
  return set;
}

void write_descriptor_file(const std::filesystem::path& file, const DescriptorSet& set) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  const auto count = static_cast<std::uint32_t>(set.descriptors.rows());
  const auto dim = static_cast<std::uint32_t>(set.descriptors.cols());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), 1);
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> d =
      set.descriptors.cast<float>();
  out.write(reinterpret_cast<const char*>(d.data()), static_cast<std::streamsize>(d.size() * 4));
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> k =
      set.keypoints.cast<float>();
  out.write(reinterpret_cast<const char*>(k.data()), static_cast<std::streamsize>(k.size() * 4));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + file.string());
}

DescriptorSet read_descriptor_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  char magic[4];
  std::uint8_t version = 0;
  std::uint32_t count = 0, dim = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 1);
  in.read(reinterpret_cast<char*>(&count), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::IoError, file.string() + " is not a PWID file");
  }
  if (version != kVersion) {
    throw Error(ErrorCode::IoError, file.string() + ": unsupported version " + std::to_string(version));
  }
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> d(count, dim), k(count, 4);
  in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * 4));
  in.read(reinterpret_cast<char*>(k.data()), static_cast<std::streamsize>(k.size() * 4));
  if (!in) throw Error(ErrorCode::IoError, "truncated descriptor file " + file.string());
  DescriptorSet set;
  set.descriptors = d.cast<double>();
  set.keypoints = k.cast<double>();
  return set;
}

}  // namespace papyrid
