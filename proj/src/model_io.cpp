#include <bit>
#include <cstring>
#include <fstream>

#include "papyrid/errors.hpp"
#include "papyrid/numerics.hpp"

namespace papyrid {

namespace {

static_assert(std::endian::native == std::endian::little, "PWMD I/O assumes a little-endian host");

constexpr char kMagic[4] = {'P', 'W', 'M', 'D'};

struct Header {
  ModelKind kind;
  std::vector<std::uint32_t> dims;
};

void write_model(const std::filesystem::path& file, ModelKind kind,
                 const std::vector<std::uint32_t>& dims, const std::vector<double>& payload) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out.write(kMagic, 4);
  const auto k = static_cast<std::uint8_t>(kind);
  out.write(reinterpret_cast<const char*>(&k), 1);
  const auto nd = static_cast<std::uint32_t>(dims.size());
  out.write(reinterpret_cast<const char*>(&nd), 4);
  out.write(reinterpret_cast<const char*>(dims.data()), static_cast<std::streamsize>(dims.size() * 4));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + file.string());
}

std::vector<double> read_model(const std::filesystem::path& file, ModelKind expected,
                               std::vector<std::uint32_t>& dims) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  char magic[4];
  std::uint8_t kind = 0;
  std::uint32_t nd = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&kind), 1);
  in.read(reinterpret_cast<char*>(&nd), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::IoError, file.string() + " is not a PWMD file");
  }
  if (kind != static_cast<std::uint8_t>(expected)) {
    throw Error(ErrorCode::IoError, file.string() + " holds model kind " + std::to_string(kind));
  }
  if (nd > 16) throw Error(ErrorCode::IoError, "corrupt header in " + file.string());
  dims.resize(nd);
  in.read(reinterpret_cast<char*>(dims.data()), static_cast<std::streamsize>(nd * 4));
  std::vector<double> payload;
  double v;
  while (in.read(reinterpret_cast<char*>(&v), sizeof v)) payload.push_back(v);
  return payload;
}

void expect_size(const std::vector<double>& payload, std::size_t n, const std::filesystem::path& f) {
  if (payload.size() != n) throw Error(ErrorCode::IoError, "truncated payload in " + f.string());
}

}  // namespace

// codebook: dims [k, d]; payload seed, inertia, centres (k x d row-major)
void save_codebook(const std::filesystem::path& file, const Codebook& cb) {
  std::vector<double> payload;
  payload.reserve(2 + static_cast<std::size_t>(cb.centers.size()));
  payload.push_back(static_cast<double>(cb.seed));
  payload.push_back(cb.inertia);
  payload.insert(payload.end(), cb.centers.data(), cb.centers.data() + cb.centers.size());
  write_model(file, ModelKind::Codebook,
              {static_cast<std::uint32_t>(cb.k()), static_cast<std::uint32_t>(cb.dim())}, payload);
}

Codebook load_codebook(const std::filesystem::path& file) {
  std::vector<std::uint32_t> dims;
  const auto payload = read_model(file, ModelKind::Codebook, dims);
  if (dims.size() != 2) throw Error(ErrorCode::IoError, "bad codebook dims in " + file.string());
  const std::size_t k = dims[0], d = dims[1];
  expect_size(payload, 2 + k * d, file);
  Codebook cb;
  cb.seed = static_cast<std::uint64_t>(payload[0]);
  cb.inertia = payload[1];
  cb.centers = Eigen::Map<const RowMatrix>(payload.data() + 2, static_cast<Eigen::Index>(k),
                                           static_cast<Eigen::Index>(d));
  return cb;
}

// pca: dims [d, m, whiten]; payload eps, mean (d), eigenvalues (m), basis (d x m row-major)
void save_pca(const std::filesystem::path& file, const PcaModel& model) {
  if (!model.fitted()) throw Error(ErrorCode::NotFitted, "cannot save an unfitted PCA model");
  const auto d = model.input_dim(), m = model.output_dim();
  std::vector<double> payload;
  payload.reserve(1 + d + m + d * m);
  payload.push_back(model.eps);
  payload.insert(payload.end(), model.mean.data(), model.mean.data() + d);
  payload.insert(payload.end(), model.eigenvalues.data(), model.eigenvalues.data() + m);
  const RowMatrix basis = model.basis;
  payload.insert(payload.end(), basis.data(), basis.data() + basis.size());
  write_model(file, ModelKind::Pca,
              {static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(m), model.whiten ? 1u : 0u},
              payload);
}

PcaModel load_pca(const std::filesystem::path& file) {
  std::vector<std::uint32_t> dims;
  const auto payload = read_model(file, ModelKind::Pca, dims);
  if (dims.size() != 3) throw Error(ErrorCode::IoError, "bad PCA dims in " + file.string());
  const std::size_t d = dims[0], m = dims[1];
  expect_size(payload, 1 + d + m + d * m, file);
  PcaModel model;
  model.whiten = dims[2] != 0;
  model.eps = payload[0];
  const auto di = static_cast<Eigen::Index>(d), mi = static_cast<Eigen::Index>(m);
  model.mean = Eigen::Map<const Eigen::VectorXd>(payload.data() + 1, di);
  model.eigenvalues = Eigen::Map<const Eigen::VectorXd>(payload.data() + 1 + d, mi);
  model.basis = Eigen::Map<const RowMatrix>(payload.data() + 1 + d + m, di, mi);
  return model;
}

}  // namespace papyrid
