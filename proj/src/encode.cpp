#include "papyrid/encode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include <Eigen/Cholesky>

#include "json.hpp"
#include "papyrid/errors.hpp"

namespace papyrid {

PoolMode parse_pool_mode(std::string_view text) {
  if (text == "gmp") return PoolMode::Gmp;
  if (text == "sum") return PoolMode::Sum;
  throw Error(ErrorCode::UnknownMethod, "pooling mode " + std::string(text));
}

std::string_view to_string(PoolMode mode) { return mode == PoolMode::Gmp ? "gmp" : "sum"; }

void EncodingConfig::validate() const {
  if (n_codebooks < 1) throw Error(ErrorCode::InvalidConfig, "n_codebooks must be >= 1");
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");
  if (!(gamma > 0)) throw Error(ErrorCode::InvalidConfig, "gamma must be > 0");
  if (!(power_alpha > 0 && power_alpha <= 1)) {
    throw Error(ErrorCode::InvalidConfig, "alpha must be in (0, 1]");
  }
  if (seeds.size() != n_codebooks) {
    throw Error(ErrorCode::InvalidConfig, "need exactly one seed per codebook");
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw Error(ErrorCode::InvalidConfig, "codebook seeds must be pairwise distinct");
  }
}

VladAssignment vlad_assign(const Eigen::Ref<const Eigen::VectorXd>& d, const Codebook& cb) {
  if (static_cast<std::size_t>(d.size()) != cb.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "descriptor dim " + std::to_string(d.size()) +
                                                  " vs codebook dim " + std::to_string(cb.dim()));
  }
  VladAssignment a;
  a.center = cb.nearest(d);
  a.residual = d - cb.centers.row(static_cast<Eigen::Index>(a.center)).transpose();
  return a;
}

Eigen::VectorXd vlad_embed(const Eigen::Ref<const Eigen::VectorXd>& d, const Codebook& cb) {
  const VladAssignment a = vlad_assign(d, cb);
  const auto dim = static_cast<Eigen::Index>(cb.dim());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cb.k()) * dim);
  out.segment(static_cast<Eigen::Index>(a.center) * dim, dim) = a.residual;
  return out;
}

Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& embeddings, PoolMode mode,
                          double gamma) {
  if (embeddings.empty()) {
    if (mode == PoolMode::Gmp) throw Error(ErrorCode::EmptySetForGmp, "no embeddings to pool");
    return {};
  }
  const Eigen::Index dim = embeddings.front().size();
  Eigen::MatrixXd phi(dim, static_cast<Eigen::Index>(embeddings.size()));
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != dim) throw Error(ErrorCode::DimensionMismatch, "embedding sizes differ");
    phi.col(static_cast<Eigen::Index>(i)) = embeddings[i];
  }
  if (mode == PoolMode::Sum) return phi.rowwise().sum();
  return gmp_solve(phi, gamma);
}

Eigen::VectorXd aggregate_vlad(const RowMatrix& descriptors, const Codebook& cb, PoolMode mode,
                               double gamma) {
  const auto k = static_cast<Eigen::Index>(cb.k());
  const auto dim = static_cast<Eigen::Index>(cb.dim());
  if (descriptors.rows() == 0 && mode == PoolMode::Gmp) {
    throw Error(ErrorCode::EmptySetForGmp, "no descriptors to pool");
  }
  if (descriptors.rows() > 0 && descriptors.cols() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "descriptor dim " + std::to_string(descriptors.cols()) +
                                                  " vs codebook dim " + std::to_string(dim));
  }

  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(k));
  std::vector<Eigen::VectorXd> residuals(static_cast<std::size_t>(descriptors.rows()));
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) {
    VladAssignment a = vlad_assign(descriptors.row(i).transpose(), cb);
    members[a.center].push_back(i);
    residuals[static_cast<std::size_t>(i)] = std::move(a.residual);
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(k * dim);
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto& idx = members[static_cast<std::size_t>(c)];
    if (idx.empty()) continue;
    Eigen::MatrixXd block(dim, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      block.col(static_cast<Eigen::Index>(j)) = residuals[static_cast<std::size_t>(idx[j])];
    }
    if (mode == PoolMode::Sum) {
      out.segment(c * dim, dim) = block.rowwise().sum();
    } else {
      GmpOptions opt;
      opt.solver = block.cols() < dim ? GmpSolver::Dual : GmpSolver::Primal;
      out.segment(c * dim, dim) = gmp_solve(block, gamma, opt);
    }
  }
  return out;
}

Eigen::VectorXd power_l2(const Eigen::Ref<const Eigen::VectorXd>& v, double alpha) {
  if (!(alpha > 0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive");
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::copysign(std::pow(std::abs(v[i]), alpha), v[i]);
  const double n = out.norm();
  if (n > 0) out /= n;
  return out;
}

std::size_t Encoder::concatenated_dim() const {
  std::size_t total = 0;
  for (const auto& cb : codebooks) total += cb.k() * cb.dim();
  return total;
}

Eigen::VectorXd encode_concatenated(const Encoder& encoder, const RowMatrix& descriptors) {
  if (descriptors.rows() == 0) throw Error(ErrorCode::EmptyDescriptorSet, "document has no descriptors");
  Eigen::VectorXd out(static_cast<Eigen::Index>(encoder.concatenated_dim()));
  Eigen::Index offset = 0;
  for (const auto& cb : encoder.codebooks) {
    const Eigen::VectorXd pooled =
        aggregate_vlad(descriptors, cb, encoder.config.pool, encoder.config.gamma);
    out.segment(offset, pooled.size()) = power_l2(pooled, encoder.config.power_alpha);
    offset += pooled.size();
  }
  return out;
}

RowMatrix sample_rows(const std::vector<RowMatrix>& documents, std::size_t max_rows,
                      std::uint64_t seed) {
  Eigen::Index total = 0, dim = -1;
  for (const auto& d : documents) {
    if (d.rows() == 0) continue;
    if (dim < 0) dim = d.cols();
    if (d.cols() != dim) throw Error(ErrorCode::DimensionMismatch, "documents have different dims");
    total += d.rows();
  }
  std::vector<Eigen::Index> pick(static_cast<std::size_t>(total));
  for (Eigen::Index i = 0; i < total; ++i) pick[static_cast<std::size_t>(i)] = i;
  if (max_rows > 0 && static_cast<std::size_t>(total) > max_rows) {
    // partial Fisher-Yates, then restore document order
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < max_rows; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (pick.size() - i));
      std::swap(pick[i], pick[j]);
    }
    pick.resize(max_rows);
    std::sort(pick.begin(), pick.end());
  }
  RowMatrix out(static_cast<Eigen::Index>(pick.size()), std::max<Eigen::Index>(dim, 0));
  std::size_t next = 0;
  Eigen::Index base = 0;
  for (const auto& d : documents) {
    while (next < pick.size() && pick[next] < base + d.rows()) {
      out.row(static_cast<Eigen::Index>(next)) = d.row(pick[next] - base);
      ++next;
    }
    base += d.rows();
  }
  return out;
}

std::size_t default_joint_pca_dim(std::size_t total_dim, std::size_t documents) {
  if (documents < 2) throw Error(ErrorCode::TooFewDocuments, "joint PCA needs at least two documents");
  // At the rank bound n - 1 the whitened fitting set is a regular simplex
  // (every pairwise distance equal), so keep a quarter of it.
  return std::min(total_dim, std::max<std::size_t>(1, (documents - 1) / 4));
}

Encoder fit_encoder(const std::vector<RowMatrix>& documents, const EncodingConfig& config) {
  config.validate();
  std::size_t nonempty = 0, pooled = 0;
  for (const auto& d : documents) {
    if (d.rows() > 0) ++nonempty;
    pooled += static_cast<std::size_t>(d.rows());
  }
  if (nonempty < 2) throw Error(ErrorCode::TooFewDocuments, "encoder needs at least 2 non-empty documents");
  if (pooled < 10 * config.k) {
    throw Error(ErrorCode::InsufficientDescriptors,
                std::to_string(pooled) + " pooled descriptors, need at least " + std::to_string(10 * config.k));
  }

  Encoder enc;
  enc.config = config;
  const RowMatrix sample = sample_rows(documents, config.kmeans_max_samples, config.sample_seed);
  for (std::size_t c = 0; c < config.n_codebooks; ++c) {
    KMeansParams p;
    p.k = config.k;
    p.seed = config.seeds[c];
    p.max_iters = config.kmeans_max_iters;
    p.tol = config.kmeans_tol;
    p.jobs = config.jobs;
    enc.codebooks.push_back(kmeans(sample, p));
  }

  RowMatrix concatenated(static_cast<Eigen::Index>(nonempty),
                         static_cast<Eigen::Index>(enc.concatenated_dim()));
  Eigen::Index row = 0;
  for (const auto& d : documents) {
    if (d.rows() == 0) continue;
    concatenated.row(row++) = encode_concatenated(enc, d).transpose();
  }
  const std::size_t max_dim = std::min(enc.concatenated_dim(), nonempty - 1);
  const std::size_t dim =
      config.pca_dim == 0 ? default_joint_pca_dim(enc.concatenated_dim(), nonempty) : config.pca_dim;
  if (dim > max_dim) {
    throw Error(ErrorCode::InvalidConfig, "pca_dim " + std::to_string(dim) + " exceeds rank bound " +
                                              std::to_string(max_dim));
  }
  enc.joint_pca = fit_pca(concatenated, dim, /*whiten=*/true);
  return enc;
}

GlobalDescriptor encode_document(const Encoder& encoder, const RowMatrix& descriptors,
                                 std::string doc_id) {
  if (!encoder.joint_pca.fitted()) throw Error(ErrorCode::NotFitted, "encoder not fitted");
  GlobalDescriptor g;
  g.doc_id = std::move(doc_id);
  g.vector = encoder.joint_pca.transform(encode_concatenated(encoder, descriptors));
  const double n = g.vector.norm();
  if (n > 0) g.vector /= n;
  return g;
}

std::vector<GlobalDescriptor> encode_documents(const Encoder& encoder,
                                               const std::vector<RowMatrix>& documents,
                                               const std::vector<std::string>& doc_ids,
                                               const std::vector<std::string>& writers) {
  if (doc_ids.size() != documents.size() || writers.size() != documents.size()) {
    throw Error(ErrorCode::InvalidArgument, "documents, ids and writers differ in length");
  }
  std::vector<GlobalDescriptor> out;
  out.reserve(documents.size());
  for (std::size_t i = 0; i < documents.size(); ++i) {
    GlobalDescriptor g;
    if (documents[i].rows() == 0) {
      g.doc_id = doc_ids[i];
      g.vector = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(encoder.output_dim()));
      g.flagged = true;
    } else {
      g = encode_document(encoder, documents[i], doc_ids[i]);
    }
    g.writer = writers[i];
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

nlohmann::ordered_json config_json(const EncodingConfig& c) {
  nlohmann::ordered_json j;
  j["n_codebooks"] = c.n_codebooks;
  j["k"] = c.k;
  j["gamma"] = c.gamma;
  j["power_alpha"] = c.power_alpha;
  j["seeds"] = c.seeds;
  j["pca_dim"] = c.pca_dim;
  j["pool"] = std::string(to_string(c.pool));
  j["kmeans_max_iters"] = c.kmeans_max_iters;
  j["kmeans_tol"] = c.kmeans_tol;
  j["kmeans_max_samples"] = c.kmeans_max_samples;
  j["sample_seed"] = c.sample_seed;
  return j;
}

EncodingConfig config_from_json(const nlohmann::json& j) {
  EncodingConfig c;
  c.n_codebooks = j.at("n_codebooks").get<std::size_t>();
  c.k = j.at("k").get<std::size_t>();
  c.gamma = j.at("gamma").get<double>();
  c.power_alpha = j.at("power_alpha").get<double>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.pca_dim = j.at("pca_dim").get<std::size_t>();
  c.pool = parse_pool_mode(j.at("pool").get<std::string>());
  c.kmeans_max_iters = j.at("kmeans_max_iters").get<int>();
  c.kmeans_tol = j.at("kmeans_tol").get<double>();
  c.kmeans_max_samples = j.at("kmeans_max_samples").get<std::size_t>();
  c.sample_seed = j.at("sample_seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_encoder(const std::filesystem::path& dir, const Encoder& encoder) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < encoder.codebooks.size(); ++i) {
    save_codebook(dir / ("codebook_" + std::to_string(i) + ".pwmd"), encoder.codebooks[i]);
  }
  save_pca(dir / "joint_pca.pwmd", encoder.joint_pca);

  // keep keys written by other stages (descriptor transform settings)
  nlohmann::ordered_json j;
  const auto cfg_file = dir / "config.json";
  if (std::ifstream in(cfg_file); in) {
    try {
      j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception&) {
      j = nlohmann::ordered_json::object();
    }
  }
  j["encoding"] = config_json(encoder.config);
  std::ofstream out(cfg_file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + cfg_file.string());
  out << j.dump(2) << '\n';
}

Encoder load_encoder(const std::filesystem::path& dir) {
  std::ifstream in(dir / "config.json", std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "missing " + (dir / "config.json").string());
  Encoder enc;
  try {
    enc.config = config_from_json(nlohmann::json::parse(in).at("encoding"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, "bad encoder config: " + std::string(e.what()));
  }
  for (std::size_t i = 0; i < enc.config.n_codebooks; ++i) {
    enc.codebooks.push_back(load_codebook(dir / ("codebook_" + std::to_string(i) + ".pwmd")));
  }
  enc.joint_pca = load_pca(dir / "joint_pca.pwmd");
  return enc;
}

void write_globals(const std::filesystem::path& file, const std::vector<GlobalDescriptor>& globals) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& g : globals) {
    nlohmann::ordered_json j;
    j["doc_id"] = g.doc_id;
    j["writer"] = g.writer;
    j["flagged"] = g.flagged;
    j["vector"] = std::vector<double>(g.vector.data(), g.vector.data() + g.vector.size());
    arr.push_back(std::move(j));
  }
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << arr.dump() << '\n';
}

std::vector<GlobalDescriptor> read_globals(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + file.string());
  std::vector<GlobalDescriptor> out;
  try {
    for (const auto& j : nlohmann::json::parse(in)) {
      GlobalDescriptor g;
      g.doc_id = j.at("doc_id").get<std::string>();
      g.writer = j.at("writer").get<std::string>();
      g.flagged = j.at("flagged").get<bool>();
      const auto v = j.at("vector").get<std::vector<double>>();
      g.vector = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      out.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, "bad globals file " + file.string() + ": " + e.what());
  }
  return out;
}

}  // namespace papyrid
