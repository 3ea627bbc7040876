#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "papyrid/numerics.hpp"

namespace papyrid {

enum class PoolMode { Sum, Gmp };

PoolMode parse_pool_mode(std::string_view text);
std::string_view to_string(PoolMode mode);

struct EncodingConfig {
  std::size_t n_codebooks = 5;
  std::size_t k = 100;
  double gamma = 1000.0;
  double power_alpha = 0.5;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t pca_dim = 0;  // 0: default_joint_pca_dim
  PoolMode pool = PoolMode::Gmp;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-4;
  std::size_t kmeans_max_samples = 100000;  // pooled descriptors fed to k-means
  std::uint64_t sample_seed = 0;
  int jobs = 1;

  /// Throws InvalidConfig on inconsistent values.
  void validate() const;
};

struct VladAssignment {
  std::size_t center = 0;
  Eigen::VectorXd residual;
};

/// Hard assignment to the nearest centre (smallest index on ties).
VladAssignment vlad_assign(const Eigen::Ref<const Eigen::VectorXd>& d, const Codebook& cb);

/// Dense k * dim embedding: zero except block `center` = d - c.
Eigen::VectorXd vlad_embed(const Eigen::Ref<const Eigen::VectorXd>& d, const Codebook& cb);

/// Pools dense embeddings: sum, or gmp_solve over the embeddings as columns.
Eigen::VectorXd aggregate(const std::vector<Eigen::VectorXd>& embeddings, PoolMode mode,
                          double gamma);

/// Same result as aggregate(vlad_embed(...)) without materialising the
/// embeddings. Hard assignment makes Phi Phi^T block diagonal, so the GMP
/// ridge problem splits into one small solve per centre.
Eigen::VectorXd aggregate_vlad(const RowMatrix& descriptors, const Codebook& cb, PoolMode mode,
                               double gamma);

/// Signed power then l2 normalisation; zero maps to zero.
Eigen::VectorXd power_l2(const Eigen::Ref<const Eigen::VectorXd>& v, double alpha);

/// Stacks the rows of all documents; above `max_rows` (0: no limit) keeps a
/// seeded uniform subset in document order.
RowMatrix sample_rows(const std::vector<RowMatrix>& documents, std::size_t max_rows,
                      std::uint64_t seed);

struct Encoder {
  EncodingConfig config;
  std::vector<Codebook> codebooks;
  PcaModel joint_pca;

  std::size_t concatenated_dim() const;
  std::size_t output_dim() const { return joint_pca.output_dim(); }
};

struct GlobalDescriptor {
  std::string doc_id;
  std::string writer;
  Eigen::VectorXd vector;
  bool flagged = false;  // document had no descriptors
};

/// Joint PCA size when none is configured: min(total_dim, max(1, (documents - 1) / 4)).
/// Explicit sizes may go up to the rank bound documents - 1.
std::size_t default_joint_pca_dim(std::size_t total_dim, std::size_t documents);

/// Per codebook: VLAD -> pooling -> power_l2, then concatenated.
Eigen::VectorXd encode_concatenated(const Encoder& encoder, const RowMatrix& descriptors);

/// `documents` hold 64-D normalised descriptors, one matrix per document.
/// Empty documents are skipped for fitting.
Encoder fit_encoder(const std::vector<RowMatrix>& documents, const EncodingConfig& config);

/// Throws EmptyDescriptorSet for an empty document.
GlobalDescriptor encode_document(const Encoder& encoder, const RowMatrix& descriptors,
                                 std::string doc_id = {});

/// Encodes every document; empty ones come back as flagged zero vectors.
std::vector<GlobalDescriptor> encode_documents(const Encoder& encoder,
                                               const std::vector<RowMatrix>& documents,
                                               const std::vector<std::string>& doc_ids,
                                               const std::vector<std::string>& writers);

void save_encoder(const std::filesystem::path& dir, const Encoder& encoder);
Encoder load_encoder(const std::filesystem::path& dir);

void write_globals(const std::filesystem::path& file, const std::vector<GlobalDescriptor>& globals);
std::vector<GlobalDescriptor> read_globals(const std::filesystem::path& file);

}  // namespace papyrid
