#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "papyrid/classify.hpp"
#include "papyrid/config.hpp"
#include "papyrid/corpus.hpp"
#include "papyrid/descriptor_transform.hpp"
#include "papyrid/encode.hpp"
#include "papyrid/retrieval.hpp"

namespace papyrid {

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception is rethrown
/// after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

// ---- stage functions, shared by the subcommands and run_pipeline ----

/// Writes <out_dir>/<doc_id>.png for every document. External masks are read
/// from <mask_dir>/<doc_id>.png. Returns the warnings of all documents.
std::vector<std::string> binarize_corpus(const Corpus& corpus, const BinarizeOptions& options,
                                         const std::filesystem::path& mask_dir,
                                         const std::filesystem::path& out_dir, int jobs = 1);

/// Writes <out_dir>/<doc_id>.pwid with raw 128-D descriptors. `masks_dir`
/// empty means no binarization: descriptors come from the gray image and no
/// ink filtering is possible.
void extract_corpus_features(const Corpus& corpus, const std::filesystem::path& masks_dir,
                             const FeatureOptions& options, FeatureInput input,
                             const std::filesystem::path& out_dir, int jobs = 1);

struct EncodeStageOptions {
  std::size_t transform_dim = 64;
  double transform_power = 0.5;
  std::size_t transform_max_samples = 100000;
  std::uint64_t transform_seed = 0;
  EncodingConfig encoding;
};

/// Fits the descriptor transform and encoder on `fit_docs` (all documents when
/// empty), encodes every document and writes the encoder directory:
/// descriptor_pca.pwmd, codebook_*.pwmd, joint_pca.pwmd, config.json, globals.json.
std::vector<GlobalDescriptor> encode_corpus(const Corpus& corpus,
                                            const std::filesystem::path& feats_dir,
                                            const EncodeStageOptions& options,
                                            const std::vector<std::string>& fit_docs,
                                            const std::filesystem::path& out_dir);

/// Leave-one-out retrieval. Empty paths are not written; each heatmap PNG
/// gets a CSV next to it.
RetrievalReport evaluate_retrieval(const std::vector<GlobalDescriptor>& globals,
                                   const std::filesystem::path& report,
                                   const std::filesystem::path& doc_heatmap,
                                   const std::filesystem::path& scribe_heatmap);

ClassificationReport evaluate_classifier(const std::vector<GlobalDescriptor>& globals,
                                         const ClassificationSplit& split, ClassifierKind kind,
                                         double svm_c, const std::filesystem::path& report,
                                         const std::filesystem::path& confusion);

// ---- cached end-to-end run ----

struct RunOptions {
  bool force = false;
  std::filesystem::path cache_root;  // empty: PAPYRID_CACHE, else config.work_dir
};

struct StageRecord {
  std::string name;
  std::filesystem::path dir;
  std::string key;  // content hash of inputs + stage config
  bool skipped = false;
  double seconds = 0;
};

struct RunResult {
  std::filesystem::path root;
  std::vector<StageRecord> stages;
  std::filesystem::path reports_dir;
  std::filesystem::path log_file;
};

/// scan -> binarize -> features -> encode -> retrieve/classify. Every stage
/// writes into <root>/<stage>/<key>/ together with a config snapshot and is
/// skipped when that directory is complete. Errors carry the stage name.
RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path& file, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace papyrid
