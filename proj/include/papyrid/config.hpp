#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "papyrid/binarize.hpp"
#include "papyrid/classify.hpp"
#include "papyrid/corpus.hpp"
#include "papyrid/encode.hpp"
#include "papyrid/features.hpp"

namespace papyrid {

enum class FeatureInput { Binarized, Gray };
enum class FitOn { All, Train };

/// Every knob of the end-to-end run. Text form: one `key = value` per line,
/// `#` starts a comment; unknown keys are rejected.
struct PipelineConfig {
  std::filesystem::path input_dir;
  std::filesystem::path work_dir = "papyrid-work";

  bool binarize = true;  // false: "binarize.method = none"
  BinarizeOptions binarization;
  std::filesystem::path mask_dir;  // external masks, <doc_id>.png

  FeatureOptions features;
  FeatureInput feature_input = FeatureInput::Binarized;

  std::size_t transform_dim = 64;
  double transform_power = 0.5;
  std::size_t transform_max_samples = 100000;
  std::uint64_t transform_seed = 0;

  EncodingConfig encoding;
  FitOn fit_on = FitOn::All;

  SplitMode split_mode = SplitMode::FirstTwo;
  std::uint64_t split_seed = 0;
  std::vector<ClassifierKind> classifiers{ClassifierKind::Nn, ClassifierKind::Svm};
  double svm_c = 1.0;

  int jobs = 1;

  /// Sets one key from its text value; throws InvalidConfig on unknown keys
  /// or unparsable values.
  void set(std::string_view key, std::string_view value);
  std::vector<std::string> keys() const;
  std::string get(std::string_view key) const;

  std::string to_text() const;
  void validate() const;
};

PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& file);
void save_config(const std::filesystem::path& file, const PipelineConfig& config);

}  // namespace papyrid
