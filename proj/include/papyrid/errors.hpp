#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace papyrid {

enum class ErrorCode {
  // input errors
  MalformedName,
  EmptyCorpus,
  IoError,
  DuplicateDocId,
  InsufficientSamples,
  EmptyHistogram,
  MaskDimensionMismatch,
  UnknownMethod,
  ImageTooSmall,
  DimensionMismatch,
  InsufficientSample,
  NotFitted,
  TooFewPoints,
  InvalidArgument,
  EmptySetForGmp,
  InsufficientDescriptors,
  EmptyDescriptorSet,
  TooFewDocuments,
  SingletonWriterOnDiagonal,
  EmptyTrainSet,
  SingleClass,
  NotTrained,
  MissingPrediction,
  InvalidConfig,
  // numerical failures
  RankDeficient,
  NonFiniteInput,
  NoConvergence,
};

std::string_view to_string(ErrorCode code);

/// True for failures of the numerical kernels (CLI exit code 2) as opposed to
/// bad input (exit code 1).
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace papyrid
