#include "papyrid/errors.hpp"

namespace papyrid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedName: return "MalformedName";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DuplicateDocId: return "DuplicateDocId";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::MaskDimensionMismatch: return "MaskDimensionMismatch";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InsufficientSample: return "InsufficientSample";
    case ErrorCode::NotFitted: return "NotFitted";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptySetForGmp: return "EmptySetForGmp";
    case ErrorCode::InsufficientDescriptors: return "InsufficientDescriptors";
    case ErrorCode::EmptyDescriptorSet: return "EmptyDescriptorSet";
    case ErrorCode::TooFewDocuments: return "TooFewDocuments";
    case ErrorCode::SingletonWriterOnDiagonal: return "SingletonWriterOnDiagonal";
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NotTrained: return "NotTrained";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NoConvergence: return "NoConvergence";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  return code == ErrorCode::RankDeficient || code == ErrorCode::NonFiniteInput ||
         code == ErrorCode::NoConvergence;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

}  // namespace papyrid
