#pragma once

#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

#include "papyrid/binarize.hpp"

namespace papyrid {

struct ScaleSpaceParams {
  int octaves = 0;  // 0: as many as fit while the octave stays >= 16 px
  int scales_per_octave = 3;
  double sigma0 = 1.6;
  double contrast_threshold = 0.04;
  double edge_threshold = 10.0;
  int downsample_factor = 2;  // 1 keeps full resolution
  double input_blur = 0.5;    // assumed blur of the base image
  bool upright = false;       // skip orientation assignment
};

/// Gaussian and difference-of-Gaussian pyramids. Images are CV_32F in [0, 1].
/// dog[o][i] = gaussian[o][i] - gaussian[o][i + 1], so dark blobs on a light
/// ground are scale-space minima.
struct ScaleSpace {
  ScaleSpaceParams params;
  cv::Size original_size;
  cv::Mat base;  // downsampled input, CV_32F
  std::vector<std::vector<cv::Mat>> gaussian;  // octaves x (s + 3)
  std::vector<std::vector<cv::Mat>> dog;       // octaves x (s + 2)

  int octaves() const { return static_cast<int>(gaussian.size()); }
  /// Blur of gaussian[o][layer] in octave pixel units.
  double layer_sigma(double layer) const;
  /// Blur expressed in original-image pixels.
  double original_scale(int octave, double layer) const;
};

ScaleSpace build_scale_space(const cv::Mat& gray, const ScaleSpaceParams& params = {});

/// Separable Gaussian blur with reflect-101 borders. Computed as
/// x_c + sum_i k_i (x_i - x_c), so constant regions stay exactly constant.
cv::Mat gaussian_blur(const cv::Mat& image, double sigma);

enum class ExtremumSign { Min, Max };
enum class DetectMode { All, MinimaOnly };

struct Keypoint {
  double x = 0, y = 0;      // original image coordinates
  double scale = 0;         // original image pixels
  double orientation = 0;   // radians, image coordinates (y down)
  ExtremumSign extremum_sign = ExtremumSign::Min;
  double response = 0;      // interpolated DoG value
  // pyramid location, needed to compute the descriptor
  int octave = 0;
  int layer = 0;
  double octave_x = 0, octave_y = 0;
  double octave_sigma = 0;
};

std::vector<Keypoint> detect_keypoints(const ScaleSpace& space, DetectMode mode);

struct KeypointFilter {
  bool on_ink = false;
  bool require_nonblank = false;
  int blank_patch_size = 32;
};

/// Keeps keypoints whose rounded position is ink (on_ink) and/or whose
/// centred blank_patch_size^2 window contains at least one ink pixel.
std::vector<Keypoint> filter_keypoints(const std::vector<Keypoint>& keypoints, const InkMask& mask,
                                       const KeypointFilter& filter);

inline constexpr int kSiftDim = 128;

struct LocalDescriptor {
  std::vector<float> values;  // 128 (raw) or 64 (normalised)
  Keypoint keypoint;
};

/// Lowe descriptors (4x4 cells x 8 orientations). Keypoints whose patch has
/// no gradient are dropped.
std::vector<LocalDescriptor> compute_descriptors(const ScaleSpace& space,
                                                 const std::vector<Keypoint>& keypoints);

enum class FeatureMode { Sift, RSift };

FeatureMode parse_feature_mode(std::string_view text);
std::string_view to_string(FeatureMode mode);

struct FeatureOptions {
  FeatureMode mode = FeatureMode::RSift;
  ScaleSpaceParams scale_space;
  bool require_nonblank = true;
  int blank_patch_size = 32;
};

/// Full per-document sampling: scale space, detection (minima only for
/// rsift), ink filtering, descriptors. `mask` may be empty for plain sift
/// without blank-patch filtering.
std::vector<LocalDescriptor> extract_features(const cv::Mat& gray, const InkMask& mask,
                                              const FeatureOptions& options);

}  // namespace papyrid
