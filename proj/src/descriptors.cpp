#include <algorithm>
#include <cmath>
#include <numbers>

#include "papyrid/errors.hpp"
#include "papyrid/features.hpp"

namespace papyrid {

namespace {

constexpr int kCells = 4;        // spatial cells per side
constexpr int kBins = 8;         // orientation bins per cell
constexpr double kCellWidth = 3.0;  // cell width in units of keypoint sigma
constexpr double kClip = 0.2;

// Returns false for patches without any gradient.
bool sift_descriptor(const cv::Mat& img, double px, double py, double sigma, double angle,
                     std::vector<float>& out) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const int ix = static_cast<int>(std::lround(px));
  const int iy = static_cast<int>(std::lround(py));
  const double cos_t = std::cos(angle), sin_t = std::sin(angle);
  const double cell = kCellWidth * sigma;
  const int radius = std::min(
      static_cast<int>(std::lround(cell * std::numbers::sqrt2 * (kCells + 1) * 0.5)),
      static_cast<int>(std::hypot(img.cols, img.rows)));
  const double exp_scale = -1.0 / (kCells * kCells * 0.5);

  // padded histogram: (d + 2) x (d + 2) x (n + 2)
  std::vector<double> hist((kCells + 2) * (kCells + 2) * (kBins + 2), 0.0);
  auto idx = [](int r, int c, int o) { return (r * (kCells + 2) + c) * (kBins + 2) + o; };

  for (int i = -radius; i <= radius; ++i) {
    const int y = iy + i;
    if (y <= 0 || y >= img.rows - 1) continue;
    for (int j = -radius; j <= radius; ++j) {
      const int x = ix + j;
      if (x <= 0 || x >= img.cols - 1) continue;
      // offset rotated into the keypoint frame, in cell units
      const double c_rot = (j * cos_t + i * sin_t) / cell;
      const double r_rot = (-j * sin_t + i * cos_t) / cell;
      const double rbin = r_rot + kCells / 2.0 - 0.5;
      const double cbin = c_rot + kCells / 2.0 - 0.5;
      if (rbin <= -1 || rbin >= kCells || cbin <= -1 || cbin >= kCells) continue;

      const double dx = img.at<float>(y, x + 1) - img.at<float>(y, x - 1);
      const double dy = img.at<float>(y + 1, x) - img.at<float>(y - 1, x);
      const double mag = std::sqrt(dx * dx + dy * dy);
      if (mag == 0) continue;
      double ori = std::atan2(dy, dx) - angle;
      ori = std::fmod(ori, two_pi);
      if (ori < 0) ori += two_pi;
      const double obin = ori * kBins / two_pi;
      const double weight = mag * std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);

      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      int o0 = static_cast<int>(std::floor(obin));
      const double fr = rbin - r0, fc = cbin - c0, fo = obin - o0;
      if (o0 >= kBins) o0 -= kBins;
      for (int dr = 0; dr <= 1; ++dr) {
        const double wr = weight * (dr ? fr : 1 - fr);
        for (int dc = 0; dc <= 1; ++dc) {
          const double wc = wr * (dc ? fc : 1 - fc);
          hist[idx(r0 + 1 + dr, c0 + 1 + dc, o0)] += wc * (1 - fo);
          hist[idx(r0 + 1 + dr, c0 + 1 + dc, o0 + 1)] += wc * fo;
        }
      }
    }
  }

  std::vector<double> desc(kSiftDim);
  for (int r = 0; r < kCells; ++r) {
    for (int c = 0; c < kCells; ++c) {
      // fold the wrap-around orientation bin
      hist[idx(r + 1, c + 1, 0)] += hist[idx(r + 1, c + 1, kBins)];
      for (int o = 0; o < kBins; ++o) {
        desc[(r * kCells + c) * kBins + o] = hist[idx(r + 1, c + 1, o)];
      }
    }
  }

  double norm = 0;
  for (double v : desc) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0)) return false;
  const double clip = kClip * norm;
  norm = 0;
  for (double& v : desc) {
    v = std::min(v, clip);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  out.resize(kSiftDim);
  for (int k = 0; k < kSiftDim; ++k) out[k] = static_cast<float>(desc[k] / norm);
  return true;
}

}  // namespace

std::vector<LocalDescriptor> compute_descriptors(const ScaleSpace& space,
                                                 const std::vector<Keypoint>& keypoints) {
  std::vector<LocalDescriptor> out;
  out.reserve(keypoints.size());
  for (const auto& kp : keypoints) {
    if (kp.octave < 0 || kp.octave >= space.octaves() || kp.layer < 0 ||
        kp.layer >= static_cast<int>(space.gaussian[kp.octave].size())) {
      throw Error(ErrorCode::InvalidArgument, "keypoint does not belong to this pyramid");
    }
    LocalDescriptor d;
    if (!sift_descriptor(space.gaussian[kp.octave][kp.layer], kp.octave_x, kp.octave_y,
                         kp.octave_sigma, kp.orientation, d.values)) {
      continue;
    }
    d.keypoint = kp;
    out.push_back(std::move(d));
  }
  return out;
}

FeatureMode parse_feature_mode(std::string_view text) {
  if (text == "sift") return FeatureMode::Sift;
  if (text == "rsift") return FeatureMode::RSift;
  throw Error(ErrorCode::UnknownMethod, "feature mode " + std::string(text));
}

std::string_view to_string(FeatureMode mode) { return mode == FeatureMode::Sift ? "sift" : "rsift"; }

std::vector<LocalDescriptor> extract_features(const cv::Mat& gray, const InkMask& mask,
                                              const FeatureOptions& options) {
  KeypointFilter filter;
  filter.on_ink = options.mode == FeatureMode::RSift;
  filter.require_nonblank = options.require_nonblank;
  filter.blank_patch_size = options.blank_patch_size;
  if ((filter.on_ink || filter.require_nonblank) &&
      (mask.width() != gray.cols || mask.height() != gray.rows)) {
    throw Error(ErrorCode::DimensionMismatch, "mask does not match image dimensions");
  }
  const ScaleSpace space = build_scale_space(gray, options.scale_space);
  const auto mode = options.mode == FeatureMode::RSift ? DetectMode::MinimaOnly : DetectMode::All;
  const auto keypoints = filter_keypoints(detect_keypoints(space, mode), mask, filter);
  return compute_descriptors(space, keypoints);
}

}  // namespace papyrid
