#include <algorithm>
#include <cmath>
#include <array>
#include <numbers>

#include <Eigen/Dense>
#include <opencv2/imgproc.hpp>

#include "papyrid/errors.hpp"
#include "papyrid/features.hpp"

namespace papyrid {

namespace {

constexpr int kBorder = 5;
constexpr int kMaxInterpSteps = 5;
constexpr int kOriBins = 36;
constexpr double kOriSigmaFactor = 1.5;
constexpr double kOriRadiusFactor = 3.0 * kOriSigmaFactor;
constexpr double kOriPeakRatio = 0.8;

bool is_extremum(const std::vector<cv::Mat>& dog, int layer, int x, int y, float v, bool minimum) {
  for (int l = layer - 1; l <= layer + 1; ++l) {
    const cv::Mat& img = dog[l];
    for (int yy = y - 1; yy <= y + 1; ++yy) {
      const float* row = img.ptr<float>(yy);
      for (int xx = x - 1; xx <= x + 1; ++xx) {
        if (l == layer && yy == y && xx == x) continue;
        if (minimum ? !(v < row[xx]) : !(v > row[xx])) return false;
      }
    }
  }
  return true;
}

struct Refined {
  int x, y, layer;
  double dx, dy, dlayer;
  double value;
};

// Quadratic fit around a discrete extremum; false if it drifts out or fails
// the contrast / edge tests.
bool refine(const ScaleSpace& space, int octave, int layer, int x, int y, Refined& out) {
  const auto& dog = space.dog[octave];
  const int s = space.params.scales_per_octave;
  const int w = dog[0].cols, h = dog[0].rows;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  Eigen::Vector3d grad;
  int step = 0;
  for (; step < kMaxInterpSteps; ++step) {
    const cv::Mat &prev = dog[layer - 1], &cur = dog[layer], &next = dog[layer + 1];
    auto at = [](const cv::Mat& m, int yy, int xx) { return static_cast<double>(m.at<float>(yy, xx)); };
    grad << (at(cur, y, x + 1) - at(cur, y, x - 1)) * 0.5, (at(cur, y + 1, x) - at(cur, y - 1, x)) * 0.5,
        (at(next, y, x) - at(prev, y, x)) * 0.5;
    const double v2 = at(cur, y, x) * 2;
    const double dxx = at(cur, y, x + 1) + at(cur, y, x - 1) - v2;
    const double dyy = at(cur, y + 1, x) + at(cur, y - 1, x) - v2;
    const double dss = at(next, y, x) + at(prev, y, x) - v2;
    const double dxy = (at(cur, y + 1, x + 1) - at(cur, y + 1, x - 1) - at(cur, y - 1, x + 1) +
                        at(cur, y - 1, x - 1)) * 0.25;
    const double dxs = (at(next, y, x + 1) - at(next, y, x - 1) - at(prev, y, x + 1) +
                        at(prev, y, x - 1)) * 0.25;
    const double dys = (at(next, y + 1, x) - at(next, y - 1, x) - at(prev, y + 1, x) +
                        at(prev, y - 1, x)) * 0.25;
    Eigen::Matrix3d hess;
    hess << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
    offset = -hess.colPivHouseholderQr().solve(grad);
    if (!offset.allFinite()) return false;
    if (std::abs(offset[0]) < 0.5 && std::abs(offset[1]) < 0.5 && std::abs(offset[2]) < 0.5) break;
    if (std::abs(offset[0]) > 1e6 || std::abs(offset[1]) > 1e6 || std::abs(offset[2]) > 1e6) return false;
    x += static_cast<int>(std::lround(offset[0]));
    y += static_cast<int>(std::lround(offset[1]));
    layer += static_cast<int>(std::lround(offset[2]));
    if (layer < 1 || layer > s || x < kBorder || x >= w - kBorder || y < kBorder || y >= h - kBorder) {
      return false;
    }
  }
  if (step >= kMaxInterpSteps) return false;

  const cv::Mat& cur = dog[layer];
  const double value = cur.at<float>(y, x) + 0.5 * grad.dot(offset);
  if (std::abs(value) * s < space.params.contrast_threshold) return false;

  const double v2 = cur.at<float>(y, x) * 2.0;
  const double dxx = cur.at<float>(y, x + 1) + cur.at<float>(y, x - 1) - v2;
  const double dyy = cur.at<float>(y + 1, x) + cur.at<float>(y - 1, x) - v2;
  const double dxy = (cur.at<float>(y + 1, x + 1) - cur.at<float>(y + 1, x - 1) -
                      cur.at<float>(y - 1, x + 1) + cur.at<float>(y - 1, x - 1)) * 0.25;
  const double tr = dxx + dyy, det = dxx * dyy - dxy * dxy;
  const double r = space.params.edge_threshold;
  if (det <= 0 || tr * tr * r >= (r + 1) * (r + 1) * det) return false;

  out = {x, y, layer, offset[0], offset[1], offset[2], value};
  return true;
}

// Dominant gradient orientations around (x, y) on a Gaussian level.
std::vector<double> orientations(const cv::Mat& img, int x, int y, double sigma) {
  const int radius = static_cast<int>(std::lround(kOriRadiusFactor * sigma));
  const double weight_scale = -1.0 / (2.0 * (kOriSigmaFactor * sigma) * (kOriSigmaFactor * sigma));
  std::array<double, kOriBins> hist{};
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int i = -radius; i <= radius; ++i) {
    const int yy = y + i;
    if (yy <= 0 || yy >= img.rows - 1) continue;
    for (int j = -radius; j <= radius; ++j) {
      const int xx = x + j;
      if (xx <= 0 || xx >= img.cols - 1) continue;
      const double dx = img.at<float>(yy, xx + 1) - img.at<float>(yy, xx - 1);
      const double dy = img.at<float>(yy + 1, xx) - img.at<float>(yy - 1, xx);
      const double mag = std::sqrt(dx * dx + dy * dy);
      if (mag == 0) continue;
      double ang = std::atan2(dy, dx);
      if (ang < 0) ang += two_pi;
      int bin = static_cast<int>(std::lround(ang * kOriBins / two_pi));
      bin = ((bin % kOriBins) + kOriBins) % kOriBins;
      hist[bin] += std::exp((i * i + j * j) * weight_scale) * mag;
    }
  }

  std::array<double, kOriBins> smooth{};
  for (int b = 0; b < kOriBins; ++b) {
    auto h = [&](int k) { return hist[((b + k) % kOriBins + kOriBins) % kOriBins]; };
    smooth[b] = (h(-2) + h(2)) * (1.0 / 16) + (h(-1) + h(1)) * (4.0 / 16) + h(0) * (6.0 / 16);
  }
  const double peak = *std::max_element(smooth.begin(), smooth.end());
  std::vector<double> out;
  if (peak <= 0) return out;
  for (int b = 0; b < kOriBins; ++b) {
    const double l = smooth[(b + kOriBins - 1) % kOriBins];
    const double r = smooth[(b + 1) % kOriBins];
    const double c = smooth[b];
    if (c > l && c > r && c >= kOriPeakRatio * peak) {
      double bin = b + 0.5 * (l - r) / (l - 2 * c + r);
      if (bin < 0) bin += kOriBins;
      if (bin >= kOriBins) bin -= kOriBins;
      out.push_back(bin * two_pi / kOriBins);
    }
  }
  return out;
}

}  // namespace

std::vector<Keypoint> detect_keypoints(const ScaleSpace& space, DetectMode mode) {
  std::vector<Keypoint> result;
  const int s = space.params.scales_per_octave;
  // preliminary threshold as in Lowe's implementation
  const float prelim = static_cast<float>(0.5 * space.params.contrast_threshold / s);
  const double f = space.params.downsample_factor;

  for (int o = 0; o < space.octaves(); ++o) {
    const auto& dog = space.dog[o];
    const int w = dog[0].cols, h = dog[0].rows;
    for (int layer = 1; layer <= s; ++layer) {
      const cv::Mat& img = dog[layer];
      for (int y = kBorder; y < h - kBorder; ++y) {
        const float* row = img.ptr<float>(y);
        for (int x = kBorder; x < w - kBorder; ++x) {
          const float v = row[x];
          if (std::abs(v) <= prelim) continue;
          const bool minimum = v < 0;
          if (mode == DetectMode::MinimaOnly && !minimum) continue;
          if (!is_extremum(dog, layer, x, y, v, minimum)) continue;

          Refined r;
          if (!refine(space, o, layer, x, y, r)) continue;
          const ExtremumSign sign = r.value < 0 ? ExtremumSign::Min : ExtremumSign::Max;
          if (mode == DetectMode::MinimaOnly && sign != ExtremumSign::Min) continue;

          Keypoint kp;
          kp.octave = o;
          kp.layer = r.layer;
          kp.octave_x = r.x + r.dx;
          kp.octave_y = r.y + r.dy;
          kp.octave_sigma = space.layer_sigma(r.layer + r.dlayer);
          kp.extremum_sign = sign;
          kp.response = r.value;
          const double octave_scale = std::ldexp(1.0, o);
          kp.x = (kp.octave_x * octave_scale + 0.5) * f - 0.5;
          kp.y = (kp.octave_y * octave_scale + 0.5) * f - 0.5;
          kp.x = std::clamp(kp.x, 0.0, std::nextafter(space.original_size.width, 0.0));
          kp.y = std::clamp(kp.y, 0.0, std::nextafter(space.original_size.height, 0.0));
          kp.scale = kp.octave_sigma * octave_scale * f;

          if (space.params.upright) {
            kp.orientation = 0;
            result.push_back(kp);
          } else {
            for (double angle : orientations(space.gaussian[o][r.layer], r.x, r.y, kp.octave_sigma)) {
              kp.orientation = angle;
              result.push_back(kp);
            }
          }
        }
      }
    }
  }
  return result;
}

std::vector<Keypoint> filter_keypoints(const std::vector<Keypoint>& keypoints, const InkMask& mask,
                                       const KeypointFilter& filter) {
  if (!filter.on_ink && !filter.require_nonblank) return keypoints;
  if (mask.empty()) throw Error(ErrorCode::DimensionMismatch, "keypoint filtering needs a mask");
  const cv::Mat& ink = mask.data();
  cv::Mat integral;
  if (filter.require_nonblank) cv::integral(ink, integral, CV_32S);

  std::vector<Keypoint> out;
  out.reserve(keypoints.size());
  for (const auto& kp : keypoints) {
    const int x = static_cast<int>(std::lround(kp.x));
    const int y = static_cast<int>(std::lround(kp.y));
    if (x < 0 || y < 0 || x >= mask.width() || y >= mask.height()) {
      throw Error(ErrorCode::DimensionMismatch, "keypoint outside the mask");
    }
    if (filter.on_ink && !mask.is_ink(x, y)) continue;
    if (filter.require_nonblank) {
      const int half = filter.blank_patch_size / 2;
      const int x0 = std::max(0, x - half), y0 = std::max(0, y - half);
      const int x1 = std::min(mask.width(), x - half + filter.blank_patch_size);
      const int y1 = std::min(mask.height(), y - half + filter.blank_patch_size);
      const int count = integral.at<int>(y1, x1) - integral.at<int>(y0, x1) -
                        integral.at<int>(y1, x0) + integral.at<int>(y0, x0);
      if (count == 0) continue;
    }
    out.push_back(kp);
  }
  return out;
}

}  // namespace papyrid
