#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "papyrid/errors.hpp"
#include "papyrid/features.hpp"

namespace papyrid {

namespace {

constexpr int kMinOctaveSize = 16;

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

cv::Mat gaussian_blur(const cv::Mat& image, double sigma) {
  CV_Assert(image.type() == CV_32FC1);
  if (sigma <= 0) return image.clone();
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int w = image.cols, h = image.rows;

  std::vector<int> xs(w + 2 * radius), ys(h + 2 * radius);
  for (int i = 0; i < w + 2 * radius; ++i) xs[i] = reflect101(i - radius, w);
  for (int i = 0; i < h + 2 * radius; ++i) ys[i] = reflect101(i - radius, h);

  cv::Mat tmp(h, w, CV_32FC1), out(h, w, CV_32FC1);
  for (int y = 0; y < h; ++y) {
    const float* src = image.ptr<float>(y);
    float* dst = tmp.ptr<float>(y);
    for (int x = 0; x < w; ++x) {
      const double c = src[x];
      double acc = 0;
      for (int i = 0; i < static_cast<int>(k.size()); ++i) acc += k[i] * (src[xs[x + i]] - c);
      dst[x] = static_cast<float>(c + acc);
    }
  }
  std::vector<const float*> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = tmp.ptr<float>(y);
  std::vector<double> acc(w);
  for (int y = 0; y < h; ++y) {
    const float* centre = rows[y];
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int i = 0; i < static_cast<int>(k.size()); ++i) {
      const float* src = rows[ys[y + i]];
      const double ki = k[i];
      for (int x = 0; x < w; ++x) acc[x] += ki * (src[x] - centre[x]);
    }
    float* dst = out.ptr<float>(y);
    for (int x = 0; x < w; ++x) dst[x] = static_cast<float>(centre[x] + acc[x]);
  }
  return out;
}

double ScaleSpace::layer_sigma(double layer) const {
  return params.sigma0 * std::pow(2.0, layer / params.scales_per_octave);
}

double ScaleSpace::original_scale(int octave, double layer) const {
  return layer_sigma(layer) * std::ldexp(1.0, octave) * params.downsample_factor;
}

ScaleSpace build_scale_space(const cv::Mat& gray, const ScaleSpaceParams& params) {
  CV_Assert(gray.type() == CV_8UC1);
  if (params.downsample_factor < 1) {
    throw Error(ErrorCode::InvalidArgument, "downsample_factor must be >= 1");
  }
  if (params.scales_per_octave < 1) {
    throw Error(ErrorCode::InvalidArgument, "scales_per_octave must be >= 1");
  }

  ScaleSpace space;
  space.params = params;
  space.original_size = gray.size();

  cv::Mat img;
  gray.convertTo(img, CV_32F, 1.0 / 255.0);
  if (params.downsample_factor > 1) {
    const cv::Size target(gray.cols / params.downsample_factor, gray.rows / params.downsample_factor);
    if (target.width < kMinOctaveSize || target.height < kMinOctaveSize) {
      throw Error(ErrorCode::ImageTooSmall, "image smaller than 16x16 after downsampling");
    }
    cv::resize(img, space.base, target, 0, 0, cv::INTER_AREA);
  } else {
    space.base = img;
  }
  if (space.base.cols < kMinOctaveSize || space.base.rows < kMinOctaveSize) {
    throw Error(ErrorCode::ImageTooSmall, "image smaller than 16x16");
  }

  int octaves = params.octaves;
  if (octaves <= 0) {
    octaves = 0;
    for (int size = std::min(space.base.cols, space.base.rows); size >= kMinOctaveSize; size /= 2) {
      ++octaves;
    }
  }

  const int s = params.scales_per_octave;
  const int levels = s + 3;
  // incremental blur from level i-1 to level i
  std::vector<double> step(levels);
  step[0] = std::sqrt(std::max(0.0, params.sigma0 * params.sigma0 -
                                        params.input_blur * params.input_blur));
  for (int i = 1; i < levels; ++i) {
    const double prev = space.layer_sigma(i - 1), cur = space.layer_sigma(i);
    step[i] = std::sqrt(cur * cur - prev * prev);
  }

  space.gaussian.resize(octaves);
  space.dog.resize(octaves);
  for (int o = 0; o < octaves; ++o) {
    auto& g = space.gaussian[o];
    g.resize(levels);
    if (o == 0) {
      g[0] = gaussian_blur(space.base, step[0]);
    } else {
      // level s of the previous octave has twice sigma0; keep every other pixel
      const cv::Mat& src = space.gaussian[o - 1][s];
      cv::Mat half((src.rows + 1) / 2, (src.cols + 1) / 2, CV_32FC1);
      for (int y = 0; y < half.rows; ++y) {
        for (int x = 0; x < half.cols; ++x) half.at<float>(y, x) = src.at<float>(2 * y, 2 * x);
      }
      g[0] = half;
    }
    for (int i = 1; i < levels; ++i) g[i] = gaussian_blur(g[i - 1], step[i]);

    auto& d = space.dog[o];
    d.resize(levels - 1);
    for (int i = 0; i + 1 < levels; ++i) d[i] = g[i] - g[i + 1];
  }
  return space;
}

}  // namespace papyrid
