#include "papyrid/binarize.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "papyrid/errors.hpp"
#include "papyrid/image_io.hpp"

namespace papyrid {

InkMask::InkMask(int width, int height) : ink_(height, width, CV_8UC1, cv::Scalar(0)) {}

InkMask::InkMask(cv::Mat ink) : ink_(std::move(ink)) {
  if (ink_.type() != CV_8UC1) throw Error(ErrorCode::InvalidArgument, "InkMask expects CV_8UC1");
}

std::size_t InkMask::ink_count() const {
  return ink_.empty() ? 0 : static_cast<std::size_t>(cv::countNonZero(ink_));
}

cv::Mat InkMask::to_png_image() const {
  cv::Mat out(ink_.size(), CV_8UC1);
  for (int y = 0; y < ink_.rows; ++y) {
    const auto* src = ink_.ptr<std::uint8_t>(y);
    auto* dst = out.ptr<std::uint8_t>(y);
    for (int x = 0; x < ink_.cols; ++x) dst[x] = src[x] ? 0 : 255;
  }
  return out;
}

bool InkMask::operator==(const InkMask& other) const {
  if (ink_.size() != other.ink_.size()) return false;
  if (ink_.empty()) return true;
  return cv::countNonZero(ink_ != other.ink_) == 0;
}

Histogram histogram(const cv::Mat& gray) {
  CV_Assert(gray.type() == CV_8UC1);
  Histogram h{};
  for (int y = 0; y < gray.rows; ++y) {
    const auto* row = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < gray.cols; ++x) ++h[row[x]];
  }
  return h;
}

OtsuResult otsu(const Histogram& hist) {
  long double total = 0, total_sum = 0;
  int populated = 0, mode = 0;
  for (int i = 0; i < 256; ++i) {
    total += hist[i];
    total_sum += static_cast<long double>(i) * hist[i];
    if (hist[i]) {
      ++populated;
      mode = i;
    }
  }
  if (populated == 0) throw Error(ErrorCode::EmptyHistogram, "histogram has no samples");
  if (populated == 1) return {mode, true};

  long double w0 = 0, s0 = 0, best = -1;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    s0 += static_cast<long double>(t) * hist[t];
    const long double w1 = total - w0;
    long double var = 0;
    if (w0 > 0 && w1 > 0) {
      const long double diff = s0 / w0 - (total_sum - s0) / w1;
      var = w0 * w1 * diff * diff;
    }
    if (var > best) {
      best = var;
      best_t = t;
    }
  }
  return {best_t, false};
}

int otsu_threshold(const Histogram& hist) { return otsu(hist).threshold; }

cv::Mat su_contrast(const cv::Mat& gray, double eps) {
  CV_Assert(gray.type() == CV_8UC1);
  if (!(eps > 0)) throw Error(ErrorCode::InvalidArgument, "contrast eps must be positive");
  cv::Mat out(gray.size(), CV_64FC1);
  for (int y = 0; y < gray.rows; ++y) {
    const int y0 = std::max(0, y - 1), y1 = std::min(gray.rows - 1, y + 1);
    for (int x = 0; x < gray.cols; ++x) {
      const int x0 = std::max(0, x - 1), x1 = std::min(gray.cols - 1, x + 1);
      int lo = 255, hi = 0;
      for (int yy = y0; yy <= y1; ++yy) {
        const auto* row = gray.ptr<std::uint8_t>(yy);
        for (int xx = x0; xx <= x1; ++xx) {
          lo = std::min<int>(lo, row[xx]);
          hi = std::max<int>(hi, row[xx]);
        }
      }
      out.at<double>(y, x) = hi == lo ? 0.0 : (hi - lo) / (hi + lo + eps);
    }
  }
  return out;
}

namespace {

// Sum over the window [x-r, x+r] x [y-r, y+r] clipped to the image, from a
// (rows+1) x (cols+1) integral image.
template <typename T>
T window_sum(const cv::Mat& integral, int x, int y, int r) {
  const int x0 = std::max(0, x - r), y0 = std::max(0, y - r);
  const int x1 = std::min(integral.cols - 1, x + r + 1);
  const int y1 = std::min(integral.rows - 1, y + r + 1);
  return integral.at<T>(y1, x1) - integral.at<T>(y0, x1) - integral.at<T>(y1, x0) +
         integral.at<T>(y0, x0);
}

int window_area(const cv::Size& size, int x, int y, int r) {
  const int x0 = std::max(0, x - r), y0 = std::max(0, y - r);
  const int x1 = std::min(size.width - 1, x + r), y1 = std::min(size.height - 1, y + r);
  return (x1 - x0 + 1) * (y1 - y0 + 1);
}

void check_window(int window) {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "window must be odd and >= 3");
  }
}

}  // namespace

SuResult su_binarize_detailed(const cv::Mat& gray, const SuParams& params) {
  CV_Assert(gray.type() == CV_8UC1);
  check_window(params.window);
  if (params.min_high_contrast < 1) {
    throw Error(ErrorCode::InvalidArgument, "min_high_contrast must be >= 1");
  }

  SuResult res;
  res.contrast = su_contrast(gray, params.contrast_eps);

  cv::Mat quantised(gray.size(), CV_8UC1);
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) {
      quantised.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::lround(255.0 * res.contrast.at<double>(y, x)));
    }
  }
  const OtsuResult t = otsu(histogram(quantised));
  res.contrast_threshold = t.threshold;
  res.degenerate = t.degenerate;
  res.high_contrast = cv::Mat(gray.size(), CV_8UC1);
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) {
      res.high_contrast.at<std::uint8_t>(y, x) = quantised.at<std::uint8_t>(y, x) > t.threshold;
    }
  }

  cv::Mat e_int, e_intensity, e_intensity_sq;
  cv::Mat e_double, ei, ei2;
  res.high_contrast.convertTo(e_double, CV_64F);
  gray.convertTo(ei, CV_64F);
  ei = ei.mul(e_double);
  ei2 = ei.mul(ei);  // e is 0/1 so (e*I)^2 = e*I^2
  cv::integral(e_double, e_int, CV_64F);
  cv::integral(ei, e_intensity, CV_64F);
  cv::integral(ei2, e_intensity_sq, CV_64F);

  const int r = params.window / 2;
  res.high_count = cv::Mat(gray.size(), CV_32SC1);
  res.mask = InkMask(gray.cols, gray.rows);
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) {
      const double n = window_sum<double>(e_int, x, y, r);
      const int count = static_cast<int>(std::lround(n));
      res.high_count.at<int>(y, x) = count;
      if (count < params.min_high_contrast) continue;
      const double mean = window_sum<double>(e_intensity, x, y, r) / n;
      const double var = std::max(0.0, window_sum<double>(e_intensity_sq, x, y, r) / n - mean * mean);
      if (gray.at<std::uint8_t>(y, x) <= mean + std::sqrt(var) / 2.0) res.mask.set(x, y, true);
    }
  }
  return res;
}

InkMask su_binarize(const cv::Mat& gray, const SuParams& params) {
  return su_binarize_detailed(gray, params).mask;
}

cv::Mat sauvola_threshold(const cv::Mat& gray, const SauvolaParams& params) {
  CV_Assert(gray.type() == CV_8UC1);
  check_window(params.window);
  cv::Mat sum, sqsum;
  cv::integral(gray, sum, sqsum, CV_64F, CV_64F);
  const int r = params.window / 2;
  cv::Mat thr(gray.size(), CV_64FC1);
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) {
      const double n = window_area(gray.size(), x, y, r);
      const double mean = window_sum<double>(sum, x, y, r) / n;
      const double var = std::max(0.0, window_sum<double>(sqsum, x, y, r) / n - mean * mean);
      thr.at<double>(y, x) =
          mean * (1.0 + params.k * (std::sqrt(var) / params.dynamic_range - 1.0));
    }
  }
  return thr;
}

InkMask sauvola(const cv::Mat& gray, const SauvolaParams& params) {
  const cv::Mat thr = sauvola_threshold(gray, params);
  InkMask mask(gray.cols, gray.rows);
  double lo = 0, hi = 0;
  cv::minMaxLoc(gray, &lo, &hi);
  if (lo == hi) return mask;  // as for otsu: a blank crop has no ink (T = I when I = 0)
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) {
      if (gray.at<std::uint8_t>(y, x) <= thr.at<double>(y, x)) mask.set(x, y, true);
    }
  }
  return mask;
}

InkMask otsu_binarize(const cv::Mat& gray, bool* degenerate) {
  const OtsuResult t = otsu(histogram(gray));
  if (degenerate) *degenerate = t.degenerate;
  InkMask mask(gray.cols, gray.rows);
  if (t.degenerate) return mask;  // a blank crop has no ink
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) {
      if (gray.at<std::uint8_t>(y, x) <= t.threshold) mask.set(x, y, true);
    }
  }
  return mask;
}

InkMask mask_from_image(const cv::Mat& gray) {
  CV_Assert(gray.type() == CV_8UC1);
  InkMask mask(gray.cols, gray.rows);
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) {
      if (gray.at<std::uint8_t>(y, x) < 128) mask.set(x, y, true);
    }
  }
  return mask;
}

InkMask read_mask(const std::filesystem::path& file) { return mask_from_image(load_grayscale(file)); }

void write_mask(const std::filesystem::path& file, const InkMask& mask) {
  write_png(file, mask.to_png_image());
}

BinarizationMethod parse_binarization_method(std::string_view name) {
  if (name == "otsu") return BinarizationMethod::Otsu;
  if (name == "sauvola") return BinarizationMethod::Sauvola;
  if (name == "su") return BinarizationMethod::Su;
  if (name == "external") return BinarizationMethod::External;
  throw Error(ErrorCode::UnknownMethod, "binarization method " + std::string(name));
}

std::string_view to_string(BinarizationMethod method) {
  switch (method) {
    case BinarizationMethod::Otsu: return "otsu";
    case BinarizationMethod::Sauvola: return "sauvola";
    case BinarizationMethod::Su: return "su";
    case BinarizationMethod::External: return "external";
  }
  return "unknown";
}

BinarizeResult binarize(const cv::Mat& gray, const BinarizeOptions& options) {
  if (gray.empty()) throw Error(ErrorCode::InvalidArgument, "empty image");
  BinarizeResult res;
  switch (options.method) {
    case BinarizationMethod::Otsu: {
      bool degenerate = false;
      res.mask = otsu_binarize(gray, &degenerate);
      if (degenerate) res.warnings.push_back("otsu: single-mode histogram, empty mask");
      break;
    }
    case BinarizationMethod::Sauvola:
      res.mask = sauvola(gray, options.sauvola);
      break;
    case BinarizationMethod::Su: {
      SuResult su = su_binarize_detailed(gray, options.su);
      if (su.degenerate) res.warnings.push_back("su: single-mode contrast histogram");
      res.mask = std::move(su.mask);
      break;
    }
    case BinarizationMethod::External: {
      res.mask = read_mask(options.external_mask);
      if (res.mask.width() != gray.cols || res.mask.height() != gray.rows) {
        throw Error(ErrorCode::MaskDimensionMismatch,
                    options.external_mask.string() + " is " + std::to_string(res.mask.width()) +
                        "x" + std::to_string(res.mask.height()) + ", image is " +
                        std::to_string(gray.cols) + "x" + std::to_string(gray.rows));
      }
      break;
    }
  }
  return res;
}

double pixel_f_measure(const InkMask& predicted, const InkMask& truth) {
  if (predicted.width() != truth.width() || predicted.height() != truth.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask sizes differ");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (int y = 0; y < truth.height(); ++y) {
    for (int x = 0; x < truth.width(); ++x) {
      const bool p = predicted.is_ink(x, y), t = truth.is_ink(x, y);
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
  }
  if (tp == 0) return (fp == 0 && fn == 0) ? 1.0 : 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2 * precision * recall / (precision + recall);
}

}  // namespace papyrid
