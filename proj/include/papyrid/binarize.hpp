#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

namespace papyrid {

/// Binary ink raster, same size as the source image. Stored as CV_8U with
/// 1 = ink and 0 = background.
class InkMask {
 public:
  InkMask() = default;
  InkMask(int width, int height);
  explicit InkMask(cv::Mat ink);

  int width() const { return ink_.cols; }
  int height() const { return ink_.rows; }
  bool empty() const { return ink_.empty(); }
  bool is_ink(int x, int y) const { return ink_.at<std::uint8_t>(y, x) != 0; }
  void set(int x, int y, bool ink) { ink_.at<std::uint8_t>(y, x) = ink ? 1 : 0; }
  std::size_t ink_count() const;
  const cv::Mat& data() const { return ink_; }

  /// Black ink (0) on white (255), the external mask convention.
  cv::Mat to_png_image() const;

  bool operator==(const InkMask& other) const;

 private:
  cv::Mat ink_;
};

using Histogram = std::array<std::uint64_t, 256>;

Histogram histogram(const cv::Mat& gray);

struct OtsuResult {
  int threshold = 0;
  bool degenerate = false;  // single populated bin
};

/// Threshold t maximising between-class variance of {<= t, > t}; ties go to
/// the smallest t. A single-mode histogram returns that mode, flagged.
OtsuResult otsu(const Histogram& hist);
int otsu_threshold(const Histogram& hist);

/// (max - min) / (max + min + eps) over the 3x3 neighbourhood clipped to the
/// image; CV_64F in [0, 1].
cv::Mat su_contrast(const cv::Mat& gray, double eps = 1e-8);

struct SuParams {
  double contrast_eps = 1e-8;
  int window = 9;
  int min_high_contrast = 9;
};

struct SuResult {
  cv::Mat contrast;       // CV_64F
  int contrast_threshold = 0;  // Otsu threshold on round(255 * contrast)
  cv::Mat high_contrast;  // CV_8U, 1 where quantised contrast > threshold
  cv::Mat high_count;     // CV_32S, high-contrast pixels in each window
  InkMask mask;
  bool degenerate = false;
};

SuResult su_binarize_detailed(const cv::Mat& gray, const SuParams& params = {});
InkMask su_binarize(const cv::Mat& gray, const SuParams& params = {});

struct SauvolaParams {
  int window = 31;
  double k = 0.2;
  double dynamic_range = 128.0;
};

InkMask sauvola(const cv::Mat& gray, const SauvolaParams& params = {});

/// Sauvola threshold surface mean * (1 + k (std / R - 1)), CV_64F.
cv::Mat sauvola_threshold(const cv::Mat& gray, const SauvolaParams& params = {});

InkMask otsu_binarize(const cv::Mat& gray, bool* degenerate = nullptr);

/// External mask file: any 8-bit value < 128 is ink.
InkMask read_mask(const std::filesystem::path& file);
InkMask mask_from_image(const cv::Mat& gray);
void write_mask(const std::filesystem::path& file, const InkMask& mask);

enum class BinarizationMethod { Otsu, Sauvola, Su, External };

BinarizationMethod parse_binarization_method(std::string_view name);
std::string_view to_string(BinarizationMethod method);

struct BinarizeOptions {
  BinarizationMethod method = BinarizationMethod::Su;
  SuParams su;
  SauvolaParams sauvola;
  std::filesystem::path external_mask;  // used by External
};

struct BinarizeResult {
  InkMask mask;
  std::vector<std::string> warnings;
};

BinarizeResult binarize(const cv::Mat& gray, const BinarizeOptions& options);

/// Pixel-level F-measure of `predicted` against `truth` (ink = positive).
double pixel_f_measure(const InkMask& predicted, const InkMask& truth);

}  // namespace papyrid
