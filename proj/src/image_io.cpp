#include "papyrid/image_io.hpp"

#include <cmath>

#include <opencv2/imgcodecs.hpp>

#include "papyrid/errors.hpp"

namespace papyrid {

namespace {

cv::Mat to_8bit(const cv::Mat& image) {
  if (image.depth() == CV_8U) return image;
  cv::Mat out;
  switch (image.depth()) {
    case CV_16U: image.convertTo(out, CV_8U, 1.0 / 257.0); break;
    case CV_32F:
    case CV_64F: image.convertTo(out, CV_8U, 255.0); break;
    default: image.convertTo(out, CV_8U); break;
  }
  return out;
}

}  // namespace

cv::Mat to_grayscale(const cv::Mat& input) {
  const cv::Mat image = to_8bit(input);
  if (image.channels() == 1) return image.clone();
  if (image.channels() != 3 && image.channels() != 4) {
    throw Error(ErrorCode::IoError, "unsupported channel count " + std::to_string(image.channels()));
  }
  cv::Mat gray(image.rows, image.cols, CV_8UC1);
  const int ch = image.channels();
  for (int y = 0; y < image.rows; ++y) {
    const auto* src = image.ptr<std::uint8_t>(y);
    auto* dst = gray.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.cols; ++x) {
      // OpenCV stores colour as BGR(A).
      const double b = src[x * ch + 0];
      const double g = src[x * ch + 1];
      const double r = src[x * ch + 2];
      dst[x] = static_cast<std::uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
    }
  }
  return gray;
}

cv::Mat load_grayscale(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error(ErrorCode::IoError, "cannot read image " + path.string());
  return to_grayscale(raw);
}

cv::Size probe_size(const std::filesystem::path& path) {
  // imread is the only portable way to get at the header through OpenCV.
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_IGNORE_ORIENTATION);
  if (raw.empty()) throw Error(ErrorCode::IoError, "cannot read image " + path.string());
  return raw.size();
}

void write_png(const std::filesystem::path& path, const cv::Mat& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), image)) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
}

}  // namespace papyrid
