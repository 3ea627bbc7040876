#pragma once

#include <filesystem>

#include <opencv2/core.hpp>

namespace papyrid {

/// Reads PNG/JPEG/TIFF as 8-bit grayscale. Colour inputs are converted with
/// luma = 0.299 R + 0.587 G + 0.114 B rounded to nearest; 16-bit inputs are
/// rescaled to 8 bit first. Throws Error(IoError) on unreadable files.
cv::Mat load_grayscale(const std::filesystem::path& path);

/// Luma conversion of an 8-bit BGR / BGRA / gray image.
cv::Mat to_grayscale(const cv::Mat& image);

/// Image dimensions without keeping the pixels around.
cv::Size probe_size(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const cv::Mat& image);

}  // namespace papyrid
