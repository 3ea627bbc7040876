#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "papyrid/binarize.hpp"

namespace papyrid::synth {

// Black text on a white page; `truth` marks every pixel drawn as ink.
struct TextPage {
  cv::Mat gray;
  InkMask truth;
};

TextPage text_page(std::uint64_t seed, double noise_sigma, int width = 480, int height = 360);

// Gaussian blobs on a mid-gray page.
struct BlobPage {
  cv::Mat gray;
  std::vector<cv::Point2d> dark;
  std::vector<cv::Point2d> light;
  double sigma = 0;
};

BlobPage blob_page(std::uint64_t seed, int width = 320, int height = 240, double sigma = 4.0);

// Writer style: every document of a writer samples its strokes from these.
struct WriterStyle {
  double slant = 0;        // radians, shear applied to glyphs
  int stroke_width = 2;    // pixels
  double curvature = 0.3;  // mean bend of a stroke relative to its length
  double curvature_spread = 0.1;
  double glyph_height = 24;
  double glyph_aspect = 0.6;  // width / height
  int strokes_per_glyph = 2;
  int ink_level = 50;
};

std::vector<WriterStyle> writer_styles(std::size_t n_writers, std::uint64_t seed);

cv::Mat handwriting_page(const WriterStyle& style, std::uint64_t seed, int width = 960, int height = 720);

// Writes <dir>/<name>_<i>.png for n_writers x docs_per_writer pages, names
// "Scribe00".. Returns the written files.
std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& dir, std::size_t n_writers,
                                                std::size_t docs_per_writer, std::uint64_t seed,
                                                int width = 960, int height = 720);

}  // namespace papyrid::synth
