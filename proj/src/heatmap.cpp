#include <cmath>
#include <fstream>
#include <limits>

#include <opencv2/core.hpp>

#include "papyrid/errors.hpp"
#include "papyrid/image_io.hpp"
#include "papyrid/retrieval.hpp"

namespace papyrid {

cv::Mat heatmap_image(const Eigen::MatrixXd& matrix, int cell_px) {
  if (cell_px < 1) throw Error(ErrorCode::InvalidArgument, "cell size must be >= 1");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Eigen::Index i = 0; i < matrix.size(); ++i) {
    const double v = matrix.data()[i];
    if (std::isnan(v)) continue;
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "heatmap values must be finite");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const auto rows = static_cast<int>(matrix.rows()), cols = static_cast<int>(matrix.cols());
  cv::Mat img(rows * cell_px, cols * cell_px, CV_8UC1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double v = matrix(r, c);
      std::uint8_t g;
      if (std::isnan(v)) {
        g = 255;
      } else if (!(hi > lo)) {
        g = 128;
      } else {
        g = static_cast<std::uint8_t>(std::lround(255.0 * (v - lo) / (hi - lo)));
      }
      img(cv::Rect(c * cell_px, r * cell_px, cell_px, cell_px)).setTo(g);
    }
  }
  return img;
}

void export_heatmap(const Eigen::MatrixXd& matrix, const std::vector<std::string>& labels,
                    const std::filesystem::path& png, const std::filesystem::path& csv, int cell_px) {
  if (static_cast<Eigen::Index>(labels.size()) != matrix.rows() || matrix.rows() != matrix.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "heatmap needs a square matrix with one label per row");
  }
  write_png(png, heatmap_image(matrix, cell_px));

  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  std::ofstream out(csv, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + csv.string());
  out.precision(17);
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    out << labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      out << ',';
      if (!std::isnan(matrix(r, c))) out << matrix(r, c);
    }
    out << '\n';
  }
}

}  // namespace papyrid
