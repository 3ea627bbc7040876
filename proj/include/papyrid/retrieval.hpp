#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <opencv2/core.hpp>

#include "papyrid/encode.hpp"

namespace papyrid {

/// 1 - cos(a, b) clamped to [0, 2]. A zero vector gives 2 and sets `flagged`.
double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                       const Eigen::Ref<const Eigen::VectorXd>& b, bool* flagged = nullptr);

struct DistanceMatrix {
  Eigen::MatrixXd values;  // symmetric, zero diagonal
  std::vector<std::string> doc_ids;

  std::size_t size() const { return doc_ids.size(); }
};

DistanceMatrix distance_matrix(const std::vector<GlobalDescriptor>& descriptors);

/// Mean over relevant positions i of precision@i. No relevant item: 0, flagged.
double average_precision(const std::vector<bool>& ranked_relevance, bool* flagged = nullptr);

struct QueryResult {
  std::string doc_id;
  double ap = 0;              // in [0, 1]
  int first_correct_rank = 0;  // 1-based, 0 if none
};

struct RetrievalReport {
  double top1 = 0, top5 = 0, top10 = 0;  // percent
  double map = 0;                        // percent
  std::vector<QueryResult> per_query;    // evaluated queries only
  std::vector<std::string> excluded;     // queries whose writer has no other document
};

/// Gallery order for one query: others sorted by distance, ties by doc_id.
std::vector<std::size_t> rank_gallery(const DistanceMatrix& dm, std::size_t query);

/// Leave-one-image-out evaluation with soft Top-k. `labels` are writers in
/// the order of dm.doc_ids.
RetrievalReport leave_one_out(const DistanceMatrix& dm, const std::vector<std::string>& labels);

struct LeaveOneOutResult {
  RetrievalReport report;
  DistanceMatrix distances;
};

LeaveOneOutResult leave_one_out(const std::vector<GlobalDescriptor>& descriptors);

struct ScribeSimilarity {
  std::vector<std::string> writers;  // first-occurrence order
  Eigen::MatrixXd values;            // NaN on the diagonal of single-document writers
  std::vector<std::string> missing_diagonal;
};

ScribeSimilarity scribe_similarity(const DistanceMatrix& dm, const std::vector<std::string>& labels);

/// Writes `csv` (label header row and column) and a grayscale `png` where the
/// smallest value is darkest. Constant matrices render mid-gray; NaN cells
/// (missing values) render white.
void export_heatmap(const Eigen::MatrixXd& matrix, const std::vector<std::string>& labels,
                    const std::filesystem::path& png, const std::filesystem::path& csv,
                    int cell_px = 8);

/// Heatmap pixels at one pixel per cell.
cv::Mat heatmap_image(const Eigen::MatrixXd& matrix, int cell_px = 1);

/// report.json body: top1, top5, top10, map (one decimal), per_query.
std::string retrieval_report_json(const RetrievalReport& report);

}  // namespace papyrid
