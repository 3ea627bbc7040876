#include "papyrid/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "json.hpp"
#include "papyrid/errors.hpp"

namespace papyrid {

double cosine_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                       const Eigen::Ref<const Eigen::VectorXd>& b, bool* flagged) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "vectors of size " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  const double na = a.norm(), nb = b.norm();
  if (flagged) *flagged = false;
  if (na == 0 || nb == 0) {
    if (flagged) *flagged = true;
    return 2.0;
  }
  return std::clamp(1.0 - a.dot(b) / (na * nb), 0.0, 2.0);
}

DistanceMatrix distance_matrix(const std::vector<GlobalDescriptor>& descriptors) {
  const auto n = static_cast<Eigen::Index>(descriptors.size());
  DistanceMatrix dm;
  dm.values = Eigen::MatrixXd::Zero(n, n);
  for (const auto& d : descriptors) dm.doc_ids.push_back(d.doc_id);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = cosine_distance(descriptors[static_cast<std::size_t>(i)].vector,
                                       descriptors[static_cast<std::size_t>(j)].vector);
      dm.values(i, j) = v;
      dm.values(j, i) = v;
    }
  }
  return dm;
}

double average_precision(const std::vector<bool>& ranked_relevance, bool* flagged) {
  double sum = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked_relevance.size(); ++i) {
    if (!ranked_relevance[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  if (flagged) *flagged = hits == 0;
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

std::vector<std::size_t> rank_gallery(const DistanceMatrix& dm, std::size_t query) {
  std::vector<std::size_t> order;
  order.reserve(dm.size() - 1);
  for (std::size_t j = 0; j < dm.size(); ++j) {
    if (j != query) order.push_back(j);
  }
  const auto q = static_cast<Eigen::Index>(query);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = dm.values(q, static_cast<Eigen::Index>(a));
    const double db = dm.values(q, static_cast<Eigen::Index>(b));
    if (da != db) return da < db;
    return dm.doc_ids[a] < dm.doc_ids[b];
  });
  return order;
}

RetrievalReport leave_one_out(const DistanceMatrix& dm, const std::vector<std::string>& labels) {
  const std::size_t n = dm.size();
  if (n < 2) throw Error(ErrorCode::TooFewDocuments, "retrieval needs at least 2 documents");
  if (labels.size() != n) throw Error(ErrorCode::InvalidArgument, "one label per document expected");

  std::map<std::string, std::size_t> per_writer;
  for (const auto& l : labels) ++per_writer[l];

  RetrievalReport report;
  std::size_t hit1 = 0, hit5 = 0, hit10 = 0;
  double ap_sum = 0;
  for (std::size_t q = 0; q < n; ++q) {
    if (per_writer[labels[q]] < 2) {
      report.excluded.push_back(dm.doc_ids[q]);
      continue;
    }
    const auto order = rank_gallery(dm, q);
    std::vector<bool> rel(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) rel[r] = labels[order[r]] == labels[q];
    QueryResult res;
    res.doc_id = dm.doc_ids[q];
    res.ap = average_precision(rel);
    const auto first = std::find(rel.begin(), rel.end(), true);
    res.first_correct_rank = static_cast<int>(first - rel.begin()) + 1;
    hit1 += res.first_correct_rank <= 1;
    hit5 += res.first_correct_rank <= 5;
    hit10 += res.first_correct_rank <= 10;
    ap_sum += res.ap;
    report.per_query.push_back(std::move(res));
  }
  const double evaluated = static_cast<double>(report.per_query.size());
  if (evaluated > 0) {
    report.top1 = 100.0 * static_cast<double>(hit1) / evaluated;
    report.top5 = 100.0 * static_cast<double>(hit5) / evaluated;
    report.top10 = 100.0 * static_cast<double>(hit10) / evaluated;
    report.map = 100.0 * ap_sum / evaluated;
  }
  return report;
}

LeaveOneOutResult leave_one_out(const std::vector<GlobalDescriptor>& descriptors) {
  LeaveOneOutResult out;
  out.distances = distance_matrix(descriptors);
  std::vector<std::string> labels;
  for (const auto& d : descriptors) labels.push_back(d.writer);
  out.report = leave_one_out(out.distances, labels);
  return out;
}

ScribeSimilarity scribe_similarity(const DistanceMatrix& dm, const std::vector<std::string>& labels) {
  if (labels.size() != dm.size()) throw Error(ErrorCode::InvalidArgument, "one label per document expected");
  ScribeSimilarity s;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> writer_of(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = index.emplace(labels[i], s.writers.size());
    if (inserted) s.writers.push_back(labels[i]);
    writer_of[i] = it->second;
  }
  const auto w = static_cast<Eigen::Index>(s.writers.size());
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(w, w);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(w, w);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (i == j) continue;
      const auto a = static_cast<Eigen::Index>(writer_of[i]);
      const auto b = static_cast<Eigen::Index>(writer_of[j]);
      sum(a, b) += dm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      count(a, b) += 1;
    }
  }
  s.values.resize(w, w);
  for (Eigen::Index a = 0; a < w; ++a) {
    for (Eigen::Index b = 0; b < w; ++b) {
      if (count(a, b) == 0) {
        s.values(a, b) = std::numeric_limits<double>::quiet_NaN();
        if (a == b) s.missing_diagonal.push_back(s.writers[static_cast<std::size_t>(a)]);
      } else {
        s.values(a, b) = sum(a, b) / count(a, b);
      }
    }
  }
  return s;
}

namespace {
double one_decimal(double v) { return std::round(v * 10.0) / 10.0; }
}  // namespace

std::string retrieval_report_json(const RetrievalReport& report) {
  nlohmann::ordered_json j;
  j["top1"] = one_decimal(report.top1);
  j["top5"] = one_decimal(report.top5);
  j["top10"] = one_decimal(report.top10);
  j["map"] = one_decimal(report.map);
  j["per_query"] = nlohmann::ordered_json::array();
  for (const auto& q : report.per_query) {
    nlohmann::ordered_json e;
    e["doc_id"] = q.doc_id;
    e["ap"] = q.ap;
    e["first_correct_rank"] = q.first_correct_rank;
    j["per_query"].push_back(std::move(e));
  }
  j["excluded"] = report.excluded;
  return j.dump(2) + "\n";
}

}  // namespace papyrid
