#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "papyrid/errors.hpp"
#include "papyrid/image_io.hpp"
#include "papyrid/retrieval.hpp"
#include "test_util.hpp"

using namespace papyrid;

namespace {

struct Fraction {
  std::int64_t num = 0, den = 1;
  void add(std::int64_t n, std::int64_t d) {
    num = num * d + n * den;
    den *= d;
    const auto g = std::gcd(num, den);
    num /= g;
    den /= g;
  }
};

// AP as an exact fraction: (1/R) * sum over relevant ranks i of hits_i / i.
Fraction exact_ap(const std::vector<bool>& rel) {
  Fraction f;
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    if (!rel[i]) continue;
    ++hits;
    f.add(hits, static_cast<std::int64_t>(i + 1));
  }
  if (hits == 0) return {0, 1};
  f.den *= hits;
  const auto g = std::gcd(f.num, f.den);
  return {f.num / g, f.den / g};
}

DistanceMatrix toy_matrix() {
  DistanceMatrix dm;
  dm.doc_ids = {"A_1", "A_2", "B_1", "B_2"};
  dm.values.resize(4, 4);
  dm.values << 0, .2, .1, .5,  //
      .2, 0, .3, .4,           //
      .1, .3, 0, .6,           //
      .5, .4, .6, 0;
  return dm;
}

GlobalDescriptor gd(const std::string& id, const std::string& w, Eigen::VectorXd v) {
  GlobalDescriptor g;
  g.doc_id = id;
  g.writer = w;
  g.vector = std::move(v);
  return g;
}

}  // namespace

TEST_CASE("cosine distance") {
  const Eigen::Vector3d a(1, 2, 3);
  CHECK(cosine_distance(a, a) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_distance(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == doctest::Approx(1.0));
  CHECK(cosine_distance(a, -a) == doctest::Approx(2.0));
  bool flagged = false;
  CHECK(cosine_distance(a, Eigen::Vector3d::Zero(), &flagged) == 2.0);
  CHECK(flagged);
}

TEST_CASE("average precision examples") {
  CHECK(average_precision({true, true, false}) == doctest::Approx(1.0));
  CHECK(average_precision({true, false, true}) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(average_precision({true, false, true}) == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(average_precision({false, false, true}) == doctest::Approx(1.0 / 3.0));
  bool flagged = false;
  CHECK(average_precision({false, false}, &flagged) == 0.0);
  CHECK(flagged);
}

TEST_CASE("average precision matches exact rational arithmetic") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    std::vector<bool> rel(n);
    for (std::size_t i = 0; i < n; ++i) rel[i] = rng() & 1;
    const Fraction f = exact_ap(rel);
    const double ap = average_precision(rel);
    CHECK(std::abs(ap - static_cast<double>(f.num) / static_cast<double>(f.den)) <= 4e-16);
  }
}

TEST_CASE("leave-one-out on a hand-built 4-document matrix") {
  const auto dm = toy_matrix();
  const std::vector<std::string> labels{"A", "A", "B", "B"};
  const auto r = leave_one_out(dm, labels);
  REQUIRE(r.per_query.size() == 4);
  CHECK(r.per_query[0].ap == doctest::Approx(0.5));
  CHECK(r.per_query[0].first_correct_rank == 2);
  CHECK(r.per_query[1].ap == doctest::Approx(1.0));
  CHECK(r.per_query[2].ap == doctest::Approx(1.0 / 3));
  CHECK(r.per_query[3].ap == doctest::Approx(1.0 / 3));
  CHECK(r.map == doctest::Approx(100.0 * (0.5 + 1 + 2.0 / 3) / 4));
  CHECK(r.top1 == doctest::Approx(25.0));
  CHECK(r.top5 == doctest::Approx(100.0));

  const auto js = nlohmann::json::parse(retrieval_report_json(r));
  CHECK(js["map"].get<double>() == doctest::Approx(54.2));
  CHECK(js["top1"].get<double>() == doctest::Approx(25.0));
  CHECK(js["per_query"].size() == 4);
  CHECK(js["per_query"][0]["doc_id"] == "A_1");
}

TEST_CASE("gallery ties break by doc_id and singleton writers are excluded") {
  DistanceMatrix dm;
  dm.doc_ids = {"a_1", "b_1", "c_1", "c_2"};
  dm.values = Eigen::MatrixXd::Constant(4, 4, 0.5);
  dm.values.diagonal().setZero();
  const auto order = rank_gallery(dm, 2);
  CHECK(order == std::vector<std::size_t>{0, 1, 3});
  const auto r = leave_one_out(dm, {"a", "b", "c", "c"});
  CHECK(r.excluded == std::vector<std::string>{"a_1", "b_1"});
  CHECK(r.per_query.size() == 2);
  CHECK(r.per_query[0].first_correct_rank == 3);
}

TEST_CASE("clustered descriptors give perfect retrieval") {
  std::vector<GlobalDescriptor> g;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  for (int w = 0; w < 4; ++w) {
    for (int d = 0; d < 3; ++d) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(8);
      v(w) = 10;
      for (auto& x : v) x += 0.1 * n01(rng);
      g.push_back(gd("W" + std::to_string(w) + "_" + std::to_string(d), "W" + std::to_string(w), v));
    }
  }
  const auto r = leave_one_out(g);
  CHECK(r.report.top1 == 100.0);
  CHECK(r.report.map == doctest::Approx(100.0));
  CHECK(r.distances.values.isApprox(r.distances.values.transpose()));
  CHECK(r.distances.values.diagonal().norm() == 0);
}

TEST_CASE("scribe similarity examples") {
  DistanceMatrix dm;
  dm.doc_ids = {"A_1", "A_2"};
  dm.values.resize(2, 2);
  dm.values << 0, 0.4, 0.4, 0;
  auto s = scribe_similarity(dm, {"A", "A"});
  CHECK(s.values(0, 0) == doctest::Approx(0.4));

  dm.doc_ids = {"A_1", "B_1"};
  dm.values << 0, 0.7, 0.7, 0;
  s = scribe_similarity(dm, {"A", "B"});
  CHECK(s.values(0, 1) == doctest::Approx(0.7));
  CHECK(std::isnan(s.values(0, 0)));
  CHECK(s.missing_diagonal == std::vector<std::string>{"A", "B"});
}

TEST_CASE("scribe similarity matches a pair-enumeration oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 9;
    const std::size_t writers = 1 + rng() % 4;
    DistanceMatrix dm;
    std::vector<std::string> labels;
    dm.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      dm.doc_ids.push_back("d" + std::to_string(i));
      labels.push_back("w" + std::to_string(rng() % writers));
      for (std::size_t j = 0; j < i; ++j) {
        dm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            dm.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = u(rng);
      }
    }
    const auto s = scribe_similarity(dm, labels);
    for (std::size_t a = 0; a < s.writers.size(); ++a) {
      for (std::size_t b = 0; b < s.writers.size(); ++b) {
        double sum = 0;
        int count = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            const bool ab = labels[i] == s.writers[a] && labels[j] == s.writers[b];
            const bool ba = labels[j] == s.writers[a] && labels[i] == s.writers[b];
            if (ab || ba) {
              sum += dm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
              ++count;
            }
          }
        }
        const double got = s.values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        if (count == 0) {
          CHECK(std::isnan(got));
        } else {
          CHECK(std::abs(got - sum / count) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("heatmaps") {
  Eigen::MatrixXd m(2, 2);
  m << 0, 1, 1, 0;
  const cv::Mat img = heatmap_image(m);
  CHECK(img.at<std::uint8_t>(0, 0) == 0);
  CHECK(img.at<std::uint8_t>(1, 1) == 0);
  CHECK(img.at<std::uint8_t>(0, 1) == 255);

  const cv::Mat flat = heatmap_image(Eigen::MatrixXd::Constant(3, 3, 0.7));
  CHECK(cv::countNonZero(flat != 128) == 0);

  Eigen::MatrixXd with_nan = m;
  with_nan(1, 1) = std::nan("");
  CHECK(heatmap_image(with_nan).at<std::uint8_t>(1, 1) == 255);

  testutil::TempDir dir("heat");
  export_heatmap(m, {"Victor_10", "Victor_2"}, dir / "h.png", dir / "h.csv", 4);
  const cv::Mat png = load_grayscale(dir / "h.png");
  CHECK(png.cols == 8);
  std::ifstream in(dir / "h.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == ",Victor_10,Victor_2");
  std::string row;
  std::getline(in, row);
  CHECK(row.rfind("Victor_10,", 0) == 0);
}
