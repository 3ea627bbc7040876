#include <fstream>
#include <functional>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "papyrid/classify.hpp"
#include "papyrid/errors.hpp"
#include "test_util.hpp"

using namespace papyrid;

namespace {

GlobalDescriptor gd(const std::string& id, const std::string& w, Eigen::VectorXd v) {
  GlobalDescriptor g;
  g.doc_id = id;
  g.writer = w;
  g.vector = std::move(v);
  return g;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected error");
  return ErrorCode::InvalidArgument;
}

// Three well-separated clusters on the axes of R^6.
std::vector<GlobalDescriptor> clusters(std::size_t per_writer, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<GlobalDescriptor> out;
  const std::vector<std::string> names{"Dioscorus", "Menas", "Victor"};
  for (std::size_t w = 0; w < names.size(); ++w) {
    for (std::size_t d = 0; d < per_writer; ++d) {
      Eigen::VectorXd v(6);
      for (auto& x : v) x = 0.15 * n01(rng);
      v(static_cast<Eigen::Index>(w)) += 1.0;
      out.push_back(gd(names[w] + "_" + std::to_string(d + 1), names[w], v.normalized()));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("nearest neighbour examples") {
  std::vector<GlobalDescriptor> train{gd("A_1", "A", Eigen::Vector2d(1, 0)), gd("B_1", "B", Eigen::Vector2d(0, 1))};
  CHECK(nn_classify(train, Eigen::Vector2d(0.9, 0.1)) == "A");
  CHECK(nn_classify(train, Eigen::Vector2d(0.1, 0.9)) == "B");
  // equidistant: the doc_id "A_1" sorts first
  CHECK(nn_classify(train, Eigen::Vector2d(1, 1)) == "A");
  CHECK(nn_rank_writers(train, Eigen::Vector2d(0.1, 0.9)) == std::vector<std::string>{"B", "A"});
  CHECK(code_of([] { nn_classify({}, Eigen::Vector2d(1, 0)); }) == ErrorCode::EmptyTrainSet);
}

TEST_CASE("nearest neighbour matches a brute-force scan") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<GlobalDescriptor> train;
    const int n = 2 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd v(4);
      for (auto& x : v) x = n01(rng);
      train.push_back(gd("d" + std::to_string(100 + i), "w" + std::to_string(rng() % 4), v));
    }
    Eigen::VectorXd q(4);
    for (auto& x : q) x = n01(rng);
    double best = 1e300;
    std::string label;
    for (const auto& t : train) {
      const double d = 1.0 - t.vector.dot(q) / (t.vector.norm() * q.norm());
      if (d < best) {
        best = d;
        label = t.writer;
      }
    }
    CHECK(nn_classify(train, q) == label);
  }
}

TEST_CASE("balanced class weights") {
  CHECK(balanced_weight(10, 1) == doctest::Approx(5.0));
  CHECK(balanced_weight(10, 9) == doctest::Approx(0.556).epsilon(1e-3));
  CHECK(balanced_weight(8, 4) == 1.0);
}

TEST_CASE("svm separates clustered writers") {
  const auto train = clusters(4, 5);
  const auto test = clusters(3, 6);
  const SvmModel model = train_svms(train);
  CHECK(model.writers == std::vector<std::string>{"Dioscorus", "Menas", "Victor"});
  for (const auto& t : train) CHECK(svm_classify(model, t.vector) == t.writer);
  for (const auto& t : test) CHECK(svm_classify(model, t.vector) == t.writer);
}

TEST_CASE("binary svm: duplicated negatives with halved cost give the same solution") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  const Eigen::Index n = 30, dim = 5;
  RowMatrix x(n, dim);
  std::vector<int> y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = i < 6 ? 1 : -1;
    for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = n01(rng) + (j == 0 ? 0.8 * y[static_cast<std::size_t>(i)] : 0);
  }
  SvmOptions opt;
  opt.tol = 1e-12;
  opt.max_epochs = 200000;
  const std::vector<double> cost(static_cast<std::size_t>(n), 1.0);
  const BinarySvm a = train_binary_svm(x, y, cost, opt);

  RowMatrix x2(n + 24, dim);
  x2.topRows(n) = x;
  x2.bottomRows(24) = x.bottomRows(24);
  std::vector<int> y2 = y;
  std::vector<double> cost2 = cost;
  for (std::size_t i = 6; i < 30; ++i) cost2[i] = 0.5;
  for (int i = 0; i < 24; ++i) {
    y2.push_back(-1);
    cost2.push_back(0.5);
  }
  const BinarySvm b = train_binary_svm(x2, y2, cost2, opt);
  for (Eigen::Index i = 0; i < n; ++i) CHECK(std::abs(a.decision(x.row(i).transpose()) - b.decision(x.row(i).transpose())) <= 1e-5);

  CHECK(code_of([&] { train_binary_svm(x, std::vector<int>(n, 1), cost, opt); }) == ErrorCode::SingleClass);
}

TEST_CASE("svm ranking ties go to the first name") {
  SvmModel m;
  m.writers = {"Abraamios", "Kyros", "Victor"};
  m.weights = Eigen::MatrixXd::Zero(3, 2);
  m.weights.row(1) << 1, 0;
  m.bias = Eigen::Vector3d(0.5, 0.5, 0.5);
  CHECK(svm_classify(m, Eigen::Vector2d(0, 1)) == "Abraamios");
  CHECK(svm_rank_writers(m, Eigen::Vector2d(1, 0)) == std::vector<std::string>{"Kyros", "Abraamios", "Victor"});
  CHECK(svm_rank_writers(m, Eigen::Vector2d(-1, 0)) == std::vector<std::string>{"Abraamios", "Victor", "Kyros"});
  CHECK(code_of([] { svm_classify(SvmModel{}, Eigen::Vector2d(0, 1)); }) == ErrorCode::NotTrained);
  CHECK(code_of([] { train_svms({}); }) == ErrorCode::EmptyTrainSet);
  CHECK(code_of([] { train_svms({gd("A_1", "A", Eigen::Vector2d(1, 0)), gd("A_2", "A", Eigen::Vector2d(0, 1))}); }) ==
        ErrorCode::SingleClass);
}

TEST_CASE("evaluate_classification") {
  ClassificationSplit split;
  split.train = {"Menas_1", "Victor_1"};
  split.test = {"Menas_2", "Menas_3", "Victor_2"};
  const std::map<std::string, std::string> labels{
      {"Menas_1", "Menas"}, {"Menas_2", "Menas"}, {"Menas_3", "Menas"}, {"Victor_1", "Victor"}, {"Victor_2", "Victor"}};

  std::map<std::string, std::vector<std::string>> perfect;
  for (const auto& id : split.test) perfect[id] = {labels.at(id), labels.at(id) == "Menas" ? "Victor" : "Menas"};
  const auto rep = evaluate_classification(split, perfect, labels);
  CHECK(rep.top1 == 100.0);
  CHECK(rep.confusion.counts == Eigen::Matrix2i{{2, 0}, {0, 1}});

  auto wrong = perfect;
  wrong["Menas_3"] = {"Victor", "Menas"};
  const auto rep2 = evaluate_classification(split, wrong, labels);
  CHECK(rep2.top1 == doctest::Approx(200.0 / 3));
  CHECK(rep2.top5 == 100.0);
  CHECK(rep2.confusion.counts(0, 0) == 1);
  CHECK(rep2.confusion.counts(0, 1) == 1);

  const auto js = nlohmann::json::parse(classification_report_json(rep2, ClassifierKind::Nn, {}));
  CHECK(js["top1"].get<double>() == doctest::Approx(66.7));
  CHECK(js["per_doc"][1]["predicted"] == "Victor");

  testutil::TempDir dir("conf");
  write_confusion_csv(dir / "c.csv", rep2.confusion);
  std::ifstream in(dir / "c.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "true_writer,Menas,Victor");
  std::getline(in, line);
  CHECK(line == "Menas,1,1");

  wrong.erase("Victor_2");
  CHECK(code_of([&] { evaluate_classification(split, wrong, labels); }) == ErrorCode::MissingPrediction);
  CHECK(parse_classifier("svm") == ClassifierKind::Svm);
  CHECK(code_of([] { parse_classifier("rf"); }) == ErrorCode::UnknownMethod);
}

TEST_CASE("run_classification on clustered descriptors") {
  const auto globals = clusters(4, 9);
  ClassificationSplit split;
  for (const auto& g : globals) (g.doc_id.back() <= '2' ? split.train : split.test).push_back(g.doc_id);
  for (auto kind : {ClassifierKind::Nn, ClassifierKind::Svm}) {
    const auto rep = run_classification(globals, split, kind);
    CHECK(rep.top1 == 100.0);
    CHECK(rep.test_docs.size() == 6);
  }
}
