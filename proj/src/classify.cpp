#include "papyrid/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"
#include "papyrid/errors.hpp"
#include "papyrid/retrieval.hpp"

namespace papyrid {

std::vector<std::string> nn_rank_writers(const std::vector<GlobalDescriptor>& train,
                                         const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainSet, "nearest neighbour needs training data");
  struct Best {
    double dist;
    std::string doc_id;
  };
  std::map<std::string, Best> best;
  for (const auto& t : train) {
    const double d = cosine_distance(t.vector, x);
    auto it = best.find(t.writer);
    if (it == best.end() || d < it->second.dist || (d == it->second.dist && t.doc_id < it->second.doc_id)) {
      best[t.writer] = {d, t.doc_id};
    }
  }
  std::vector<std::pair<std::string, Best>> order(best.begin(), best.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second.dist != b.second.dist) return a.second.dist < b.second.dist;
    return a.second.doc_id < b.second.doc_id;
  });
  std::vector<std::string> out;
  for (auto& [writer, _] : order) out.push_back(writer);
  return out;
}

std::string nn_classify(const std::vector<GlobalDescriptor>& train,
                        const Eigen::Ref<const Eigen::VectorXd>& x) {
  return nn_rank_writers(train, x).front();
}

double balanced_weight(std::size_t n_total, std::size_t n_class) {
  return static_cast<double>(n_total) / (2.0 * static_cast<double>(n_class));
}

BinarySvm train_binary_svm(const RowMatrix& x, const std::vector<int>& y,
                           const std::vector<double>& cost, const SvmOptions& options) {
  const Eigen::Index n = x.rows(), dim = x.cols();
  if (static_cast<std::size_t>(n) != y.size() || y.size() != cost.size()) {
    throw Error(ErrorCode::InvalidArgument, "samples, labels and costs differ in length");
  }
  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), -1) != y.end();
  if (!has_pos || !has_neg) throw Error(ErrorCode::SingleClass, "SVM needs both classes");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteInput, "SVM input has NaN/Inf");

  // bias folded in as a constant feature 1
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double b = 0;
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<double> qii(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) qii[static_cast<std::size_t>(i)] = x.row(i).squaredNorm() + 1.0;

  auto gap = [&]() {
    double hinge = 0, alpha_sum = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(i);
      hinge += cost[s] * std::max(0.0, 1.0 - y[s] * (x.row(i).dot(w) + b));
      alpha_sum += alpha[s];
    }
    const double reg = 0.5 * (w.squaredNorm() + b * b);
    const double primal = reg + hinge;
    const double dual = alpha_sum - reg;
    return std::make_pair(primal - dual, primal);
  };

  BinarySvm out;
  int epoch = 0;
  double g = std::numeric_limits<double>::infinity();
  for (; epoch < options.max_epochs; ++epoch) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const double grad = y[s] * (x.row(i).dot(w) + b) - 1.0;
      const double next = std::clamp(alpha[s] - grad / qii[s], 0.0, cost[s]);
      const double delta = (next - alpha[s]) * y[s];
      if (delta != 0) {
        w += delta * x.row(i).transpose();
        b += delta;
        alpha[s] = next;
      }
    }
    const auto [gp, primal] = gap();
    g = gp;
    if (g <= options.tol * std::max(1.0, primal)) {
      ++epoch;
      break;
    }
  }
  out.w = std::move(w);
  out.b = b;
  out.duality_gap = g;
  out.epochs = epoch;
  return out;
}

Eigen::VectorXd SvmModel::decision_values(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (!trained()) throw Error(ErrorCode::NotTrained, "SVM model not trained");
  if (x.size() != weights.cols()) throw Error(ErrorCode::DimensionMismatch, "SVM input dimension mismatch");
  return weights * x + bias;
}

SvmModel train_svms(const std::vector<GlobalDescriptor>& train, const SvmOptions& options) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainSet, "no training samples");
  std::set<std::string> names;
  for (const auto& t : train) names.insert(t.writer);
  if (names.size() < 2) throw Error(ErrorCode::SingleClass, "need at least two writers");

  const auto n = static_cast<Eigen::Index>(train.size());
  const Eigen::Index dim = train.front().vector.size();
  RowMatrix x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (train[static_cast<std::size_t>(i)].vector.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "training vectors differ in size");
    }
    x.row(i) = train[static_cast<std::size_t>(i)].vector.transpose();
  }

  SvmModel model;
  model.c = options.c;
  model.writers.assign(names.begin(), names.end());
  model.weights.resize(static_cast<Eigen::Index>(names.size()), dim);
  model.bias.resize(static_cast<Eigen::Index>(names.size()));
  for (std::size_t wi = 0; wi < model.writers.size(); ++wi) {
    std::vector<int> y(train.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      y[i] = train[i].writer == model.writers[wi] ? 1 : -1;
      pos += y[i] == 1;
    }
    const double w_pos = balanced_weight(train.size(), pos);
    const double w_neg = balanced_weight(train.size(), train.size() - pos);
    std::vector<double> cost(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) cost[i] = options.c * (y[i] == 1 ? w_pos : w_neg);
    const BinarySvm svm = train_binary_svm(x, y, cost, options);
    model.weights.row(static_cast<Eigen::Index>(wi)) = svm.w.transpose();
    model.bias[static_cast<Eigen::Index>(wi)] = svm.b;
  }
  return model;
}

std::vector<std::string> svm_rank_writers(const SvmModel& model,
                                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::VectorXd scores = model.decision_values(x);
  std::vector<std::size_t> order(model.writers.size());
  std::iota(order.begin(), order.end(), 0);
  // writers are sorted by name, so a stable sort keeps name order on ties
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
  });
  std::vector<std::string> out;
  for (auto i : order) out.push_back(model.writers[i]);
  return out;
}

std::string svm_classify(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return svm_rank_writers(model, x).front();
}

ClassificationReport evaluate_classification(
    const ClassificationSplit& split, const std::map<std::string, std::vector<std::string>>& rankings,
    const std::map<std::string, std::string>& labels) {
  ClassificationReport rep;
  std::set<std::string> writers;
  for (const auto& id : split.train) writers.insert(labels.at(id));
  for (const auto& id : split.test) writers.insert(labels.at(id));
  rep.confusion.writers.assign(writers.begin(), writers.end());
  const auto w = static_cast<Eigen::Index>(writers.size());
  rep.confusion.counts = Eigen::MatrixXi::Zero(w, w);
  auto index = [&](const std::string& name) {
    return static_cast<Eigen::Index>(
        std::lower_bound(rep.confusion.writers.begin(), rep.confusion.writers.end(), name) -
        rep.confusion.writers.begin());
  };

  std::size_t hit1 = 0, hit5 = 0;
  for (const auto& id : split.test) {
    const auto it = rankings.find(id);
    if (it == rankings.end() || it->second.empty()) {
      throw Error(ErrorCode::MissingPrediction, "no prediction for " + id);
    }
    const std::string& truth = labels.at(id);
    const auto& ranked = it->second;
    hit1 += ranked.front() == truth;
    const auto top = ranked.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(5, ranked.size()));
    hit5 += std::find(ranked.begin(), top, truth) != top;
    if (writers.count(ranked.front())) ++rep.confusion.counts(index(truth), index(ranked.front()));
    rep.test_docs.push_back(id);
    rep.truth.push_back(truth);
    rep.rankings.push_back(ranked);
  }
  if (!split.test.empty()) {
    const double n = static_cast<double>(split.test.size());
    rep.top1 = 100.0 * static_cast<double>(hit1) / n;
    rep.top5 = 100.0 * static_cast<double>(hit5) / n;
  }
  return rep;
}

ClassifierKind parse_classifier(std::string_view text) {
  if (text == "nn") return ClassifierKind::Nn;
  if (text == "svm") return ClassifierKind::Svm;
  throw Error(ErrorCode::UnknownMethod, "classifier " + std::string(text));
}

std::string_view to_string(ClassifierKind kind) { return kind == ClassifierKind::Nn ? "nn" : "svm"; }

ClassificationReport run_classification(const std::vector<GlobalDescriptor>& globals,
                                        const ClassificationSplit& split, ClassifierKind kind,
                                        const SvmOptions& svm) {
  std::map<std::string, const GlobalDescriptor*> by_id;
  std::map<std::string, std::string> labels;
  for (const auto& g : globals) {
    by_id[g.doc_id] = &g;
    labels[g.doc_id] = g.writer;
  }
  auto lookup = [&](const std::string& id) -> const GlobalDescriptor& {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::InvalidArgument, "split names unknown document " + id);
    return *it->second;
  };
  std::vector<GlobalDescriptor> train;
  for (const auto& id : split.train) train.push_back(lookup(id));

  std::map<std::string, std::vector<std::string>> rankings;
  if (kind == ClassifierKind::Nn) {
    for (const auto& id : split.test) rankings[id] = nn_rank_writers(train, lookup(id).vector);
  } else {
    const SvmModel model = train_svms(train, svm);
    for (const auto& id : split.test) rankings[id] = svm_rank_writers(model, lookup(id).vector);
  }
  return evaluate_classification(split, rankings, labels);
}

std::string classification_report_json(const ClassificationReport& report, ClassifierKind kind,
                                       const SvmOptions& svm) {
  auto one_decimal = [](double v) { return std::round(v * 10.0) / 10.0; };
  nlohmann::ordered_json j;
  j["classifier"] = std::string(to_string(kind));
  if (kind == ClassifierKind::Svm) {
    j["svm_c"] = svm.c;
    j["class_weighting"] = "w_class = n_total / (2 * n_class)";
  }
  j["top1"] = one_decimal(report.top1);
  j["top5"] = one_decimal(report.top5);
  j["n_test"] = report.test_docs.size();
  j["per_doc"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.test_docs.size(); ++i) {
    nlohmann::ordered_json e;
    e["doc_id"] = report.test_docs[i];
    e["true"] = report.truth[i];
    e["predicted"] = report.rankings[i].front();
    e["ranking"] = report.rankings[i];
    j["per_doc"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

void write_confusion_csv(const std::filesystem::path& file, const ConfusionMatrix& confusion) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  out << "true_writer";
  for (const auto& w : confusion.writers) out << ',' << w;
  out << '\n';
  for (std::size_t r = 0; r < confusion.writers.size(); ++r) {
    out << confusion.writers[r];
    for (std::size_t c = 0; c < confusion.writers.size(); ++c) {
      out << ',' << confusion.counts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    out << '\n';
  }
}

}  // namespace papyrid
