#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "papyrid/corpus.hpp"
#include "papyrid/encode.hpp"

namespace papyrid {

/// Writers ordered by the distance of their nearest training sample
/// (ties: doc_id of that sample).
std::vector<std::string> nn_rank_writers(const std::vector<GlobalDescriptor>& train,
                                         const Eigen::Ref<const Eigen::VectorXd>& x);

/// Label of the cosine-nearest training descriptor, ties by doc_id.
std::string nn_classify(const std::vector<GlobalDescriptor>& train,
                        const Eigen::Ref<const Eigen::VectorXd>& x);

struct SvmOptions {
  double c = 1.0;
  double tol = 1e-6;  // duality gap
  int max_epochs = 10000;
};

struct BinarySvm {
  Eigen::VectorXd w;
  double b = 0;
  double duality_gap = 0;
  int epochs = 0;

  double decision(const Eigen::Ref<const Eigen::VectorXd>& x) const { return w.dot(x) + b; }
};

/// L2-regularised hinge-loss SVM, minimising
///   1/2 (|w|^2 + b^2) + sum_i cost_i max(0, 1 - y_i (w.x_i + b))
/// by cyclic dual coordinate descent. `y` holds +1 / -1.
BinarySvm train_binary_svm(const RowMatrix& x, const std::vector<int>& y,
                           const std::vector<double>& cost, const SvmOptions& options);

struct SvmModel {
  std::vector<std::string> writers;  // sorted by name
  Eigen::MatrixXd weights;           // writers x dim
  Eigen::VectorXd bias;
  double c = 1.0;

  bool trained() const { return !writers.empty(); }
  Eigen::VectorXd decision_values(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Balanced class weight n_total / (2 * n_class).
double balanced_weight(std::size_t n_total, std::size_t n_class);

/// One-vs-rest: per writer, its samples are positives and all others negatives.
SvmModel train_svms(const std::vector<GlobalDescriptor>& train, const SvmOptions& options = {});

/// Writers sorted by decision value (descending, ties by name).
std::vector<std::string> svm_rank_writers(const SvmModel& model,
                                          const Eigen::Ref<const Eigen::VectorXd>& x);
std::string svm_classify(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

struct ConfusionMatrix {
  std::vector<std::string> writers;  // rows = true, cols = predicted
  Eigen::MatrixXi counts;
};

struct ClassificationReport {
  double top1 = 0, top5 = 0;  // percent
  ConfusionMatrix confusion;
  std::vector<std::string> test_docs;
  std::vector<std::string> truth;
  std::vector<std::vector<std::string>> rankings;
};

/// `rankings` maps each test doc_id to writers ranked best first;
/// `labels` maps doc_id to the true writer.
ClassificationReport evaluate_classification(
    const ClassificationSplit& split, const std::map<std::string, std::vector<std::string>>& rankings,
    const std::map<std::string, std::string>& labels);

enum class ClassifierKind { Nn, Svm };
ClassifierKind parse_classifier(std::string_view text);
std::string_view to_string(ClassifierKind kind);

/// Runs one classifier over a split of encoded documents.
ClassificationReport run_classification(const std::vector<GlobalDescriptor>& globals,
                                        const ClassificationSplit& split, ClassifierKind kind,
                                        const SvmOptions& svm = {});

std::string classification_report_json(const ClassificationReport& report, ClassifierKind kind,
                                       const SvmOptions& svm);
void write_confusion_csv(const std::filesystem::path& file, const ConfusionMatrix& confusion);

}  // namespace papyrid
