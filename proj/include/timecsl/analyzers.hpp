#ifndef TIMECSL_ANALYZERS_HPP
#define TIMECSL_ANALYZERS_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "timecsl/core.hpp"
#include "timecsl/head.hpp"
#include "timecsl/train.hpp"

namespace timecsl {

struct SoftmaxConfig {
  int epochs = 500;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

/// Multinomial logistic regression, full-batch Adam on standardized inputs.
/// The returned head acts on raw representation rows.
LinearHead fit_softmax(const Eigen::MatrixXd& reprs, const std::vector<std::string>& labels,
                       const SoftmaxConfig& cfg = {});

/// Mean cross-entropy of the head on labeled rows.
double softmax_loss(const LinearHead& head, const Eigen::MatrixXd& reprs, const std::vector<std::string>& labels);

/// Argmax class per row; ties resolve to the smallest class index.
std::vector<std::string> predict(const LinearHead& head, const Eigen::MatrixXd& reprs);
std::vector<Index> predict_indices(const LinearHead& head, const Eigen::MatrixXd& reprs);

struct ClusterResult {
  std::vector<Index> assignments;
  Eigen::MatrixXd centers;  // k x M
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_trace;  // after every assignment step
};

/// k-means++ seeding, Lloyd iterations to a fixpoint (at most 300).
ClusterResult kmeans(const Eigen::MatrixXd& reprs, Index k, std::uint64_t seed);

struct AnomalyResult {
  Eigen::VectorXd scores;
  double threshold = 0.0;
  std::vector<bool> flags;
};

/// Distance to the k-th nearest other row; threshold is the linearly
/// interpolated empirical `quantile` of the scores.
AnomalyResult knn_anomaly(const Eigen::MatrixXd& reprs, Index k, double quantile);

double accuracy(const std::vector<std::string>& predicted, const std::vector<std::string>& truth);
double adjusted_rand_index(const std::vector<Index>& a, const std::vector<Index>& b);

/// Empirical quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> values, double q);

enum class Task { Classification, Clustering, AnomalyDetection };
enum class Mode { Freeze, FineTune };

Task parse_task(const std::string& name);
Mode parse_mode(const std::string& name);
std::string to_string(Task t);
std::string to_string(Mode m);

struct AnalyzeParams {
  std::uint64_t seed = 0;
  double train_fraction = 0.7;         // classification: labeled share used for fitting
  std::optional<Index> clusters;       // clustering: defaults to #classes, else 2
  Index neighbors = 5;                 // anomaly: clamped to N - 1
  double quantile = 0.95;              // anomaly threshold
  SoftmaxConfig softmax;
  FineTuneConfig finetune;
};

struct SeriesOutput {
  std::string series_id;
  std::string output;  // predicted label, cluster id, or "anomaly"/"normal"
  std::optional<double> score;
  std::string split;   // "train", "test" or "" when not applicable
};

struct AnalysisResult {
  Task task = Task::Classification;
  Mode mode = Mode::Freeze;
  std::string analyzer;
  std::vector<Index> shapelets;  // coordinates used, in order
  std::map<std::string, double> metrics;
  std::vector<SeriesOutput> outputs;
  std::optional<ShapeletTransformer> finetuned;
  std::optional<LinearHead> head;
};

/// Freezing-mode analyzers operate on the (restricted) representation matrix.
using FrozenAnalyzer =
    std::function<AnalysisResult(const Eigen::MatrixXd& reprs, const Dataset& ds, const AnalyzeParams& params)>;

/// Analyzer registry keyed by (task, name). Built-ins: (classification,
/// softmax), (clustering, kmeans), (anomaly, knn).
class AnalyzerRegistry {
 public:
  static AnalyzerRegistry& instance();
  void add(Task task, const std::string& name, FrozenAnalyzer fn);
  const FrozenAnalyzer& get(Task task, const std::string& name) const;
  std::vector<std::string> names(Task task) const;
  static std::string default_name(Task task);

 private:
  AnalyzerRegistry();
  std::map<std::pair<Task, std::string>, FrozenAnalyzer> table_;
};

/// Run one analysis over `f(ds)` restricted to `shapelets` (all when empty).
/// Fine-tuning is classification-only and uses a linear head initialised by
/// a freezing-mode fit.
AnalysisResult analyze(Task task, Mode mode, const std::string& analyzer, const Dataset& ds,
                       const ShapeletTransformer& f, const std::optional<std::vector<Index>>& shapelets,
                       const AnalyzeParams& params);

/// Stratified, seeded split of labeled series; returns (train rows, test rows).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<std::string>& labels, double train_fraction, std::uint64_t seed);

}  // namespace timecsl

#endif  // TIMECSL_ANALYZERS_HPP
