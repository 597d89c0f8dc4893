#include "timecsl/analyzers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "timecsl/adam.hpp"
#include "timecsl/transform.hpp"

namespace timecsl {

LinearHead fit_softmax(const Eigen::MatrixXd& reprs, const std::vector<std::string>& labels,
                       const SoftmaxConfig& cfg) {
  if (static_cast<Index>(labels.size()) != reprs.rows()) throw ContractError("one label per representation row");
  auto classes = class_vocabulary(labels);
  if (classes.size() < 2) throw ContractError("classification needs at least 2 classes, labels have 1");
  if (cfg.epochs < 0 || !(cfg.learning_rate >= 0.0) || !(cfg.l2 >= 0.0))
    throw ConfigError("softmax epochs, learning_rate and l2 must be non-negative");
  const std::vector<Index> targets = encode_labels(labels, classes);

  const Eigen::RowVectorXd mean = reprs.colwise().mean();
  Eigen::RowVectorXd scale = ((reprs.rowwise() - mean).array().square().colwise().mean()).sqrt();
  for (Index c = 0; c < scale.size(); ++c)
    if (!(scale[c] > 0.0)) scale[c] = 1.0;
  const Eigen::MatrixXd x = (reprs.rowwise() - mean).array().rowwise() / scale.array();

  LinearHead head = LinearHead::zeros(std::move(classes), reprs.cols());
  std::vector<Eigen::MatrixXd> params{head.weights, head.bias};
  Adam opt(cfg.learning_rate);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    head.weights = params[0];
    head.bias = params[1];
    Eigen::MatrixXd g;
    cross_entropy(head.logits(x), targets, &g);
    const std::vector<Eigen::MatrixXd> grads{g.transpose() * x + cfg.l2 * params[0], g.colwise().sum().transpose()};
    opt.step(params, grads);
  }
  // Fold the standardization into the head so it reads raw rows.
  head.weights = params[0].array().rowwise() / scale.array();
  head.bias = params[1] - head.weights * mean.transpose();
  return head;
}

double softmax_loss(const LinearHead& head, const Eigen::MatrixXd& reprs, const std::vector<std::string>& labels) {
  return cross_entropy(head.logits(reprs), encode_labels(labels, head.classes));
}

std::vector<Index> predict_indices(const LinearHead& head, const Eigen::MatrixXd& reprs) {
  const Eigen::MatrixXd logits = head.logits(reprs);
  std::vector<Index> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

std::vector<std::string> predict(const LinearHead& head, const Eigen::MatrixXd& reprs) {
  std::vector<std::string> out;
  for (auto c : predict_indices(head, reprs)) out.push_back(head.classes[static_cast<std::size_t>(c)]);
  return out;
}

namespace {

std::vector<Index> assign_nearest(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers, double& inertia,
                                  Eigen::VectorXd& dist) {
  std::vector<Index> assign(static_cast<std::size_t>(x.rows()));
  dist.resize(x.rows());
  inertia = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centers.rows(); ++c) {
      const double d = (x.row(i) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assign[static_cast<std::size_t>(i)] = best;
    dist[i] = best_d;
    inertia += best_d;
  }
  return assign;
}

}  // namespace

ClusterResult kmeans(const Eigen::MatrixXd& reprs, Index k, std::uint64_t seed) {
  const Index n = reprs.rows();
  if (k < 1 || k > n) throw ContractError("k-means needs 1 <= k <= N; got k=" + std::to_string(k) + ", N=" + std::to_string(n));
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  Eigen::MatrixXd centers(k, reprs.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Index> first(0, n - 1);
  Index pick = first(rng);
  centers.row(0) = reprs.row(pick);
  chosen[static_cast<std::size_t>(pick)] = true;
  Eigen::VectorXd d2 = (reprs.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      pick = -1;
      for (Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick < 0)
        for (Index i = n - 1; i >= 0; --i)
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
    } else {
      pick = 0;
      while (chosen[static_cast<std::size_t>(pick)]) ++pick;
    }
    centers.row(c) = reprs.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    d2 = d2.cwiseMin((reprs.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  ClusterResult out;
  std::vector<Index> prev;
  Eigen::VectorXd dist;
  bool converged = false;
  constexpr int kMaxIterations = 300;
  for (int it = 0; it < kMaxIterations; ++it) {
    double inertia = 0.0;
    auto assign = assign_nearest(reprs, centers, inertia, dist);
    out.inertia_trace.push_back(inertia);
    out.iterations = it + 1;
    if (assign == prev) {
      converged = true;
      break;
    }
    prev = std::move(assign);

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, reprs.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(prev[static_cast<std::size_t>(i)]) += reprs.row(i);
      counts[prev[static_cast<std::size_t>(i)]] += 1.0;
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (Index c = 0; c < k; ++c) {
      if (counts[c] > 0.0) {
        centers.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Empty cluster: move it onto the point farthest from its center.
      Index far = -1;
      for (Index i = 0; i < n; ++i)
        if (!taken[static_cast<std::size_t>(i)] && (far < 0 || dist[i] > dist[far])) far = i;
      taken[static_cast<std::size_t>(far)] = true;
      centers.row(c) = reprs.row(far);
      dist[far] = 0.0;
    }
  }
  if (!converged) {
    double inertia = 0.0;
    prev = assign_nearest(reprs, centers, inertia, dist);
    out.inertia_trace.push_back(inertia);
  }
  out.assignments = std::move(prev);
  out.centers = std::move(centers);
  out.inertia = out.inertia_trace.back();
  return out;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AnomalyResult knn_anomaly(const Eigen::MatrixXd& reprs, Index k, double quantile) {
  const Index n = reprs.rows();
  if (k < 1 || k >= n) throw ContractError("kNN anomaly needs 1 <= k < N; got k=" + std::to_string(k) + ", N=" + std::to_string(n));
  if (!(quantile > 0.0 && quantile < 1.0)) throw ContractError("quantile must be in (0, 1)");
  AnomalyResult out;
  out.scores.resize(n);
  std::vector<double> d;
  for (Index i = 0; i < n; ++i) {
    d.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i) d.push_back((reprs.row(i) - reprs.row(j)).norm());
    std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
    out.scores[i] = d[static_cast<std::size_t>(k - 1)];
  }
  out.threshold = empirical_quantile(std::vector<double>(out.scores.data(), out.scores.data() + n), quantile);
  for (Index i = 0; i < n; ++i) out.flags.push_back(out.scores[i] > out.threshold);
  return out;
}

double accuracy(const std::vector<std::string>& predicted, const std::vector<std::string>& truth) {
  if (predicted.size() != truth.size() || truth.empty())
    throw ContractError("accuracy needs two non-empty label lists of equal length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double adjusted_rand_index(const std::vector<Index>& a, const std::vector<Index>& b) {
  if (a.size() != b.size() || a.empty()) throw ContractError("ARI needs two non-empty labelings of equal length");
  auto pairs = [](double m) { return m * (m - 1.0) / 2.0; };
  std::map<std::pair<Index, Index>, double> table;
  std::map<Index, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, count] : table) index += pairs(count);
  for (const auto& [key, count] : rows) sum_a += pairs(count);
  for (const auto& [key, count] : cols) sum_b += pairs(count);
  const double expected = sum_a * sum_b / pairs(static_cast<double>(a.size()));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

Task parse_task(const std::string& name) {
  if (name == "classify" || name == "classification") return Task::Classification;
  if (name == "cluster" || name == "clustering") return Task::Clustering;
  if (name == "anomaly" || name == "anomaly_detection") return Task::AnomalyDetection;
  throw ContractError("unknown task '" + name + "' (expected classify, cluster or anomaly)");
}

Mode parse_mode(const std::string& name) {
  if (name == "freeze" || name == "freezing") return Mode::Freeze;
  if (name == "finetune" || name == "fine-tune" || name == "fine_tuning") return Mode::FineTune;
  throw ContractError("unknown mode '" + name + "' (expected freeze or finetune)");
}

std::string to_string(Task t) {
  switch (t) {
    case Task::Classification: return "classify";
    case Task::Clustering: return "cluster";
    case Task::AnomalyDetection: return "anomaly";
  }
  return "unknown";
}

std::string to_string(Mode m) { return m == Mode::Freeze ? "freeze" : "finetune"; }

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    const std::vector<std::string>& labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train fraction must be in (0, 1]");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_rows, test_rows;
  for (auto& [label, rows] : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, rows.size());
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  return {train_rows, test_rows};
}

namespace {

std::vector<std::string> require_labels(const Dataset& ds) {
  std::vector<std::string> labels;
  for (const auto& s : ds.series()) {
    if (!s.label()) throw ContractError("series '" + s.id() + "' has no label; classification needs labels");
    labels.push_back(*s.label());
  }
  return labels;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& rows) {
  std::vector<T> out;
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

// Accuracy metrics and per-series outputs for a fitted head.
void score_classifier(AnalysisResult& result, const LinearHead& head, const Eigen::MatrixXd& reprs,
                      const Dataset& ds, const std::vector<std::string>& labels,
                      const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows) {
  const auto predicted = predict(head, reprs);
  std::vector<std::string> split(ds.size(), "train");
  for (auto r : test_rows) split[r] = "test";
  const double train_acc = accuracy(take(predicted, train_rows), take(labels, train_rows));
  result.metrics["train_accuracy"] = train_acc;
  result.metrics["n_train"] = static_cast<double>(train_rows.size());
  result.metrics["n_test"] = static_cast<double>(test_rows.size());
  if (!test_rows.empty()) {
    result.metrics["test_accuracy"] = accuracy(take(predicted, test_rows), take(labels, test_rows));
    result.metrics["accuracy"] = result.metrics["test_accuracy"];
  } else {
    result.metrics["accuracy"] = train_acc;
  }
  for (std::size_t i = 0; i < ds.size(); ++i) result.outputs.push_back({ds[i].id(), predicted[i], std::nullopt, split[i]});
}

AnalysisResult softmax_analyzer(const Eigen::MatrixXd& reprs, const Dataset& ds, const AnalyzeParams& params) {
  AnalysisResult result;
  const auto labels = require_labels(ds);
  const auto [train_rows, test_rows] = stratified_split(labels, params.train_fraction, params.seed);
  SoftmaxConfig sc = params.softmax;
  sc.seed = params.seed;
  const LinearHead head = fit_softmax(take_rows(reprs, train_rows), take(labels, train_rows), sc);
  score_classifier(result, head, reprs, ds, labels, train_rows, test_rows);
  result.head = head;
  return result;
}

AnalysisResult kmeans_analyzer(const Eigen::MatrixXd& reprs, const Dataset& ds, const AnalyzeParams& params) {
  AnalysisResult result;
  Index k = 2;
  std::vector<std::string> labels;
  if (ds.all_labeled())
    for (const auto& s : ds.series()) labels.push_back(*s.label());
  const auto classes = class_vocabulary(labels);
  if (params.clusters) {
    k = *params.clusters;
  } else if (classes.size() >= 2) {
    k = static_cast<Index>(classes.size());
  }
  k = std::min<Index>(k, reprs.rows());
  const ClusterResult cr = kmeans(reprs, k, params.seed);
  result.metrics["k"] = static_cast<double>(k);
  result.metrics["inertia"] = cr.inertia;
  result.metrics["iterations"] = cr.iterations;
  if (!labels.empty()) result.metrics["ari"] = adjusted_rand_index(cr.assignments, encode_labels(labels, classes));
  for (std::size_t i = 0; i < ds.size(); ++i)
    result.outputs.push_back({ds[i].id(), std::to_string(cr.assignments[i]), std::nullopt, ""});
  return result;
}

AnalysisResult knn_analyzer(const Eigen::MatrixXd& reprs, const Dataset& ds, const AnalyzeParams& params) {
  AnalysisResult result;
  if (reprs.rows() < 2) throw ContractError("anomaly detection needs at least 2 series");
  const Index k = std::clamp<Index>(params.neighbors, 1, reprs.rows() - 1);
  const AnomalyResult ar = knn_anomaly(reprs, k, params.quantile);
  result.metrics["k"] = static_cast<double>(k);
  result.metrics["threshold"] = ar.threshold;
  result.metrics["n_flagged"] = static_cast<double>(std::count(ar.flags.begin(), ar.flags.end(), true));
  for (std::size_t i = 0; i < ds.size(); ++i)
    result.outputs.push_back(
        {ds[i].id(), ar.flags[i] ? "anomaly" : "normal", ar.scores[static_cast<Index>(i)], ""});
  return result;
}

}  // namespace

AnalyzerRegistry::AnalyzerRegistry() {
  add(Task::Classification, "softmax", softmax_analyzer);
  add(Task::Clustering, "kmeans", kmeans_analyzer);
  add(Task::AnomalyDetection, "knn", knn_analyzer);
}

AnalyzerRegistry& AnalyzerRegistry::instance() {
  static AnalyzerRegistry registry;
  return registry;
}

void AnalyzerRegistry::add(Task task, const std::string& name, FrozenAnalyzer fn) {
  table_[{task, name}] = std::move(fn);
}

const FrozenAnalyzer& AnalyzerRegistry::get(Task task, const std::string& name) const {
  auto it = table_.find({task, name});
  if (it == table_.end()) throw ContractError("no analyzer '" + name + "' for task " + to_string(task));
  return it->second;
}

std::vector<std::string> AnalyzerRegistry::names(Task task) const {
  std::vector<std::string> out;
  for (const auto& [key, fn] : table_)
    if (key.first == task) out.push_back(key.second);
  return out;
}

std::string AnalyzerRegistry::default_name(Task task) {
  switch (task) {
    case Task::Classification: return "softmax";
    case Task::Clustering: return "kmeans";
    case Task::AnomalyDetection: return "knn";
  }
  return "";
}

AnalysisResult analyze(Task task, Mode mode, const std::string& analyzer, const Dataset& ds,
                       const ShapeletTransformer& f, const std::optional<std::vector<Index>>& shapelets,
                       const AnalyzeParams& params) {
  if (mode == Mode::FineTune && task != Task::Classification)
    throw ContractError("fine-tuning mode supports only the classification task");
  const std::string name = analyzer.empty() ? AnalyzerRegistry::default_name(task) : analyzer;

  std::vector<Index> cols;
  if (shapelets && !shapelets->empty()) {
    std::set<Index> seen;
    for (auto id : *shapelets) {
      if (id < 0 || id >= f.repr_dim())
        throw ContractError("unknown shapelet id " + std::to_string(id) + "; valid ids are 0.." +
                            std::to_string(f.repr_dim() - 1));
      if (!seen.insert(id).second) throw ContractError("shapelet id " + std::to_string(id) + " listed twice");
    }
    cols = *shapelets;
  } else {
    cols.resize(static_cast<std::size_t>(f.repr_dim()));
    std::iota(cols.begin(), cols.end(), Index{0});
  }

  AnalysisResult result;
  if (mode == Mode::Freeze) {
    const auto& fn = AnalyzerRegistry::instance().get(task, name);
    result = fn(select_columns(transform_dataset(ds, f), cols), ds, params);
  } else {
    if (name != "softmax" && name != "linear")
      throw ContractError("fine-tuning uses the linear (softmax) head; got analyzer '" + name + "'");
    const auto labels = require_labels(ds);
    const auto [train_rows, test_rows] = stratified_split(labels, params.train_fraction, params.seed);
    const Dataset train_ds = ds.subset(train_rows);
    SoftmaxConfig sc = params.softmax;
    sc.seed = params.seed;
    const LinearHead init =
        fit_softmax(select_columns(transform_dataset(train_ds, f), cols), take(labels, train_rows), sc);
    FineTuneConfig fc = params.finetune;
    fc.seed = params.seed;
    FineTuneResult ft = fine_tune(f, init, train_ds, fc, cols);
    const Eigen::MatrixXd reprs = select_columns(transform_dataset(ds, ft.transformer), cols);
    score_classifier(result, ft.head, reprs, ds, labels, train_rows, test_rows);
    if (!ft.curve.empty()) result.metrics["final_finetune_loss"] = ft.curve.points.back().train_loss;
    result.finetuned = std::move(ft.transformer);
    result.head = std::move(ft.head);
  }
  result.task = task;
  result.mode = mode;
  result.analyzer = name;
  result.shapelets = std::move(cols);
  return result;
}

}  // namespace timecsl
