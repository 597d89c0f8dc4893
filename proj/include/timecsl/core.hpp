#ifndef TIMECSL_CORE_HPP
#define TIMECSL_CORE_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "timecsl/errors.hpp"

namespace timecsl {

using Eigen::Index;

/// D x T observations of one series; column t holds every channel at step t.
class TimeSeries {
 public:
  TimeSeries(std::string id, Eigen::MatrixXd values, std::optional<std::string> label = std::nullopt);

  const std::string& id() const noexcept { return id_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  const std::optional<std::string>& label() const noexcept { return label_; }
  Index channels() const noexcept { return values_.rows(); }
  Index length() const noexcept { return values_.cols(); }

  TimeSeries with_values(Eigen::MatrixXd values) const { return {id_, std::move(values), label_}; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::string id_;
  Eigen::MatrixXd values_;
  std::optional<std::string> label_;
};

class Dataset {
 public:
  Dataset(std::string name, std::vector<TimeSeries> series);

  const std::string& name() const noexcept { return name_; }
  const std::vector<TimeSeries>& series() const noexcept { return series_; }
  Index channel_count() const noexcept { return channel_count_; }
  std::size_t size() const noexcept { return series_.size(); }
  const TimeSeries& operator[](std::size_t i) const { return series_[i]; }

  Index min_length() const;
  Index max_length() const;
  bool all_labeled() const;
  /// Index of the series with this id, if any.
  std::optional<std::size_t> find(std::string_view id) const;
  /// New dataset made of the given rows, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::string name_;
  std::vector<TimeSeries> series_;
  Index channel_count_ = 0;
};

enum class Metric { EuclideanMin, CosineMax, XcorrMax };

inline constexpr std::array<Metric, 3> kAllMetrics = {Metric::EuclideanMin, Metric::CosineMax,
                                                      Metric::XcorrMax};

std::string_view to_string(Metric m);
/// Accepts "euclidean_min" / "EUCLIDEAN_MIN" and the other two names.
Metric parse_metric(std::string_view name);
/// Lower values mean more similar.
constexpr bool is_dissimilarity(Metric m) { return m == Metric::EuclideanMin; }

struct ShapeletGroup {
  Index length = 0;
  Metric metric = Metric::EuclideanMin;
  Index count = 0;

  friend bool operator==(const ShapeletGroup&, const ShapeletGroup&) = default;
};

struct Shapelet {
  Index id = 0;
  Index group_index = 0;
  Eigen::MatrixXd values;  // D x L
};

/// The shapelet encoder: groups of (length, metric, count) and one D x L
/// matrix per shapelet in group-major order. That order is the coordinate
/// order of every representation produced from it.
class ShapeletTransformer {
 public:
  /// Zero-valued shapelets.
  ShapeletTransformer(Index channel_count, std::vector<ShapeletGroup> groups);

  Index channel_count() const noexcept { return channel_count_; }
  const std::vector<ShapeletGroup>& groups() const noexcept { return groups_; }
  Index repr_dim() const noexcept { return static_cast<Index>(values_.size()); }
  Index max_length() const noexcept { return max_length_; }

  Index group_of(Index id) const { return group_of_.at(static_cast<std::size_t>(id)); }
  const ShapeletGroup& group_for(Index id) const { return groups_[static_cast<std::size_t>(group_of(id))]; }
  /// First coordinate of group g.
  Index group_offset(Index g) const { return group_offset_.at(static_cast<std::size_t>(g)); }

  const Eigen::MatrixXd& values(Index id) const { return values_.at(static_cast<std::size_t>(id)); }
  Shapelet shapelet(Index id) const { return {id, group_of(id), values(id)}; }
  void set_values(Index id, Eigen::MatrixXd v);

  /// Mutable view for optimizers. Callers keep every matrix's shape.
  std::span<Eigen::MatrixXd> parameters() noexcept { return values_; }
  std::span<const Eigen::MatrixXd> parameters() const noexcept { return values_; }

  friend bool operator==(const ShapeletTransformer& a, const ShapeletTransformer& b) {
    return a.channel_count_ == b.channel_count_ && a.groups_ == b.groups_ && a.values_ == b.values_;
  }

 private:
  Index channel_count_;
  std::vector<ShapeletGroup> groups_;
  std::vector<Eigen::MatrixXd> values_;
  std::vector<Index> group_of_;
  std::vector<Index> group_offset_;
  Index max_length_ = 0;
};

struct Representation {
  std::string series_id;
  Eigen::VectorXd values;
};

/// Shapelet <-> best window alignment.
struct MatchResult {
  Index shapelet_id = 0;
  std::string series_id;
  Metric metric = Metric::EuclideanMin;
  double feature_value = 0.0;
  Index window_start = 0;
  Eigen::MatrixXd window_values;  // D x L
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double temperature = 0.2;
  double alignment_weight = 1.0;
  double crop_min_fraction = 0.5;
  double jitter_sigma_fraction = 0.05;
  std::array<double, 2> scale_range = {0.8, 1.25};
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;

  /// Throws ConfigError naming the first violated field.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LossPoint {
  long step = 0;
  double train_loss = 0.0;
  std::optional<double> validation_loss;

  friend bool operator==(const LossPoint&, const LossPoint&) = default;
};

struct LossCurve {
  std::vector<LossPoint> points;

  bool empty() const noexcept { return points.empty(); }
  std::size_t size() const noexcept { return points.size(); }

  friend bool operator==(const LossCurve&, const LossCurve&) = default;
};

ShapeletTransformer new_transformer(Index channel_count, std::vector<ShapeletGroup> groups);

/// Lengths ceil({0.1, 0.2, 0.4, 0.8} * T_min), lifted to 2 and deduplicated,
/// crossed with all three metrics (metric-major), K = 10 per group.
std::vector<ShapeletGroup> default_groups(const Dataset& dataset);

}  // namespace timecsl

#endif  // TIMECSL_CORE_HPP
