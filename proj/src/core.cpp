#include "timecsl/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_set>

namespace timecsl {

TimeSeries::TimeSeries(std::string id, Eigen::MatrixXd values, std::optional<std::string> label)
    : id_(std::move(id)), values_(std::move(values)), label_(std::move(label)) {
  if (values_.rows() < 1 || values_.cols() < 1)
    throw DataError("series '" + id_ + "' must have at least one channel and one step");
  if (!values_.allFinite()) throw DataError("series '" + id_ + "' contains non-finite values");
}

Dataset::Dataset(std::string name, std::vector<TimeSeries> series)
    : name_(std::move(name)), series_(std::move(series)) {
  if (series_.empty()) throw DataError("empty dataset");
  channel_count_ = series_.front().channels();
  std::unordered_set<std::string> ids;
  for (const auto& s : series_) {
    if (s.channels() != channel_count_)
      throw DataError("series '" + s.id() + "' has " + std::to_string(s.channels()) +
                      " channels, dataset has " + std::to_string(channel_count_));
    if (!ids.insert(s.id()).second) throw DataError("duplicate series id '" + s.id() + "'");
  }
}

Index Dataset::min_length() const {
  Index m = std::numeric_limits<Index>::max();
  for (const auto& s : series_) m = std::min(m, s.length());
  return m;
}

Index Dataset::max_length() const {
  Index m = 0;
  for (const auto& s : series_) m = std::max(m, s.length());
  return m;
}

bool Dataset::all_labeled() const {
  return std::all_of(series_.begin(), series_.end(), [](const auto& s) { return s.label().has_value(); });
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  for (std::size_t i = 0; i < series_.size(); ++i)
    if (series_[i].id() == id) return i;
  return std::nullopt;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<TimeSeries> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(series_.at(r));
  return {name_, std::move(out)};
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::EuclideanMin: return "euclidean_min";
    case Metric::CosineMax: return "cosine_max";
    case Metric::XcorrMax: return "xcorr_max";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto m : kAllMetrics)
    if (to_string(m) == lower) return m;
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

ShapeletTransformer::ShapeletTransformer(Index channel_count, std::vector<ShapeletGroup> groups)
    : channel_count_(channel_count), groups_(std::move(groups)) {
  if (channel_count_ < 1) throw ConfigError("channel_count must be >= 1");
  if (groups_.empty()) throw ConfigError("shapelet transformer needs at least one group");
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& grp = groups_[g];
    if (grp.length < 2)
      throw ConfigError("group " + std::to_string(g) + ": length must be >= 2, got " + std::to_string(grp.length));
    if (grp.count < 1)
      throw ConfigError("group " + std::to_string(g) + ": count must be >= 1, got " + std::to_string(grp.count));
    group_offset_.push_back(static_cast<Index>(values_.size()));
    for (Index k = 0; k < grp.count; ++k) {
      values_.push_back(Eigen::MatrixXd::Zero(channel_count_, grp.length));
      group_of_.push_back(static_cast<Index>(g));
    }
    max_length_ = std::max(max_length_, grp.length);
  }
}

void ShapeletTransformer::set_values(Index id, Eigen::MatrixXd v) {
  auto& slot = values_.at(static_cast<std::size_t>(id));
  if (v.rows() != slot.rows() || v.cols() != slot.cols())
    throw ContractError("shapelet " + std::to_string(id) + " expects shape " + std::to_string(slot.rows()) + "x" +
                        std::to_string(slot.cols()));
  if (!v.allFinite()) throw ContractError("shapelet " + std::to_string(id) + " values must be finite");
  slot = std::move(v);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be > 0");
  if (!(alignment_weight >= 0.0) || !std::isfinite(alignment_weight))
    throw ConfigError("alignment_weight must be >= 0");
  if (!(crop_min_fraction > 0.0 && crop_min_fraction <= 1.0))
    throw ConfigError("crop_min_fraction must be in (0, 1]");
  if (!(jitter_sigma_fraction >= 0.0) || !std::isfinite(jitter_sigma_fraction))
    throw ConfigError("jitter_sigma_fraction must be >= 0");
  if (!(scale_range[0] > 0.0 && scale_range[0] <= scale_range[1]) || !std::isfinite(scale_range[1]))
    throw ConfigError("scale_range must satisfy 0 < low <= high");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must be in [0, 1)");
}

ShapeletTransformer new_transformer(Index channel_count, std::vector<ShapeletGroup> groups) {
  return {channel_count, std::move(groups)};
}

std::vector<ShapeletGroup> default_groups(const Dataset& dataset) {
  const Index t_min = dataset.min_length();
  if (t_min < 3)
    throw ConfigError("shortest series has length " + std::to_string(t_min) + "; default shapelets need >= 3");
  // Tenths, in integer arithmetic so ceil is exact.
  std::set<Index> lengths;
  for (Index tenths : {1, 2, 4, 8}) lengths.insert(std::max<Index>(2, (t_min * tenths + 9) / 10));
  std::vector<ShapeletGroup> groups;
  for (auto m : kAllMetrics)
    for (auto len : lengths) groups.push_back({len, m, 10});
  return groups;
}

}  // namespace timecsl
