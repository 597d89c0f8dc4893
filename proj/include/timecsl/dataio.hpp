#ifndef TIMECSL_DATAIO_HPP
#define TIMECSL_DATAIO_HPP

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "timecsl/analyzers.hpp"
#include "timecsl/core.hpp"
#include "timecsl/head.hpp"

namespace timecsl {

/// Header of a `.ts` file as declared before `@data`.
struct TsHeader {
  std::string problem_name;
  std::optional<Index> dimensions;
  std::optional<bool> univariate;
  std::optional<bool> equal_length;
  std::optional<Index> series_length;
  bool class_label = false;
  std::vector<std::string> labels;
};

struct TsFile {
  TsHeader header;
  Dataset dataset;
};

/// Parses the directive subset @problemName, @timeStamps (false only),
/// @missing, @univariate, @dimension(s), @equalLength, @seriesLength,
/// @classLabel; then one record per line, channels split by ':', values by
/// ','. Errors carry 1-based line and column.
TsFile parse_ts_file(std::string_view text);
Dataset parse_ts(std::string_view text);

/// One JSON object per line: {"id", "label"?, "values": [[...] * D]}.
Dataset parse_jsonl(std::string_view text, const std::string& name);
Dataset read_jsonl(const std::filesystem::path& path);
std::string format_jsonl(const Dataset& ds);
void write_jsonl(const Dataset& ds, const std::filesystem::path& path);

enum class DatasetFormat { Ts, Jsonl };
DatasetFormat parse_dataset_format(const std::string& name);
/// Format from the extension when not given (".ts" -> Ts, else Jsonl).
Dataset read_dataset(const std::filesystem::path& path, std::optional<DatasetFormat> format = std::nullopt);

inline constexpr int kModelFormatVersion = 1;

struct ModelFile {
  ShapeletTransformer transformer;
  LossCurve curve;
  std::optional<TrainConfig> config;
  std::optional<LinearHead> head;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Training config document: TrainConfig keys plus an optional "groups"
/// array of {length, metric, count}.
struct TrainSettings {
  TrainConfig config;
  std::optional<std::vector<ShapeletGroup>> groups;
};
TrainSettings train_settings_from_json(const nlohmann::json& j);

/// Keys: seed, train_fraction, clusters, neighbors, quantile,
/// softmax_epochs, softmax_learning_rate, finetune_epochs,
/// finetune_batch_size, finetune_learning_rate, shapelet_learning_rate.
AnalyzeParams analyze_params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LossCurve& curve);
nlohmann::json to_json(const ShapeletGroup& g);
ShapeletGroup shapelet_group_from_json(const nlohmann::json& j);

std::string serialize_model(const ModelFile& model);
ModelFile parse_model(std::string_view text);
void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

/// Column names `s<id>_<metric>_<L>` in coordinate order.
std::vector<std::string> representation_columns(const ShapeletTransformer& f,
                                                const std::vector<Index>& ids);

struct RepresentationTable {
  std::vector<std::string> series_ids;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
};

enum class TableFormat { Csv, Jsonl };
TableFormat parse_table_format(const std::string& name);

std::string format_representation(const RepresentationTable& table, TableFormat format);
RepresentationTable parse_representation(std::string_view text, TableFormat format);
void export_representation(const RepresentationTable& table, const std::filesystem::path& path, TableFormat format);
/// Format from the extension (".csv" -> Csv, else Jsonl).
RepresentationTable read_representation(const std::filesystem::path& path);

/// Comma-separated shapelet ids, each checked against 0..repr_dim-1
/// (ContractError naming the valid range). Duplicates are rejected.
std::vector<Index> parse_id_list(std::string_view text, Index repr_dim);

nlohmann::json to_json(const MatchResult& m);
nlohmann::json to_json(const LinearHead& head);
/// {"task", "mode", "analyzer", "shapelets", "metrics", "outputs"}.
nlohmann::json to_json(const AnalysisResult& r);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace timecsl

#endif  // TIMECSL_DATAIO_HPP
