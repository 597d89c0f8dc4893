#include "timecsl/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace timecsl {

using nlohmann::json;

namespace {

struct Line {
  std::size_t number;
  std::string_view text;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t start = 0, number = 1;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back({number++, line});
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

// Trim, reporting how many leading characters were dropped.
std::string_view trim(std::string_view s, std::size_t* lead = nullptr) {
  std::size_t b = 0;
  while (b < s.size() && is_space(s[b])) ++b;
  std::size_t e = s.size();
  while (e > b && is_space(s[e - 1])) --e;
  if (lead) *lead = b;
  return s.substr(b, e - b);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::vector<Token> split_whitespace(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    out.push_back({s.substr(i, j - i), i + 1});
    i = j;
  }
  return out;
}

std::vector<Token> split_on(std::string_view s, char sep, std::size_t base_column) {
  std::vector<Token> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = s.find(sep, start);
    const std::size_t stop = end == std::string_view::npos ? s.size() : end;
    out.push_back({s.substr(start, stop - start), base_column + start});
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

bool parse_bool(const Token& t, std::size_t line, const std::string& directive) {
  const std::string v = lower(t.text);
  if (v == "true") return true;
  if (v == "false") return false;
  throw DataError(directive + " expects true or false, got '" + std::string(t.text) + "'", line, t.column);
}

Index parse_positive(const Token& t, std::size_t line, const std::string& directive) {
  Index v = 0;
  const auto* first = t.text.data();
  const auto* last = first + t.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || v < 1)
    throw DataError(directive + " expects a positive integer, got '" + std::string(t.text) + "'", line, t.column);
  return v;
}

double parse_value(std::string_view raw, std::size_t line, std::size_t column) {
  std::size_t lead = 0;
  const std::string_view tok = trim(raw, &lead);
  column += lead;
  if (tok.empty()) throw DataError("empty value", line, column);
  if (tok == "?") throw DataError("missing values ('?') are not supported", line, column);
  double v = 0.0;
  const char* first = tok.data();
  if (*first == '+') ++first;
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec == std::errc::result_out_of_range) throw DataError("value '" + std::string(tok) + "' is out of range", line, column);
  if (ec != std::errc() || ptr != last) throw DataError("non-numeric value '" + std::string(tok) + "'", line, column);
  if (!std::isfinite(v)) throw DataError("non-finite value '" + std::string(tok) + "'", line, column);
  return v;
}

// Byte offset -> (line, column), both 1-based.
std::pair<std::size_t, std::size_t> locate(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

TsFile parse_ts_file(std::string_view text) {
  TsHeader header;
  bool in_data = false;
  std::vector<std::string> seen;
  std::vector<TimeSeries> series;
  std::optional<Index> channels;
  const auto lines = split_lines(text);
  // End-of-input errors point at the last line with content.
  std::size_t end_line = 1;
  for (const auto& l : lines)
    if (!trim(l.text).empty()) end_line = l.number;

  for (const auto& [number, raw] : lines) {
    std::size_t lead = 0;
    const std::string_view line = trim(raw, &lead);
    if (line.empty() || line.front() == '#') continue;

    if (!in_data) {
      if (line.front() != '@')
        throw DataError("expected a header directive before @data, found '" + std::string(line.substr(0, 20)) + "'",
                        number, lead + 1);
      auto tokens = split_whitespace(line);
      for (auto& t : tokens) t.column += lead;
      const std::string directive = lower(tokens.front().text);
      if (directive != "@data" && std::find(seen.begin(), seen.end(), directive) != seen.end())
        throw DataError("duplicate directive " + std::string(tokens.front().text), number, tokens.front().column);
      seen.push_back(directive);
      auto need_value = [&](std::size_t count) {
        if (tokens.size() != count + 1)
          throw DataError(std::string(tokens.front().text) + " expects " + std::to_string(count) + " value(s)", number,
                          tokens.front().column);
      };

      if (directive == "@problemname") {
        if (tokens.size() < 2) throw DataError("@problemName needs a name", number, tokens.front().column);
        header.problem_name = std::string(trim(line.substr(tokens[1].column - 1 - lead)));
      } else if (directive == "@timestamps") {
        need_value(1);
        if (parse_bool(tokens[1], number, "@timeStamps"))
          throw DataError("@timeStamps true is not supported", number, tokens[1].column);
      } else if (directive == "@missing") {
        need_value(1);
        parse_bool(tokens[1], number, "@missing");
      } else if (directive == "@univariate") {
        need_value(1);
        header.univariate = parse_bool(tokens[1], number, "@univariate");
        if (*header.univariate && header.dimensions && *header.dimensions != 1)
          throw DataError("@univariate true conflicts with @dimension " + std::to_string(*header.dimensions), number,
                          tokens[1].column);
      } else if (directive == "@dimension" || directive == "@dimensions") {
        need_value(1);
        header.dimensions = parse_positive(tokens[1], number, "@dimension");
        if (header.univariate && *header.univariate && *header.dimensions != 1)
          throw DataError("@dimension " + std::to_string(*header.dimensions) + " conflicts with @univariate true",
                          number, tokens[1].column);
      } else if (directive == "@equallength") {
        need_value(1);
        header.equal_length = parse_bool(tokens[1], number, "@equalLength");
      } else if (directive == "@serieslength") {
        need_value(1);
        header.series_length = parse_positive(tokens[1], number, "@seriesLength");
      } else if (directive == "@classlabel") {
        if (tokens.size() < 2) throw DataError("@classLabel expects true or false", number, tokens.front().column);
        header.class_label = parse_bool(tokens[1], number, "@classLabel");
        if (!header.class_label && tokens.size() > 2)
          throw DataError("@classLabel false takes no labels", number, tokens[2].column);
        if (header.class_label && tokens.size() < 3)
          throw DataError("@classLabel true needs at least one label", number, tokens[1].column);
        for (std::size_t i = 2; i < tokens.size(); ++i) header.labels.emplace_back(tokens[i].text);
      } else if (directive == "@data") {
        if (tokens.size() != 1) throw DataError("@data takes no values", number, tokens[1].column);
        in_data = true;
        if (header.dimensions) channels = header.dimensions;
        else if (header.univariate && *header.univariate) channels = 1;
      } else {
        throw DataError("unknown directive " + std::string(tokens.front().text), number, tokens.front().column);
      }
      continue;
    }

    if (line.front() == '@')
      throw DataError("directive after @data: " + std::string(split_whitespace(line).front().text), number, lead + 1);

    auto fields = split_on(line, ':', lead + 1);
    std::optional<std::string> label;
    if (header.class_label) {
      if (fields.size() < 2) throw DataError("record has no class label", number, lead + 1 + line.size());
      std::size_t label_lead = 0;
      const std::string_view lab = trim(fields.back().text, &label_lead);
      if (lab.empty()) throw DataError("empty class label", number, fields.back().column + label_lead);
      if (std::find(header.labels.begin(), header.labels.end(), lab) == header.labels.end())
        throw DataError("unknown class label '" + std::string(lab) + "'", number, fields.back().column + label_lead);
      label = std::string(lab);
      fields.pop_back();
    }
    const auto found = static_cast<Index>(fields.size());
    if (channels && found != *channels)
      throw DataError("expected " + std::to_string(*channels) + " channels, found " + std::to_string(found), number,
                      lead + 1);
    if (!channels) channels = found;

    std::vector<std::vector<double>> values;
    for (const auto& field : fields) {
      std::vector<double> channel;
      for (const auto& tok : split_on(field.text, ',', field.column)) channel.push_back(parse_value(tok.text, number, tok.column));
      if (!values.empty() && channel.size() != values.front().size())
        throw DataError("channel " + std::to_string(values.size() + 1) + " has " + std::to_string(channel.size()) +
                            " values, channel 1 has " + std::to_string(values.front().size()),
                        number, field.column);
      values.push_back(std::move(channel));
    }
    const auto length = static_cast<Index>(values.front().size());
    if (header.equal_length.value_or(false) && header.series_length && length != *header.series_length)
      throw DataError("expected series length " + std::to_string(*header.series_length) + ", found " +
                          std::to_string(length),
                      number, lead + 1);
    Eigen::MatrixXd m(found, length);
    for (Index d = 0; d < found; ++d)
      for (Index t = 0; t < length; ++t) m(d, t) = values[static_cast<std::size_t>(d)][static_cast<std::size_t>(t)];
    series.emplace_back(std::to_string(series.size()), std::move(m), std::move(label));
  }

  if (!in_data) throw DataError("missing @data section", end_line, 1);
  if (series.empty()) throw DataError("empty dataset: no records after @data", end_line, 1);
  std::string name = header.problem_name.empty() ? "dataset" : header.problem_name;
  return {header, Dataset(std::move(name), std::move(series))};
}

Dataset parse_ts(std::string_view text) { return parse_ts_file(text).dataset; }

Dataset parse_jsonl(std::string_view text, const std::string& name) {
  std::vector<TimeSeries> series;
  for (const auto& [number, raw] : split_lines(text)) {
    if (trim(raw).empty()) continue;
    json obj;
    try {
      obj = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("invalid JSON: ") + e.what(), number, std::min(e.byte, raw.size() + 1));
    }
    if (!obj.is_object()) throw DataError("expected a JSON object", number, 1);
    if (!obj.contains("id") || !obj["id"].is_string()) throw DataError("missing string field \"id\"", number, 1);
    if (!obj.contains("values") || !obj["values"].is_array() || obj["values"].empty())
      throw DataError("field \"values\" must be a non-empty array of channels", number, 1);
    std::optional<std::string> label;
    if (obj.contains("label") && !obj["label"].is_null()) {
      if (!obj["label"].is_string()) throw DataError("field \"label\" must be a string", number, 1);
      label = obj["label"].get<std::string>();
    }
    const auto& chans = obj["values"];
    const std::size_t length = chans[0].is_array() ? chans[0].size() : 0;
    Eigen::MatrixXd m(static_cast<Index>(chans.size()), static_cast<Index>(length));
    for (std::size_t d = 0; d < chans.size(); ++d) {
      if (!chans[d].is_array() || chans[d].empty())
        throw DataError("channel " + std::to_string(d + 1) + " must be a non-empty array", number, 1);
      if (chans[d].size() != length)
        throw DataError("ragged channels: channel " + std::to_string(d + 1) + " has " + std::to_string(chans[d].size()) +
                            " values, channel 1 has " + std::to_string(length),
                        number, 1);
      for (std::size_t t = 0; t < length; ++t) {
        const auto& v = chans[d][t];
        if (!v.is_number()) throw DataError("non-numeric value in channel " + std::to_string(d + 1), number, 1);
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw DataError("non-finite value in channel " + std::to_string(d + 1), number, 1);
        m(static_cast<Index>(d), static_cast<Index>(t)) = x;
      }
    }
    try {
      series.emplace_back(obj["id"].get<std::string>(), std::move(m), std::move(label));
    } catch (const DataError& e) {
      throw DataError(e.what(), number, 1);
    }
  }
  if (series.empty()) throw DataError("empty dataset", 1, 1);
  return {name, std::move(series)};
}

Dataset read_jsonl(const std::filesystem::path& path) {
  return parse_jsonl(read_text_file(path), path.stem().string());
}

std::string format_jsonl(const Dataset& ds) {
  std::string out;
  for (const auto& s : ds.series()) {
    json obj;
    obj["id"] = s.id();
    if (s.label()) obj["label"] = *s.label();
    json chans = json::array();
    for (Index d = 0; d < s.channels(); ++d) {
      json row = json::array();
      for (Index t = 0; t < s.length(); ++t) row.push_back(s.values()(d, t));
      chans.push_back(std::move(row));
    }
    obj["values"] = std::move(chans);
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_jsonl(const Dataset& ds, const std::filesystem::path& path) { write_text_file(path, format_jsonl(ds)); }

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "ts") return DatasetFormat::Ts;
  if (name == "jsonl") return DatasetFormat::Jsonl;
  throw ConfigError("unknown dataset format '" + name + "' (expected ts or jsonl)");
}

Dataset read_dataset(const std::filesystem::path& path, std::optional<DatasetFormat> format) {
  const DatasetFormat fmt = format.value_or(path.extension() == ".ts" ? DatasetFormat::Ts : DatasetFormat::Jsonl);
  if (fmt == DatasetFormat::Ts) return parse_ts(read_text_file(path));
  return read_jsonl(path);
}

json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"temperature", cfg.temperature},
          {"alignment_weight", cfg.alignment_weight},
          {"crop_min_fraction", cfg.crop_min_fraction},
          {"jitter_sigma_fraction", cfg.jitter_sigma_fraction},
          {"scale_range", {cfg.scale_range[0], cfg.scale_range[1]}},
          {"seed", cfg.seed},
          {"validation_fraction", cfg.validation_fraction}};
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") cfg.epochs = value.get<int>();
      else if (key == "batch_size") cfg.batch_size = value.get<int>();
      else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
      else if (key == "temperature") cfg.temperature = value.get<double>();
      else if (key == "alignment_weight") cfg.alignment_weight = value.get<double>();
      else if (key == "crop_min_fraction") cfg.crop_min_fraction = value.get<double>();
      else if (key == "jitter_sigma_fraction") cfg.jitter_sigma_fraction = value.get<double>();
      else if (key == "scale_range") {
        if (!value.is_array() || value.size() != 2) throw ConfigError("scale_range must be [low, high]");
        cfg.scale_range = {value[0].get<double>(), value[1].get<double>()};
      } else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "validation_fraction") cfg.validation_fraction = value.get<double>();
      else throw ConfigError("unknown train config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid train config value: ") + e.what());
  }
  return cfg;
}

TrainSettings train_settings_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  TrainSettings out;
  json rest = j;
  if (rest.contains("groups")) {
    const json groups = rest["groups"];
    rest.erase("groups");
    if (!groups.is_array() || groups.empty()) throw ConfigError("groups must be a non-empty array");
    out.groups.emplace();
    for (const auto& g : groups) out.groups->push_back(shapelet_group_from_json(g));
  }
  out.config = train_config_from_json(rest);
  return out;
}

AnalyzeParams analyze_params_from_json(const json& j) {
  AnalyzeParams p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw ConfigError("analysis params must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") p.seed = value.get<std::uint64_t>();
      else if (key == "train_fraction") p.train_fraction = value.get<double>();
      else if (key == "clusters") p.clusters = value.get<Index>();
      else if (key == "neighbors") p.neighbors = value.get<Index>();
      else if (key == "quantile") p.quantile = value.get<double>();
      else if (key == "softmax_epochs") p.softmax.epochs = value.get<int>();
      else if (key == "softmax_learning_rate") p.softmax.learning_rate = value.get<double>();
      else if (key == "finetune_epochs") p.finetune.epochs = value.get<int>();
      else if (key == "finetune_batch_size") p.finetune.batch_size = value.get<int>();
      else if (key == "finetune_learning_rate") p.finetune.learning_rate = value.get<double>();
      else if (key == "shapelet_learning_rate") p.finetune.shapelet_learning_rate = value.get<double>();
      else throw ConfigError("unknown analysis parameter '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid analysis parameter: ") + e.what());
  }
  return p;
}

json to_json(const LossCurve& curve) {
  json arr = json::array();
  for (const auto& p : curve.points) {
    json o{{"step", p.step}, {"train_loss", p.train_loss}};
    if (p.validation_loss) o["validation_loss"] = *p.validation_loss;
    arr.push_back(std::move(o));
  }
  return arr;
}

json to_json(const ShapeletGroup& g) {
  return {{"length", g.length}, {"metric", std::string(to_string(g.metric))}, {"count", g.count}};
}

ShapeletGroup shapelet_group_from_json(const json& j) {
  try {
    return {j.at("length").get<Index>(), parse_metric(j.at("metric").get<std::string>()), j.at("count").get<Index>()};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid shapelet group: ") + e.what());
  }
}

namespace {

json matrix_rows(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const json& rows, Index expect_rows, Index expect_cols, const std::string& what) {
  if (!rows.is_array() || static_cast<Index>(rows.size()) != expect_rows)
    throw DataError(what + ": expected " + std::to_string(expect_rows) + " rows");
  Eigen::MatrixXd m(expect_rows, expect_cols);
  for (Index r = 0; r < expect_rows; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != expect_cols)
      throw DataError(what + ": row " + std::to_string(r) + " must have " + std::to_string(expect_cols) + " values");
    for (Index c = 0; c < expect_cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

std::string serialize_model(const ModelFile& model) {
  const auto& f = model.transformer;
  json doc;
  doc["format"] = "timecsl-model";
  doc["format_version"] = kModelFormatVersion;
  doc["channel_count"] = f.channel_count();
  json groups = json::array();
  for (const auto& g : f.groups()) groups.push_back(to_json(g));
  doc["groups"] = std::move(groups);
  json shapelets = json::array();
  for (Index id = 0; id < f.repr_dim(); ++id) shapelets.push_back(matrix_rows(f.values(id)));
  doc["shapelets"] = std::move(shapelets);
  doc["loss_curve"] = to_json(model.curve);
  json meta = json::object();
  if (model.config) meta["train_config"] = to_json(*model.config);
  if (!model.curve.empty()) {
    meta["final_train_loss"] = model.curve.points.back().train_loss;
    for (auto it = model.curve.points.rbegin(); it != model.curve.points.rend(); ++it)
      if (it->validation_loss) {
        meta["final_validation_loss"] = *it->validation_loss;
        break;
      }
  }
  doc["metadata"] = std::move(meta);
  if (model.head) doc["head"] = to_json(*model.head);
  return doc.dump(1) + "\n";
}

ModelFile parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = locate(text, e.byte == 0 ? 0 : e.byte - 1);
    throw DataError(std::string("malformed model file: ") + e.what(), line, col);
  }
  try {
    if (!doc.is_object() || doc.value("format", std::string()) != "timecsl-model")
      throw DataError("not a timecsl model file (missing \"format\": \"timecsl-model\")");
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer())
      throw DataError("model file has no integer format_version");
    const int version = doc["format_version"].get<int>();
    if (version != kModelFormatVersion)
      throw DataError("unsupported model format_version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
    std::vector<ShapeletGroup> groups;
    for (const auto& g : doc.at("groups")) {
      try {
        groups.push_back(shapelet_group_from_json(g));
      } catch (const ConfigError& e) {
        throw DataError(e.what());
      }
    }
    const Index channels = doc.at("channel_count").get<Index>();
    ShapeletTransformer f = [&] {
      try {
        return ShapeletTransformer(channels, std::move(groups));
      } catch (const ConfigError& e) {
        throw DataError(std::string("invalid model configuration: ") + e.what());
      }
    }();
    const auto& shapelets = doc.at("shapelets");
    if (!shapelets.is_array() || static_cast<Index>(shapelets.size()) != f.repr_dim())
      throw DataError("model declares " + std::to_string(f.repr_dim()) + " shapelets but stores " +
                      std::to_string(shapelets.size()));
    for (Index id = 0; id < f.repr_dim(); ++id)
      f.set_values(id, matrix_from_rows(shapelets[static_cast<std::size_t>(id)], channels, f.group_for(id).length,
                                        "shapelet " + std::to_string(id)));
    ModelFile model{std::move(f), {}, std::nullopt, std::nullopt};
    for (const auto& p : doc.at("loss_curve")) {
      LossPoint lp{p.at("step").get<long>(), p.at("train_loss").get<double>(), std::nullopt};
      if (p.contains("validation_loss")) lp.validation_loss = p["validation_loss"].get<double>();
      model.curve.points.push_back(lp);
    }
    if (doc.contains("metadata") && doc["metadata"].contains("train_config")) {
      try {
        model.config = train_config_from_json(doc["metadata"]["train_config"]);
      } catch (const ConfigError& e) {
        throw DataError(e.what());
      }
    }
    if (doc.contains("head")) {
      const auto& h = doc["head"];
      auto classes = h.at("classes").get<std::vector<std::string>>();
      const auto c = static_cast<Index>(classes.size());
      const auto& w = h.at("weights");
      const Index m = w.empty() ? 0 : static_cast<Index>(w[0].size());
      LinearHead head{matrix_from_rows(w, c, m, "head weights"), Eigen::VectorXd(c), std::move(classes)};
      const auto bias = h.at("bias").get<std::vector<double>>();
      if (static_cast<Index>(bias.size()) != c) throw DataError("head bias must have one value per class");
      for (Index k = 0; k < c; ++k) head.bias[k] = bias[static_cast<std::size_t>(k)];
      model.head = std::move(head);
    }
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const ContractError& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  write_text_file(path, serialize_model(model));
}

ModelFile load_model(const std::filesystem::path& path) { return parse_model(read_text_file(path)); }

std::vector<std::string> representation_columns(const ShapeletTransformer& f, const std::vector<Index>& ids) {
  std::vector<std::string> cols;
  for (auto id : ids) {
    const auto& g = f.group_for(id);
    cols.push_back("s" + std::to_string(id) + "_" + std::string(to_string(g.metric)) + "_" + std::to_string(g.length));
  }
  return cols;
}

TableFormat parse_table_format(const std::string& name) {
  if (name == "csv") return TableFormat::Csv;
  if (name == "jsonl") return TableFormat::Jsonl;
  throw ConfigError("unknown representation format '" + name + "' (expected csv or jsonl)");
}

std::vector<Index> parse_id_list(std::string_view text, Index repr_dim) {
  std::vector<Index> ids;
  const std::string range = repr_dim > 0 ? "0.." + std::to_string(repr_dim - 1) : "none";
  for (const auto& tok : split_on(text, ',', 1)) {
    const std::string_view t = trim(tok.text);
    Index id = -1;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), id);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
      throw ContractError("invalid shapelet id '" + std::string(t) + "'; valid ids are " + range);
    if (id < 0 || id >= repr_dim)
      throw ContractError("unknown shapelet id " + std::to_string(id) + "; valid ids are " + range);
    if (std::find(ids.begin(), ids.end(), id) != ids.end())
      throw ContractError("shapelet id " + std::to_string(id) + " listed twice");
    ids.push_back(id);
  }
  return ids;
}

json to_json(const MatchResult& m) {
  return {{"shapelet_id", m.shapelet_id},
          {"series_id", m.series_id},
          {"metric", std::string(to_string(m.metric))},
          {"feature_value", m.feature_value},
          {"window_start", m.window_start},
          {"window_values", matrix_rows(m.window_values)}};
}

json to_json(const LinearHead& head) {
  return {{"classes", head.classes},
          {"weights", matrix_rows(head.weights)},
          {"bias", std::vector<double>(head.bias.data(), head.bias.data() + head.bias.size())}};
}

json to_json(const AnalysisResult& r) {
  json outputs = json::array();
  for (const auto& o : r.outputs) {
    json row{{"series_id", o.series_id}, {"output", o.output}};
    if (o.score) row["score"] = *o.score;
    if (!o.split.empty()) row["split"] = o.split;
    outputs.push_back(std::move(row));
  }
  json metrics = json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = v;
  return {{"task", to_string(r.task)},
          {"mode", to_string(r.mode)},
          {"analyzer", r.analyzer},
          {"shapelets", r.shapelets},
          {"metrics", std::move(metrics)},
          {"outputs", std::move(outputs)}};
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_representation(const RepresentationTable& table, TableFormat format) {
  if (static_cast<Index>(table.series_ids.size()) != table.values.rows() ||
      static_cast<Index>(table.columns.size()) != table.values.cols())
    throw ContractError("representation table shape does not match its ids and columns");
  std::string out;
  if (format == TableFormat::Csv) {
    out += "series_id";
    for (const auto& c : table.columns) out += "," + c;
    out += '\n';
    for (Index r = 0; r < table.values.rows(); ++r) {
      out += table.series_ids[static_cast<std::size_t>(r)];
      for (Index c = 0; c < table.values.cols(); ++c) out += "," + format_double(table.values(r, c));
      out += '\n';
    }
    return out;
  }
  out += json{{"columns", table.columns}}.dump() + "\n";
  for (Index r = 0; r < table.values.rows(); ++r) {
    json row{{"series_id", table.series_ids[static_cast<std::size_t>(r)]}};
    row["values"] = std::vector<double>(table.values.row(r).begin(), table.values.row(r).end());
    out += row.dump() + "\n";
  }
  return out;
}

RepresentationTable parse_representation(std::string_view text, TableFormat format) {
  RepresentationTable table;
  std::vector<std::vector<double>> rows;
  bool have_header = false;
  for (const auto& [number, raw] : split_lines(text)) {
    if (trim(raw).empty()) continue;
    if (format == TableFormat::Csv) {
      const auto cells = split_on(raw, ',', 1);
      if (!have_header) {
        if (cells.empty() || trim(cells[0].text) != "series_id")
          throw DataError("CSV header must start with series_id", number, 1);
        for (std::size_t i = 1; i < cells.size(); ++i) table.columns.emplace_back(trim(cells[i].text));
        have_header = true;
        continue;
      }
      if (cells.size() != table.columns.size() + 1)
        throw DataError("expected " + std::to_string(table.columns.size() + 1) + " cells, found " +
                            std::to_string(cells.size()),
                        number, 1);
      table.series_ids.emplace_back(trim(cells[0].text));
      std::vector<double> row;
      for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(parse_value(cells[i].text, number, cells[i].column));
      rows.push_back(std::move(row));
    } else {
      json obj;
      try {
        obj = json::parse(raw);
      } catch (const json::parse_error& e) {
        throw DataError(std::string("invalid JSON: ") + e.what(), number, std::min(e.byte, raw.size() + 1));
      }
      try {
        if (!have_header) {
          table.columns = obj.at("columns").get<std::vector<std::string>>();
          have_header = true;
          continue;
        }
        table.series_ids.push_back(obj.at("series_id").get<std::string>());
        auto row = obj.at("values").get<std::vector<double>>();
        if (row.size() != table.columns.size())
          throw DataError("expected " + std::to_string(table.columns.size()) + " values, found " +
                              std::to_string(row.size()),
                          number, 1);
        rows.push_back(std::move(row));
      } catch (const json::exception& e) {
        throw DataError(std::string("invalid representation row: ") + e.what(), number, 1);
      }
    }
  }
  if (!have_header) throw DataError("representation file has no header");
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return table;
}

void export_representation(const RepresentationTable& table, const std::filesystem::path& path, TableFormat format) {
  write_text_file(path, format_representation(table, format));
}

RepresentationTable read_representation(const std::filesystem::path& path) {
  return parse_representation(read_text_file(path), path.extension() == ".csv" ? TableFormat::Csv : TableFormat::Jsonl);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace timecsl
