#include <csignal>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>

#include "timecsl/analyzers.hpp"
#include "timecsl/dataio.hpp"
#include "timecsl/embed2d.hpp"
#include "timecsl/service.hpp"
#include "timecsl/train.hpp"
#include "timecsl/transform.hpp"

using namespace timecsl;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kTraining = 4, kInternal = 5 };

// Usage errors are what the caller can fix on the command line.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error("usage_error", what) {}
};

int exit_code(const Error& e) {
  const auto& c = e.code();
  if (c == "config_error" || c == "contract_error" || c == "usage_error") return kUsage;
  if (c == "data_error" || c == "length_error") return kData;
  if (c == "training_error") return kTraining;
  return kInternal;
}

void emit(const json& doc) {
  std::cout << doc.dump() << '\n';
  std::cout.flush();
}

std::string num(double v) { return json(v).dump(); }

void print_stats(const Dataset& ds) {
  std::cout << "N=" << ds.size() << " D=" << ds.channel_count() << " T(min/max)=" << ds.min_length() << '/'
            << ds.max_length() << '\n';
}

std::optional<DatasetFormat> format_flag(const std::string& f) {
  if (f.empty()) return std::nullopt;
  return parse_dataset_format(f);
}

std::optional<std::vector<Index>> shapelet_flag(const std::string& text, Index repr_dim) {
  if (text.empty() || text == "all") return std::nullopt;
  return parse_id_list(text, repr_dim);
}

struct Options {
  std::string input, format, out, data, config, model, shapelets, task = "classify", mode = "freeze", analyzer;
  std::string series, repr, host = "127.0.0.1";
  std::optional<std::uint64_t> seed;
  std::optional<double> labels_fraction, perplexity;
  std::optional<Index> clusters, neighbors;
  std::optional<double> quantile;
  std::optional<int> iterations;
  Index shapelet = -1;
  int port = 8080;
  bool json_out = false;
  bool quiet = false;
};

int cmd_ingest(const Options& o) {
  const Dataset ds = read_dataset(o.input, format_flag(o.format));
  write_jsonl(ds, o.out);
  print_stats(ds);
  return kOk;
}

int cmd_train(const Options& o) {
  const Dataset ds = read_dataset(o.data);
  TrainSettings settings;
  if (!o.config.empty()) {
    json doc;
    try {
      doc = json::parse(read_text_file(o.config));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    settings = train_settings_from_json(doc);
  }
  if (o.seed) settings.config.seed = *o.seed;
  settings.config.validate();
  const auto groups = settings.groups ? *settings.groups : default_groups(ds);
  const ShapeletTransformer init = init_shapelets(ds, new_transformer(ds.channel_count(), groups), settings.config.seed);
  if (init.max_length() > ds.min_length())
    throw LengthError("longest shapelet (" + std::to_string(init.max_length()) + ") exceeds the shortest series (" +
                      std::to_string(ds.min_length()) + ")");
  TrainCallbacks cb;
  if (!o.quiet)
    cb.on_step = [](const LossPoint& p) { std::cerr << "step=" << p.step << " loss=" << num(p.train_loss) << '\n'; };
  TrainResult r = train(ds, init, settings.config, cb);
  save_model({r.transformer, r.curve, settings.config, std::nullopt}, o.out);
  json summary{{"model", o.out}, {"repr_dim", r.transformer.repr_dim()}, {"steps", r.curve.size()}};
  if (!r.curve.empty()) summary["final_train_loss"] = r.curve.points.back().train_loss;
  emit(summary);
  return kOk;
}

int cmd_transform(const Options& o) {
  const Dataset ds = read_dataset(o.data);
  const ModelFile model = load_model(o.model);
  const auto& f = model.transformer;
  const auto ids = shapelet_flag(o.shapelets, f.repr_dim());
  std::vector<Index> cols(static_cast<std::size_t>(f.repr_dim()));
  std::iota(cols.begin(), cols.end(), Index{0});
  if (ids) cols = *ids;
  RepresentationTable table;
  for (const auto& x : ds.series()) table.series_ids.push_back(x.id());
  table.columns = representation_columns(f, cols);
  table.values = select_columns(transform_dataset(ds, f), cols);
  const TableFormat fmt = !o.format.empty() ? parse_table_format(o.format)
                          : std::filesystem::path(o.out).extension() == ".jsonl" ? TableFormat::Jsonl
                                                                                  : TableFormat::Csv;
  export_representation(table, o.out, fmt);
  emit({{"out", o.out}, {"rows", table.values.rows()}, {"columns", table.values.cols()}});
  return kOk;
}

int cmd_analyze(const Options& o) {
  const Dataset ds = read_dataset(o.data);
  const ModelFile model = load_model(o.model);
  const Task task = parse_task(o.task);
  const Mode mode = parse_mode(o.mode);
  if (mode == Mode::FineTune && task != Task::Classification)
    throw UsageError("--mode finetune supports only --task classify");
  AnalyzeParams params;
  if (o.seed) params.seed = *o.seed;
  if (o.labels_fraction) {
    if (!(*o.labels_fraction > 0.0 && *o.labels_fraction < 1.0))
      throw UsageError("--labels-fraction must be in (0, 1)");
    params.train_fraction = *o.labels_fraction;
  }
  if (o.clusters) params.clusters = *o.clusters;
  if (o.neighbors) params.neighbors = *o.neighbors;
  if (o.quantile) params.quantile = *o.quantile;
  const auto ids = shapelet_flag(o.shapelets, model.transformer.repr_dim());
  const AnalysisResult r = analyze(task, mode, o.analyzer, ds, model.transformer, ids, params);

  json out = json::object();
  for (const auto& [k, v] : r.metrics) out[k] = v;
  const json full = to_json(r);
  out["task"] = full["task"];
  out["mode"] = full["mode"];
  out["analyzer"] = full["analyzer"];
  out["shapelets"] = full["shapelets"];
  out["outputs"] = full["outputs"];
  if (r.finetuned) {
    ModelFile tuned{*r.finetuned, model.curve, model.config, std::nullopt};
    if (r.head) tuned.head = widen_head(*r.head, r.shapelets, r.finetuned->repr_dim());
    const std::string path = o.model + ".finetuned";
    save_model(tuned, path);
    out["finetuned_model"] = path;
  }
  std::cerr << to_string(task) << " (" << to_string(mode) << ", " << r.analyzer << ", " << r.shapelets.size()
            << " shapelets):";
  for (const auto& [k, v] : r.metrics) std::cerr << ' ' << k << '=' << num(v);
  std::cerr << '\n';
  emit(out);
  return kOk;
}

int cmd_match(const Options& o) {
  const Dataset ds = read_dataset(o.data);
  const ModelFile model = load_model(o.model);
  const auto& f = model.transformer;
  const auto idx = ds.find(o.series);
  if (!idx) throw UsageError("unknown series id '" + o.series + "'");
  if (o.shapelet < 0 || o.shapelet >= f.repr_dim())
    throw UsageError("unknown shapelet id " + std::to_string(o.shapelet) + "; valid ids are 0.." +
                     std::to_string(f.repr_dim() - 1));
  const MatchResult m = match(ds[*idx], f, o.shapelet);
  if (o.json_out) {
    emit(to_json(m));
  } else {
    std::cout << "shapelet=" << m.shapelet_id << " series=" << m.series_id << " metric=" << to_string(m.metric)
              << " value=" << num(m.feature_value) << " start=" << m.window_start << '\n';
  }
  return kOk;
}

int cmd_tsne(const Options& o) {
  const RepresentationTable in = read_representation(o.repr);
  TsneConfig cfg;
  if (o.perplexity) cfg.perplexity = *o.perplexity;
  if (o.seed) cfg.seed = *o.seed;
  if (o.iterations) cfg.iterations = *o.iterations;
  if (in.values.rows() > 2) effective_perplexity(cfg, in.values.rows());
  const TsneResult r = tsne(in.values, cfg);
  RepresentationTable out{in.series_ids, {"x", "y"}, r.coords};
  const auto fmt = std::filesystem::path(o.out).extension() == ".jsonl" ? TableFormat::Jsonl : TableFormat::Csv;
  export_representation(out, o.out, fmt);
  std::cerr << "t-SNE: N=" << in.values.rows() << " perplexity=" << num(r.perplexity) << " kl=" << num(r.kl_final())
            << '\n';
  emit({{"out", o.out}, {"rows", r.coords.rows()}, {"perplexity", r.perplexity}, {"kl_divergence", r.kl_final()}});
  return kOk;
}

int cmd_serve(const Options& o) {
  // Route SIGINT/SIGTERM to a waiter thread instead of async handlers.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  const Dataset ds = read_dataset(o.data);
  ModelFile model = load_model(o.model);
  ServiceOptions opts;
  opts.host = o.host;
  opts.port = o.port;
  opts.model_path = o.model;
  Service service(ds, std::move(model), opts);
  const int port = service.bind();
  std::cerr << "serving " << ds.name() << " on http://" << o.host << ':' << port << '\n';
  emit({{"port", port}, {"host", o.host}});

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    std::cerr << "shutting down\n";
    service.stop();
  });
  service.listen();
  // listen() can also return on its own (e.g. socket failure); wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive shapelet learning for time series"};
  app.require_subcommand(1);
  Options o;

  auto* ingest = app.add_subcommand("ingest", "Convert a .ts or JSONL dataset to native JSONL");
  ingest->add_option("--input", o.input, "Input dataset")->required();
  ingest->add_option("--format", o.format, "Input format (ts|jsonl); default from extension");
  ingest->add_option("--out", o.out, "Output JSONL path")->required();

  auto* train_cmd = app.add_subcommand("train", "Learn shapelets by contrastive training");
  train_cmd->add_option("--data", o.data, "Dataset")->required();
  train_cmd->add_option("--config", o.config, "Training config (JSON)");
  train_cmd->add_option("--out", o.out, "Model output path")->required();
  train_cmd->add_option("--seed", o.seed, "Random seed (overrides config)");
  train_cmd->add_flag("--quiet", o.quiet, "No progress lines");

  auto* transform_cmd = app.add_subcommand("transform", "Export shapelet features");
  transform_cmd->add_option("--data", o.data, "Dataset")->required();
  transform_cmd->add_option("--model", o.model, "Model file")->required();
  transform_cmd->add_option("--out", o.out, "Output table")->required();
  transform_cmd->add_option("--format", o.format, "csv|jsonl; default from extension");
  transform_cmd->add_option("--shapelets", o.shapelets, "Comma-separated shapelet ids");

  auto* analyze_cmd = app.add_subcommand("analyze", "Run an analyzer on the representation");
  analyze_cmd->add_option("--task", o.task, "classify|cluster|anomaly")->required();
  analyze_cmd->add_option("--mode", o.mode, "freeze|finetune");
  analyze_cmd->add_option("--analyzer", o.analyzer, "Analyzer name");
  analyze_cmd->add_option("--data", o.data, "Dataset")->required();
  analyze_cmd->add_option("--model", o.model, "Model file")->required();
  analyze_cmd->add_option("--shapelets", o.shapelets, "Comma-separated shapelet ids");
  analyze_cmd->add_option("--labels-fraction", o.labels_fraction, "Labeled share used for fitting");
  analyze_cmd->add_option("--seed", o.seed, "Random seed");
  analyze_cmd->add_option("--clusters", o.clusters, "Number of clusters");
  analyze_cmd->add_option("--neighbors", o.neighbors, "k for kNN anomaly scores");
  analyze_cmd->add_option("--quantile", o.quantile, "Anomaly threshold quantile");

  auto* match_cmd = app.add_subcommand("match", "Align a shapelet with its best window");
  match_cmd->add_option("--data", o.data, "Dataset")->required();
  match_cmd->add_option("--model", o.model, "Model file")->required();
  match_cmd->add_option("--series", o.series, "Series id")->required();
  match_cmd->add_option("--shapelet", o.shapelet, "Shapelet id")->required();
  match_cmd->add_flag("--json", o.json_out, "Emit a JSON object");

  auto* tsne_cmd = app.add_subcommand("tsne", "Embed a representation table in 2-D");
  tsne_cmd->add_option("--repr", o.repr, "Representation table (csv|jsonl)")->required();
  tsne_cmd->add_option("--out", o.out, "Output coordinates")->required();
  tsne_cmd->add_option("--perplexity", o.perplexity, "Perplexity");
  tsne_cmd->add_option("--seed", o.seed, "Random seed");
  tsne_cmd->add_option("--iterations", o.iterations, "Gradient steps");

  auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP API");
  serve_cmd->add_option("--model", o.model, "Model file")->required();
  serve_cmd->add_option("--data", o.data, "Dataset")->required();
  serve_cmd->add_option("--port", o.port, "Port (0 = ephemeral)");
  serve_cmd->add_option("--host", o.host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest) return cmd_ingest(o);
    if (*train_cmd) return cmd_train(o);
    if (*transform_cmd) return cmd_transform(o);
    if (*analyze_cmd) return cmd_analyze(o);
    if (*match_cmd) return cmd_match(o);
    if (*tsne_cmd) return cmd_tsne(o);
    if (*serve_cmd) return cmd_serve(o);
  } catch (const TrainingError& e) {
    std::cerr << "error: training failed at step=" << e.step() << ": " << e.what() << '\n';
    return kTraining;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
