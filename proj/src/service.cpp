#include "timecsl/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include <httplib.h>

#include "timecsl/analyzers.hpp"
#include "timecsl/embed2d.hpp"
#include "timecsl/train.hpp"
#include "timecsl/transform.hpp"

namespace timecsl {

using nlohmann::json;

namespace {

struct Snapshot {
  std::uint64_t generation = 0;
  ModelFile model;
  std::optional<Eigen::MatrixXd> reprs;  // absent when some series is too short
  std::string reprs_error;
};

// Thrown by handlers for plain HTTP failures that have no library error.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void not_found(const std::string& what) { throw HttpError{404, "not_found", what}; }
[[noreturn]] void bad_request(const std::string& what) { throw HttpError{400, "bad_request", what}; }

int status_for(const Error& e) {
  if (e.code() == "config_error" || e.code() == "data_error") return 400;
  if (e.code() == "contract_error" || e.code() == "length_error") return 422;
  return 500;
}

json error_body(const std::string& message, const std::string& code) { return {{"error", message}, {"code", code}}; }

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json body = json::parse(req.body);
    if (!body.is_object()) bad_request("request body must be a JSON object");
    return body;
  } catch (const json::parse_error& e) {
    bad_request(std::string("invalid JSON body: ") + e.what());
  }
}

std::optional<std::vector<Index>> ids_from_json(const json& body, const char* key, Index repr_dim) {
  if (!body.contains(key) || body[key].is_null()) return std::nullopt;
  const auto& v = body[key];
  if (v.is_string()) return parse_id_list(v.get<std::string>(), repr_dim);
  if (!v.is_array()) bad_request(std::string(key) + " must be an array of shapelet ids");
  std::string joined;
  for (const auto& x : v) {
    if (!x.is_number_integer()) bad_request(std::string(key) + " must contain integers");
    if (!joined.empty()) joined += ',';
    joined += std::to_string(x.get<long long>());
  }
  if (joined.empty()) return std::nullopt;
  return parse_id_list(joined, repr_dim);
}

json series_summary(const TimeSeries& s) {
  json o{{"id", s.id()}, {"length", s.length()}};
  o["label"] = s.label() ? json(*s.label()) : json(nullptr);
  return o;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

std::vector<Index> all_ids(Index m) {
  std::vector<Index> ids(static_cast<std::size_t>(m));
  std::iota(ids.begin(), ids.end(), Index{0});
  return ids;
}

enum class JobStatus { Pending, Running, Done, Failed };

std::string status_name(JobStatus s) {
  switch (s) {
    case JobStatus::Pending: return "pending";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
  }
  return "failed";
}

struct Job {
  std::string id;
  std::string kind;
  mutable std::mutex mu;
  JobStatus status = JobStatus::Pending;
  double progress = 0.0;
  json result;
  json error;
  LossCurve curve;

  bool active() const {
    std::lock_guard lock(mu);
    return status == JobStatus::Pending || status == JobStatus::Running;
  }

  json to_json() const {
    std::lock_guard lock(mu);
    json o{{"job_id", id}, {"kind", kind}, {"status", status_name(status)}, {"progress", progress}};
    if (status == JobStatus::Done) o["result"] = result;
    if (status == JobStatus::Failed) o["error"] = error;
    if (kind == "train") o["loss_curve"] = timecsl::to_json(curve);
    return o;
  }
};

}  // namespace

struct Service::Impl {
  Dataset dataset;
  ServiceOptions options;
  httplib::Server server;
  int bound_port = -1;

  mutable std::mutex snap_mu;
  std::shared_ptr<const Snapshot> snap;
  std::uint64_t next_generation = 1;

  std::mutex jobs_mu;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::vector<std::thread> workers;
  std::uint64_t job_counter = 0;
  std::string last_train_job;
  std::atomic<bool> stopping{false};
  std::mutex listen_mu;
  bool listening = false;

  Impl(Dataset ds, ModelFile model, ServiceOptions opts) : dataset(std::move(ds)), options(std::move(opts)) {
    publish(std::move(model));
    routes();
  }

  std::shared_ptr<const Snapshot> current() const {
    std::lock_guard lock(snap_mu);
    return snap;
  }

  void publish(ModelFile model) {
    auto s = std::make_shared<Snapshot>(Snapshot{0, std::move(model), std::nullopt, {}});
    try {
      s->reprs = transform_dataset(dataset, s->model.transformer);
    } catch (const Error& e) {
      s->reprs_error = e.what();
    }
    std::lock_guard lock(snap_mu);
    s->generation = next_generation++;
    snap = std::move(s);
  }

  const TimeSeries& find_series(const std::string& id) const {
    const auto idx = dataset.find(id);
    if (!idx) not_found("unknown series '" + id + "'");
    return dataset[*idx];
  }

  const Eigen::MatrixXd& reprs_of(const Snapshot& s) const {
    if (!s.reprs) throw LengthError(s.reprs_error);
    return *s.reprs;
  }

  // Registers a job and runs `work` on a worker thread. `exclusive` jobs
  // refuse to start while another exclusive job is active.
  std::shared_ptr<Job> launch(const std::string& kind, bool exclusive, std::function<json(Job&)> work) {
    auto job = std::make_shared<Job>();
    job->kind = kind;
    {
      std::lock_guard lock(jobs_mu);
      if (stopping) throw HttpError{503, "shutting_down", "service is shutting down"};
      if (exclusive)
        for (const auto& [id, j] : jobs)
          if ((j->kind == "train" || j->kind == "finetune") && j->active())
            throw HttpError{409, "busy", "a " + j->kind + " job (" + id + ") is already running"};
      job->id = "job-" + std::to_string(++job_counter);
      jobs[job->id] = job;
      if (kind == "train") last_train_job = job->id;
      workers.emplace_back([job, work = std::move(work)] {
        {
          std::lock_guard lock(job->mu);
          job->status = JobStatus::Running;
        }
        json result, error;
        bool ok = false;
        try {
          result = work(*job);
          ok = true;
        } catch (const TrainingError& e) {
          error = error_body(e.what(), e.code());
          error["step"] = e.step();
        } catch (const Error& e) {
          error = error_body(e.what(), e.code());
        } catch (const HttpError& e) {
          error = error_body(e.message, e.code);
        } catch (const std::exception& e) {
          error = error_body(e.what(), "internal_error");
        }
        std::lock_guard lock(job->mu);
        if (ok) {
          job->result = std::move(result);
          job->progress = 1.0;
          job->status = JobStatus::Done;
        } else {
          job->error = std::move(error);
          job->status = JobStatus::Failed;
        }
      });
    }
    return job;
  }

  void routes() {
    auto& s = server;
    s.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
    s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const HttpError& e) {
        send(res, e.status, error_body(e.message, e.code));
      } catch (const Error& e) {
        send(res, status_for(e), error_body(e.what(), e.code()));
      } catch (const std::exception& e) {
        send(res, 500, error_body(e.what(), "internal_error"));
      } catch (...) {
        send(res, 500, error_body("unknown failure", "internal_error"));
      }
    });
    s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.body.empty()) {
        const std::string code = res.status == 404 ? "not_found" : "http_" + std::to_string(res.status);
        send(res, res.status, error_body("no route for " + req.method + " " + req.path, code));
      }
    });

    s.Get("/api/datasets", [this](const httplib::Request&, httplib::Response& res) {
      send(res, 200,
           {{"datasets",
             json::array({{{"name", dataset.name()},
                           {"n", dataset.size()},
                           {"d", dataset.channel_count()},
                           {"length_min", dataset.min_length()},
                           {"length_max", dataset.max_length()},
                           {"labeled", dataset.all_labeled()}}})}});
    });

    s.Get(R"(/api/datasets/([^/]+)/series)", [this](const httplib::Request& req, httplib::Response& res) {
      if (req.matches[1] != dataset.name()) not_found("unknown dataset '" + std::string(req.matches[1]) + "'");
      json items = json::array();
      for (const auto& x : dataset.series()) items.push_back(series_summary(x));
      send(res, 200, {{"name", dataset.name()}, {"series", std::move(items)}});
    });

    s.Get(R"(/api/datasets/([^/]+)/series/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      if (req.matches[1] != dataset.name()) not_found("unknown dataset '" + std::string(req.matches[1]) + "'");
      const auto& x = find_series(req.matches[2]);
      json o = series_summary(x);
      o["channels"] = x.channels();
      o["values"] = matrix_json(x.values());
      send(res, 200, o);
    });

    s.Get("/api/model/shapelets", [this](const httplib::Request& req, httplib::Response& res) {
      const auto snapshot = current();
      const auto& f = snapshot->model.transformer;
      std::optional<Index> only;
      if (req.has_param("group")) only = parse_group(f, req.get_param_value("group"));
      json groups = json::array();
      for (Index g = 0; g < static_cast<Index>(f.groups().size()); ++g) {
        json o = to_json(f.groups()[static_cast<std::size_t>(g)]);
        o["index"] = g;
        o["first_id"] = f.group_offset(g);
        groups.push_back(std::move(o));
      }
      json items = json::array();
      for (Index id = 0; id < f.repr_dim(); ++id) {
        if (only && f.group_of(id) != *only) continue;
        const auto& g = f.group_for(id);
        items.push_back({{"id", id},
                         {"group", f.group_of(id)},
                         {"length", g.length},
                         {"metric", std::string(to_string(g.metric))},
                         {"values", matrix_json(f.values(id))}});
      }
      send(res, 200,
           {{"snapshot", snapshot->generation},
            {"channel_count", f.channel_count()},
            {"groups", std::move(groups)},
            {"shapelets", std::move(items)}});
    });

    s.Post("/api/match", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      if (!body.contains("series_id") || !body["series_id"].is_string()) bad_request("series_id (string) is required");
      if (!body.contains("shapelet_id") || !body["shapelet_id"].is_number_integer())
        bad_request("shapelet_id (integer) is required");
      const auto snapshot = current();
      const auto& f = snapshot->model.transformer;
      const auto& x = find_series(body["series_id"].get<std::string>());
      const Index id = body["shapelet_id"].get<Index>();
      if (id < 0 || id >= f.repr_dim())
        not_found("unknown shapelet id " + std::to_string(id) + "; valid ids are 0.." + std::to_string(f.repr_dim() - 1));
      json o = to_json(match(x, f, id));
      o["length"] = f.group_for(id).length;
      o["snapshot"] = snapshot->generation;
      send(res, 200, o);
    });

    s.Get("/api/representation", [this](const httplib::Request& req, httplib::Response& res) {
      const auto snapshot = current();
      const auto& f = snapshot->model.transformer;
      std::vector<Index> ids = all_ids(f.repr_dim());
      if (req.has_param("shapelets") && !req.get_param_value("shapelets").empty())
        ids = parse_id_list(req.get_param_value("shapelets"), f.repr_dim());
      const Eigen::MatrixXd table = select_columns(reprs_of(*snapshot), ids);

      std::vector<std::size_t> order(dataset.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      const std::string direction = req.has_param("order") ? req.get_param_value("order") : "asc";
      if (direction != "asc" && direction != "desc") bad_request("order must be asc or desc");
      if (req.has_param("sort_by")) {
        const auto key = parse_id_list(req.get_param_value("sort_by"), f.repr_dim());
        if (key.size() != 1) bad_request("sort_by takes one shapelet id");
        const auto pos = std::find(ids.begin(), ids.end(), key.front());
        if (pos == ids.end()) bad_request("sort_by shapelet " + std::to_string(key.front()) + " is not among the columns");
        const Index col = pos - ids.begin();
        const bool desc = direction == "desc";
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          const double va = table(static_cast<Index>(a), col), vb = table(static_cast<Index>(b), col);
          if (va != vb) return desc ? va > vb : va < vb;
          return dataset[a].id() < dataset[b].id();
        });
      }
      json columns = json::array();
      const auto names = representation_columns(f, ids);
      for (std::size_t k = 0; k < ids.size(); ++k) {
        const auto& g = f.group_for(ids[k]);
        columns.push_back({{"shapelet_id", ids[k]},
                           {"name", names[k]},
                           {"length", g.length},
                           {"metric", std::string(to_string(g.metric))}});
      }
      json rows = json::array();
      for (auto r : order) {
        const auto row = table.row(static_cast<Index>(r));
        rows.push_back({{"series_id", dataset[r].id()}, {"values", std::vector<double>(row.begin(), row.end())}});
      }
      send(res, 200, {{"snapshot", snapshot->generation}, {"columns", std::move(columns)}, {"rows", std::move(rows)}});
    });

    s.Post("/api/tsne", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const auto snapshot = current();
      const auto ids = ids_from_json(body, "shapelets", snapshot->model.transformer.repr_dim());
      TsneConfig cfg;
      cfg.iterations = options.tsne_iterations;
      try {
        if (body.contains("perplexity") && !body["perplexity"].is_null()) cfg.perplexity = body["perplexity"].get<double>();
        if (body.contains("seed")) cfg.seed = body["seed"].get<std::uint64_t>();
        if (body.contains("iterations")) cfg.iterations = body["iterations"].get<int>();
      } catch (const json::exception& e) {
        bad_request(std::string("invalid t-SNE parameter: ") + e.what());
      }
      auto job = launch("tsne", false, [this, snapshot, ids, cfg](Job&) {
        const auto& m = reprs_of(*snapshot);
        const auto out = tsne(ids ? select_columns(m, *ids) : m, cfg);
        json series_ids = json::array();
        for (const auto& x : dataset.series()) series_ids.push_back(x.id());
        return json{{"snapshot", snapshot->generation},
                    {"series_ids", std::move(series_ids)},
                    {"coords", matrix_json(out.coords)},
                    {"perplexity", out.perplexity},
                    {"kl_divergence", out.kl_final()}};
      });
      send(res, 202, job->to_json());
    });

    s.Post("/api/analyze", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const auto snapshot = current();
      auto field = [&](const char* key, const std::string& fallback) {
        if (!body.contains(key) || body[key].is_null()) return fallback;
        if (!body[key].is_string()) bad_request(std::string(key) + " must be a string");
        return body[key].get<std::string>();
      };
      const Task task = parse_task(field("task", "classify"));
      const Mode mode = parse_mode(field("mode", "freeze"));
      if (mode == Mode::FineTune && task != Task::Classification)
        throw ContractError("fine-tuning mode supports only the classification task");
      const std::string analyzer = field("analyzer", AnalyzerRegistry::default_name(task));
      AnalyzerRegistry::instance().get(task, mode == Mode::FineTune ? "softmax" : analyzer);
      const auto ids = ids_from_json(body, "shapelets", snapshot->model.transformer.repr_dim());
      const AnalyzeParams params = analyze_params_from_json(body.contains("params") ? body["params"] : json());
      if (task == Task::Classification && !dataset.all_labeled())
        throw ContractError("classification needs every series labeled");

      const bool finetune = mode == Mode::FineTune;
      auto job = launch(finetune ? "finetune" : "analyze", finetune,
                        [this, snapshot, task, mode, analyzer, ids, params](Job&) {
        AnalysisResult r = analyze(task, mode, analyzer, dataset, snapshot->model.transformer, ids, params);
        json out = to_json(r);
        out["snapshot"] = snapshot->generation;
        if (r.finetuned) {
          ModelFile tuned{*r.finetuned, snapshot->model.curve, snapshot->model.config, std::nullopt};
          if (r.head) tuned.head = widen_head(*r.head, r.shapelets, r.finetuned->repr_dim());
          if (!options.model_path.empty()) {
            auto path = options.model_path;
            path += ".finetuned";
            save_model(tuned, path);
            out["finetuned_model"] = path.string();
          }
        }
        return out;
      });
      send(res, 202, job->to_json());
    });

    s.Post("/api/train", [this](const httplib::Request& req, httplib::Response& res) {
      const json body = parse_body(req);
      const TrainSettings settings = train_settings_from_json(body.contains("config") ? body["config"] : json::object());
      settings.config.validate();
      const auto groups = settings.groups ? *settings.groups : default_groups(dataset);
      const ShapeletTransformer init = new_transformer(dataset.channel_count(), groups);
      if (init.max_length() > dataset.min_length())
        throw LengthError("longest shapelet (" + std::to_string(init.max_length()) + ") exceeds the shortest series (" +
                          std::to_string(dataset.min_length()) + ")");
      auto job = launch("train", true, [this, settings, init](Job& self) {
        const TrainConfig& cfg = settings.config;
        TrainCallbacks cb;
        cb.on_step = [&self](const LossPoint& p) {
          std::lock_guard lock(self.mu);
          self.curve.points.push_back(p);
        };
        cb.on_epoch = [&self, &cfg](int epoch, const ShapeletTransformer&, const LossCurve& curve) {
          std::lock_guard lock(self.mu);
          self.curve = curve;
          self.progress = cfg.epochs > 0 ? static_cast<double>(epoch + 1) / cfg.epochs : 1.0;
        };
        cb.should_stop = [this] { return stopping.load(); };
        TrainResult r = train(dataset, init_shapelets(dataset, init, cfg.seed), cfg, cb);
        if (stopping) throw Error("cancelled", "training cancelled by shutdown");
        {
          std::lock_guard lock(self.mu);
          self.curve = r.curve;
        }
        publish(ModelFile{std::move(r.transformer), r.curve, cfg, std::nullopt});
        const auto snapshot = current();
        json out{{"snapshot", snapshot->generation}, {"steps", r.curve.size()}};
        if (!r.curve.empty()) out["final_train_loss"] = r.curve.points.back().train_loss;
        return out;
      });
      send(res, 202, job->to_json());
    });

    s.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::shared_ptr<Job> job;
      {
        std::lock_guard lock(jobs_mu);
        auto it = jobs.find(req.matches[1]);
        if (it == jobs.end()) not_found("unknown job '" + std::string(req.matches[1]) + "'");
        job = it->second;
      }
      send(res, 200, job->to_json());
    });

    s.Get("/api/train/curve", [this](const httplib::Request&, httplib::Response& res) {
      std::shared_ptr<Job> job;
      {
        std::lock_guard lock(jobs_mu);
        if (!last_train_job.empty()) job = jobs.at(last_train_job);
      }
      const auto snapshot = current();
      if (job) {
        std::lock_guard lock(job->mu);
        send(res, 200,
             {{"job_id", job->id},
              {"status", status_name(job->status)},
              {"snapshot", snapshot->generation},
              {"points", to_json(job->curve)}});
        return;
      }
      send(res, 200,
           {{"job_id", nullptr}, {"status", nullptr}, {"snapshot", snapshot->generation},
            {"points", to_json(snapshot->model.curve)}});
    });
  }

  // `group` is a group index or "<metric>_<length>".
  static Index parse_group(const ShapeletTransformer& f, const std::string& text) {
    const auto n = static_cast<Index>(f.groups().size());
    Index idx = -1;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), idx);
    if (ec == std::errc() && ptr == text.data() + text.size()) {
      if (idx < 0 || idx >= n) not_found("unknown group " + text + "; valid groups are 0.." + std::to_string(n - 1));
      return idx;
    }
    for (Index g = 0; g < n; ++g) {
      const auto& grp = f.groups()[static_cast<std::size_t>(g)];
      if (text == std::string(to_string(grp.metric)) + "_" + std::to_string(grp.length)) return g;
    }
    not_found("unknown group '" + text + "'");
  }

  void shutdown() {
    bool wait_for_listener = false;
    {
      std::lock_guard lock(listen_mu);
      stopping = true;
      wait_for_listener = listening;
    }
    // httplib's stop() is a no-op until the accept loop runs.
    if (wait_for_listener) {
      server.wait_until_ready();
      server.stop();
    }
    std::vector<std::thread> pending;
    {
      std::lock_guard lock(jobs_mu);
      pending.swap(workers);
    }
    for (auto& t : pending)
      if (t.joinable()) t.join();
  }
};

Service::Service(Dataset dataset, ModelFile model, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(dataset), std::move(model), std::move(options))) {}

Service::~Service() { stop(); }

int Service::bind() {
  auto& o = impl_->options;
  // httplib defaults to SO_REUSEPORT, which would let a second server share a
  // busy port silently.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (o.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(o.host);
  } else {
    impl_->bound_port = impl_->server.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->bound_port < 0)
    throw Error("bind_error", "cannot bind " + o.host + ":" + std::to_string(o.port) + " (address in use?)");
  return impl_->bound_port;
}

void Service::listen() {
  {
    std::lock_guard lock(impl_->listen_mu);
    if (impl_->stopping) return;
    impl_->listening = true;
  }
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_) impl_->shutdown();
}

int Service::port() const { return impl_->bound_port; }

std::uint64_t Service::generation() const { return impl_->current()->generation; }

}  // namespace timecsl
