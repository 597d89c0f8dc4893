#include <doctest.h>

#include <json.hpp>

#include <random>

#include "helpers.hpp"
#include "process.hpp"
#include "synthetic.hpp"
#include "timecsl/dataio.hpp"
#include "timecsl/train.hpp"
#include "timecsl/transform.hpp"

using namespace timecsl;
using namespace timecsl::testing;
using nlohmann::json;

namespace {

const std::string kCli = TIMECSL_CLI;
const std::filesystem::path kTs = std::filesystem::path(FIXTURE_DIR) / "ts";

RunResult cli(std::vector<std::string> args) { return run(kCli, std::move(args)); }

struct Workspace {
  std::filesystem::path dir = scratch_dir("cli");
  std::string path(const std::string& name) const { return (dir / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    write_text_file(dir / name, text);
    return path(name);
  }
};

// Two well-separated levels; a zero shapelet tells them apart.
Dataset level_dataset(int per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<TimeSeries> out;
  for (int i = 0; i < 2 * per_class; ++i) {
    const bool high = i % 2 == 1;
    Eigen::MatrixXd v(1, 20);
    for (Index t = 0; t < 20; ++t) v(0, t) = (high ? 5.0 : 0.0) + noise(rng);
    out.emplace_back("s" + std::to_string(i), v, std::string(high ? "high" : "low"));
  }
  return Dataset("levels", out);
}

std::string level_model(const Workspace& ws) {
  ShapeletTransformer f(1, {{4, Metric::EuclideanMin, 2}});
  f.set_values(0, Eigen::MatrixXd::Zero(1, 4));
  f.set_values(1, Eigen::MatrixXd::Constant(1, 4, 1.0));
  save_model({f, {}, std::nullopt, std::nullopt}, ws.dir / "levels.model.json");
  return ws.path("levels.model.json");
}

}  // namespace

TEST_CASE("ingest") {
  Workspace ws;
  auto r = cli({"ingest", "--input", (kTs / "valid" / "toy.ts").string(), "--out", ws.path("toy.jsonl")});
  CHECK(r.code == 0);
  CHECK(r.out == "N=1 D=1 T(min/max)=3/3\n");
  CHECK(read_dataset(ws.path("toy.jsonl"))[0].values() == mat({{1, 2, 3}}));

  CHECK(cli({"ingest", "--input", ws.path("missing.ts"), "--out", ws.path("x.jsonl")}).code == 3);
  CHECK(cli({"ingest", "--input", (kTs / "malformed" / "arity.ts").string(), "--out", ws.path("x.jsonl")}).code == 3);
  CHECK(cli({"ingest", "--bogus"}).code == 2);
  CHECK(cli({}).code == 2);
}

TEST_CASE("train") {
  Workspace ws;
  const Dataset ds = planted_motif_dataset(20, 40, 0.3, 1);
  write_jsonl(ds, ws.dir / "d.jsonl");

  SUBCASE("zero epochs writes the initialization") {
    const auto cfg = ws.write("c.json", R"({"epochs": 0})");
    const auto r = cli({"train", "--data", ws.path("d.jsonl"), "--config", cfg, "--out", ws.path("m.json"), "--seed", "4"});
    REQUIRE(r.code == 0);
    const auto want = init_shapelets(ds, new_transformer(1, default_groups(ds)), 4);
    CHECK(load_model(ws.path("m.json")).transformer == want);
    CHECK(json::parse(r.out)["steps"] == 0);
  }

  SUBCASE("fixed seed gives byte-identical models") {
    const auto cfg = ws.write("c.json", R"({"epochs": 2, "batch_size": 8})");
    const auto a = cli({"train", "--data", ws.path("d.jsonl"), "--config", cfg, "--out", ws.path("a.json"), "--seed", "9"});
    const auto b = cli({"train", "--data", ws.path("d.jsonl"), "--config", cfg, "--out", ws.path("b.json"), "--seed", "9"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(read_text_file(ws.path("a.json")) == read_text_file(ws.path("b.json")));
    CHECK(a.err.rfind("step=0 loss=", 0) == 0);
    CHECK(json::parse(a.out)["steps"] == 6);
  }

  SUBCASE("absurd learning rate fails with the step") {
    const auto cfg = ws.write("c.json", R"({"epochs": 3, "learning_rate": 1e300})");
    const auto r = cli({"train", "--data", ws.path("d.jsonl"), "--config", cfg, "--out", ws.path("m.json"), "--quiet"});
    CHECK(r.code == 4);
    CHECK(r.err.find("step=") != std::string::npos);
    CHECK(r.out.empty());
  }

  SUBCASE("bad configs are usage errors") {
    CHECK(cli({"train", "--data", ws.path("d.jsonl"), "--config", ws.write("c.json", R"({"epoch": 1})"), "--out",
               ws.path("m.json")})
              .code == 2);
    CHECK(cli({"train", "--data", ws.path("d.jsonl"), "--config", ws.write("c2.json", "{not json"), "--out",
               ws.path("m.json")})
              .code == 2);
    const auto too_long = ws.write("c3.json", R"({"groups": [{"length": 50, "metric": "euclidean_min", "count": 1}]})");
    CHECK(cli({"train", "--data", ws.path("d.jsonl"), "--config", too_long, "--out", ws.path("m.json")}).code == 3);
  }
}

TEST_CASE("transform") {
  Workspace ws;
  write_jsonl(level_dataset(5, 1), ws.dir / "d.jsonl");
  const auto model = level_model(ws);
  const auto all = cli({"transform", "--data", ws.path("d.jsonl"), "--model", model, "--out", ws.path("a.csv")});
  const auto subset = cli({"transform", "--data", ws.path("d.jsonl"), "--model", model, "--out", ws.path("b.csv"),
                           "--shapelets", "0,1"});
  REQUIRE(all.code == 0);
  REQUIRE(subset.code == 0);
  CHECK(read_text_file(ws.path("a.csv")) == read_text_file(ws.path("b.csv")));
  CHECK(read_representation(ws.path("a.csv")).values.rows() == 10);
  CHECK(json::parse(all.out)["rows"] == 10);

  const auto bad = cli({"transform", "--data", ws.path("d.jsonl"), "--model", model, "--out", ws.path("c.csv"),
                        "--shapelets", "7"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("0..1") != std::string::npos);

  CHECK(cli({"transform", "--data", ws.path("d.jsonl"), "--model", model, "--out", ws.path("d.jsonl.out"), "--format",
             "jsonl"})
            .code == 0);
  CHECK(read_representation(ws.path("d.jsonl.out")).values.rows() == 10);
}

TEST_CASE("analyze") {
  Workspace ws;
  write_jsonl(level_dataset(10, 2), ws.dir / "d.jsonl");
  const auto model = level_model(ws);

  const auto cluster = cli({"analyze", "--task", "cluster", "--data", ws.path("d.jsonl"), "--model", model});
  REQUIRE(cluster.code == 0);
  const auto c = json::parse(cluster.out);
  CHECK(c["ari"] == 1.0);
  CHECK(c["outputs"].size() == 20);
  CHECK(!cluster.err.empty());

  const auto classify = cli({"analyze", "--task", "classify", "--mode", "freeze", "--data", ws.path("d.jsonl"),
                             "--model", model, "--labels-fraction", "0.5"});
  REQUIRE(classify.code == 0);
  CHECK(json::parse(classify.out)["accuracy"] == 1.0);

  CHECK(cli({"analyze", "--task", "cluster", "--mode", "finetune", "--data", ws.path("d.jsonl"), "--model", model}).code ==
        2);
  CHECK(cli({"analyze", "--task", "regress", "--data", ws.path("d.jsonl"), "--model", model}).code == 2);

  const auto anomaly = cli({"analyze", "--task", "anomaly", "--data", ws.path("d.jsonl"), "--model", model,
                            "--neighbors", "3", "--shapelets", "1"});
  REQUIRE(anomaly.code == 0);
  CHECK(json::parse(anomaly.out)["shapelets"] == json::array({1}));

  const auto tuned = cli({"analyze", "--task", "classify", "--mode", "finetune", "--data", ws.path("d.jsonl"), "--model",
                          model, "--seed", "1"});
  REQUIRE(tuned.code == 0);
  CHECK(json::parse(tuned.out)["finetuned_model"] == model + ".finetuned");
  const auto back = load_model(model + ".finetuned");
  REQUIRE(back.head);
  CHECK(back.head->input_dim() == 2);
}

TEST_CASE("match") {
  Workspace ws;
  write_jsonl(Dataset("m", {series("x", {0, 1, 2, 3, 0})}), ws.dir / "d.jsonl");
  ShapeletTransformer f(1, {{3, Metric::EuclideanMin, 1}});
  f.set_values(0, mat({{1, 2, 3}}));
  save_model({f, {}, std::nullopt, std::nullopt}, ws.dir / "m.json");

  const auto r = cli({"match", "--data", ws.path("d.jsonl"), "--model", ws.path("m.json"), "--series", "x", "--shapelet", "0"});
  CHECK(r.code == 0);
  CHECK(r.out == "shapelet=0 series=x metric=euclidean_min value=0.0 start=1\n");

  const auto j = cli({"match", "--data", ws.path("d.jsonl"), "--model", ws.path("m.json"), "--series", "x", "--shapelet",
                      "0", "--json"});
  REQUIRE(j.code == 0);
  const auto doc = json::parse(j.out);
  CHECK(doc["feature_value"] == 0.0);
  CHECK(doc["window_start"] == 1);
  CHECK(doc["window_values"] == json::array({json::array({1.0, 2.0, 3.0})}));

  CHECK(cli({"match", "--data", ws.path("d.jsonl"), "--model", ws.path("m.json"), "--series", "nope", "--shapelet", "0"})
            .code == 2);
  CHECK(cli({"match", "--data", ws.path("d.jsonl"), "--model", ws.path("m.json"), "--series", "x", "--shapelet", "3"})
            .code == 2);
}

TEST_CASE("tsne") {
  Workspace ws;
  export_representation({{"only"}, {"a", "b"}, mat({{1, 2}})}, ws.dir / "one.csv", TableFormat::Csv);
  REQUIRE(cli({"tsne", "--repr", ws.path("one.csv"), "--out", ws.path("one.xy.csv")}).code == 0);
  const auto one = read_representation(ws.path("one.xy.csv"));
  CHECK(one.values == Eigen::MatrixXd::Zero(1, 2));
  CHECK(one.columns == std::vector<std::string>{"x", "y"});

  std::mt19937_64 rng(3);
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) ids.push_back("r" + std::to_string(i));
  export_representation({ids, {"a", "b", "c"}, random_matrix(12, 3, rng)}, ws.dir / "r.csv", TableFormat::Csv);
  const std::vector<std::string> base{"tsne", "--repr", ws.path("r.csv"), "--seed", "5", "--iterations", "300"};
  auto with_out = [&](const std::string& out) {
    auto args = base;
    args.insert(args.end(), {"--out", ws.path(out)});
    return cli(args);
  };
  REQUIRE(with_out("a.csv").code == 0);
  REQUIRE(with_out("b.csv").code == 0);
  CHECK(read_text_file(ws.path("a.csv")) == read_text_file(ws.path("b.csv")));

  CHECK(cli({"tsne", "--repr", ws.path("r.csv"), "--out", ws.path("c.csv"), "--perplexity", "11"}).code == 2);
  CHECK(cli({"tsne", "--repr", ws.path("r.csv"), "--out", ws.path("c.csv"), "--perplexity", "10.5"}).code == 0);
}

TEST_CASE("serve") {
  Workspace ws;
  write_jsonl(level_dataset(3, 4), ws.dir / "d.jsonl");
  const auto model = level_model(ws);

  Child server(kCli, {"serve", "--model", model, "--data", ws.path("d.jsonl"), "--port", "0"});
  const auto first = json::parse(server.read_line());
  const int port = first["port"].get<int>();
  CHECK(port > 0);
  CHECK(first["host"] == "127.0.0.1");

  const auto busy = cli({"serve", "--model", model, "--data", ws.path("d.jsonl"), "--port", std::to_string(port)});
  CHECK(busy.code == 5);
  CHECK(!busy.err.empty());

  CHECK(server.signal_and_wait(SIGINT) == 0);
}
