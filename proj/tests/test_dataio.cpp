#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fixture_suite.hpp"
#include "helpers.hpp"
#include "synthetic.hpp"
#include "timecsl/dataio.hpp"
#include "timecsl/train.hpp"
#include "timecsl/transform.hpp"

using namespace timecsl;
using namespace timecsl::testing;

namespace {

const std::filesystem::path kTsFixtures = std::filesystem::path(FIXTURE_DIR) / "ts";

ModelFile sample_model() {
  const Dataset ds = planted_motif_dataset(16, 40, 0.3, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  auto f0 = init_shapelets(ds, new_transformer(1, {{4, Metric::EuclideanMin, 2}, {4, Metric::XcorrMax, 1}, {8, Metric::EuclideanMin, 2}, {8, Metric::XcorrMax, 1}}), 1);
  auto r = train(ds, f0, cfg);
  ModelFile m{r.transformer, r.curve, cfg, std::nullopt};
  std::mt19937_64 rng(3);
  m.head = LinearHead{random_matrix(2, m.transformer.repr_dim(), rng), Eigen::VectorXd::Random(2), {"A", "B"}};
  return m;
}

}  // namespace

TEST_CASE("ts fixture suite") {
  const auto outcomes = run_ts_fixture_suite(kTsFixtures);
  int valid = 0, malformed = 0;
  for (const auto& o : outcomes) {
    INFO(o.file << ": " << o.detail);
    CHECK(o.ok);
    (o.valid ? valid : malformed)++;
  }
  CHECK(valid >= 10);
  CHECK(malformed >= 10);
}

TEST_CASE("ts toy example") {
  const auto ds = parse_ts("@problemName toy\n@univariate true\n@classLabel true A B\n@data\n1.0,2.0,3.0:A\n");
  REQUIRE(ds.size() == 1);
  CHECK(ds[0].values() == mat({{1, 2, 3}}));
  CHECK(*ds[0].label() == "A");
  CHECK(ds[0].id() == "0");

  const auto file = parse_ts_file("@problemName h\n@dimension 2\n@classLabel true u v\n@data\n1:2:u\n");
  CHECK(file.header.dimensions == Index{2});
  CHECK(file.header.labels == std::vector<std::string>{"u", "v"});
}

TEST_CASE("ts arity error is located") {
  try {
    parse_ts("@problemName toy\n@dimension 2\n@classLabel true A\n@data\n1,2:A\n");
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(e.line() == 5);
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    CHECK(e.code() == "data_error");
  }
}

TEST_CASE("jsonl round trip is bit-exact") {
  std::mt19937_64 rng(8);
  std::vector<TimeSeries> s;
  for (int i = 0; i < 6; ++i) {
    Eigen::MatrixXd v = random_matrix(2, 5 + i, rng);
    v(0, 0) = std::numeric_limits<double>::denorm_min();
    v(1, 1) = 0.1 + 0.2;
    s.emplace_back("s" + std::to_string(i), v, i % 2 ? std::optional<std::string>("X") : std::nullopt);
  }
  const Dataset ds("rt", s);
  const std::string text = format_jsonl(ds);
  const Dataset back = parse_jsonl(text, "rt");
  CHECK(back == ds);
  CHECK(format_jsonl(back) == text);

  const auto dir = scratch_dir("dataio");
  write_jsonl(ds, dir / "a.jsonl");
  CHECK(read_dataset(dir / "a.jsonl").series() == ds.series());
}

TEST_CASE("jsonl errors") {
  CHECK_THROWS_WITH_AS(parse_jsonl("", "e"), doctest::Contains("empty dataset"), DataError);
  try {
    parse_jsonl("{\"id\":\"a\",\"values\":[[1,2]]}\n{\"id\":\"b\",\"values\":[[1,NaN]]}\n", "e");
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_jsonl("{\"id\":\"a\",\"values\":[[1,2],[3]]}\n", "e"), DataError);
  CHECK_THROWS_AS(parse_jsonl("{\"values\":[[1]]}\n", "e"), DataError);
  CHECK_THROWS_AS(read_dataset("/nonexistent/x.jsonl"), DataError);
}

TEST_CASE("model round trip is bit-exact") {
  const ModelFile m = sample_model();
  const std::string text = serialize_model(m);
  const ModelFile back = parse_model(text);
  CHECK(back.transformer == m.transformer);
  CHECK(back.curve == m.curve);
  REQUIRE(back.head);
  CHECK(back.head->weights == m.head->weights);
  CHECK(back.head->bias == m.head->bias);
  CHECK(back.head->classes == m.head->classes);
  REQUIRE(back.config);
  CHECK(to_json(*back.config) == to_json(*m.config));
  CHECK(serialize_model(back) == text);

  const auto dir = scratch_dir("model");
  save_model(m, dir / "m.json");
  CHECK(read_text_file(dir / "m.json") == text);
  CHECK(load_model(dir / "m.json").transformer == m.transformer);
}

TEST_CASE("tampered or truncated model files are rejected") {
  const std::string text = serialize_model(sample_model());
  auto doc = nlohmann::json::parse(text);
  doc["format_version"] = 99;
  CHECK_THROWS_WITH_AS(parse_model(doc.dump()), doctest::Contains("format_version 99"), DataError);

  try {
    parse_model(text.substr(0, text.size() / 2));
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(e.line() > 0);
  }

  doc = nlohmann::json::parse(text);
  doc["shapelets"].erase(0);
  CHECK_THROWS_AS(parse_model(doc.dump()), DataError);
  doc = nlohmann::json::parse(text);
  doc.erase("format");
  CHECK_THROWS_AS(parse_model(doc.dump()), DataError);
}

TEST_CASE("representation tables") {
  RepresentationTable t{{"a", "b"}, {"s0_euclidean_min_4", "s1_cosine_max_4", "s2_xcorr_max_8"}, mat({{0.1, 2, -3e-7}, {4, 5.5, 6}})};
  const std::string csv = format_representation(t, TableFormat::Csv);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.rfind("series_id,s0_euclidean_min_4,s1_cosine_max_4,s2_xcorr_max_8\n", 0) == 0);
  for (auto fmt : {TableFormat::Csv, TableFormat::Jsonl}) {
    const auto back = parse_representation(format_representation(t, fmt), fmt);
    CHECK(back.series_ids == t.series_ids);
    CHECK(back.columns == t.columns);
    CHECK(back.values == t.values);
  }
  CHECK_THROWS_AS(parse_table_format("parquet"), Error);
  CHECK(parse_table_format("csv") == TableFormat::Csv);

  const auto dir = scratch_dir("repr");
  export_representation(t, dir / "r.csv", TableFormat::Csv);
  CHECK(read_representation(dir / "r.csv").values == t.values);
}

TEST_CASE("column names and id lists") {
  const auto f = new_transformer(1, {{4, Metric::EuclideanMin, 1}, {8, Metric::CosineMax, 2}});
  CHECK(representation_columns(f, {0, 2}) == std::vector<std::string>{"s0_euclidean_min_4", "s2_cosine_max_8"});
  CHECK(parse_id_list("2,0", 3) == std::vector<Index>{2, 0});
  CHECK_THROWS_WITH_AS(parse_id_list("3", 3), doctest::Contains("0..2"), ContractError);
  CHECK_THROWS_AS(parse_id_list("1,1", 3), ContractError);
  CHECK_THROWS_AS(parse_id_list("x", 3), ContractError);
}

TEST_CASE("train config documents") {
  TrainConfig cfg;
  cfg.epochs = 7;
  cfg.scale_range = {0.5, 1.5};
  const auto back = train_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(train_config_from_json(nlohmann::json::object()).epochs == TrainConfig{}.epochs);
  CHECK_THROWS_AS(train_config_from_json({{"epoch", 3}}), ConfigError);

  const auto s = train_settings_from_json({{"epochs", 2}, {"groups", {{{"length", 8}, {"metric", "cosine_max"}, {"count", 3}}}}});
  REQUIRE(s.groups);
  CHECK(s.groups->front().length == 8);
  CHECK(s.groups->front().metric == Metric::CosineMax);
}

TEST_CASE("format_double is shortest round-trip") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
}
