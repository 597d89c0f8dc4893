#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "timecsl/core.hpp"
#include "timecsl/transform.hpp"

using namespace timecsl;
using namespace timecsl::testing;

namespace {

Shapelet shp(const std::vector<double>& v) { return {0, 0, mat({v})}; }

}  // namespace

TEST_CASE("new_transformer sizes and validation") {
  CHECK(new_transformer(1, {{2, Metric::EuclideanMin, 3}}).repr_dim() == 3);
  const auto f = new_transformer(2, {{4, Metric::CosineMax, 2}, {8, Metric::XcorrMax, 5}});
  CHECK(f.repr_dim() == 7);
  CHECK(f.group_of(1) == 0);
  CHECK(f.group_of(2) == 1);
  CHECK(f.values(6).rows() == 2);
  CHECK(f.values(6).cols() == 8);
  CHECK(f.values(3).isZero());
  CHECK_THROWS_AS(new_transformer(1, {}), ConfigError);
  CHECK_THROWS_AS(new_transformer(1, {{1, Metric::EuclideanMin, 3}}), ConfigError);
  CHECK_THROWS_AS(new_transformer(1, {{3, Metric::EuclideanMin, 0}}), ConfigError);
}

TEST_CASE("default_groups follows the length rule") {
  auto make = [](Index T) { return Dataset("d", {TimeSeries("a", Eigen::MatrixXd::Zero(1, T))}); };
  const auto g100 = default_groups(make(100));
  CHECK(g100.size() == 12);
  Index total = 0;
  std::set<Index> lengths;
  for (const auto& g : g100) {
    total += g.count;
    lengths.insert(g.length);
    CHECK(g.count == 10);
  }
  CHECK(total == 120);
  CHECK(lengths == std::set<Index>{10, 20, 40, 80});

  const auto g10 = default_groups(make(10));
  CHECK(g10.size() == 9);
  std::set<Index> l10;
  for (const auto& g : g10) l10.insert(g.length);
  CHECK(l10 == std::set<Index>{2, 4, 8});
  CHECK_THROWS_AS(default_groups(make(2)), ConfigError);
}

TEST_CASE("euclidean fixtures") {
  const auto x = series("x", {0, 1, 2, 3, 4});
  auto r = feature_euclidean_min(x, shp({1, 2}));
  CHECK(r.value == 0.0);
  CHECK(r.window_start == 1);
  r = feature_euclidean_min(x, shp({0, 0}));
  CHECK(r.value == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(r.window_start == 0);
  CHECK_THROWS_AS(feature_euclidean_min(series("y", {5}), shp({1, 2})), LengthError);
}

TEST_CASE("cosine fixtures") {
  auto r = feature_cosine_max(series("x", {1, 0, 0, 1}), shp({1, 1}));
  CHECK(r.value == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(r.window_start == 0);
  r = feature_cosine_max(series("x", {2, 2, 2}), shp({1, 1}));
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.window_start == 0);
  r = feature_cosine_max(series("x", {0, 0, 0}), shp({1, 1}));
  CHECK(r.value == 0.0);
  CHECK(r.window_start == 0);
}

TEST_CASE("pearson fixtures") {
  auto r = feature_xcorr_max(series("x", {5, 6, 1, 3}), shp({0, 2}));
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.window_start == 0);
  r = feature_xcorr_max(series("x", {2, 2, 2, 2}), shp({0, 2}));
  CHECK(r.value == 0.0);
  r = feature_xcorr_max(series("x", {1, 3}), shp({3, 1}));
  CHECK(r.value == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("kernels agree with the naive oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Index D = 1 + trial % 3, L = 2 + trial % 5, T = L + trial % 9;
    const Eigen::MatrixXd x = random_matrix(D, T, rng), s = random_matrix(D, L, rng);
    for (int m = 0; m < 3; ++m) {
      const auto want = oracle::feature(m, rows(x), rows(s));
      const auto got = feature(kAllMetrics[static_cast<std::size_t>(m)], x, s);
      CHECK(std::abs(got.value - want.value) < 1e-9);
      CHECK(got.window_start == want.start);
    }
  }
}

TEST_CASE("kernels accept expressions and float scalars") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd x = random_matrix(2, 12, rng), s = random_matrix(2, 4, rng);
  const auto a = feature_cosine_max(x, s);
  const auto b = feature_cosine_max(2.0 * x, (s.array() * 3.0).matrix());
  CHECK(a.window_start == b.window_start);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
  const auto f = feature_euclidean_min(x.cast<float>(), s.cast<float>());
  CHECK(f.value == doctest::Approx(feature_euclidean_min(x, s).value).epsilon(1e-5));
  // Row-major input is copied to the canonical layout.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;
  CHECK(feature_xcorr_max(xr, s).value == feature_xcorr_max(x, s).value);
}

TEST_CASE("metric invariances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd x = random_matrix(2, 20, rng), s = random_matrix(2, 5, rng);
    const double c = 3.7;
    CHECK(feature_euclidean_min((x.array() + c).matrix(), (s.array() + c).matrix()).value ==
          doctest::Approx(feature_euclidean_min(x, s).value).epsilon(1e-9));
    CHECK(feature_cosine_max(x * 2.5, s * 0.3).value == doctest::Approx(feature_cosine_max(x, s).value).epsilon(1e-9));
    CHECK(feature_xcorr_max(x * 2.0, (s.array() * 0.5 + 4.0).matrix()).value ==
          doctest::Approx(feature_xcorr_max(x, s).value).epsilon(1e-9));
  }
}

TEST_CASE("transform composes per-shapelet features") {
  ShapeletTransformer f(1, {{2, Metric::EuclideanMin, 1}, {2, Metric::CosineMax, 1}, {2, Metric::XcorrMax, 1}});
  f.set_values(0, mat({{1, 2}}));
  f.set_values(1, mat({{0, 1}}));
  f.set_values(2, mat({{0, 2}}));
  const auto x = series("x", {0, 1, 2, 3, 4});
  const auto z = transform(x, f).values;
  CHECK(z[0] == 0.0);
  CHECK(z[1] == doctest::Approx(oracle::feature(1, {{0, 1, 2, 3, 4}}, {{0, 1}}).value).epsilon(1e-12));
  CHECK(z[2] == doctest::Approx(1.0).epsilon(1e-12));

  // Zero shapelets under cosine give zero coordinates.
  const auto zero = new_transformer(1, {{3, Metric::CosineMax, 4}});
  CHECK(transform(x, zero).values.isZero());

  const auto wide = new_transformer(1, {{2, Metric::EuclideanMin, 1}, {9, Metric::CosineMax, 1}});
  CHECK_THROWS_AS(transform(x, wide), LengthError);
  CHECK_THROWS_AS(transform(TimeSeries("y", Eigen::MatrixXd::Zero(2, 5)), f), ContractError);
}

TEST_CASE("transform_dataset rows follow dataset order") {
  std::mt19937_64 rng(5);
  ShapeletTransformer f(1, {{3, Metric::EuclideanMin, 2}, {4, Metric::XcorrMax, 2}});
  for (Index id = 0; id < f.repr_dim(); ++id) f.set_values(id, random_matrix(1, f.group_for(id).length, rng));
  std::vector<TimeSeries> xs;
  for (int i = 0; i < 5; ++i) xs.emplace_back("s" + std::to_string(i), random_matrix(1, 6 + i, rng));
  xs.push_back(TimeSeries("dup", xs[0].values()));
  const Dataset ds("d", xs);
  const auto m = transform_dataset(ds, f);
  REQUIRE(m.rows() == 6);
  for (Index r = 0; r < 6; ++r) {
    const auto& x = ds[static_cast<std::size_t>(r)];
    for (Index id = 0; id < f.repr_dim(); ++id) {
      const int metric = f.group_for(id).metric == Metric::EuclideanMin ? 0 : 2;
      CHECK(std::abs(m(r, id) - oracle::feature(metric, rows(x.values()), rows(f.values(id))).value) < 1e-12);
    }
  }
  CHECK(m.row(0) == m.row(5));

  const Dataset one("one", {xs[2]});
  CHECK(transform_dataset(one, f).row(0).transpose() == transform(xs[2], f).values);

  const Dataset short_ds("s", {xs[0], TimeSeries("tiny", random_matrix(1, 3, rng))});
  try {
    transform_dataset(short_ds, f);
    FAIL("expected a length error");
  } catch (const LengthError& e) {
    CHECK(std::string(e.what()).find("tiny") != std::string::npos);
  }
}

TEST_CASE("match returns the winning window") {
  ShapeletTransformer f(1, {{2, Metric::EuclideanMin, 1}, {2, Metric::CosineMax, 1}});
  f.set_values(0, mat({{1, 2}}));
  f.set_values(1, mat({{1, 1}}));
  auto m = match(series("x", {0, 1, 2, 3, 4}), f, 0);
  CHECK(m.feature_value == 0.0);
  CHECK(m.window_start == 1);
  CHECK(m.window_values == mat({{1, 2}}));
  CHECK(m.series_id == "x");
  m = match(series("x", {1, 0, 0, 1}), f, 1);
  CHECK(m.window_start == 0);
  CHECK(m.metric == Metric::CosineMax);
  CHECK_THROWS_AS(match(series("x", {1}), f, 0), LengthError);
}

TEST_CASE("metric names round-trip") {
  for (auto m : kAllMetrics) CHECK(parse_metric(to_string(m)) == m);
  CHECK(parse_metric("COSINE_MAX") == Metric::CosineMax);
  CHECK_THROWS_AS(parse_metric("manhattan"), ConfigError);
}
