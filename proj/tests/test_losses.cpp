#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "oracles.hpp"
#include "timecsl/losses.hpp"
#include "timecsl/train.hpp"
#include "timecsl/transform.hpp"

using namespace timecsl;
using namespace timecsl::testing;

namespace {

std::vector<std::vector<long>> oracle_scales(const ScaleLayout& layout) {
  std::vector<std::vector<long>> out;
  for (const auto& cols : layout.columns) out.emplace_back(cols.begin(), cols.end());
  return out;
}

}  // namespace

TEST_CASE("nt_xent closed form on the orthogonal B=2 batch") {
  const Eigen::MatrixXd a = mat({{1, 0}, {0, 1}});
  const double want = std::log((std::numbers::e + 2.0) / std::numbers::e);
  CHECK(std::abs(nt_xent(a, a, 1.0) - want) < 1e-12);
  CHECK(std::abs(oracle::nt_xent(rows(a), rows(a), 1.0) - want) < 1e-12);
}

TEST_CASE("nt_xent limits and errors") {
  const Eigen::MatrixXd a = mat({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CHECK(nt_xent(a, a, 0.05) < 0.01);
  CHECK_THROWS_AS(nt_xent(mat({{1, 0}}), mat({{1, 0}}), 1.0), ContractError);
  CHECK_THROWS_AS(nt_xent(a, a, 0.0), ConfigError);
}

TEST_CASE("nt_xent matches the brute-force oracle and its gradient") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const Index B = 2 + trial % 4, M = 1 + trial % 5;
    const Eigen::MatrixXd a = random_matrix(B, M, rng), b = random_matrix(B, M, rng);
    const double tau = 0.1 + 0.3 * (trial % 3);
    const auto lg = nt_xent_with_grad(a, b, tau);
    CHECK(std::abs(lg.loss - oracle::nt_xent(rows(a), rows(b), tau)) < 1e-9);
    const double eps = 1e-6;
    for (Index r = 0; r < B; ++r)
      for (Index c = 0; c < M; ++c) {
        Eigen::MatrixXd ap = a, am = a;
        ap(r, c) += eps;
        am(r, c) -= eps;
        const double fd = (nt_xent(ap, b, tau) - nt_xent(am, b, tau)) / (2 * eps);
        CHECK(std::abs(fd - lg.grad_a(r, c)) < 1e-6);
      }
  }
}

TEST_CASE("multi-grained loss against the oracle") {
  std::mt19937_64 rng(4);
  ShapeletTransformer f(1, {{3, Metric::EuclideanMin, 2}, {3, Metric::CosineMax, 1}, {5, Metric::EuclideanMin, 2},
                            {5, Metric::CosineMax, 1}});
  for (Index id = 0; id < f.repr_dim(); ++id) f.set_values(id, random_matrix(1, f.group_for(id).length, rng));
  const auto layout = scale_layout(f);
  REQUIRE(layout.scale_count() == 2);
  CHECK(layout.columns[0] == std::vector<Index>{0, 1, 2});
  CHECK(layout.columns[1] == std::vector<Index>{3, 4, 5});

  std::vector<AugmentedPair> pairs;
  oracle::Rows za, zb;
  for (int i = 0; i < 3; ++i) {
    pairs.push_back({TimeSeries("a", random_matrix(1, 9, rng)), TimeSeries("b", random_matrix(1, 8, rng))});
    for (const auto* x : {&pairs.back().view_a, &pairs.back().view_b}) {
      std::vector<double> z;
      for (Index id = 0; id < f.repr_dim(); ++id)
        z.push_back(oracle::feature(f.group_for(id).metric == Metric::EuclideanMin ? 0 : 1, rows(x->values()),
                                    rows(f.values(id)))
                        .value);
      (x == &pairs.back().view_a ? za : zb).push_back(z);
    }
  }
  const double tau = 0.3;
  const double mg = multi_grained_loss(f, pairs, tau);
  CHECK(std::abs(mg - oracle::multi_grained(za, zb, oracle_scales(layout), tau)) < 1e-9);

  TrainConfig cfg;
  cfg.temperature = tau;
  cfg.alignment_weight = 0.0;
  CHECK(total_loss(f, pairs, cfg) == doctest::Approx(mg).epsilon(1e-14));
  cfg.alignment_weight = 1.0;
  oracle::Rows both = za;
  both.insert(both.end(), zb.begin(), zb.end());
  const double want = oracle::multi_grained(za, zb, oracle_scales(layout), tau) +
                      oracle::alignment(both, oracle_scales(layout));
  CHECK(std::abs(total_loss(f, pairs, cfg) - want) < 1e-9);
  cfg.alignment_weight = -1.0;
  CHECK_THROWS_AS(total_loss(f, pairs, cfg), ConfigError);
}

TEST_CASE("single scale degenerates to plain NT-Xent") {
  std::mt19937_64 rng(8);
  ShapeletTransformer f(1, {{4, Metric::XcorrMax, 3}});
  for (Index id = 0; id < 3; ++id) f.set_values(id, random_matrix(1, 4, rng));
  std::vector<AugmentedPair> pairs;
  Eigen::MatrixXd a(3, 3), b(3, 3);
  for (int i = 0; i < 3; ++i) {
    pairs.push_back({TimeSeries("a", random_matrix(1, 10, rng)), TimeSeries("b", random_matrix(1, 10, rng))});
    a.row(i) = transform(pairs.back().view_a, f).values.transpose();
    b.row(i) = transform(pairs.back().view_b, f).values.transpose();
  }
  TrainConfig cfg;
  cfg.alignment_weight = 0.0;
  CHECK(std::abs(total_loss(f, pairs, cfg) - nt_xent(a, b, cfg.temperature)) < 1e-12);
  CHECK(multi_grained_loss(f, pairs, 0.4) == doctest::Approx(nt_xent(a, b, 0.4)).epsilon(1e-14));
}

TEST_CASE("alignment fixtures") {
  ScaleLayout layout{{2, 4}, {{0, 1}, {2, 3}}};
  CHECK(multi_scale_alignment_with_grad(mat({{1, 2, 1, 2}}), layout).loss == doctest::Approx(0.0));
  CHECK(multi_scale_alignment_with_grad(mat({{1, 0, 0, 1}}), layout).loss == doctest::Approx(1.0));
  CHECK(multi_scale_alignment_with_grad(mat({{1, 2, -1, -2}}), layout).loss == doctest::Approx(2.0));
  ScaleLayout single{{3}, {{0, 1}}};
  CHECK(multi_scale_alignment_with_grad(mat({{1, 2}}), single).loss == 0.0);

  ShapeletTransformer uneven(1, {{2, Metric::EuclideanMin, 2}, {3, Metric::EuclideanMin, 3}});
  CHECK_THROWS_AS(check_alignable(uneven), ConfigError);
  std::vector<TimeSeries> batch{series("x", {0, 1, 2, 3})};
  CHECK_THROWS_AS(multi_scale_alignment_loss(uneven, batch), ConfigError);
}

TEST_CASE("alignment loss of one series set") {
  std::mt19937_64 rng(13);
  ShapeletTransformer f(1, {{2, Metric::CosineMax, 2}, {4, Metric::CosineMax, 2}, {6, Metric::CosineMax, 2}});
  for (Index id = 0; id < f.repr_dim(); ++id) f.set_values(id, random_matrix(1, f.group_for(id).length, rng));
  std::vector<TimeSeries> batch;
  oracle::Rows z;
  for (int i = 0; i < 4; ++i) {
    batch.emplace_back("s", random_matrix(1, 12, rng));
    std::vector<double> row;
    for (Index id = 0; id < f.repr_dim(); ++id) row.push_back(oracle::feature(1, rows(batch.back().values()), rows(f.values(id))).value);
    z.push_back(row);
  }
  CHECK(std::abs(multi_scale_alignment_loss(f, batch) - oracle::alignment(z, {{0, 1}, {2, 3}, {4, 5}})) < 1e-12);
}

TEST_CASE("total loss is invariant to batch permutation") {
  std::mt19937_64 rng(17);
  auto inst = random_grad_instance(rng);
  TrainConfig cfg;
  const double before = total_loss(inst.f, inst.pairs, cfg);
  std::reverse(inst.pairs.begin(), inst.pairs.end());
  CHECK(total_loss(inst.f, inst.pairs, cfg) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("gradients match finite differences") {
  std::mt19937_64 rng(99);
  int checked = 0;
  while (checked < 12) {
    const auto inst = random_grad_instance(rng);
    for (double lambda : {0.0, 1.0}) {
      const auto g = check_gradient(inst, lambda);
      if (!g.tie_free) continue;
      CHECK(g.max_rel_error < 1e-4);
      ++checked;
    }
  }
}

TEST_CASE("gradient shapes and zero upstream") {
  std::mt19937_64 rng(5);
  const auto inst = random_grad_instance(rng);
  TrainConfig cfg;
  const auto g = backward(inst.f, inst.pairs, cfg);
  REQUIRE(static_cast<Index>(g.grads.size()) == inst.f.repr_dim());
  for (Index id = 0; id < inst.f.repr_dim(); ++id) {
    CHECK(g.grads[static_cast<std::size_t>(id)].rows() == inst.f.values(id).rows());
    CHECK(g.grads[static_cast<std::size_t>(id)].cols() == inst.f.values(id).cols());
  }

  const auto& p = inst.pairs.front();
  const auto enc = encode(inst.f, p.view_a.values());
  std::vector<Eigen::MatrixXd> grads = zero_gradients(inst.f).grads;
  Eigen::VectorXd upstream = Eigen::VectorXd::Ones(inst.f.repr_dim());
  upstream[0] = 0.0;
  accumulate_shapelet_grads(inst.f, p.view_a.values(), enc, upstream, grads);
  CHECK(grads[0].isZero());
  CHECK(!grads[1].isZero());
}
