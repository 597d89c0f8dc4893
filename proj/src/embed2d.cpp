#include "timecsl/embed2d.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace timecsl {

namespace {

constexpr double kFloor = 1e-12;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::MatrixXd student_t_kernel(const Eigen::MatrixXd& y, double& total) {
  const Index n = y.rows();
  Eigen::MatrixXd num = Eigen::MatrixXd::Zero(n, n);
  total = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      num(i, j) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      total += num(i, j);
    }
  return num;
}

}  // namespace

std::uint64_t row_hash(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Index k = 0; k < row.size(); ++k) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(row[k]);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Index n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).squaredNorm();
  return d;
}

Eigen::MatrixXd conditional_probabilities(const Eigen::MatrixXd& sq_dist, double perplexity) {
  const Index n = sq_dist.rows();
  if (sq_dist.cols() != n) throw ContractError("distance matrix must be square");
  if (n < 2) throw ContractError("affinities need at least 2 points");
  if (!(perplexity > 0.0 && perplexity <= static_cast<double>(n - 1)))
    throw ConfigError("perplexity must be in (0, " + std::to_string(n - 1) + "], got " + std::to_string(perplexity));
  const double target = std::log2(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd shifted(n - 1), row(n - 1);
  for (Index i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (Index j = 0, k = 0; j < n; ++j)
      if (j != i) {
        shifted[k++] = sq_dist(i, j);
        dmin = std::min(dmin, sq_dist(i, j));
      }
    shifted.array() -= dmin;
    const double mean = shifted.mean();
    double beta = mean > 0.0 ? 1.0 / mean : 1.0;
    double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 50; ++iter) {
      row = (-beta * shifted.array()).exp();
      const double sum = row.sum();
      const double entropy = (std::log(sum) + beta * shifted.dot(row) / sum) / std::log(2.0);
      row /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = std::isinf(lo) ? beta * 0.5 : 0.5 * (beta + lo);
      }
    }
    for (Index j = 0, k = 0; j < n; ++j)
      if (j != i) p(i, j) = row[k++];
  }
  return p;
}

Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& sq_dist, double perplexity) {
  const Eigen::MatrixXd c = conditional_probabilities(sq_dist, perplexity);
  const Index n = c.rows();
  Eigen::MatrixXd p = (c + c.transpose()) / (2.0 * static_cast<double>(n));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) p(i, j) = i == j ? 0.0 : std::max(p(i, j), kFloor);
  return p;
}

Eigen::VectorXd row_perplexities(const Eigen::MatrixXd& conditional) {
  Eigen::VectorXd out(conditional.rows());
  for (Index i = 0; i < conditional.rows(); ++i) {
    double h = 0.0;
    for (Index j = 0; j < conditional.cols(); ++j)
      if (j != i && conditional(i, j) > 0.0) h -= conditional(i, j) * std::log2(conditional(i, j));
    out[i] = std::exp2(h);
  }
  return out;
}

double effective_perplexity(const TsneConfig& cfg, Index n) {
  if (cfg.perplexity) {
    const double p = *cfg.perplexity;
    if (!(p > 0.0 && p < static_cast<double>(n - 1)))
      throw ConfigError("perplexity must be in (0, N-1) = (0, " + std::to_string(n - 1) + "), got " + std::to_string(p));
    return p;
  }
  return std::min(30.0, static_cast<double>(n - 1) / 3.0);
}

double kl_divergence(const Eigen::MatrixXd& joint_p, const Eigen::MatrixXd& coords) {
  double total = 0.0;
  const Eigen::MatrixXd num = student_t_kernel(coords, total);
  double kl = 0.0;
  for (Index i = 0; i < joint_p.rows(); ++i)
    for (Index j = 0; j < joint_p.cols(); ++j) {
      if (i == j || joint_p(i, j) <= 0.0) continue;
      const double q = std::max(num(i, j) / total, kFloor);
      kl += joint_p(i, j) * std::log(joint_p(i, j) / q);
    }
  return kl;
}

TsneResult tsne(const Eigen::MatrixXd& reprs, const TsneConfig& cfg) {
  if (!reprs.allFinite()) throw ContractError("t-SNE input contains non-finite values");
  if (cfg.iterations < 1) throw ConfigError("t-SNE iterations must be >= 1");
  const Index n = reprs.rows();
  TsneResult out;
  out.coords = Eigen::MatrixXd::Zero(n, 2);
  if (n <= 2) {
    if (n == 2) {
      out.coords(0, 0) = -0.5;
      out.coords(1, 0) = 0.5;
    }
    return out;
  }
  out.perplexity = effective_perplexity(cfg, n);

  // Canonical order: by row hash, then by content.
  std::vector<std::uint64_t> hashes(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) hashes[static_cast<std::size_t>(i)] = row_hash(reprs.row(i));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto ha = hashes[static_cast<std::size_t>(a)], hb = hashes[static_cast<std::size_t>(b)];
    if (ha != hb) return ha < hb;
    const auto ra = reprs.row(a), rb = reprs.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  Eigen::MatrixXd x(n, reprs.cols());
  for (Index k = 0; k < n; ++k) x.row(k) = reprs.row(order[static_cast<std::size_t>(k)]);

  const Eigen::MatrixXd p = conditional_affinities(squared_distances(x), out.perplexity);

  Eigen::MatrixXd y(n, 2);
  for (Index k = 0; k < n; ++k) {
    std::mt19937_64 rng(splitmix64(cfg.seed ^ splitmix64(hashes[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])])));
    std::normal_distribution<double> init(0.0, 1e-4);
    y(k, 0) = init(rng);
    y(k, 1) = init(rng);
  }
  out.kl_trace.emplace_back(0, kl_divergence(p, y));

  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd grad(n, 2);
  for (int it = 0; it < cfg.iterations; ++it) {
    const double exaggeration = it < cfg.exaggeration_iterations ? cfg.early_exaggeration : 1.0;
    double total = 0.0;
    const Eigen::MatrixXd num = student_t_kernel(y, total);
    grad.setZero();
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = num(i, j) / total;
        grad.row(i) += (4.0 * (exaggeration * p(i, j) - q) * num(i, j)) * (y.row(i) - y.row(j));
      }
    for (Index i = 0; i < n; ++i)
      for (Index d = 0; d < 2; ++d) {
        const bool same_sign = (grad(i, d) > 0.0) == (velocity(i, d) > 0.0);
        gains(i, d) = std::max(same_sign ? gains(i, d) * 0.8 : gains(i, d) + 0.2, 0.01);
      }
    const double momentum = it < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
    velocity = momentum * velocity - cfg.learning_rate * gains.cwiseProduct(grad);
    y += velocity;
    y.rowwise() -= y.colwise().mean();
    if ((cfg.kl_every > 0 && (it + 1) % cfg.kl_every == 0) || it + 1 == cfg.iterations)
      out.kl_trace.emplace_back(it + 1, kl_divergence(p, y));
  }

  for (Index k = 0; k < n; ++k) out.coords.row(order[static_cast<std::size_t>(k)]) = y.row(k);
  return out;
}

}  // namespace timecsl
