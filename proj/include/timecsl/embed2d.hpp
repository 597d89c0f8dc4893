#ifndef TIMECSL_EMBED2D_HPP
#define TIMECSL_EMBED2D_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "timecsl/core.hpp"

namespace timecsl {

struct TsneConfig {
  std::optional<double> perplexity;  // default min(30, (N - 1) / 3)
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  std::uint64_t seed = 0;
  int kl_every = 50;  // KL trace sampling period
};

struct TsneResult {
  Eigen::MatrixXd coords;  // N x 2, centered
  double perplexity = 0.0;
  /// (iteration, KL(P || Q)); iteration 0 is the initial layout, the last
  /// entry is the final one.
  std::vector<std::pair<int, double>> kl_trace;

  double kl_initial() const { return kl_trace.empty() ? 0.0 : kl_trace.front().second; }
  double kl_final() const { return kl_trace.empty() ? 0.0 : kl_trace.back().second; }
};

/// Pairwise squared Euclidean distances of the rows.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x);

/// Row-stochastic p(j | i), each row's Gaussian bandwidth binary-searched to
/// the target perplexity (50 steps max, or entropy within 1e-5 bits).
Eigen::MatrixXd conditional_probabilities(const Eigen::MatrixXd& sq_dist, double perplexity);

/// Symmetrized joint affinities (p(j|i) + p(i|j)) / 2N, floored at 1e-12
/// off the diagonal.
Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& sq_dist, double perplexity);

/// Effective perplexity 2^H of each row of a row-stochastic matrix (diagonal
/// excluded).
Eigen::VectorXd row_perplexities(const Eigen::MatrixXd& conditional);

/// Perplexity actually used for N points under `cfg`; ConfigError when an
/// explicit value is outside (0, N - 1).
double effective_perplexity(const TsneConfig& cfg, Index n);

/// Exact t-SNE to 2-D. Rows are processed in a canonical content order and
/// each point's start is seeded from (seed, row hash), so permuting the
/// input permutes the output identically.
TsneResult tsne(const Eigen::MatrixXd& reprs, const TsneConfig& cfg = {});

/// KL(P || Q) for a layout; Q from the Student-t kernel, floored at 1e-12.
double kl_divergence(const Eigen::MatrixXd& joint_p, const Eigen::MatrixXd& coords);

/// FNV-1a over the bit patterns of a row.
std::uint64_t row_hash(const Eigen::Ref<const Eigen::RowVectorXd>& row);

}  // namespace timecsl

#endif  // TIMECSL_EMBED2D_HPP
