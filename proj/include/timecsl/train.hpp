#ifndef TIMECSL_TRAIN_HPP
#define TIMECSL_TRAIN_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "timecsl/core.hpp"
#include "timecsl/head.hpp"
#include "timecsl/losses.hpp"
#include "timecsl/transform.hpp"

namespace timecsl {

using Rng = std::mt19937_64;

struct AugmentedPair {
  TimeSeries view_a;
  TimeSeries view_b;
};

/// d loss / d values, one D x L block per shapelet.
struct GradientBuffer {
  std::vector<Eigen::MatrixXd> grads;
};

/// Each shapelet becomes a random subsequence of a random long-enough series
/// plus N(0, (noise_fraction * dataset std)^2) noise.
ShapeletTransformer init_shapelets(const Dataset& ds, const ShapeletTransformer& f, std::uint64_t seed,
                                   double noise_fraction = 0.01);

/// Crop (to at least `min_length` steps) -> per-channel jitter -> global scale.
TimeSeries augment(const TimeSeries& x, const TrainConfig& cfg, Rng& rng, Index min_length);

std::vector<AugmentedPair> make_pairs(const std::vector<const TimeSeries*>& batch, const TrainConfig& cfg, Rng& rng,
                                      Index min_length);

double multi_grained_loss(const ShapeletTransformer& f, const std::vector<AugmentedPair>& pairs, double temperature);
double multi_scale_alignment_loss(const ShapeletTransformer& f, const std::vector<TimeSeries>& batch);
double total_loss(const ShapeletTransformer& f, const std::vector<AugmentedPair>& pairs, const TrainConfig& cfg);

/// Adds upstream[id] * d z[id] / d shapelet(id) for one encoded series. The
/// winning window of each coordinate is held fixed.
void accumulate_shapelet_grads(const ShapeletTransformer& f, const Eigen::MatrixXd& x, const Encoding& enc,
                               const Eigen::VectorXd& upstream, std::vector<Eigen::MatrixXd>& grads);

GradientBuffer zero_gradients(const ShapeletTransformer& f);

struct LossAndGradient {
  double loss = 0.0;
  GradientBuffer gradient;
};

LossAndGradient loss_and_gradient(const ShapeletTransformer& f, const std::vector<AugmentedPair>& pairs,
                                  const TrainConfig& cfg);
GradientBuffer backward(const ShapeletTransformer& f, const std::vector<AugmentedPair>& pairs,
                        const TrainConfig& cfg);

/// Hooks for progress reporting. `on_epoch` receives an immutable snapshot of
/// the model after each epoch; returning true from `should_stop` ends
/// training at the next step boundary.
struct TrainCallbacks {
  std::function<void(const LossPoint&)> on_step;
  std::function<void(int epoch, const ShapeletTransformer&, const LossCurve&)> on_epoch;
  std::function<bool()> should_stop;
};

struct TrainResult {
  ShapeletTransformer transformer;
  LossCurve curve;
};

/// Unsupervised contrastive training. `f_init` is copied, never modified.
TrainResult train(const Dataset& ds, const ShapeletTransformer& f_init, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks = {});

struct FineTuneConfig {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-2;                   // head
  std::optional<double> shapelet_learning_rate;  // defaults to learning_rate
  std::uint64_t seed = 0;
};

struct FineTuneResult {
  ShapeletTransformer transformer;
  LinearHead head;
  LossCurve curve;
};

/// Joint cross-entropy training of shapelets and head on labeled series.
/// With `columns`, the head reads only those representation coordinates and
/// every other shapelet keeps its values.
FineTuneResult fine_tune(const ShapeletTransformer& f, const LinearHead& head, const Dataset& labeled,
                         const FineTuneConfig& cfg, const std::optional<std::vector<Index>>& columns = std::nullopt);

}  // namespace timecsl

#endif  // TIMECSL_TRAIN_HPP
