#include "timecsl/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "timecsl/adam.hpp"

namespace timecsl {

namespace {

double dataset_std(const Dataset& ds) {
  double sum = 0.0, count = 0.0;
  for (const auto& s : ds.series()) {
    sum += s.values().sum();
    count += static_cast<double>(s.values().size());
  }
  const double mean = sum / count;
  double sq = 0.0;
  for (const auto& s : ds.series()) sq += (s.values().array() - mean).square().sum();
  return std::sqrt(sq / count);
}

Eigen::MatrixXd stack_rows(const std::vector<Encoding>& encs) {
  Eigen::MatrixXd z(static_cast<Index>(encs.size()), encs.front().z.size());
  for (std::size_t i = 0; i < encs.size(); ++i) z.row(static_cast<Index>(i)) = encs[i].z.transpose();
  return z;
}

void check_finite_gradient(const GradientBuffer& g, long step) {
  for (std::size_t i = 0; i < g.grads.size(); ++i)
    if (!g.grads[i].allFinite())
      throw TrainingError(
          "non-finite gradient for shapelet " + std::to_string(i) + " at step " + std::to_string(step), step);
}

}  // namespace

ShapeletTransformer init_shapelets(const Dataset& ds, const ShapeletTransformer& f, std::uint64_t seed,
                                   double noise_fraction) {
  if (ds.channel_count() != f.channel_count())
    throw ContractError("dataset has " + std::to_string(ds.channel_count()) + " channels, transformer expects " +
                        std::to_string(f.channel_count()));
  ShapeletTransformer out = f;
  Rng rng(seed);
  const double sigma = noise_fraction * dataset_std(ds);
  for (Index id = 0; id < f.repr_dim(); ++id) {
    const Index len = f.group_for(id).length;
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds[i].length() >= len) eligible.push_back(i);
    if (eligible.empty())
      throw LengthError("no series is long enough for shapelet length " + std::to_string(len));
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    const auto& x = ds[eligible[pick(rng)]];
    std::uniform_int_distribution<Index> start(0, x.length() - len);
    Eigen::MatrixXd v = x.values().middleCols(start(rng), len);
    if (sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, sigma);
      for (Index k = 0; k < v.size(); ++k) v.data()[k] += noise(rng);
    }
    out.set_values(id, std::move(v));
  }
  return out;
}

TimeSeries augment(const TimeSeries& x, const TrainConfig& cfg, Rng& rng, Index min_length) {
  Eigen::MatrixXd v = x.values();
  const Index length = v.cols();
  if (cfg.crop_min_fraction < 1.0 && length >= min_length) {
    std::uniform_real_distribution<double> frac(cfg.crop_min_fraction, 1.0);
    const double u = frac(rng);
    const Index crop = std::clamp(static_cast<Index>(std::floor(u * static_cast<double>(length))), min_length, length);
    std::uniform_int_distribution<Index> start(0, length - crop);
    v = x.values().middleCols(start(rng), crop);
  }
  if (cfg.jitter_sigma_fraction > 0.0) {
    for (Index d = 0; d < v.rows(); ++d) {
      const double mean = v.row(d).mean();
      const double sd = std::sqrt((v.row(d).array() - mean).square().mean());
      const double sigma = cfg.jitter_sigma_fraction * sd;
      if (!(sigma > 0.0)) continue;
      std::normal_distribution<double> noise(0.0, sigma);
      for (Index t = 0; t < v.cols(); ++t) v(d, t) += noise(rng);
    }
  }
  const auto [lo, hi] = cfg.scale_range;
  if (lo < hi) {
    std::uniform_real_distribution<double> scale(lo, hi);
    v *= scale(rng);
  } else if (lo != 1.0) {
    v *= lo;
  }
  return x.with_values(std::move(v));
}

std::vector<AugmentedPair> make_pairs(const std::vector<const TimeSeries*>& batch, const TrainConfig& cfg, Rng& rng,
                                      Index min_length) {
  std::vector<AugmentedPair> pairs;
  pairs.reserve(batch.size());
  for (const auto* x : batch) {
    TimeSeries a = augment(*x, cfg, rng, min_length);
    TimeSeries b = augment(*x, cfg, rng, min_length);
    pairs.push_back({std::move(a), std::move(b)});
  }
  return pairs;
}

void accumulate_shapelet_grads(const ShapeletTransformer& f, const Eigen::MatrixXd& x, const Encoding& enc,
                               const Eigen::VectorXd& upstream, std::vector<Eigen::MatrixXd>& grads) {
  const Index channels = f.channel_count();
  for (Index id = 0; id < f.repr_dim(); ++id) {
    const double up = upstream[id];
    if (up == 0.0) continue;
    const auto& grp = f.group_for(id);
    const Index n = channels * grp.length;
    const detail::ConstVecMap<double> w(x.data() + enc.windows[static_cast<std::size_t>(id)] * channels, n);
    const detail::ConstVecMap<double> s(f.values(id).data(), n);
    Eigen::Map<Eigen::VectorXd> g(grads[static_cast<std::size_t>(id)].data(), n);
    const double z = enc.z[id];
    switch (grp.metric) {
      case Metric::EuclideanMin: {
        if (z == 0.0) break;
        g -= (up / (static_cast<double>(n) * z)) * (w - s);
        break;
      }
      case Metric::CosineMax: {
        const double wn = w.norm(), sn = s.norm();
        if (wn == 0.0 || sn == 0.0) break;
        g += up * (w / (wn * sn) - (z / (sn * sn)) * s);
        break;
      }
      case Metric::XcorrMax: {
        if (detail::all_equal(w.data(), n) || detail::all_equal(s.data(), n)) break;
        const Eigen::VectorXd wc = w.array() - w.mean();
        const Eigen::VectorXd sc = s.array() - s.mean();
        const double wn = wc.norm(), sn = sc.norm();
        g += up * (wc / (wn * sn) - (z / (sn * sn)) * sc);
        break;
      }
    }
  }
}

GradientBuffer zero_gradients(const ShapeletTransformer& f) {
  GradientBuffer buf;
  for (const auto& p : f.parameters()) buf.grads.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  return buf;
}

LossAndGradient loss_and_gradient(const ShapeletTransformer& f, const std::vector<AugmentedPair>& pairs,
                                  const TrainConfig& cfg) {
  if (pairs.size() < 2) throw ContractError("contrastive batch needs at least 2 pairs");
  if (!(cfg.alignment_weight >= 0.0)) throw ConfigError("alignment_weight must be >= 0");
  if (cfg.alignment_weight > 0.0) check_alignable(f);
  std::vector<Encoding> ea, eb;
  ea.reserve(pairs.size());
  eb.reserve(pairs.size());
  for (const auto& p : pairs) {
    ea.push_back(encode(f, p.view_a.values()));
    eb.push_back(encode(f, p.view_b.values()));
  }
  const ScaleLayout layout = scale_layout(f);
  const LossGrad lg =
      total_loss_with_grad(stack_rows(ea), stack_rows(eb), layout, cfg.temperature, cfg.alignment_weight);

  LossAndGradient out{lg.loss, zero_gradients(f)};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto r = static_cast<Index>(i);
    accumulate_shapelet_grads(f, pairs[i].view_a.values(), ea[i], lg.grad_a.row(r).transpose(), out.gradient.grads);
    accumulate_shapelet_grads(f, pairs[i].view_b.values(), eb[i], lg.grad_b.row(r).transpose(), out.gradient.grads);
  }
  return out;
}

GradientBuffer backward(const ShapeletTransformer& f, const std::vector<AugmentedPair>& pairs,
                        const TrainConfig& cfg) {
  return loss_and_gradient(f, pairs, cfg).gradient;
}

double multi_grained_loss(const ShapeletTransformer& f, const std::vector<AugmentedPair>& pairs, double temperature) {
  if (pairs.size() < 2) throw ContractError("contrastive batch needs at least 2 pairs");
  std::vector<Encoding> ea, eb;
  for (const auto& p : pairs) {
    ea.push_back(encode(f, p.view_a.values()));
    eb.push_back(encode(f, p.view_b.values()));
  }
  return multi_grained_with_grad(stack_rows(ea), stack_rows(eb), scale_layout(f), temperature).loss;
}

double multi_scale_alignment_loss(const ShapeletTransformer& f, const std::vector<TimeSeries>& batch) {
  check_alignable(f);
  if (batch.empty()) return 0.0;
  std::vector<Encoding> encs;
  for (const auto& x : batch) encs.push_back(encode(f, x.values()));
  return multi_scale_alignment_with_grad(stack_rows(encs), scale_layout(f)).loss;
}

double total_loss(const ShapeletTransformer& f, const std::vector<AugmentedPair>& pairs, const TrainConfig& cfg) {
  return loss_and_gradient(f, pairs, cfg).loss;
}

TrainResult train(const Dataset& ds, const ShapeletTransformer& f_init, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks) {
  cfg.validate();
  if (ds.channel_count() != f_init.channel_count())
    throw ContractError("dataset has " + std::to_string(ds.channel_count()) + " channels, transformer expects " +
                        std::to_string(f_init.channel_count()));
  if (ds.min_length() < f_init.max_length())
    throw LengthError("shortest series (" + std::to_string(ds.min_length()) + ") is shorter than the longest shapelet (" +
                      std::to_string(f_init.max_length()) + ")");
  if (cfg.alignment_weight > 0.0) check_alignable(f_init);

  TrainResult out{f_init, {}};
  if (cfg.epochs == 0) return out;
  if (ds.size() < 2) throw ContractError("contrastive training needs at least 2 series");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(ds.size())));
  n_val = std::min(n_val, ds.size() - 2);
  if (n_val < 2) n_val = 0;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  const Index min_length = f_init.max_length();
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  // Validation views are drawn once so the per-epoch curve is comparable.
  std::vector<std::vector<AugmentedPair>> val_batches;
  {
    Rng val_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t start = 0; start + 2 <= val_idx.size(); start += batch_size) {
      std::vector<const TimeSeries*> batch;
      for (std::size_t i = start; i < std::min(start + batch_size, val_idx.size()); ++i) batch.push_back(&ds[val_idx[i]]);
      if (batch.size() < 2) break;
      val_batches.push_back(make_pairs(batch, cfg, val_rng, min_length));
    }
  }

  Adam opt(cfg.learning_rate);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    for (std::size_t start = 0; start + 2 <= train_idx.size(); start += batch_size) {
      std::vector<const TimeSeries*> batch;
      for (std::size_t i = start; i < std::min(start + batch_size, train_idx.size()); ++i)
        batch.push_back(&ds[train_idx[i]]);
      const auto pairs = make_pairs(batch, cfg, rng, min_length);
      LossAndGradient lg = loss_and_gradient(out.transformer, pairs, cfg);
      if (!std::isfinite(lg.loss))
        throw TrainingError("non-finite training loss at step " + std::to_string(step), step);
      check_finite_gradient(lg.gradient, step);
      opt.step(out.transformer.parameters(), lg.gradient.grads);
      out.curve.points.push_back({step, lg.loss, std::nullopt});
      if (callbacks.on_step) callbacks.on_step(out.curve.points.back());
      ++step;
      if (callbacks.should_stop && callbacks.should_stop()) return out;
    }
    if (!val_batches.empty() && !out.curve.empty()) {
      double v = 0.0;
      for (const auto& vb : val_batches) v += total_loss(out.transformer, vb, cfg);
      v /= static_cast<double>(val_batches.size());
      if (!std::isfinite(v))
        throw TrainingError("non-finite validation loss after step " + std::to_string(step - 1), step - 1);
      out.curve.points.back().validation_loss = v;
    }
    if (callbacks.on_epoch) callbacks.on_epoch(epoch, out.transformer, out.curve);
  }
  return out;
}

FineTuneResult fine_tune(const ShapeletTransformer& f, const LinearHead& head, const Dataset& labeled,
                         const FineTuneConfig& cfg, const std::optional<std::vector<Index>>& columns) {
  if (!labeled.all_labeled()) throw ContractError("fine-tuning needs every series labeled");
  if (head.num_classes() < 2) throw ContractError("fine-tuning needs a head with at least 2 classes");
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ConfigError("fine-tune epochs must be >= 0 and batch_size >= 1");
  if (!(cfg.learning_rate >= 0.0)) throw ConfigError("fine-tune learning_rate must be >= 0");
  std::vector<Index> cols;
  if (columns) {
    cols = *columns;
  } else {
    cols.resize(static_cast<std::size_t>(f.repr_dim()));
    std::iota(cols.begin(), cols.end(), Index{0});
  }
  for (auto c : cols)
    if (c < 0 || c >= f.repr_dim()) throw ContractError("shapelet id " + std::to_string(c) + " out of range");
  if (head.input_dim() != static_cast<Index>(cols.size()))
    throw ContractError("head expects " + std::to_string(head.input_dim()) + " features, selection has " +
                        std::to_string(cols.size()));

  std::vector<std::string> labels;
  for (const auto& s : labeled.series()) labels.push_back(*s.label());
  const std::vector<Index> targets = encode_labels(labels, head.classes);

  FineTuneResult out{f, head, {}};
  const double lr_f = cfg.shapelet_learning_rate.value_or(cfg.learning_rate);
  Adam opt_f(lr_f), opt_h(cfg.learning_rate);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(start + batch_size, order.size());
      const auto b = static_cast<Index>(end - start);
      std::vector<Encoding> encs;
      std::vector<Index> t;
      Eigen::MatrixXd z(b, static_cast<Index>(cols.size()));
      for (std::size_t i = start; i < end; ++i) {
        encs.push_back(encode(out.transformer, labeled[order[i]].values()));
        t.push_back(targets[order[i]]);
        for (std::size_t c = 0; c < cols.size(); ++c)
          z(static_cast<Index>(i - start), static_cast<Index>(c)) = encs.back().z[cols[c]];
      }
      Eigen::MatrixXd g;
      const double loss = cross_entropy(out.head.logits(z), t, &g);
      if (!std::isfinite(loss)) throw TrainingError("non-finite fine-tuning loss at step " + std::to_string(step), step);

      const Eigen::MatrixXd dz = g * out.head.weights;  // b x |cols|
      GradientBuffer gb = zero_gradients(out.transformer);
      Eigen::VectorXd upstream(out.transformer.repr_dim());
      for (Index r = 0; r < b; ++r) {
        upstream.setZero();
        for (std::size_t c = 0; c < cols.size(); ++c) upstream[cols[c]] += dz(r, static_cast<Index>(c));
        accumulate_shapelet_grads(out.transformer, labeled[order[start + static_cast<std::size_t>(r)]].values(),
                                  encs[static_cast<std::size_t>(r)], upstream, gb.grads);
      }
      check_finite_gradient(gb, step);

      std::vector<Eigen::MatrixXd> head_params{out.head.weights, out.head.bias};
      const std::vector<Eigen::MatrixXd> head_grads{g.transpose() * z, g.colwise().sum().transpose()};
      opt_f.step(out.transformer.parameters(), gb.grads);
      opt_h.step(head_params, head_grads);
      out.head.weights = head_params[0];
      out.head.bias = head_params[1];
      out.curve.points.push_back({step, loss, std::nullopt});
      ++step;
    }
  }
  return out;
}

}  // namespace timecsl
