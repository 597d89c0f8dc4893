#include "timecsl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace timecsl {

ScaleLayout scale_layout(const ShapeletTransformer& f) {
  ScaleLayout layout;
  const auto& groups = f.groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto it = std::find(layout.lengths.begin(), layout.lengths.end(), groups[g].length);
    std::size_t s = static_cast<std::size_t>(it - layout.lengths.begin());
    if (it == layout.lengths.end()) {
      layout.lengths.push_back(groups[g].length);
      layout.columns.emplace_back();
    }
    const Index off = f.group_offset(static_cast<Index>(g));
    for (Index k = 0; k < groups[g].count; ++k) layout.columns[s].push_back(off + k);
  }
  return layout;
}

void check_alignable(const ShapeletTransformer& f) {
  std::map<Index, std::vector<std::pair<Metric, Index>>> signature;
  for (const auto& g : f.groups()) signature[g.length].emplace_back(g.metric, g.count);
  const auto& first = signature.begin()->second;
  for (const auto& [len, sig] : signature)
    if (sig != first)
      throw ConfigError("multi-scale alignment needs the same metrics and counts at every length; length " +
                        std::to_string(len) + " differs from length " + std::to_string(signature.begin()->first));
}

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& z, const std::vector<Index>& cols) {
  Eigen::MatrixXd out(z.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = z.col(cols[c]);
  return out;
}

void scatter_add(Eigen::MatrixXd& dst, const Eigen::MatrixXd& src, const std::vector<Index>& cols, double scale) {
  for (std::size_t c = 0; c < cols.size(); ++c) dst.col(cols[c]) += scale * src.col(static_cast<Index>(c));
}

}  // namespace

LossGrad nt_xent_with_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double temperature) {
  const Index batch = a.rows();
  if (batch < 2) throw ContractError("NT-Xent needs a batch of at least 2, got " + std::to_string(batch));
  if (b.rows() != batch || b.cols() != a.cols()) throw ContractError("NT-Xent views must have equal shapes");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");

  const Index n = 2 * batch;
  Eigen::MatrixXd u(n, a.cols());
  u << a, b;
  Eigen::VectorXd norms = u.rowwise().norm();
  Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(n, u.cols());
  for (Index k = 0; k < n; ++k)
    if (norms[k] > 0.0) unit.row(k) = u.row(k) / norms[k];
  const Eigen::MatrixXd sim = unit * unit.transpose();

  // g(k, l) = d loss / d sim(k, l) through anchor k's row only.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  double loss = 0.0;
  for (Index k = 0; k < n; ++k) {
    const Index pos = (k + batch) % n;
    double peak = -std::numeric_limits<double>::infinity();
    for (Index l = 0; l < n; ++l)
      if (l != k) peak = std::max(peak, sim(k, l) / temperature);
    double denom = 0.0;
    for (Index l = 0; l < n; ++l)
      if (l != k) denom += std::exp(sim(k, l) / temperature - peak);
    loss += -(sim(k, pos) / temperature - peak) + std::log(denom);
    for (Index l = 0; l < n; ++l) {
      if (l == k) continue;
      const double p = std::exp(sim(k, l) / temperature - peak) / denom;
      g(k, l) = (p - (l == pos ? 1.0 : 0.0)) / (temperature * static_cast<double>(n));
    }
  }
  loss /= static_cast<double>(n);

  const Eigen::MatrixXd d_unit = (g + g.transpose()) * unit;
  Eigen::MatrixXd d_u = Eigen::MatrixXd::Zero(n, u.cols());
  for (Index k = 0; k < n; ++k) {
    if (norms[k] == 0.0) continue;
    const double radial = d_unit.row(k).dot(unit.row(k));
    d_u.row(k) = (d_unit.row(k) - radial * unit.row(k)) / norms[k];
  }
  return {loss, d_u.topRows(batch), d_u.bottomRows(batch)};
}

double nt_xent(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double temperature) {
  return nt_xent_with_grad(a, b, temperature).loss;
}

LossGrad multi_grained_with_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const ScaleLayout& layout,
                                 double temperature) {
  LossGrad coarse = nt_xent_with_grad(a, b, temperature);
  LossGrad out{0.0, 0.5 * coarse.grad_a, 0.5 * coarse.grad_b};
  double fine = 0.0;
  const double share = 0.5 / static_cast<double>(layout.scale_count());
  for (const auto& cols : layout.columns) {
    const LossGrad part = nt_xent_with_grad(gather(a, cols), gather(b, cols), temperature);
    fine += part.loss;
    scatter_add(out.grad_a, part.grad_a, cols, share);
    scatter_add(out.grad_b, part.grad_b, cols, share);
  }
  fine /= static_cast<double>(layout.scale_count());
  out.loss = 0.5 * (coarse.loss + fine);
  return out;
}

AlignmentGrad multi_scale_alignment_with_grad(const Eigen::MatrixXd& z, const ScaleLayout& layout) {
  AlignmentGrad out{0.0, Eigen::MatrixXd::Zero(z.rows(), z.cols())};
  const std::size_t m = layout.scale_count();
  if (m < 2 || z.rows() == 0) return out;
  const Index width = static_cast<Index>(layout.columns.front().size());
  for (const auto& cols : layout.columns)
    if (static_cast<Index>(cols.size()) != width)
      throw ConfigError("multi-scale alignment needs equal per-scale widths");

  const double terms = static_cast<double>(z.rows()) * static_cast<double>(m * (m - 1) / 2);
  std::vector<Eigen::MatrixXd> parts;
  for (const auto& cols : layout.columns) parts.push_back(gather(z, cols));
  std::vector<Eigen::MatrixXd> grads(m, Eigen::MatrixXd::Zero(z.rows(), width));

  for (Index r = 0; r < z.rows(); ++r) {
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        const auto vp = parts[p].row(r);
        const auto vq = parts[q].row(r);
        const double np = vp.norm(), nq = vq.norm();
        double c = 0.0;
        if (np > 0.0 && nq > 0.0) {
          c = vp.dot(vq) / (np * nq);
          // d(1 - c) = -dc
          grads[p].row(r) -= (vq / (np * nq) - c * vp / (np * np)) / terms;
          grads[q].row(r) -= (vp / (np * nq) - c * vq / (nq * nq)) / terms;
        }
        out.loss += (1.0 - c) / terms;
      }
    }
  }
  for (std::size_t p = 0; p < m; ++p) scatter_add(out.grad, grads[p], layout.columns[p], 1.0);
  return out;
}

LossGrad total_loss_with_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const ScaleLayout& layout,
                              double temperature, double alignment_weight) {
  if (!(alignment_weight >= 0.0)) throw ConfigError("alignment_weight must be >= 0");
  LossGrad out = multi_grained_with_grad(a, b, layout, temperature);
  if (alignment_weight > 0.0) {
    Eigen::MatrixXd both(2 * a.rows(), a.cols());
    both << a, b;
    const AlignmentGrad align = multi_scale_alignment_with_grad(both, layout);
    out.loss += alignment_weight * align.loss;
    out.grad_a += alignment_weight * align.grad.topRows(a.rows());
    out.grad_b += alignment_weight * align.grad.bottomRows(b.rows());
  }
  return out;
}

}  // namespace timecsl
