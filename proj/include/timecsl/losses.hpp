#ifndef TIMECSL_LOSSES_HPP
#define TIMECSL_LOSSES_HPP

#include <Eigen/Dense>

#include <vector>

#include "timecsl/core.hpp"

namespace timecsl {

/// Representation columns grouped by shapelet length ("scale"). Within a
/// scale, columns follow group order, so scales built from the same metric
/// sequence line up coordinate by coordinate.
struct ScaleLayout {
  std::vector<Index> lengths;
  std::vector<std::vector<Index>> columns;

  std::size_t scale_count() const noexcept { return lengths.size(); }
};

ScaleLayout scale_layout(const ShapeletTransformer& f);

/// Alignment needs every scale to carry the same (metric, count) sequence.
/// Throws ConfigError otherwise.
void check_alignable(const ShapeletTransformer& f);

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad_a;  // d loss / d rows of the first view
  Eigen::MatrixXd grad_b;
};

/// NT-Xent over 2B anchors with cosine similarity; row i of `a` and row i of
/// `b` are the positive pair. Requires B >= 2.
double nt_xent(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double temperature);
LossGrad nt_xent_with_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double temperature);

/// Average of the full-representation NT-Xent and the mean per-scale NT-Xent.
LossGrad multi_grained_with_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const ScaleLayout& layout,
                                 double temperature);

struct AlignmentGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad;
};

/// Mean over rows and unordered scale pairs of 1 - cos(v_p, v_q). Zero when
/// there is a single scale.
AlignmentGrad multi_scale_alignment_with_grad(const Eigen::MatrixXd& z, const ScaleLayout& layout);

/// multi-grained + weight * alignment, the alignment term taken over the
/// rows of both views.
LossGrad total_loss_with_grad(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const ScaleLayout& layout,
                              double temperature, double alignment_weight);

}  // namespace timecsl

#endif  // TIMECSL_LOSSES_HPP
