#ifndef TIMECSL_HEAD_HPP
#define TIMECSL_HEAD_HPP

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "timecsl/core.hpp"

namespace timecsl {

/// Linear classifier g(z) = W z + b over representation coordinates.
struct LinearHead {
  Eigen::MatrixXd weights;  // C x M
  Eigen::VectorXd bias;     // C
  std::vector<std::string> classes;

  Index num_classes() const noexcept { return static_cast<Index>(classes.size()); }
  Index input_dim() const noexcept { return weights.cols(); }

  /// Zero weights and bias; predicts uniformly.
  static LinearHead zeros(std::vector<std::string> classes, Index input_dim);

  /// N x C logits for the rows of `reprs`.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& reprs) const;

  friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

/// Row-wise softmax, numerically shifted.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// Mean cross-entropy of softmax(logits) against class indices; optionally
/// writes d loss / d logits.
double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<Index>& targets,
                     Eigen::MatrixXd* grad_logits = nullptr);

/// Sorted distinct labels.
std::vector<std::string> class_vocabulary(const std::vector<std::string>& labels);

/// Dense indices of `labels` in `classes`; ContractError on unknown labels.
std::vector<Index> encode_labels(const std::vector<std::string>& labels, const std::vector<std::string>& classes);

/// Re-express a head over coordinates `columns` as one over all `repr_dim`
/// coordinates (zero weight elsewhere); logits are unchanged.
LinearHead widen_head(const LinearHead& head, const std::vector<Index>& columns, Index repr_dim);

}  // namespace timecsl

#endif  // TIMECSL_HEAD_HPP
