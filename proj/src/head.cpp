#include "timecsl/head.hpp"

#include <algorithm>
#include <cmath>

namespace timecsl {

LinearHead LinearHead::zeros(std::vector<std::string> classes, Index input_dim) {
  const auto c = static_cast<Index>(classes.size());
  return {Eigen::MatrixXd::Zero(c, input_dim), Eigen::VectorXd::Zero(c), std::move(classes)};
}

Eigen::MatrixXd LinearHead::logits(const Eigen::MatrixXd& reprs) const {
  if (reprs.cols() != weights.cols())
    throw ContractError("head expects " + std::to_string(weights.cols()) + " features, got " +
                        std::to_string(reprs.cols()));
  return (reprs * weights.transpose()).rowwise() + bias.transpose();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<Index>& targets, Eigen::MatrixXd* grad_logits) {
  if (static_cast<Index>(targets.size()) != logits.rows()) throw ContractError("one target per row required");
  const Index n = logits.rows();
  double loss = 0.0;
  Eigen::MatrixXd p = softmax_rows(logits);
  for (Index i = 0; i < n; ++i) {
    const Index t = targets[static_cast<std::size_t>(i)];
    const double peak = logits.row(i).maxCoeff();
    const double lse = peak + std::log((logits.row(i).array() - peak).exp().sum());
    loss += lse - logits(i, t);
  }
  loss /= static_cast<double>(n);
  if (grad_logits) {
    for (Index i = 0; i < n; ++i) p(i, targets[static_cast<std::size_t>(i)]) -= 1.0;
    *grad_logits = p / static_cast<double>(n);
  }
  return loss;
}

std::vector<std::string> class_vocabulary(const std::vector<std::string>& labels) {
  std::vector<std::string> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

std::vector<Index> encode_labels(const std::vector<std::string>& labels, const std::vector<std::string>& classes) {
  std::vector<Index> out;
  out.reserve(labels.size());
  for (const auto& l : labels) {
    auto it = std::find(classes.begin(), classes.end(), l);
    if (it == classes.end()) throw ContractError("unknown class label '" + l + "'");
    out.push_back(static_cast<Index>(it - classes.begin()));
  }
  return out;
}

LinearHead widen_head(const LinearHead& head, const std::vector<Index>& columns, Index repr_dim) {
  if (static_cast<Index>(columns.size()) != head.input_dim())
    throw ContractError("head reads " + std::to_string(head.input_dim()) + " coordinates but " +
                        std::to_string(columns.size()) + " columns were given");
  LinearHead out{Eigen::MatrixXd::Zero(head.num_classes(), repr_dim), head.bias, head.classes};
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] < 0 || columns[k] >= repr_dim) throw ContractError("head column out of range");
    out.weights.col(columns[k]) = head.weights.col(static_cast<Index>(k));
  }
  return out;
}

}  // namespace timecsl
