#ifndef TIMECSL_ADAM_HPP
#define TIMECSL_ADAM_HPP

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

namespace timecsl {

/// Adam over a fixed list of dense parameter blocks.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void step(std::span<Eigen::MatrixXd> params, std::span<const Eigen::MatrixXd> grads) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
      if (lr_ == 0.0) continue;
      params[i].array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

  long steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

}  // namespace timecsl

#endif  // TIMECSL_ADAM_HPP
