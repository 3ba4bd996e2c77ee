#include "nerguide/nn/adamw.hpp"

#include <cmath>

namespace nerguide::nn {

AdamW::AdamW(std::vector<Tensor*> params, Options options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor* t : params_) {
    m_.emplace_back(Eigen::MatrixXd::Zero(t->value.rows(), t->value.cols()));
    v_.emplace_back(Eigen::MatrixXd::Zero(t->value.rows(), t->value.cols()));
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * p.grad;
    v_[i] = options_.beta2 * v_[i].array().matrix() +
            (1.0 - options_.beta2) * p.grad.array().square().matrix();
    const Eigen::ArrayXXd m_hat = m_[i].array() / bc1;
    const Eigen::ArrayXXd v_hat = v_[i].array() / bc2;
    p.value.array() -=
        options_.lr * (m_hat / (v_hat.sqrt() + options_.eps) +
                       options_.weight_decay * p.value.array());
    p.grad.setZero();
  }
}

}  // namespace nerguide::nn
