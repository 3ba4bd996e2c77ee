#include "nerguide/nn/layers.hpp"

#include <cmath>

namespace nerguide::nn {

Linear::Linear(const std::string& name, Eigen::Index in, Eigen::Index out)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

void Linear::init(Rng& rng, double stddev) {
  init_normal(weight, rng, stddev);
  bias.value.setZero();
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd& x) {
  x_ = x;
  Eigen::MatrixXd y = x * weight.value.transpose();
  y.rowwise() += bias.value.col(0).transpose();
  return y;
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& dy) {
  weight.grad.noalias() += dy.transpose() * x_;
  bias.grad.col(0).noalias() += dy.colwise().sum().transpose();
  return dy * weight.value;
}

void Linear::collect(std::vector<Tensor*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, Eigen::Index dim, double eps)
    : gamma(name + ".gamma", dim, 1), beta(name + ".beta", dim, 1), eps_(eps) {
  init_constant(gamma, 1.0);
}

Eigen::MatrixXd LayerNorm::forward(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  xhat_.resize(n, d);
  inv_sigma_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const Eigen::RowVectorXd centered = x.row(i).array() - mu;
    const double var = centered.squaredNorm() / static_cast<double>(d);
    const double inv_sigma = 1.0 / std::sqrt(var + eps_);
    inv_sigma_(i) = inv_sigma;
    xhat_.row(i) = centered * inv_sigma;
  }
  Eigen::MatrixXd y = xhat_;
  y.array().rowwise() *= gamma.value.col(0).transpose().array();
  y.rowwise() += beta.value.col(0).transpose();
  return y;
}

Eigen::MatrixXd LayerNorm::backward(const Eigen::MatrixXd& dy) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  gamma.grad.col(0).noalias() +=
      (dy.array() * xhat_.array()).colwise().sum().matrix().transpose();
  beta.grad.col(0).noalias() += dy.colwise().sum().transpose();

  Eigen::MatrixXd dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd g =
        dy.row(i).array() * gamma.value.col(0).transpose().array();
    const double mean_g = g.mean();
    const double mean_gx = (g.array() * xhat_.row(i).array()).mean();
    dx.row(i) =
        (g.array() - mean_g - xhat_.row(i).array() * mean_gx) * inv_sigma_(i);
  }
  return dx;
}

void LayerNorm::collect(std::vector<Tensor*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Eigen::MatrixXd gelu(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  });
}

Eigen::MatrixXd gelu_grad(const Eigen::MatrixXd& x) {
  return x.unaryExpr([](double v) {
    const double phi_cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    return phi_cdf + v * phi_pdf;
  });
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd p(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    Eigen::RowVectorXd e = (scores.row(i).array() - mx).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

Eigen::MatrixXd row_softmax_backward(const Eigen::MatrixXd& p,
                                     const Eigen::MatrixXd& dp) {
  Eigen::MatrixXd ds(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double dot = p.row(i).dot(dp.row(i));
    ds.row(i) = p.row(i).array() * (dp.row(i).array() - dot);
  }
  return ds;
}

}  // namespace nerguide::nn
