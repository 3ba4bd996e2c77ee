#ifndef NERGUIDE_NN_LAYERS_HPP_
#define NERGUIDE_NN_LAYERS_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nerguide/nn/tensor.hpp"

namespace nerguide::nn {

// Layers are stateful: forward() caches whatever backward() needs, so a
// backward() call must always follow the forward() whose cache it consumes.
// Gradients accumulate into the owned tensors until zero_grad.

// y = x W^T + b over rows. W is (out x in).
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out);

  void init(Rng& rng, double stddev);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

  void collect(std::vector<Tensor*>& out);

  Tensor weight;  // (out x in)
  Tensor bias;    // (out x 1)

 private:
  Eigen::MatrixXd x_;  // cached input
};

// Per-row layer normalization with learned gain and shift.
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index dim, double eps = 1e-5);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

  void collect(std::vector<Tensor*>& out);

  Tensor gamma;  // (dim x 1)
  Tensor beta;   // (dim x 1)

 private:
  double eps_ = 1e-5;
  Eigen::MatrixXd xhat_;        // normalized input
  Eigen::VectorXd inv_sigma_;   // per-row 1/sqrt(var + eps)
};

// Exact GELU x * Phi(x) and its derivative, elementwise.
Eigen::MatrixXd gelu(const Eigen::MatrixXd& x);
Eigen::MatrixXd gelu_grad(const Eigen::MatrixXd& x);

// Row-wise softmax with max subtraction.
Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& scores);

// Gradient through row-wise softmax: given p = softmax(s) and dL/dp,
// returns dL/ds.
Eigen::MatrixXd row_softmax_backward(const Eigen::MatrixXd& p,
                                     const Eigen::MatrixXd& dp);

}  // namespace nerguide::nn

#endif  // NERGUIDE_NN_LAYERS_HPP_
