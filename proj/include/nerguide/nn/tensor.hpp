#ifndef NERGUIDE_NN_TENSOR_HPP_
#define NERGUIDE_NN_TENSOR_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nerguide/rng.hpp"

namespace nerguide::nn {

// One trainable parameter matrix with its gradient accumulator. Layers own
// their tensors and expose pointers through collect(); the optimizer and the
// checkpoint code only ever see this flat list.
struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  Tensor() = default;
  Tensor(std::string name, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(name)),
        value(Eigen::MatrixXd::Zero(rows, cols)),
        grad(Eigen::MatrixXd::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index count() const { return value.size(); }
};

inline void init_normal(Tensor& t, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
      t.value(i, j) = rng.normal(0.0, stddev);
    }
  }
}

inline void init_constant(Tensor& t, double v) { t.value.setConstant(v); }

inline long parameter_count(const std::vector<Tensor*>& params) {
  long n = 0;
  for (const Tensor* t : params) n += static_cast<long>(t->count());
  return n;
}

inline void zero_all_grads(const std::vector<Tensor*>& params) {
  for (Tensor* t : params) t->zero_grad();
}

}  // namespace nerguide::nn

#endif  // NERGUIDE_NN_TENSOR_HPP_
