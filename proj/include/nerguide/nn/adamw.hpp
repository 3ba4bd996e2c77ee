#ifndef NERGUIDE_NN_ADAMW_HPP_
#define NERGUIDE_NN_ADAMW_HPP_

#include <vector>

#include <Eigen/Dense>

#include "nerguide/nn/tensor.hpp"

namespace nerguide::nn {

// AdamW with decoupled weight decay. Moment state is keyed by position in
// the parameter list, which therefore must stay stable across steps.
class AdamW {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(std::vector<Tensor*> params, Options options);

  // Applies one update from the accumulated gradients, then clears them.
  void step();

  void set_lr(double lr) { options_.lr = lr; }
  double lr() const { return options_.lr; }
  long step_count() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  Options options_;
  std::vector<Eigen::MatrixXd> m_, v_;
  long t_ = 0;
};

}  // namespace nerguide::nn

#endif  // NERGUIDE_NN_ADAMW_HPP_
