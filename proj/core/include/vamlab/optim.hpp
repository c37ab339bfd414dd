#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace vamlab::ad {

/// Per-parameter Adam state. Moment accumulators are allocated to the
/// parameter shape on the first step and must keep matching it afterwards.
struct AdamState {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int64_t step = 0;
  Eigen::MatrixXd first_moment;
  Eigen::MatrixXd second_moment;

  explicit AdamState(double lr = 1e-2) : learning_rate(lr) {}
};

/// One Adam update with bias correction, in place.
void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, AdamState& state);

}  // namespace vamlab::ad
