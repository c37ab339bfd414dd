#include "vamlab/optim.hpp"

#include <cmath>

#include "vamlab/errors.hpp"

namespace vamlab::ad {

void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, AdamState& state) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw ConfigError("adam_step: parameter/gradient shape mismatch");
  }
  if (state.step == 0) {
    state.first_moment = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    state.second_moment = Eigen::MatrixXd::Zero(param.rows(), param.cols());
  } else if (state.first_moment.rows() != param.rows() ||
             state.first_moment.cols() != param.cols()) {
    throw ConfigError("adam_step: state belongs to a different parameter shape");
  }
  state.step += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  param.array() -= state.learning_rate * (state.first_moment.array() / bc1) /
                   ((state.second_moment.array() / bc2).sqrt() + state.epsilon);
}

}  // namespace vamlab::ad
