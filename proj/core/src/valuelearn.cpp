#include "vamlab/valuelearn.hpp"

#include <cmath>

#include "vamlab/errors.hpp"
#include "vamlab/optim.hpp"

namespace vamlab {

void TrainSchedule::validate() const {
  if (outer_iterations < 1 || model_steps_per_outer < 1 || value_sweeps_per_outer < 1 ||
      target_refresh_period < 1) {
    throw ConfigError("TrainSchedule: all counts must be >= 1");
  }
  if (!(tolerance > 0.0)) throw ConfigError("TrainSchedule: tolerance must be positive");
  if (!(model_lr > 0.0) || !(value_lr > 0.0)) {
    throw ConfigError("TrainSchedule: learning rates must be positive");
  }
}

ValueTable fitted_value_iteration(const Matrix& probs, const Vector& reward, double discount,
                                  ValueTable value, int sweeps) {
  for (int s = 0; s < sweeps; ++s) {
    value = reward + discount * (probs * value);
  }
  return value;
}

double mve_target(const Matrix& probs, const Vector& reward, double discount,
                  const ValueTable& v_tail, int start, int horizon) {
  if (horizon < 1) throw ConfigError("mve_target: horizon must be >= 1");
  if (start < 0 || start >= probs.rows()) throw ConfigError("mve_target: start out of range");
  Eigen::RowVectorXd occupancy = Eigen::RowVectorXd::Zero(probs.cols());
  occupancy(start) = 1.0;
  double target = 0.0;
  double scale = 1.0;
  for (int i = 0; i < horizon; ++i) {
    target += scale * occupancy.dot(reward);
    occupancy *= probs;
    scale *= discount;
  }
  return target + scale * occupancy.dot(v_tail);
}

ErrorStats value_error(const ValueTable& estimate, const ValueTable& exact) {
  if (estimate.size() != exact.size()) throw ConfigError("value_error: length mismatch");
  const Vector diff = estimate - exact;
  ErrorStats e;
  e.mae = diff.array().abs().mean();
  e.rmse = std::sqrt(diff.array().square().mean());
  e.max_abs = diff.lpNorm<Eigen::Infinity>();
  return e;
}

namespace {

double divergence_threshold(const Vector& reward, double discount) {
  return 10.0 * reward.lpNorm<Eigen::Infinity>() / (1.0 - discount);
}

void maybe_record(std::vector<double>* curve, int stride, int step, double loss) {
  if (stride > 0 && step % stride == 0) curve->push_back(loss);
}

enum class ModelLoss { kIterVaml, kMuZero, kMle };

// One inner model fit: Adam on the chosen loss with the value frozen.
// Stops early once the relative loss change stays below the tolerance for
// several consecutive steps (a single flat step can be an Adam oscillation
// crossing, not convergence).
void fit_model(LowRankModel& model, ad::AdamState& opt, ModelLoss which,
               const TransitionCounts& counts, const Vector& reward, double discount,
               const ValueTable& value, int horizon, int steps, double tolerance,
               std::vector<double>* curve, int stride, int* global_step) {
  constexpr int kFlatStepsToStop = 10;
  double previous = 0.0;
  bool has_previous = false;
  int flat_steps = 0;
  for (int s = 0; s < steps; ++s) {
    ad::Tape tape;
    ModelVars mv = model_probs_on_tape(tape, model);
    ad::Var loss;
    switch (which) {
      case ModelLoss::kIterVaml:
        loss = itervaml_loss(tape, mv.probs, value, counts, horizon);
        break;
      case ModelLoss::kMuZero:
        loss = muzero_model_loss(tape, mv.probs, tape.constant(value), tape.constant(value),
                                 reward, discount, counts);
        break;
      case ModelLoss::kMle:
        loss = mle_loss(tape, mv.probs, counts);
        break;
    }
    const double value_now = loss.value()(0, 0);
    maybe_record(curve, stride, (*global_step)++, value_now);
    tape.backward(loss);
    adam_step(model.psi, tape.grad(mv.psi), opt);
    if (has_previous) {
      const double rel = std::abs(value_now - previous) / std::max(std::abs(previous), 1e-12);
      flat_steps = rel < tolerance ? flat_steps + 1 : 0;
      if (flat_steps >= kFlatStepsToStop) break;
    }
    previous = value_now;
    has_previous = true;
  }
}

TrainResult train_alternating(ModelLoss which, const TransitionCounts& counts,
                              const Vector& reward, double discount, LowRankModel model,
                              const TrainSchedule& schedule, int horizon, int loss_stride) {
  schedule.validate();
  TrainResult result;
  ValueTable value = ValueTable::Zero(counts.n_states);
  ad::AdamState opt(schedule.model_lr);
  const double limit = divergence_threshold(reward, discount);
  int global_step = 0;
  for (int outer = 0; outer < schedule.outer_iterations; ++outer) {
    fit_model(model, opt, which, counts, reward, discount, value, horizon,
              schedule.model_steps_per_outer, schedule.tolerance, &result.loss_curve,
              loss_stride, &global_step);
    value = fitted_value_iteration(model.probs(), reward, discount, std::move(value),
                                   schedule.value_sweeps_per_outer);
    if (value.lpNorm<Eigen::Infinity>() > limit) {
      result.diverged = true;
      break;
    }
  }
  result.model = std::move(model);
  result.value = std::move(value);
  return result;
}

}  // namespace

TrainResult train_itervaml(const TransitionCounts& counts, const Vector& reward, double discount,
                           LowRankModel model, const TrainSchedule& schedule, int horizon,
                           int loss_stride) {
  return train_alternating(ModelLoss::kIterVaml, counts, reward, discount, std::move(model),
                           schedule, horizon, loss_stride);
}

TrainResult train_itervaml(const TransitionDataset& dataset, const Vector& reward,
                           double discount, LowRankModel model, const TrainSchedule& schedule,
                           int horizon, int loss_stride) {
  return train_itervaml(count_transitions(dataset), reward, discount, std::move(model), schedule,
                        horizon, loss_stride);
}

TrainResult train_muzero_model_with_td(const TransitionCounts& counts, const Vector& reward,
                                       double discount, LowRankModel model,
                                       const TrainSchedule& schedule, int loss_stride) {
  return train_alternating(ModelLoss::kMuZero, counts, reward, discount, std::move(model),
                           schedule, 1, loss_stride);
}

TrainResult train_muzero_model_with_td(const TransitionDataset& dataset, const Vector& reward,
                                       double discount, LowRankModel model,
                                       const TrainSchedule& schedule, int loss_stride) {
  return train_muzero_model_with_td(count_transitions(dataset), reward, discount,
                                    std::move(model), schedule, loss_stride);
}

TrainResult train_mle(const TransitionCounts& counts, const Vector& reward, double discount,
                      LowRankModel model, const TrainSchedule& schedule, int loss_stride) {
  schedule.validate();
  TrainResult result;
  ad::AdamState opt(schedule.model_lr);
  ValueTable unused = ValueTable::Zero(counts.n_states);
  int global_step = 0;
  fit_model(model, opt, ModelLoss::kMle, counts, reward, discount, unused, 1,
            schedule.total_gradient_steps(), schedule.tolerance, &result.loss_curve, loss_stride,
            &global_step);
  const int sweeps = schedule.outer_iterations * schedule.value_sweeps_per_outer;
  result.value = fitted_value_iteration(model.probs(), reward, discount,
                                        ValueTable::Zero(counts.n_states), sweeps);
  result.diverged =
      result.value.lpNorm<Eigen::Infinity>() > divergence_threshold(reward, discount);
  result.model = std::move(model);
  return result;
}

TrainResult train_mle(const TransitionDataset& dataset, const Vector& reward, double discount,
                      LowRankModel model, const TrainSchedule& schedule, int loss_stride) {
  return train_mle(count_transitions(dataset), reward, discount, std::move(model), schedule,
                   loss_stride);
}

TrainResult train_muzero_joint(const TransitionCounts& counts, const Vector& reward,
                               double discount, LowRankModel model, ValueTable v0,
                               const TrainSchedule& schedule, int loss_stride) {
  schedule.validate();
  if (v0.size() != counts.n_states) throw ConfigError("train_muzero_joint: bad v0 length");
  TrainResult result;
  ValueTable value = std::move(v0);
  ValueTable target = value;
  ad::AdamState model_opt(schedule.model_lr);
  ad::AdamState value_opt(schedule.value_lr);
  const double limit = divergence_threshold(reward, discount);
  const int total_steps = schedule.total_gradient_steps();
  Matrix value_param = value;  // n x 1 trainable tensor
  for (int step = 0; step < total_steps; ++step) {
    if (step % schedule.target_refresh_period == 0) target = value_param.col(0);
    ad::Tape tape;
    ModelVars mv = model_probs_on_tape(tape, model);
    ad::Var v_hat = tape.param(value_param);
    ad::Var loss = muzero_model_loss(tape, mv.probs, v_hat, tape.constant(target), reward,
                                     discount, counts);
    maybe_record(&result.loss_curve, loss_stride, step, loss.value()(0, 0));
    tape.backward(loss);
    adam_step(model.psi, tape.grad(mv.psi), model_opt);
    adam_step(value_param, tape.grad(v_hat), value_opt);
    if (value_param.lpNorm<Eigen::Infinity>() > limit) {
      result.diverged = true;
      break;
    }
  }
  result.model = std::move(model);
  result.value = value_param.col(0);
  return result;
}

TrainResult train_muzero_joint(const TransitionDataset& dataset, const Vector& reward,
                               double discount, LowRankModel model, ValueTable v0,
                               const TrainSchedule& schedule, int loss_stride) {
  return train_muzero_joint(count_transitions(dataset), reward, discount, std::move(model),
                            std::move(v0), schedule, loss_stride);
}

}  // namespace vamlab
