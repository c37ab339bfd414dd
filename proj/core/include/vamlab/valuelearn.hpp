#pragma once

#include <string>
#include <vector>

#include "vamlab/mdp.hpp"
#include "vamlab/models.hpp"

namespace vamlab {

/// Shared schedule for all training schemes. The benchmark never varies
/// these per cell; they are frozen once for the whole sweep.
struct TrainSchedule {
  int outer_iterations = 50;
  int model_steps_per_outer = 200;
  int value_sweeps_per_outer = 100;
  int target_refresh_period = 100;
  double model_lr = 1e-2;
  double value_lr = 1e-2;
  double tolerance = 1e-6;  // relative loss-change stop for inner model fits

  void validate() const;
  int total_gradient_steps() const { return outer_iterations * model_steps_per_outer; }
};

/// V <- r + gamma P V, applied `sweeps` times (tabular, each sweep exact).
ValueTable fitted_value_iteration(const Matrix& probs, const Vector& reward, double discount,
                                  ValueTable value, int sweeps);

/// h-step bootstrap target from `start` under the model:
/// sum_{i<h} gamma^i (P^i r)(start) + gamma^h (P^h v_tail)(start).
double mve_target(const Matrix& probs, const Vector& reward, double discount,
                  const ValueTable& v_tail, int start, int horizon);

struct ErrorStats {
  double mae = 0.0;
  double rmse = 0.0;
  double max_abs = 0.0;
};
ErrorStats value_error(const ValueTable& estimate, const ValueTable& exact);

struct TrainResult {
  LowRankModel model;
  ValueTable value;
  bool diverged = false;
  std::vector<double> loss_curve;  // model loss sampled every loss_stride steps
};

/// Alternates (a) Adam on the value-prediction loss against the current
/// value estimate, (b) fitted value iteration under the learned model.
/// The value starts at zero. A run whose value norm exceeds
/// 10 max|r| / (1 - gamma) is marked diverged and stopped, not discarded.
TrainResult train_itervaml(const TransitionDataset& dataset, const Vector& reward,
                           double discount, LowRankModel model, const TrainSchedule& schedule,
                           int horizon = 1, int loss_stride = 0);
TrainResult train_itervaml(const TransitionCounts& counts, const Vector& reward, double discount,
                           LowRankModel model, const TrainSchedule& schedule, int horizon = 1,
                           int loss_stride = 0);

/// Simultaneous Adam updates of Psi and the tabular value estimate on the
/// bootstrap loss; the target is a hard copy of the value refreshed every
/// target_refresh_period steps.
TrainResult train_muzero_joint(const TransitionDataset& dataset, const Vector& reward,
                               double discount, LowRankModel model, ValueTable v0,
                               const TrainSchedule& schedule, int loss_stride = 0);
TrainResult train_muzero_joint(const TransitionCounts& counts, const Vector& reward,
                               double discount, LowRankModel model, ValueTable v0,
                               const TrainSchedule& schedule, int loss_stride = 0);

/// Bootstrap loss for the model only (value frozen per outer iteration),
/// with the value updated by fitted value iteration in between; mirrors
/// train_itervaml's structure.
TrainResult train_muzero_model_with_td(const TransitionDataset& dataset, const Vector& reward,
                                       double discount, LowRankModel model,
                                       const TrainSchedule& schedule, int loss_stride = 0);
TrainResult train_muzero_model_with_td(const TransitionCounts& counts, const Vector& reward,
                                       double discount, LowRankModel model,
                                       const TrainSchedule& schedule, int loss_stride = 0);

/// Decision-agnostic baseline: fit the model by cross-entropy with the same
/// gradient budget, then run value iteration to convergence under it.
TrainResult train_mle(const TransitionDataset& dataset, const Vector& reward, double discount,
                      LowRankModel model, const TrainSchedule& schedule, int loss_stride = 0);
TrainResult train_mle(const TransitionCounts& counts, const Vector& reward, double discount,
                      LowRankModel model, const TrainSchedule& schedule, int loss_stride = 0);

}  // namespace vamlab
