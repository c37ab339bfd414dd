#pragma once

#include <cstdint>
#include <string>

#include "vamlab/autodiff.hpp"
#include "vamlab/mdp.hpp"

namespace vamlab {

/// Capacity-constrained transition model P-hat = row_softmax(Phi Psi^T) with
/// a fixed random representation Phi (n x k, i.i.d. standard normal) and a
/// trainable weight matrix Psi (n x k). Reducing k caps the model class so
/// that the true kernel becomes unrepresentable.
struct LowRankModel {
  int n = 0;
  int k = 0;
  uint64_t seed = 0;
  Matrix phi;  // fixed across training
  Matrix psi;  // trainable

  LowRankModel(int n_states, int rank, uint64_t seed);
  LowRankModel() = default;

  /// row_softmax(Phi Psi^T), plain evaluation off the tape.
  Matrix probs() const;
};

/// Registers psi as a parameter and phi as a constant on the tape and
/// returns the differentiable probability matrix.
struct ModelVars {
  ad::Var psi;
  ad::Var probs;
};
ModelVars model_probs_on_tape(ad::Tape& tape, const LowRankModel& model);

/// Cross-entropy of the model against observed transitions,
/// -(1/N) sum_i log P(x1_i | x0_i), evaluated in count form. Only the
/// probabilities of observed pairs enter the log. Throws NumericError when
/// any such probability falls below 1e-30.
ad::Var mle_loss(ad::Tape& tape, ad::Var probs, const TransitionCounts& counts);

/// n-step value-prediction loss,
/// (1/(N*h)) sum_i sum_{j<=h} ((P^j V)(x0_i) - V(xj_i))^2,
/// with V held constant (no gradient into the value function).
ad::Var itervaml_loss(ad::Tape& tape, ad::Var probs, const ValueTable& value,
                      const TransitionCounts& counts, int horizon);

/// Bootstrap-target loss,
/// (1/N) sum_i ((P V)(x0_i) - (r(x1_i) + gamma Vt(x2_i)))^2.
/// Gradients flow into probs and value_estimate; bootstrap_value is wrapped
/// in stop_gradient.
ad::Var muzero_model_loss(ad::Tape& tape, ad::Var probs, ad::Var value_estimate,
                          ad::Var bootstrap_value, const Vector& reward, double discount,
                          const TransitionCounts& counts);

// Convenience scalar evaluations (fresh tape per call).
double mle_loss_value(const LowRankModel& model, const TransitionCounts& counts);
double itervaml_loss_value(const LowRankModel& model, const ValueTable& value,
                           const TransitionCounts& counts, int horizon);
double muzero_model_loss_value(const LowRankModel& model, const ValueTable& value_estimate,
                               const ValueTable& bootstrap_value, const Vector& reward,
                               double discount, const TransitionCounts& counts);

std::string model_to_json(const LowRankModel& model);
LowRankModel model_from_json(const std::string& text);

}  // namespace vamlab
