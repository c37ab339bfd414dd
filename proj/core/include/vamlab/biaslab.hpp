#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vamlab/mdp.hpp"
#include "vamlab/models.hpp"

namespace vamlab {

/// Finite weighted target for the descent-direction identity: a probability
/// vector mu over the support and target values g on it.
struct DiscreteFunctional {
  Vector weights;  // mu, nonnegative, sums to 1 within 1e-12
  Vector values;   // g

  void validate() const;
  double mean() const { return weights.dot(values); }
  double variance() const;
};

/// L(f) = E[(f-g)^2] + E[f g] - E[f] E[g], all under mu.
double lemma2_loss(const Vector& f, const DiscreteFunctional& functional);

/// Closed-form global minimizer of L: f*(x) = (g(x) + E[g]) / 2, from the
/// pointwise normal equations (L is separable with Hessian 2 diag(mu)).
Vector lemma2_minimizer(const DiscreteFunctional& functional);

struct DirectionalDerivative {
  double variance = 0.0;        // Var_mu[g], the proof's value
  double fd_slope = 0.0;        // central difference of L(g - eps g) at eps = 0
  bool descent_confirmed = false;  // L(g - eps g) < L(g) for small eps when Var > 0
};
/// d/d-eps L(g - eps g) at 0 equals -Var_mu[g]; checks the descent claim.
DirectionalDerivative lemma2_directional_derivative(const DiscreteFunctional& functional);

/// Conditional means/second moments of the bootstrap target
/// t = r(x1) + gamma V'(x2) given x0, by exact enumeration.
struct TargetMoments {
  Vector mean;           // E[t | x0]
  Vector second_moment;  // E[t^2 | x0]
};
TargetMoments bootstrap_target_moments(const TabularMRP& mrp, const ValueTable& v_prime);

/// Exact population one-step bootstrap loss with the model fixed to the true
/// kernel and the value estimate read at the model's sampled next state:
///   E[ (V(x-hat-1) - r(x1) - gamma V'(x2))^2 ],  x0 ~ uniform.
double population_muzero_sample_loss(const TabularMRP& mrp, const ValueTable& v_hat,
                                     const TargetMoments& moments);

struct PopulationMinimizer {
  ValueTable minimizer;       // argmin over unconstrained tabular values
  ValueTable bellman_backup;  // T V'
  ValueTable gap;             // minimizer - T V' (zero on excluded states)
  std::vector<int> excluded_states;  // states unreachable as a model sample
  double gap_norm = 0.0;      // l2 over reachable states
};
/// Closed-form minimizer of the population bootstrap loss above, from the
/// normal equations built by exact enumeration of (x0, x1, x2) probabilities.
PopulationMinimizer muzero_population_minimizer(const TabularMRP& mrp,
                                                const ValueTable& v_prime);

/// Independent grid-search cross-oracle for the same minimizer. For two
/// states, a full box scan at the given resolution; for larger state counts,
/// staged coarse-to-fine refinement ending at the same resolution. Always
/// evaluates the enumerated loss directly, never the normal equations.
ValueTable muzero_minimizer_grid_search(const TabularMRP& mrp, const ValueTable& v_prime,
                                        double box_half_width = 2.0, double resolution = 1e-3);

struct BiasVariancePoint {
  double scale = 0.0;      // reward-gap factor s
  double variance = 0.0;   // E_mu[ Var(V*(x') | x) ]
  double bias_norm = 0.0;  // || minimizer - T V' ||_2
};
/// Two-state uniform family with the reward gap scaled by s: the bias norm
/// must be zero at zero variance and nondecreasing in the variance.
std::vector<BiasVariancePoint> bias_vs_variance_sweep(
    const std::vector<double>& scales = {0.0, 0.5, 1.0, 2.0, 4.0});

struct FloorCheck {
  double floor = 0.0;     // E_mu[ Var(V(x') | x) ]
  double achieved = 0.0;  // population loss of the predictor g(x) = E[V(x')|x]
  double excess = 0.0;    // achieved - floor
};
FloorCheck itervaml_floor_check(const TabularMRP& mrp, const ValueTable& value);

/// Per-state Var(V(x')|x) and its mean under the uniform sampling
/// distribution.
Vector conditional_variance(const TabularMRP& mrp, const ValueTable& value);
double expected_conditional_variance(const TabularMRP& mrp, const ValueTable& value);

/// Population one-step value-prediction loss of an arbitrary per-state
/// predictor m: E_mu E_{x'|x} [(m(x) - V(x'))^2], x0 ~ uniform.
double population_itervaml_loss_of_predictor(const TabularMRP& mrp, const ValueTable& value,
                                             const Vector& predictor);
double population_itervaml_loss(const TabularMRP& mrp, const Matrix& model_probs,
                                const ValueTable& value);

/// Exact population bootstrap loss in the tabular expectation form used for
/// training: E[ ((P-hat V)(x0) - r(x1) - gamma Vt(x2))^2 ].
double population_muzero_model_loss(const TabularMRP& mrp, const Matrix& model_probs,
                                    const ValueTable& v_hat, const ValueTable& v_target);
/// The closely related objective the model term optimizes:
/// E_mu[ ((P-hat V)(x) - (P T Vt)(x))^2 ]; identical argmin as the loss above.
double muzero_equivalent_objective(const TabularMRP& mrp, const Matrix& model_probs,
                                   const ValueTable& v_hat, const ValueTable& v_target);

// ---------------------------------------------------------------------------
// Verification driver

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;   // worst observed gap/deviation
  double threshold = 0.0;  // pass bound on `measured`
  double elapsed_s = 0.0;
  std::string detail;
};

struct VerifyOptions {
  uint64_t seed = 1;
  bool inject_fault = false;  // CI negative control: perturb the closed-form
                              // minimizer before the grid comparison
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_passed = false;
  double elapsed_s = 0.0;
};

VerifyReport run_theory_checks(const VerifyOptions& options);
std::string verify_report_json(const VerifyReport& report);
std::string verify_report_text(const VerifyReport& report);

}  // namespace vamlab
