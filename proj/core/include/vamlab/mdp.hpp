#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace vamlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A value function over states: used for V, V-hat, bootstrap targets and
/// the exact V*.
using ValueTable = Eigen::VectorXd;

/// Ground-truth Markov reward process with the policy absorbed into the
/// kernel: row-stochastic transition matrix, reward vector, discount < 1.
struct TabularMRP {
  int n_states = 0;
  Matrix transition;
  Vector reward;
  double discount = 0.0;

  /// Throws ConfigError unless rows sum to 1 within 1e-9, entries lie in
  /// [0,1], rewards are finite, and discount is in [0,1).
  void validate() const;
};

/// Generator parameters for the garnet benchmark family.
struct GarnetSpec {
  int n = 50;               // state count
  int m = 10;               // successors per state
  double rho = 0.5;         // probability of the base (permutation) successor
  double reward_bonus = 10.0;  // added to state 0
  double discount = 0.99;
  uint64_t seed = 0;

  void validate() const;
};

/// Garnet MRP: a random permutation matrix carries probability rho, and
/// m-1 additional distinct successors carry (1-rho)/(m-1) each. Rewards are
/// i.i.d. standard normal with reward_bonus added to state 0. Deterministic
/// given the seed; structure, rewards and datasets use separate tagged
/// streams so each is independently reproducible.
TabularMRP generate_garnet(const GarnetSpec& spec);

/// Solves (I - gamma P) V = r. Throws NumericError if the residual exceeds
/// 1e-8 (cannot happen for a valid row-stochastic P with gamma < 1).
ValueTable exact_value(const TabularMRP& mrp);

/// r + gamma P v.
ValueTable bellman_operator(const Matrix& transition, const Vector& reward, double discount,
                            const ValueTable& value);

/// Sampled 2-step sequences (x0, x1, x2); x0 uniform, then kernel draws.
struct TransitionDataset {
  int n_states = 0;
  std::vector<std::array<int, 3>> triples;

  int size() const { return static_cast<int>(triples.size()); }
  /// Longest loss horizon the sequences support.
  static constexpr int kMaxHorizon = 2;
};

TransitionDataset sample_transitions(const TabularMRP& mrp, int count, uint64_t seed);

/// Exact sufficient statistics of a dataset for the full-batch losses:
/// marginal counts of each position and pairwise count matrices. Losses
/// evaluated from these match the per-sample sums exactly.
struct TransitionCounts {
  int n_states = 0;
  int64_t total = 0;
  Vector start;          // counts of x0
  Vector mid;            // counts of x1
  Vector tail;           // counts of x2
  Matrix start_mid;      // counts of (x0, x1)
  Matrix start_tail;     // counts of (x0, x2)
  Matrix mid_tail;       // counts of (x1, x2)

  const Matrix& start_pairs(int offset) const;  // offset 1 -> start_mid, 2 -> start_tail
  const Vector& offset_marginal(int offset) const;
};

TransitionCounts count_transitions(const TransitionDataset& dataset);

// JSON layout (documented in README): matrix as a row-major array, the
// generating spec echoed back when known.
std::string mrp_to_json(const TabularMRP& mrp, const GarnetSpec* spec = nullptr);
TabularMRP mrp_from_json(const std::string& text, GarnetSpec* spec_out = nullptr);
std::string dataset_to_json(const TransitionDataset& dataset);
TransitionDataset dataset_from_json(const std::string& text);

}  // namespace vamlab
