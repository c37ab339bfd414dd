#pragma once

// Central finite-difference gradient oracle shared by the unit tests and the
// acceptance suite. A graph is expressed as a builder that registers the
// given parameter values and returns a scalar loss; the oracle recomputes
// the forward value under +/-h perturbations of every parameter entry and
// compares the slope against the analytic gradient from backward().

#include <functional>
#include <vector>

#include "vamlab/autodiff.hpp"

namespace vamlab::testing {

using GraphBuilder =
    std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

struct FdResult {
  double max_error = 0.0;  // relative where |analytic| >= 1e-8, absolute below
  int checked = 0;
};

inline double forward_value(const GraphBuilder& build, const std::vector<ad::Matrix>& values) {
  ad::Tape tape;
  std::vector<ad::Var> params;
  params.reserve(values.size());
  for (const auto& v : values) params.push_back(tape.param(v));
  return build(tape, params).value()(0, 0);
}

inline FdResult finite_difference_check(const GraphBuilder& build,
                                        std::vector<ad::Matrix> values, double h = 1e-5) {
  ad::Tape tape;
  std::vector<ad::Var> params;
  params.reserve(values.size());
  for (const auto& v : values) params.push_back(tape.param(v));
  ad::Var loss = build(tape, params);
  tape.backward(loss);
  std::vector<ad::Matrix> grads;
  grads.reserve(params.size());
  for (const auto& p : params) grads.push_back(tape.grad(p));

  FdResult result;
  for (size_t p = 0; p < values.size(); ++p) {
    for (int i = 0; i < values[p].rows(); ++i) {
      for (int j = 0; j < values[p].cols(); ++j) {
        const double saved = values[p](i, j);
        values[p](i, j) = saved + h;
        const double up = forward_value(build, values);
        values[p](i, j) = saved - h;
        const double down = forward_value(build, values);
        values[p](i, j) = saved;
        const double slope = (up - down) / (2.0 * h);
        const double analytic = grads[p](i, j);
        const double err = std::abs(analytic) >= 1e-8
                               ? std::abs(slope - analytic) / std::abs(analytic)
                               : std::abs(slope - analytic);
        result.max_error = std::max(result.max_error, err);
        ++result.checked;
      }
    }
  }
  return result;
}

}  // namespace vamlab::testing
