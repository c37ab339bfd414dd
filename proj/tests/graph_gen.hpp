#pragma once

// Random composite-graph generator for gradient checks: small graphs (a few
// ops, dims <= 8) over 1-3 parameters, always reduced to a scalar. log is
// only applied to nodes known strictly positive (softmax outputs and sums of
// positives), and stop_gradient is excluded here because finite differences
// see through it by construction.

#include <memory>
#include <utility>
#include <vector>

#include "fd_check.hpp"
#include "vamlab/autodiff.hpp"
#include "vamlab/rng.hpp"

namespace vamlab::testing {

struct RandomGraph {
  std::vector<ad::Matrix> params;
  GraphBuilder build;
};

inline ad::Matrix random_matrix(RngStream& rng, int rows, int cols, double scale = 1.0) {
  ad::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.next_gauss();
  }
  return m;
}

inline RandomGraph make_random_graph(RngStream& rng, int max_ops = 5) {
  struct Step {
    int op;
    int in0;
    int in1;
    double scalar;
    std::vector<int> indices;
  };
  const int n_params = 1 + rng.next_below(3);
  std::vector<std::pair<int, int>> shapes;
  std::vector<bool> positive;
  RandomGraph g;
  for (int p = 0; p < n_params; ++p) {
    const int r = 1 + rng.next_below(8);
    const int c = 1 + rng.next_below(8);
    g.params.push_back(random_matrix(rng, r, c));
    shapes.emplace_back(r, c);
    positive.push_back(false);
  }

  auto steps = std::make_shared<std::vector<Step>>();
  const int body_ops = 1 + rng.next_below(max_ops - 1);  // leave room for the reducer
  for (int s = 0; s < body_ops; ++s) {
    const int n_nodes = static_cast<int>(shapes.size());
    Step step{};
    const int a = rng.next_below(n_nodes);
    const auto [ar, ac] = shapes[static_cast<size_t>(a)];
    step.in0 = a;
    step.in1 = -1;
    // Candidate ops given the picked input; binary ops search for a partner.
    const int choice = rng.next_below(8);
    if (choice == 0) {  // add/sub/mul with a same-shape partner
      int partner = -1;
      for (int b = 0; b < n_nodes; ++b) {
        if (shapes[static_cast<size_t>(b)] == shapes[static_cast<size_t>(a)]) partner = b;
      }
      if (partner < 0) continue;
      step.op = rng.next_below(3);  // 0 add, 1 sub, 2 mul
      step.in1 = partner;
      positive.push_back(step.op == 0 && positive[static_cast<size_t>(a)] &&
                         positive[static_cast<size_t>(partner)]);
      shapes.emplace_back(ar, ac);
    } else if (choice == 1) {  // matmul with any conformable partner
      int partner = -1;
      for (int b = 0; b < n_nodes; ++b) {
        if (shapes[static_cast<size_t>(b)].first == ac) partner = b;
      }
      if (partner < 0) continue;
      step.op = 3;
      step.in1 = partner;
      positive.push_back(false);
      shapes.emplace_back(ar, shapes[static_cast<size_t>(partner)].second);
    } else if (choice == 2) {
      step.op = 4;  // transpose
      positive.push_back(positive[static_cast<size_t>(a)]);
      shapes.emplace_back(ac, ar);
    } else if (choice == 3) {
      step.op = 5;  // square
      positive.push_back(false);  // zero entries possible
      shapes.emplace_back(ar, ac);
    } else if (choice == 4) {
      step.op = 6;  // row_softmax
      positive.push_back(true);
      shapes.emplace_back(ar, ac);
    } else if (choice == 5) {
      step.op = positive[static_cast<size_t>(a)] ? 7 : 8;  // log on positives, else scalar_mul
      step.scalar = 0.5 + rng.next_double();
      positive.push_back(false);
      shapes.emplace_back(ar, ac);
    } else if (choice == 6) {
      step.op = 9;  // row_sum
      positive.push_back(positive[static_cast<size_t>(a)]);
      shapes.emplace_back(ar, 1);
    } else {
      step.op = 10;  // gather_rows
      const int picks = 1 + rng.next_below(4);
      for (int i = 0; i < picks; ++i) step.indices.push_back(rng.next_below(ar));
      positive.push_back(positive[static_cast<size_t>(a)]);
      shapes.emplace_back(picks, ac);
    }
    steps->push_back(std::move(step));
  }

  const int param_count = n_params;
  g.build = [steps, param_count](ad::Tape& tape, const std::vector<ad::Var>& params) {
    std::vector<ad::Var> nodes(params.begin(), params.end());
    for (const auto& s : *steps) {
      ad::Var a = nodes[static_cast<size_t>(s.in0)];
      switch (s.op) {
        case 0: nodes.push_back(tape.add(a, nodes[static_cast<size_t>(s.in1)])); break;
        case 1: nodes.push_back(tape.sub(a, nodes[static_cast<size_t>(s.in1)])); break;
        case 2: nodes.push_back(tape.mul(a, nodes[static_cast<size_t>(s.in1)])); break;
        case 3: nodes.push_back(tape.matmul(a, nodes[static_cast<size_t>(s.in1)])); break;
        case 4: nodes.push_back(tape.transpose(a)); break;
        case 5: nodes.push_back(tape.square(a)); break;
        case 6: nodes.push_back(tape.row_softmax(a)); break;
        case 7: nodes.push_back(tape.log(a)); break;
        case 8: nodes.push_back(tape.scalar_mul(s.scalar, a)); break;
        case 9: nodes.push_back(tape.row_sum(a)); break;
        case 10: nodes.push_back(tape.gather_rows(a, s.indices)); break;
        default: break;
      }
    }
    // Scalarize: mean of the last node, plus the mean of every param so the
    // loss always depends on each of them.
    ad::Var total = tape.mean(nodes.back());
    for (int p = 0; p < param_count; ++p) {
      total = tape.add(total, tape.mean(nodes[static_cast<size_t>(p)]));
    }
    return total;
  };
  return g;
}

}  // namespace vamlab::testing
