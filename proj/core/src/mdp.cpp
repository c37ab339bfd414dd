#include "vamlab/mdp.hpp"

#include <Eigen/LU>
#include <cmath>
#include <json.hpp>

#include "vamlab/errors.hpp"
#include "vamlab/rng.hpp"

namespace vamlab {

void TabularMRP::validate() const {
  if (n_states <= 0) throw ConfigError("TabularMRP: n_states must be positive");
  if (transition.rows() != n_states || transition.cols() != n_states) {
    throw ConfigError("TabularMRP: transition must be n x n");
  }
  if (reward.size() != n_states) throw ConfigError("TabularMRP: reward must have length n");
  if (!(discount >= 0.0 && discount < 1.0)) {
    throw ConfigError("TabularMRP: discount must lie in [0, 1)");
  }
  if (!reward.allFinite() || !transition.allFinite()) {
    throw ConfigError("TabularMRP: non-finite entries");
  }
  for (int i = 0; i < n_states; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < n_states; ++j) {
      const double p = transition(i, j);
      if (p < 0.0 || p > 1.0) throw ConfigError("TabularMRP: probability outside [0, 1]");
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > 1e-9) {
      throw ConfigError("TabularMRP: row " + std::to_string(i) + " sums to " +
                        std::to_string(row_sum));
    }
  }
}

void GarnetSpec::validate() const {
  if (n <= 0) throw ConfigError("GarnetSpec: n must be positive");
  if (m < 1 || m > n) throw ConfigError("GarnetSpec: need 1 <= m <= n");
  if (rho < 0.0 || rho > 1.0) throw ConfigError("GarnetSpec: rho must lie in [0, 1]");
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("GarnetSpec: discount in [0, 1)");
}

TabularMRP generate_garnet(const GarnetSpec& spec) {
  spec.validate();
  const int n = spec.n;
  TabularMRP mrp;
  mrp.n_states = n;
  mrp.discount = spec.discount;
  mrp.transition = Matrix::Zero(n, n);

  RngStream structure(spec.seed, "structure");
  const std::vector<int> base = structure.permutation(n);
  // m = 1 degenerates to the bare permutation regardless of rho.
  const double base_prob = spec.m == 1 ? 1.0 : spec.rho;
  const double extra_prob = spec.m == 1 ? 0.0 : (1.0 - spec.rho) / (spec.m - 1);
  std::vector<int> candidates(static_cast<size_t>(n) - 1);
  for (int s = 0; s < n; ++s) {
    mrp.transition(s, base[static_cast<size_t>(s)]) = base_prob;
    if (spec.m == 1) continue;
    // m-1 distinct extra successors, never the base one (partial Fisher-Yates).
    int w = 0;
    for (int j = 0; j < n; ++j) {
      if (j != base[static_cast<size_t>(s)]) candidates[static_cast<size_t>(w++)] = j;
    }
    for (int d = 0; d < spec.m - 1; ++d) {
      const int pick = d + structure.next_below(w - d);
      std::swap(candidates[static_cast<size_t>(d)], candidates[static_cast<size_t>(pick)]);
      mrp.transition(s, candidates[static_cast<size_t>(d)]) += extra_prob;
    }
  }

  RngStream rewards(spec.seed, "rewards");
  mrp.reward.resize(n);
  for (int s = 0; s < n; ++s) mrp.reward(s) = rewards.next_gauss();
  mrp.reward(0) += spec.reward_bonus;

  mrp.validate();
  return mrp;
}

ValueTable exact_value(const TabularMRP& mrp) {
  if (!(mrp.discount < 1.0)) throw ConfigError("exact_value: discount must be < 1");
  const Matrix system =
      Matrix::Identity(mrp.n_states, mrp.n_states) - mrp.discount * mrp.transition;
  const ValueTable value = system.partialPivLu().solve(mrp.reward);
  const double residual = (system * value - mrp.reward).lpNorm<Eigen::Infinity>();
  if (!value.allFinite() || residual >= 1e-8) {
    throw NumericError("exact_value: linear solve residual " + std::to_string(residual));
  }
  return value;
}

ValueTable bellman_operator(const Matrix& transition, const Vector& reward, double discount,
                            const ValueTable& value) {
  if (transition.cols() != value.size() || transition.rows() != reward.size()) {
    throw ConfigError("bellman_operator: shape mismatch");
  }
  return reward + discount * (transition * value);
}

namespace {

int sample_row(const Matrix& transition, int state, RngStream& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  const int n = static_cast<int>(transition.cols());
  for (int j = 0; j < n; ++j) {
    acc += transition(state, j);
    if (u < acc) return j;
  }
  // u landed in the rounding slack past the last positive entry.
  for (int j = n - 1; j >= 0; --j) {
    if (transition(state, j) > 0.0) return j;
  }
  return n - 1;
}

}  // namespace

TransitionDataset sample_transitions(const TabularMRP& mrp, int count, uint64_t seed) {
  if (count < 1) throw ConfigError("sample_transitions: count must be >= 1");
  TransitionDataset data;
  data.n_states = mrp.n_states;
  data.triples.resize(static_cast<size_t>(count));
  RngStream rng(seed, "data");
  for (int i = 0; i < count; ++i) {
    const int x0 = rng.next_below(mrp.n_states);
    const int x1 = sample_row(mrp.transition, x0, rng);
    const int x2 = sample_row(mrp.transition, x1, rng);
    data.triples[static_cast<size_t>(i)] = {x0, x1, x2};
  }
  return data;
}

const Matrix& TransitionCounts::start_pairs(int offset) const {
  if (offset == 1) return start_mid;
  if (offset == 2) return start_tail;
  throw ConfigError("TransitionCounts: offset must be 1 or 2");
}

const Vector& TransitionCounts::offset_marginal(int offset) const {
  if (offset == 1) return mid;
  if (offset == 2) return tail;
  throw ConfigError("TransitionCounts: offset must be 1 or 2");
}

TransitionCounts count_transitions(const TransitionDataset& dataset) {
  if (dataset.size() == 0) throw ConfigError("count_transitions: empty dataset");
  const int n = dataset.n_states;
  TransitionCounts c;
  c.n_states = n;
  c.total = dataset.size();
  c.start = Vector::Zero(n);
  c.mid = Vector::Zero(n);
  c.tail = Vector::Zero(n);
  c.start_mid = Matrix::Zero(n, n);
  c.start_tail = Matrix::Zero(n, n);
  c.mid_tail = Matrix::Zero(n, n);
  for (const auto& t : dataset.triples) {
    c.start(t[0]) += 1.0;
    c.mid(t[1]) += 1.0;
    c.tail(t[2]) += 1.0;
    c.start_mid(t[0], t[1]) += 1.0;
    c.start_tail(t[0], t[2]) += 1.0;
    c.mid_tail(t[1], t[2]) += 1.0;
  }
  return c;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> flat(static_cast<size_t>(m.size()));
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      flat[static_cast<size_t>(i * m.cols() + j)] = m(i, j);
    }
  }
  return flat;
}

Matrix matrix_from_json(const nlohmann::json& j, int rows, int cols) {
  const auto flat = j.get<std::vector<double>>();
  if (flat.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols)) {
    throw ConfigError("matrix_from_json: element count mismatch");
  }
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) m(i, c) = flat[static_cast<size_t>(i * cols + c)];
  }
  return m;
}

nlohmann::json spec_to_json(const GarnetSpec& s) {
  return {{"n", s.n},
          {"m", s.m},
          {"rho", s.rho},
          {"reward_bonus", s.reward_bonus},
          {"discount", s.discount},
          {"seed", s.seed}};
}

GarnetSpec spec_from_json(const nlohmann::json& j) {
  GarnetSpec s;
  s.n = j.at("n").get<int>();
  s.m = j.at("m").get<int>();
  s.rho = j.at("rho").get<double>();
  s.reward_bonus = j.at("reward_bonus").get<double>();
  s.discount = j.at("discount").get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  return s;
}

}  // namespace

std::string mrp_to_json(const TabularMRP& mrp, const GarnetSpec* spec) {
  nlohmann::json j;
  j["n_states"] = mrp.n_states;
  j["discount"] = mrp.discount;
  j["transition_row_major"] = matrix_to_json(mrp.transition);
  j["reward"] = std::vector<double>(mrp.reward.data(), mrp.reward.data() + mrp.reward.size());
  if (spec != nullptr) j["garnet_spec"] = spec_to_json(*spec);
  return j.dump(2);
}

TabularMRP mrp_from_json(const std::string& text, GarnetSpec* spec_out) {
  const auto j = nlohmann::json::parse(text);
  TabularMRP mrp;
  mrp.n_states = j.at("n_states").get<int>();
  mrp.discount = j.at("discount").get<double>();
  mrp.transition = matrix_from_json(j.at("transition_row_major"), mrp.n_states, mrp.n_states);
  const auto r = j.at("reward").get<std::vector<double>>();
  if (r.size() != static_cast<size_t>(mrp.n_states)) {
    throw ConfigError("mrp_from_json: reward length mismatch");
  }
  mrp.reward = Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size()));
  if (spec_out != nullptr && j.contains("garnet_spec")) {
    *spec_out = spec_from_json(j.at("garnet_spec"));
  }
  mrp.validate();
  return mrp;
}

std::string dataset_to_json(const TransitionDataset& dataset) {
  nlohmann::json j;
  j["n_states"] = dataset.n_states;
  j["count"] = dataset.size();
  nlohmann::json triples = nlohmann::json::array();
  for (const auto& t : dataset.triples) triples.push_back({t[0], t[1], t[2]});
  j["triples"] = std::move(triples);
  return j.dump();
}

TransitionDataset dataset_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  TransitionDataset d;
  d.n_states = j.at("n_states").get<int>();
  for (const auto& t : j.at("triples")) {
    d.triples.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
  }
  if (d.size() != j.at("count").get<int>()) throw ConfigError("dataset_from_json: count mismatch");
  return d;
}

}  // namespace vamlab
