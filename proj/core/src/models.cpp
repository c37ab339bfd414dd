#include "vamlab/models.hpp"

#include <json.hpp>

#include "vamlab/errors.hpp"
#include "vamlab/rng.hpp"

namespace vamlab {

LowRankModel::LowRankModel(int n_states, int rank, uint64_t model_seed)
    : n(n_states), k(rank), seed(model_seed) {
  if (n <= 0 || k <= 0) throw ConfigError("LowRankModel: n and k must be positive");
  RngStream stream(seed, "phi");
  phi.resize(n, k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) phi(i, j) = stream.next_gauss();
  }
  psi = Matrix::Zero(n, k);
}

Matrix LowRankModel::probs() const {
  Matrix logits = phi * psi.transpose();
  Matrix out = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

ModelVars model_probs_on_tape(ad::Tape& tape, const LowRankModel& model) {
  ad::Var psi = tape.param(model.psi);
  ad::Var phi = tape.constant(model.phi);
  ad::Var probs = tape.row_softmax(tape.matmul(phi, tape.transpose(psi)));
  return {psi, probs};
}

ad::Var mle_loss(ad::Tape& tape, ad::Var probs, const TransitionCounts& counts) {
  if (counts.total <= 0) throw ConfigError("mle_loss: empty dataset");
  const int n = counts.n_states;
  if (probs.rows() != n || probs.cols() != n) throw ConfigError("mle_loss: probs must be n x n");
  // Only observed (x0, x1) pairs enter the log; unobserved entries are
  // replaced by 1 so they contribute log(1) = 0 against a zero count.
  Matrix mask(n, n), fill(n, n);
  double min_observed = 1.0;
  const Matrix p = probs.value();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const bool seen = counts.start_mid(i, j) > 0.0;
      mask(i, j) = seen ? 1.0 : 0.0;
      fill(i, j) = seen ? 0.0 : 1.0;
      if (seen && p(i, j) < min_observed) min_observed = p(i, j);
    }
  }
  if (min_observed < 1e-30) {
    throw NumericError("mle_loss: observed transition probability below 1e-30");
  }
  ad::Var masked = tape.add(tape.mul(probs, tape.constant(mask)), tape.constant(fill));
  ad::Var weighted = tape.mul(tape.constant(counts.start_mid), tape.log(masked));
  return tape.scalar_mul(-1.0 / static_cast<double>(counts.total), tape.sum_all(weighted));
}

ad::Var itervaml_loss(ad::Tape& tape, ad::Var probs, const ValueTable& value,
                      const TransitionCounts& counts, int horizon) {
  if (horizon < 1) throw ConfigError("itervaml_loss: horizon must be >= 1");
  if (horizon > TransitionDataset::kMaxHorizon) {
    throw ConfigError("itervaml_loss: horizon " + std::to_string(horizon) +
                      " exceeds dataset sequence length");
  }
  if (value.size() != counts.n_states) throw ConfigError("itervaml_loss: value length mismatch");

  ad::Var v = tape.constant(value);
  ad::Var start_counts = tape.constant(counts.start);
  ad::Var power = probs;  // P-hat^j
  ad::Var total = tape.constant_scalar(0.0);
  for (int j = 1; j <= horizon; ++j) {
    if (j > 1) power = tape.matmul(power, probs);
    ad::Var model_value = tape.matmul(power, v);  // (P^j V)(x0) per state
    ad::Var quad = tape.dot(start_counts, tape.square(model_value));
    ad::Var cross = tape.dot(model_value, tape.constant(counts.start_pairs(j) * value));
    const double target_sq = counts.offset_marginal(j).dot(value.array().square().matrix());
    ad::Var term = tape.add(tape.sub(quad, tape.scalar_mul(2.0, cross)),
                            tape.constant_scalar(target_sq));
    total = tape.add(total, term);
  }
  return tape.scalar_mul(1.0 / (static_cast<double>(counts.total) * horizon), total);
}

ad::Var muzero_model_loss(ad::Tape& tape, ad::Var probs, ad::Var value_estimate,
                          ad::Var bootstrap_value, const Vector& reward, double discount,
                          const TransitionCounts& counts) {
  const int n = counts.n_states;
  if (value_estimate.rows() != n || value_estimate.cols() != 1) {
    throw ConfigError("muzero_model_loss: value estimate must be n x 1");
  }
  if (bootstrap_value.rows() != n || bootstrap_value.cols() != 1) {
    throw ConfigError("muzero_model_loss: bootstrap value must be n x 1");
  }
  if (reward.size() != n) throw ConfigError("muzero_model_loss: reward length mismatch");

  ad::Var target = tape.stop_gradient(bootstrap_value);
  ad::Var model_value = tape.matmul(probs, value_estimate);  // (P V)(x0)
  ad::Var quad = tape.dot(tape.constant(counts.start), tape.square(model_value));

  // Per-start sums of the bootstrap targets: u = C01 r + gamma C02 Vt.
  ad::Var u = tape.add(tape.constant(counts.start_mid * reward),
                       tape.scalar_mul(discount, tape.matmul(tape.constant(counts.start_tail),
                                                             target)));
  ad::Var cross = tape.scalar_mul(2.0, tape.dot(model_value, u));

  // Sum of squared targets: r^2 counts, the (x1, x2) cross term and Vt^2 counts.
  const double reward_sq = counts.mid.dot(reward.array().square().matrix());
  ad::Var mixed = tape.scalar_mul(2.0 * discount,
                                  tape.dot(tape.constant(counts.mid_tail.transpose() * reward),
                                           target));
  ad::Var target_quad = tape.scalar_mul(discount * discount,
                                        tape.dot(tape.constant(counts.tail),
                                                 tape.square(target)));
  ad::Var target_sq =
      tape.add(tape.add(tape.constant_scalar(reward_sq), mixed), target_quad);

  ad::Var total = tape.add(tape.sub(quad, cross), target_sq);
  return tape.scalar_mul(1.0 / static_cast<double>(counts.total), total);
}

double mle_loss_value(const LowRankModel& model, const TransitionCounts& counts) {
  ad::Tape tape;
  ModelVars mv = model_probs_on_tape(tape, model);
  return mle_loss(tape, mv.probs, counts).value()(0, 0);
}

double itervaml_loss_value(const LowRankModel& model, const ValueTable& value,
                           const TransitionCounts& counts, int horizon) {
  ad::Tape tape;
  ModelVars mv = model_probs_on_tape(tape, model);
  return itervaml_loss(tape, mv.probs, value, counts, horizon).value()(0, 0);
}

double muzero_model_loss_value(const LowRankModel& model, const ValueTable& value_estimate,
                               const ValueTable& bootstrap_value, const Vector& reward,
                               double discount, const TransitionCounts& counts) {
  ad::Tape tape;
  ModelVars mv = model_probs_on_tape(tape, model);
  return muzero_model_loss(tape, mv.probs, tape.constant(value_estimate),
                           tape.constant(bootstrap_value), reward, discount, counts)
      .value()(0, 0);
}

namespace {

nlohmann::json matrix_rows(const Matrix& m) {
  std::vector<double> flat(static_cast<size_t>(m.size()));
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) flat[static_cast<size_t>(i * m.cols() + j)] = m(i, j);
  }
  return flat;
}

Matrix matrix_from_rows(const nlohmann::json& j, int rows, int cols) {
  const auto flat = j.get<std::vector<double>>();
  if (flat.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols)) {
    throw ConfigError("model_from_json: element count mismatch");
  }
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) m(i, c) = flat[static_cast<size_t>(i * cols + c)];
  }
  return m;
}

}  // namespace

std::string model_to_json(const LowRankModel& model) {
  nlohmann::json j;
  j["n"] = model.n;
  j["k"] = model.k;
  j["seed"] = model.seed;
  j["phi_row_major"] = matrix_rows(model.phi);
  j["psi_row_major"] = matrix_rows(model.psi);
  return j.dump();
}

LowRankModel model_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  LowRankModel m;
  m.n = j.at("n").get<int>();
  m.k = j.at("k").get<int>();
  m.seed = j.at("seed").get<uint64_t>();
  m.phi = matrix_from_rows(j.at("phi_row_major"), m.n, m.k);
  m.psi = matrix_from_rows(j.at("psi_row_major"), m.n, m.k);
  return m;
}

}  // namespace vamlab
