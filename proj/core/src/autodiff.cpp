#include "vamlab/autodiff.hpp"

#include <string>
#include <utility>

namespace vamlab::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScalarMul: return "scalar_mul";
    case Op::kMatmul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kSquare: return "square";
    case Op::kRowSoftmax: return "row_softmax";
    case Op::kRowSum: return "row_sum";
    case Op::kColSum: return "col_sum";
    case Op::kSumAll: return "sum_all";
    case Op::kMean: return "mean";
    case Op::kLog: return "log";
    case Op::kGatherRows: return "gather_rows";
    case Op::kDot: return "dot";
    case Op::kStopGradient: return "stop_gradient";
  }
  return "?";
}

namespace {

void check_finite(const Matrix& m, Op op) {
  if (!m.allFinite()) {
    throw NumericError(std::string("non-finite output from op ") + op_name(op));
  }
}

void check_same_shape(const Matrix& a, const Matrix& b, Op op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError(std::string(op_name(op)) + ": shape mismatch (" +
                      std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                      std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (v.tape() != this || v.id() < 0 || v.id() >= size()) {
    throw std::logic_error("Var does not belong to this tape");
  }
  return nodes_[static_cast<size_t>(v.id())];
}

Tape::Node& Tape::node(Var v) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

Var Tape::push(Node n, Op op) {
  check_finite(n.value, op);
  n.op = op;
  nodes_.push_back(std::move(n));
  return Var(this, size() - 1);
}

Var Tape::param(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n), Op::kLeaf);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n), Op::kLeaf);
}

Var Tape::constant_scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var Tape::unary(Op op, Var a, Matrix value) {
  check_same_tape(a);
  Node n;
  n.value = std::move(value);
  n.input0 = a.id();
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), op);
}

Var Tape::binary(Op op, Var a, Var b, Matrix value) {
  check_same_tape(a);
  check_same_tape(b);
  Node n;
  n.value = std::move(value);
  n.input0 = a.id();
  n.input1 = b.id();
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n), op);
}

void Tape::check_same_tape(Var a) const {
  if (a.tape() != this) throw std::logic_error("operands recorded on different tapes");
}

Var Tape::add(Var a, Var b) {
  check_same_shape(node(a).value, node(b).value, Op::kAdd);
  return binary(Op::kAdd, a, b, node(a).value + node(b).value);
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(node(a).value, node(b).value, Op::kSub);
  return binary(Op::kSub, a, b, node(a).value - node(b).value);
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(node(a).value, node(b).value, Op::kMul);
  return binary(Op::kMul, a, b, node(a).value.cwiseProduct(node(b).value));
}

Var Tape::scalar_mul(double s, Var a) {
  Var v = unary(Op::kScalarMul, a, s * node(a).value);
  node(v).scalar = s;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& ma = node(a).value;
  const Matrix& mb = node(b).value;
  if (ma.cols() != mb.rows()) {
    throw ConfigError("matmul: inner dimensions " + std::to_string(ma.cols()) + " vs " +
                      std::to_string(mb.rows()));
  }
  return binary(Op::kMatmul, a, b, ma * mb);
}

Var Tape::transpose(Var a) { return unary(Op::kTranspose, a, node(a).value.transpose()); }

Var Tape::square(Var a) { return unary(Op::kSquare, a, node(a).value.array().square()); }

Var Tape::row_softmax(Var a) {
  // Row-max subtraction: logits from Phi Psi^T grow during training.
  const Matrix& m = node(a).value;
  Matrix out = (m.colwise() - m.rowwise().maxCoeff()).array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return unary(Op::kRowSoftmax, a, std::move(out));
}

Var Tape::row_sum(Var a) { return unary(Op::kRowSum, a, node(a).value.rowwise().sum()); }

Var Tape::col_sum(Var a) { return unary(Op::kColSum, a, node(a).value.colwise().sum()); }

Var Tape::sum_all(Var a) {
  Matrix out(1, 1);
  out(0, 0) = node(a).value.sum();
  return unary(Op::kSumAll, a, std::move(out));
}

Var Tape::mean(Var a) {
  Matrix out(1, 1);
  out(0, 0) = node(a).value.mean();
  return unary(Op::kMean, a, std::move(out));
}

Var Tape::log(Var a) {
  if (node(a).value.minCoeff() <= 0.0) {
    throw NumericError("log: input must be strictly positive");
  }
  return unary(Op::kLog, a, node(a).value.array().log());
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const Matrix& m = node(a).value;
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= m.rows()) {
      throw ConfigError("gather_rows: index " + std::to_string(rows[i]) + " out of range");
    }
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  Var v = unary(Op::kGatherRows, a, std::move(out));
  node(v).indices = std::move(rows);
  return v;
}

Var Tape::dot(Var a, Var b) {
  check_same_shape(node(a).value, node(b).value, Op::kDot);
  Matrix out(1, 1);
  out(0, 0) = node(a).value.cwiseProduct(node(b).value).sum();
  return binary(Op::kDot, a, b, std::move(out));
}

Var Tape::stop_gradient(Var a) {
  check_same_tape(a);
  Node n;
  n.value = node(a).value;
  n.input0 = a.id();
  n.requires_grad = false;
  return push(std::move(n), Op::kStopGradient);
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad) throw std::logic_error("grad requested for non-trainable node");
  if (n.grad.size() == 0) throw std::logic_error("grad requested before backward()");
  return n.grad;
}

void Tape::backward(Var loss) {
  const Node& ln = node(loss);
  if (ln.value.rows() != 1 || ln.value.cols() != 1) {
    throw std::logic_error("backward: loss must be a 1x1 scalar");
  }
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    } else {
      n.grad.resize(0, 0);
    }
  }
  Node& root = nodes_[static_cast<size_t>(loss.id())];
  if (!root.requires_grad) return;  // loss depends on no parameter: all grads stay zero
  root.grad(0, 0) = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    const Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || n.op == Op::kLeaf) continue;
    backward_into(n);
  }
}

void Tape::backward_into(const Node& n) {
  auto in = [&](int id) -> Node& { return nodes_[static_cast<size_t>(id)]; };
  auto wants = [&](int id) { return id >= 0 && in(id).requires_grad; };
  const Matrix& g = n.grad;

  switch (n.op) {
    case Op::kAdd:
      if (wants(n.input0)) in(n.input0).grad += g;
      if (wants(n.input1)) in(n.input1).grad += g;
      break;
    case Op::kSub:
      if (wants(n.input0)) in(n.input0).grad += g;
      if (wants(n.input1)) in(n.input1).grad -= g;
      break;
    case Op::kMul:
      if (wants(n.input0)) in(n.input0).grad += g.cwiseProduct(in(n.input1).value);
      if (wants(n.input1)) in(n.input1).grad += g.cwiseProduct(in(n.input0).value);
      break;
    case Op::kScalarMul:
      if (wants(n.input0)) in(n.input0).grad += n.scalar * g;
      break;
    case Op::kMatmul:
      if (wants(n.input0)) in(n.input0).grad.noalias() += g * in(n.input1).value.transpose();
      if (wants(n.input1)) in(n.input1).grad.noalias() += in(n.input0).value.transpose() * g;
      break;
    case Op::kTranspose:
      if (wants(n.input0)) in(n.input0).grad += g.transpose();
      break;
    case Op::kSquare:
      if (wants(n.input0)) in(n.input0).grad += 2.0 * in(n.input0).value.cwiseProduct(g);
      break;
    case Op::kRowSoftmax:
      if (wants(n.input0)) {
        // dA = S .* (g - rowwise <g, S>)
        const Matrix& s = n.value;
        Eigen::VectorXd rowdots = g.cwiseProduct(s).rowwise().sum();
        in(n.input0).grad += s.cwiseProduct(g.colwise() - rowdots);
      }
      break;
    case Op::kRowSum:
      if (wants(n.input0)) {
        Node& a = in(n.input0);
        a.grad += g.replicate(1, a.value.cols());
      }
      break;
    case Op::kColSum:
      if (wants(n.input0)) {
        Node& a = in(n.input0);
        a.grad += g.replicate(a.value.rows(), 1);
      }
      break;
    case Op::kSumAll:
      if (wants(n.input0)) in(n.input0).grad.array() += g(0, 0);
      break;
    case Op::kMean:
      if (wants(n.input0)) {
        Node& a = in(n.input0);
        a.grad.array() += g(0, 0) / static_cast<double>(a.value.size());
      }
      break;
    case Op::kLog:
      if (wants(n.input0)) in(n.input0).grad += g.cwiseQuotient(in(n.input0).value);
      break;
    case Op::kGatherRows:
      if (wants(n.input0)) {
        Node& a = in(n.input0);
        for (size_t i = 0; i < n.indices.size(); ++i) {
          a.grad.row(n.indices[i]) += g.row(static_cast<Eigen::Index>(i));
        }
      }
      break;
    case Op::kDot:
      if (wants(n.input0)) in(n.input0).grad += g(0, 0) * in(n.input1).value;
      if (wants(n.input1)) in(n.input1).grad += g(0, 0) * in(n.input0).value;
      break;
    case Op::kStopGradient:
    case Op::kLeaf:
      break;
  }
}

void Tape::reset() { nodes_.clear(); }

}  // namespace vamlab::ad
