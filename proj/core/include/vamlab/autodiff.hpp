#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "vamlab/errors.hpp"

namespace vamlab::ad {

using Matrix = Eigen::MatrixXd;

enum class Op : uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,        // elementwise
  kScalarMul,  // by a fixed double
  kMatmul,
  kTranspose,
  kSquare,
  kRowSoftmax,
  kRowSum,  // (r,c) -> (r,1)
  kColSum,  // (r,c) -> (1,c)
  kSumAll,  // (r,c) -> (1,1)
  kMean,    // (r,c) -> (1,1)
  kLog,
  kGatherRows,  // rows picked by an index list, with scatter-add backward
  kDot,         // Frobenius inner product of same-shape operands -> (1,1)
  kStopGradient,
};

const char* op_name(Op op);

class Tape;

/// Handle to a tensor recorded on a Tape. Cheap to copy; valid until reset().
class Var {
 public:
  Var() = default;
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  const Matrix& value() const;
  const Matrix& grad() const;
  bool requires_grad() const;
  int rows() const;
  int cols() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Define-by-run reverse-mode tape over dense matrices. The graph is rebuilt
/// every training step; backward() walks the recorded nodes once in reverse
/// order, so identical tapes produce bitwise-identical gradients. Every
/// forward op validates shapes (ConfigError) and rejects non-finite outputs
/// (NumericError naming the op). Single-threaded within one training run.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable leaf; receives a gradient in backward().
  Var param(Matrix value);
  /// Non-trainable leaf.
  Var constant(Matrix value);
  Var constant_scalar(double value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scalar_mul(double s, Var a);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var square(Var a);
  Var row_softmax(Var a);
  Var row_sum(Var a);
  Var col_sum(Var a);
  Var sum_all(Var a);
  Var mean(Var a);
  Var log(Var a);
  Var gather_rows(Var a, std::vector<int> rows);
  Var dot(Var a, Var b);
  Var stop_gradient(Var a);

  /// Gradient of a scalar loss with respect to every requires_grad node.
  /// Parameters the loss does not depend on receive an all-zero gradient.
  /// Throws std::logic_error if loss is not 1x1.
  void backward(Var loss);

  const Matrix& value(Var v) const { return node(v).value; }
  /// Valid after backward(), for requires_grad nodes only.
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Drops all nodes (capacity retained); outstanding Vars become invalid.
  void reset();
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;  // allocated in backward() for requires_grad nodes
    Op op = Op::kLeaf;
    int input0 = -1;
    int input1 = -1;
    bool requires_grad = false;
    double scalar = 0.0;         // kScalarMul
    std::vector<int> indices;    // kGatherRows
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  Var push(Node node, Op op);
  Var unary(Op op, Var a, Matrix value);
  Var binary(Op op, Var a, Var b, Matrix value);
  void check_same_tape(Var a) const;
  void backward_into(const Node& n);

  std::vector<Node> nodes_;
};

// Expression sugar; both operands must live on the same tape.
inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator*(double s, Var a) { return a.tape()->scalar_mul(s, a); }
inline Var matmul(Var a, Var b) { return a.tape()->matmul(a, b); }
inline Var transpose(Var a) { return a.tape()->transpose(a); }
inline Var square(Var a) { return a.tape()->square(a); }
inline Var row_softmax(Var a) { return a.tape()->row_softmax(a); }
inline Var row_sum(Var a) { return a.tape()->row_sum(a); }
inline Var col_sum(Var a) { return a.tape()->col_sum(a); }
inline Var sum_all(Var a) { return a.tape()->sum_all(a); }
inline Var mean(Var a) { return a.tape()->mean(a); }
inline Var log(Var a) { return a.tape()->log(a); }
inline Var gather_rows(Var a, std::vector<int> rows) {
  return a.tape()->gather_rows(a, std::move(rows));
}
inline Var dot(Var a, Var b) { return a.tape()->dot(a, b); }
inline Var stop_gradient(Var a) { return a.tape()->stop_gradient(a); }

inline const Matrix& Var::value() const { return tape_->value(*this); }
inline const Matrix& Var::grad() const { return tape_->grad(*this); }
inline bool Var::requires_grad() const { return tape_->requires_grad(*this); }
inline int Var::rows() const { return static_cast<int>(value().rows()); }
inline int Var::cols() const { return static_cast<int>(value().cols()); }

}  // namespace vamlab::ad
