// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every operation applied to its Vars in creation order, so
// the node list is already topologically sorted and backward() is a single
// reverse sweep. A tape can be differentiated once; build a new one for
// the next forward pass.

#ifndef DANET_TAPE_H_
#define DANET_TAPE_H_

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace danet::nn {

using Matrix = Eigen::MatrixXd;
using Gradients = std::map<std::string, Matrix>;

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  // Receives the node's output value and the gradient flowing into it, and
  // pushes contributions to its inputs via accumulate().
  using Backprop =
      std::function<void(Tape&, const Matrix& value, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Registers a named trainable leaf. Registering the same name again
  // returns the existing node.
  Var parameter(const std::string& name, const Matrix& value);
  Var record(Matrix value, std::initializer_list<Var> inputs,
             Backprop backprop);

  const Matrix& value(const Var& v) const { return nodes_[v.id_].value; }
  bool requires_grad(const Var& v) const {
    return nodes_[v.id_].requires_grad;
  }
  void accumulate(const Var& v, const Eigen::Ref<const Matrix>& grad);

  // Gradient of a 1 x 1 loss with respect to every registered parameter
  // (zero for parameters the loss does not depend on). Throws if the loss
  // is not scalar or the tape was already differentiated.
  Gradients backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backprop backprop;
  };

  void check_owned(const Var& v) const;

  std::deque<Node> nodes_;
  std::map<std::string, int> params_;
  bool consumed_ = false;
};

// Products.
Var matmul(const Var& a, const Var& b);     // a * b
Var matmul_bt(const Var& a, const Var& b);  // a * b^T

// Elementwise arithmetic; shapes must agree.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

// a + bias broadcast over columns; bias is rows x 1.
Var add_bias(const Var& a, const Var& bias);
// Multiplies column j of a by the constant weights(j).
Var scale_columns(const Var& a, const Eigen::RowVectorXd& weights);
// Divides row i of a by s(i); s is rows x 1.
Var div_rows(const Var& a, const Var& s);

Var tanh(const Var& a);
Var sigmoid(const Var& a);
// Softmax down each column (normalizes across rows).
Matrix column_softmax(const Matrix& x);
Var softmax_cols(const Var& a);

Var row_sums(const Var& a);     // rows x 1
Var sum_squares(const Var& a);  // 1 x 1
// Column-major reinterpretation; rows * cols must equal a.size().
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var select_rows(const Var& a, const std::vector<int>& rows);

}  // namespace danet::nn

#endif  // DANET_TAPE_H_
