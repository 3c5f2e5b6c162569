// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/tape.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace danet::nn {

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("value() on an empty Var");
  return tape_->value(*this);
}

void Tape::check_owned(const Var& v) const {
  if (v.tape_ != this || v.id_ < 0 ||
      static_cast<std::size_t>(v.id_) >= nodes_.size())
    throw std::logic_error("Var does not belong to this tape");
}

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(const std::string& name, const Matrix& value) {
  if (auto it = params_.find(name); it != params_.end())
    return Var(this, it->second);
  Node node;
  node.value = value;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  params_.emplace(name, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs,
                 Backprop backprop) {
  if (consumed_) throw std::logic_error("recording on a consumed tape");
  bool needs_grad = false;
  for (const Var& in : inputs) {
    check_owned(in);
    needs_grad = needs_grad || nodes_[in.id_].requires_grad;
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs_grad;
  if (needs_grad) node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(const Var& v, const Eigen::Ref<const Matrix>& grad) {
  Node& node = nodes_[v.id_];
  if (!node.requires_grad) return;
  if (grad.rows() != node.value.rows() || grad.cols() != node.value.cols())
    throw std::logic_error("gradient shape does not match node");
  if (node.has_grad) {
    node.grad += grad;
  } else {
    node.grad = grad;
    node.has_grad = true;
  }
}

Gradients Tape::backward(const Var& loss) {
  check_owned(loss);
  if (consumed_)
    throw std::logic_error(
        "backward() already ran on this tape; record a new graph");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward() needs a 1 x 1 loss, got " +
                                std::to_string(loss.rows()) + " x " +
                                std::to_string(loss.cols()));
  consumed_ = true;
  accumulate(loss, Matrix::Ones(1, 1));
  for (int id = loss.id_; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backprop) continue;
    node.backprop(*this, node.value, node.grad);
    // Interior gradients are no longer needed once propagated.
    node.grad.resize(0, 0);
    node.has_grad = false;
    node.backprop = nullptr;
  }
  Gradients grads;
  for (const auto& [name, id] : params_) {
    const Node& node = nodes_[id];
    grads[name] = node.has_grad
                      ? node.grad
                      : Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return grads;
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
}

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape())
    throw std::logic_error("operands live on different tapes");
  return a.tape();
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions differ");
  Tape& tape = same_tape(a, b);
  Matrix out;
  out.noalias() = a.value() * b.value();
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var matmul_bt(const Var& a, const Var& b) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("matmul_bt: column counts differ");
  Tape& tape = same_tape(a, b);
  Matrix out;
  out.noalias() = a.value() * b.value().transpose();
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b));
    if (t.requires_grad(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tape& tape = same_tape(a, b);
  return tape.record(a.value() + b.value(), {a, b},
                     [a, b](Tape& t, const Matrix&, const Matrix& g) {
                       t.accumulate(a, g);
                       t.accumulate(b, g);
                     });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tape& tape = same_tape(a, b);
  return tape.record(a.value() - b.value(), {a, b},
                     [a, b](Tape& t, const Matrix&, const Matrix& g) {
                       t.accumulate(a, g);
                       if (t.requires_grad(b)) t.accumulate(b, -g);
                     });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tape& tape = same_tape(a, b);
  return tape.record(a.value().cwiseProduct(b.value()), {a, b},
                     [a, b](Tape& t, const Matrix&, const Matrix& g) {
                       if (t.requires_grad(a))
                         t.accumulate(a, g.cwiseProduct(t.value(b)));
                       if (t.requires_grad(b))
                         t.accumulate(b, g.cwiseProduct(t.value(a)));
                     });
}

Var scale(const Var& a, double s) {
  return a.tape().record(a.value() * s, {a},
                         [a, s](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(a, g * s);
                         });
}

Var add_bias(const Var& a, const Var& bias) {
  if (bias.cols() != 1 || bias.rows() != a.rows())
    throw std::invalid_argument("add_bias: bias must be rows x 1");
  Tape& tape = same_tape(a, bias);
  Matrix out = a.value().colwise() + bias.value().col(0);
  return tape.record(std::move(out), {a, bias},
                     [a, bias](Tape& t, const Matrix&, const Matrix& g) {
                       t.accumulate(a, g);
                       if (t.requires_grad(bias))
                         t.accumulate(bias, g.rowwise().sum());
                     });
}

Var scale_columns(const Var& a, const Eigen::RowVectorXd& weights) {
  if (weights.size() != a.cols())
    throw std::invalid_argument("scale_columns: weight length mismatch");
  Matrix out = (a.value().array().rowwise() * weights.array()).matrix();
  return a.tape().record(
      std::move(out), {a}, [a, weights](Tape& t, const Matrix&, const Matrix& g) {
        t.accumulate(a, (g.array().rowwise() * weights.array()).matrix());
      });
}

Var div_rows(const Var& a, const Var& s) {
  if (s.cols() != 1 || s.rows() != a.rows())
    throw std::invalid_argument("div_rows: divisor must be rows x 1");
  Tape& tape = same_tape(a, s);
  Matrix out = (a.value().array().colwise() / s.value().col(0).array()).matrix();
  return tape.record(
      std::move(out), {a, s}, [a, s](Tape& t, const Matrix&, const Matrix& g) {
        const Eigen::ArrayXd d = t.value(s).col(0).array();
        if (t.requires_grad(a))
          t.accumulate(a, (g.array().colwise() / d).matrix());
        if (t.requires_grad(s)) {
          Eigen::ArrayXd num =
              (g.array() * t.value(a).array()).rowwise().sum();
          t.accumulate(s, (-num / (d * d)).matrix());
        }
      });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return a.tape().record(std::move(out), {a},
                         [a](Tape& t, const Matrix& y, const Matrix& g) {
                           t.accumulate(
                               a, (g.array() * (1.0 - y.array().square()))
                                      .matrix());
                         });
}

Var sigmoid(const Var& a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape().record(std::move(out), {a},
                         [a](Tape& t, const Matrix& y, const Matrix& g) {
                           t.accumulate(a, (g.array() * y.array() *
                                            (1.0 - y.array()))
                                               .matrix());
                         });
}

Matrix column_softmax(const Matrix& x) {
  const Eigen::Index rows = x.rows();
  Matrix out(rows, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double* in = x.data() + j * rows;
    double* o = out.data() + j * rows;
    const double m = *std::max_element(in, in + rows);
    for (Eigen::Index i = 0; i < rows; ++i) o[i] = in[i] - m;
  }
  // One whole-array exp vectorizes; per-column expressions do not.
  out = out.array().exp().matrix();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double* o = out.data() + j * rows;
    const double inv = 1.0 / std::accumulate(o, o + rows, 0.0);
    for (Eigen::Index i = 0; i < rows; ++i) o[i] *= inv;
  }
  return out;
}

Var softmax_cols(const Var& a) {
  Matrix out = column_softmax(a.value());
  return a.tape().record(
      std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
        const Eigen::RowVectorXd dot = g.cwiseProduct(y).colwise().sum();
        t.accumulate(
            a, (y.array() * (g.array().rowwise() - dot.array())).matrix());
      });
}

Var row_sums(const Var& a) {
  Matrix out = a.value().rowwise().sum();
  const Eigen::Index cols = a.cols();
  return a.tape().record(std::move(out), {a},
                         [a, cols](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(a, g.replicate(1, cols));
                         });
}

Var sum_squares(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(a, 2.0 * g(0, 0) * t.value(a));
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size())
    throw std::invalid_argument("reshape: element count changes");
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return a.tape().record(std::move(out), {a},
                         [a, r0, c0](Tape& t, const Matrix&, const Matrix& g) {
                           t.accumulate(a, Eigen::Map<const Matrix>(g.data(),
                                                                    r0, c0));
                         });
}

Var select_rows(const Var& a, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= a.rows())
      throw std::out_of_range("select_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(rows[k]);
  }
  return a.tape().record(
      std::move(out), {a}, [a, rows](Tape& t, const Matrix&, const Matrix& g) {
        Matrix ga = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
        for (std::size_t k = 0; k < rows.size(); ++k)
          ga.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
        t.accumulate(a, ga);
      });
}

}  // namespace danet::nn
