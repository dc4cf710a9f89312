#pragma once

// Dense 2-D tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle to an immutable value plus an optional gradient
// buffer. Operations executed while a GradientTape is active on the current
// thread are recorded on that tape whenever one of their inputs requires a
// gradient; GradientTape::backward replays the recorded rules in reverse.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rrnet/errors.hpp"

namespace rrnet {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = std::ptrdiff_t;
using IndexList = std::vector<Index>;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient flows in
  bool requires_grad = false;
  bool leaf = true;
};

inline Matrix& grad_buffer(Node& node) {
  if (node.grad.size() == 0 && node.value.size() != 0) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  } else if (node.grad.rows() != node.value.rows() || node.grad.cols() != node.value.cols()) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

}  // namespace detail

inline std::string shape_str(Index rows, Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Matrix value, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(Matrix::Zero(rows, cols), requires_grad);
  }

  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                          bool requires_grad = false) {
    const Index r = static_cast<Index>(rows.size());
    const Index c = r == 0 ? 0 : static_cast<Index>(rows.begin()->size());
    Matrix m(r, c);
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != c) throw ShapeError("ragged initializer rows");
      Index j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return Tensor(std::move(m), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  std::string shape() const { return shape_str(rows(), cols()); }

  const Matrix& value() const { return node_->value; }
  double item() const {
    if (rows() != 1 || cols() != 1) throw ContractError("item() on non-scalar tensor " + shape());
    return node_->value(0, 0);
  }
  double operator()(Index r, Index c) const { return node_->value(r, c); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && node_->grad.size() != 0; }
  /// Gradient buffer; a zero matrix of matching shape when nothing has flowed in.
  Matrix grad() const {
    if (has_grad()) return node_->grad;
    return Matrix::Zero(rows(), cols());
  }
  void zero_grad() {
    if (node_) node_->grad.resize(0, 0);
  }

  /// In-place access for optimizers and checkpoint loading. Not recorded.
  Matrix& mutable_value() { return node_->value; }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& shared() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of executed operations for one forward/backward cycle.
class GradientTape {
 public:
  struct Record {
    std::shared_ptr<detail::Node> output;
    std::function<void(const Matrix&)> backward;
  };

  GradientTape() : previous_(current_slot()) { current_slot() = this; }
  ~GradientTape() { current_slot() = previous_; }
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  static GradientTape* current() { return current_slot(); }

  void record(std::shared_ptr<detail::Node> output, std::function<void(const Matrix&)> rule) {
    records_.push_back({std::move(output), std::move(rule)});
  }

  std::size_t size() const { return records_.size(); }

  /// Replaces the rule of the most recent record; used by ops whose rule
  /// needs a handle on their own output.
  void set_last_rule(std::function<void(const Matrix&)> rule) {
    if (records_.empty()) throw StateError("set_last_rule() on an empty tape");
    records_.back().backward = std::move(rule);
  }

  /// Seeds d(loss)/d(loss) = 1 and replays backward rules in reverse order.
  /// Leaf gradients accumulate across calls; intermediate gradients are
  /// released once consumed.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
      throw ContractError("backward() requires a scalar loss, got " +
                          (loss.defined() ? loss.shape() : std::string("undefined")));
    }
    if (!loss.requires_grad()) return;
    detail::grad_buffer(*loss.node())(0, 0) += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      detail::Node& out = *it->output;
      if (out.grad.size() == 0) continue;
      it->backward(out.grad);
      if (!out.leaf) out.grad.resize(0, 0);
    }
  }

  void clear() { records_.clear(); }

 private:
  static GradientTape*& current_slot() {
    thread_local GradientTape* slot = nullptr;
    return slot;
  }

  GradientTape* previous_;
  std::vector<Record> records_;
};

namespace detail {

inline void check_finite(const Matrix& m, const char* op) {
  // x * 0 is 0 for finite x and NaN otherwise.
  if (m.size() != 0 && !((m.array() * 0.0).sum() == 0.0)) throw NumericError(std::string("non-finite value produced by ") + op);
}

/// Wraps an op result; records `rule` when a tape is active and any input
/// requires a gradient. `rule` receives the output gradient.
inline Tensor make_result(Matrix value, const std::vector<const Tensor*>& inputs, const char* op,
                          std::function<void(const Matrix&)> rule);

inline Tensor make_result(Matrix value, std::initializer_list<const Tensor*> inputs,
                          const char* op, std::function<void(const Matrix&)> rule) {
  return make_result(std::move(value), std::vector<const Tensor*>(inputs), op, std::move(rule));
}

inline Tensor make_result(Matrix value, const std::vector<const Tensor*>& inputs, const char* op,
                          std::function<void(const Matrix&)> rule) {
  check_finite(value, op);
  Tensor out(std::move(value));
  GradientTape* tape = GradientTape::current();
  if (tape == nullptr) return out;
  bool needs = false;
  for (const Tensor* in : inputs) needs = needs || (in != nullptr && in->requires_grad());
  if (!needs) return out;
  out.node()->requires_grad = true;
  out.node()->leaf = false;
  tape->record(out.shared(), std::move(rule));
  return out;
}

/// Gradient sink for an input; null when the input does not need one.
inline std::shared_ptr<Node> sink(const Tensor& t) {
  return t.requires_grad() ? t.shared() : nullptr;
}

}  // namespace detail

inline void backward(const Tensor& loss) {
  GradientTape* tape = GradientTape::current();
  if (tape == nullptr) throw StateError("backward() called without an active GradientTape");
  tape->backward(loss);
}

}  // namespace rrnet
