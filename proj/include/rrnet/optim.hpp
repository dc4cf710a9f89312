#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rrnet/tensor.hpp"

namespace rrnet {

struct SgdOptions {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// SGD with heavy-ball momentum and L2 weight decay:
///   g <- grad + wd * param;  buf <- momentum * buf + g;  param <- param - lr * buf
class Sgd {
 public:
  Sgd(std::vector<Tensor> params, SgdOptions options) : params_(std::move(params)), options_(options) {
    if (!(options_.learning_rate >= 0.0)) throw ConfigError("sgd: learning rate must be non-negative");
    if (!(options_.momentum >= 0.0 && options_.momentum < 1.0)) {
      throw ConfigError("sgd: momentum must lie in [0, 1)");
    }
    if (!(options_.weight_decay >= 0.0)) throw ConfigError("sgd: weight decay must be non-negative");
    buffers_.reserve(params_.size());
    for (const auto& p : params_) buffers_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }

  const SgdOptions& options() const { return options_; }
  const std::vector<Matrix>& momentum_buffers() const { return buffers_; }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i];
      Matrix& buf = buffers_[i];
      if (buf.rows() != p.rows() || buf.cols() != p.cols()) {
        throw ShapeError("sgd: momentum buffer " + shape_str(buf.rows(), buf.cols()) +
                         " does not match parameter " + p.shape());
      }
      Matrix g = p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols());
      if (g.rows() != p.rows() || g.cols() != p.cols()) {
        throw ShapeError("sgd: gradient " + shape_str(g.rows(), g.cols()) + " does not match parameter " +
                         p.shape());
      }
      if (options_.weight_decay != 0.0) g += options_.weight_decay * p.value();
      buf = options_.momentum * buf + g;
      p.mutable_value() -= options_.learning_rate * buf;
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

 private:
  std::vector<Tensor> params_;
  SgdOptions options_;
  std::vector<Matrix> buffers_;
};

}  // namespace rrnet
