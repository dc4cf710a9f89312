#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rrnet/tensor.hpp"

namespace rrnet {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradcheckOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
  /// Lower bound on the relative-error denominator max(|analytic|, |numeric|).
  double denominator_floor = 1e-4;
};

struct ParameterCheck {
  std::string name;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
};

struct GradcheckReport {
  std::vector<ParameterCheck> parameters;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Compares analytic gradients of a scalar closure with central finite
/// differences. The closure must be deterministic and read the parameters'
/// current values.
inline GradcheckReport gradcheck(const std::function<Tensor()>& loss_fn, std::vector<NamedTensor> params,
                                 const GradcheckOptions& options = {}) {
  std::vector<Matrix> analytic;
  {
    for (auto& p : params) p.tensor.zero_grad();
    GradientTape tape;
    Tensor loss = loss_fn();
    tape.backward(loss);
    for (auto& p : params) analytic.push_back(p.tensor.grad());
  }

  auto evaluate = [&]() {
    const double v = loss_fn().item();
    if (!std::isfinite(v)) throw NumericError("gradcheck: non-finite loss during finite differences");
    return v;
  };

  GradcheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParameterCheck check{params[k].name};
    Matrix& value = params[k].tensor.mutable_value();
    for (Index i = 0; i < value.rows(); ++i) {
      for (Index j = 0; j < value.cols(); ++j) {
        const double original = value(i, j);
        value(i, j) = original + options.step;
        const double up = evaluate();
        value(i, j) = original - options.step;
        const double down = evaluate();
        value(i, j) = original;
        const double numeric = (up - down) / (2.0 * options.step);
        const double a = analytic[k](i, j);
        const double abs_err = std::abs(a - numeric);
        const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
        check.max_absolute_error = std::max(check.max_absolute_error, abs_err);
        check.max_relative_error = std::max(check.max_relative_error, abs_err / denom);
      }
    }
    report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
    report.parameters.push_back(std::move(check));
  }
  for (auto& p : params) p.tensor.zero_grad();
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace rrnet
