#pragma once

#include <cstdint>
#include <functional>

#include "rrnet/random.hpp"
#include "rrnet/tensor.hpp"

namespace rrnet::testing {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = uniform(rng, lo, hi);
  }
  return m;
}

/// Central finite difference of a scalar function of one matrix entry.
inline double central_difference(Matrix& m, Index i, Index j, const std::function<double()>& f,
                                 double step = 1e-5) {
  const double orig = m(i, j);
  m(i, j) = orig + step;
  const double up = f();
  m(i, j) = orig - step;
  const double down = f();
  m(i, j) = orig;
  return (up - down) / (2.0 * step);
}

}  // namespace rrnet::testing
