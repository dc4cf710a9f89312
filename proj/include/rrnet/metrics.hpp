#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rrnet/graph.hpp"

namespace rrnet {

/// Per query (modality-1 local id, true modality-2 local id): the prediction
/// is the receiver of the query's highest-probability inter edge, the first
/// such edge on ties. Queries without candidate edges count as wrong.
inline double eval_mapping_accuracy(const Matrix& p, const GraphBundle& bundle,
                                    const std::vector<std::pair<Index, Index>>& queries) {
  if (queries.empty()) return 0.0;
  const EdgeList& inter = bundle.inter;
  if (p.rows() != inter.size() || p.cols() != 1) {
    throw ShapeError("mapping accuracy: P is " + shape_str(p.rows(), p.cols()) + " for " +
                     std::to_string(inter.size()) + " inter edges");
  }
  const std::size_t n1 = static_cast<std::size_t>(bundle.nodes.features[0].rows());
  std::vector<Index> best(n1, -1);
  for (Index k = 0; k < inter.size(); ++k) {
    const auto s = static_cast<std::size_t>(bundle.nodes.local[static_cast<std::size_t>(inter.senders[k])]);
    if (best[s] < 0 || p(k, 0) > p(best[s], 0)) best[s] = k;
  }
  std::size_t correct = 0;
  for (const auto& [q, truth] : queries) {
    if (q < 0 || static_cast<std::size_t>(q) >= n1) throw BoundsError("mapping accuracy: query " + std::to_string(q));
    const Index k = best[static_cast<std::size_t>(q)];
    if (k >= 0 && bundle.nodes.local[static_cast<std::size_t>(inter.receivers[k])] == truth) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(queries.size());
}

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
};

inline ErrorMetrics eval_mae_rmse(const std::vector<double>& predicted, const std::vector<double>& truth) {
  if (predicted.size() != truth.size()) {
    throw ContractError("mae/rmse: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(truth.size()) + " ratings");
  }
  if (truth.empty()) throw ContractError("mae/rmse: no ratings to evaluate");
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = predicted[i] - truth[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const auto n = static_cast<double>(truth.size());
  ErrorMetrics m{abs_sum / n, std::sqrt(sq_sum / n)};
  // Guard the power-mean ordering against last-bit rounding.
  if (m.mae > m.rmse) m.rmse = m.mae;
  return m;
}

inline void check_rating_range(double r_min, double r_max) {
  if (!(r_max > r_min)) {
    throw ConfigError("rating range [" + std::to_string(r_min) + ", " + std::to_string(r_max) + "] is empty");
  }
}

inline double rating_from_probability(double p, double r_min, double r_max) {
  check_rating_range(r_min, r_max);
  return r_min + p * (r_max - r_min);
}

inline double rating_to_target(double r, double r_min, double r_max) {
  check_rating_range(r_min, r_max);
  return (r - r_min) / (r_max - r_min);
}

}  // namespace rrnet
