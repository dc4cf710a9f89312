#pragma once

// Loop-based RR-Net forward pass with no tape, no fused ops and explicit
// concatenations. Used only as an oracle for rrnet::forward.

#include <cmath>
#include <vector>

#include "rrnet/model.hpp"

namespace rrnet::testing {

using Vec = std::vector<double>;

inline Vec cat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline Vec apply_mlp(const Mlp& mlp, Vec x) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const Matrix& w = mlp.layers[l].weight.value();
    const Matrix& b = mlp.layers[l].bias.value();
    Vec y(static_cast<std::size_t>(w.cols()));
    for (Index j = 0; j < w.cols(); ++j) {
      double acc = b(0, j);
      for (Index i = 0; i < w.rows(); ++i) acc += x[static_cast<std::size_t>(i)] * w(i, j);
      y[static_cast<std::size_t>(j)] = (l + 1 < mlp.layers.size()) ? std::max(acc, 0.0) : acc;
    }
    x = std::move(y);
  }
  return x;
}

inline Vec row_of(const Eigen::Ref<const Eigen::RowVectorXd>& r) { return Vec(r.data(), r.data() + r.size()); }

/// Returns P, one probability per inter edge.
inline Vec naive_forward(const GraphBundle& b, const ModelParams& p, const ModelConfig& cfg) {
  const Index n = b.nodes.size();
  const Index h = cfg.hidden;
  std::vector<Vec> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const std::size_t m = slot(b.nodes.modality[static_cast<std::size_t>(i)]);
    v[static_cast<std::size_t>(i)] = apply_mlp(p.node_encoder[m], row_of(b.nodes.feature_row(i)));
  }
  const EdgeList* lists[3] = {&b.intra1, &b.intra2, &b.inter};
  std::vector<Vec> e[3];
  for (int r = 0; r < 3; ++r) {
    for (Index k = 0; k < lists[r]->size(); ++k) {
      const Vec raw = cat(row_of(b.nodes.feature_row(lists[r]->senders[k])),
                          row_of(b.nodes.feature_row(lists[r]->receivers[k])));
      e[r].push_back(apply_mlp(p.edge_encoder[r], raw));
    }
  }

  auto update_nodes = [&](const Mlp& node_mlp, std::initializer_list<int> roles) {
    std::vector<Vec> next(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      Vec mean(static_cast<std::size_t>(h), 0.0);
      int count = 0;
      for (int r : roles) {
        for (Index k = 0; k < lists[r]->size(); ++k) {
          if (lists[r]->senders[k] != i && lists[r]->receivers[k] != i) continue;
          for (Index c = 0; c < h; ++c) mean[c] += e[r][k][c];
          ++count;
        }
      }
      if (count > 0)
        for (auto& x : mean) x /= count;
      next[i] = apply_mlp(node_mlp, cat(mean, v[i]));
    }
    v = std::move(next);
  };

  // Alternate intra / inter, surplus at the end.
  std::vector<std::pair<int, Index>> order;
  const Index paired = std::min(cfg.n_intra_units, cfg.n_inter_units);
  for (Index u = 0; u < paired; ++u) {
    order.push_back({0, u});
    order.push_back({1, u});
  }
  for (Index u = paired; u < cfg.n_intra_units; ++u) order.push_back({0, u});
  for (Index u = paired; u < cfg.n_inter_units; ++u) order.push_back({1, u});

  for (auto [kind, u] : order) {
    if (kind == 0) {
      const IntraUnit& unit = p.intra[u];
      for (int r = 0; r < 2; ++r) {
        for (Index k = 0; k < lists[r]->size(); ++k) {
          const Vec in = cat(cat(v[lists[r]->senders[k]], v[lists[r]->receivers[k]]), e[r][k]);
          e[r][k] = apply_mlp(unit.edge, in);
        }
      }
      update_nodes(unit.node, {0, 1});
    } else {
      const InterUnit& unit = p.inter[u];
      const Matrix& w = unit.kernel.value();
      for (Index k = 0; k < lists[2]->size(); ++k) {
        const Vec pair = cat(v[lists[2]->senders[k]], v[lists[2]->receivers[k]]);
        Vec msg(static_cast<std::size_t>(h), 0.0);
        for (Index a = 0; a < h; ++a)
          for (Index c = 0; c < 2 * h; ++c) msg[a] += w(a, c) * pair[c];
        e[2][k] = apply_mlp(unit.edge, cat(msg, e[2][k]));
      }
      update_nodes(unit.node, {2});
    }
  }

  Vec out;
  for (const Vec& attr : e[2]) {
    const double z = apply_mlp(p.decoder, attr)[0];
    out.push_back(1.0 / (1.0 + std::exp(-z)));
  }
  return out;
}

}  // namespace rrnet::testing
