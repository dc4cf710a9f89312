#pragma once

// RR-Net: per-modality encoders, alternating intra/inter GCN units and an
// inter-edge decoder producing one probability per candidate pair.
//
// Every layer that consumes a concatenation ([a (c) b (c) ...] * W) is
// evaluated as a fused sum of per-block products, with node-side blocks
// projected once per node and gathered per edge. The arithmetic is the same
// as materializing the concatenation; only the memory footprint differs.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rrnet/gradcheck.hpp"
#include "rrnet/graph.hpp"
#include "rrnet/ops.hpp"
#include "rrnet/random.hpp"

namespace rrnet {

struct ModelConfig {
  Index hidden = 16;
  Index n_intra_units = 1;
  Index n_inter_units = 1;
  Index encoder_hidden_layers = 1;
  std::array<Index, 2> raw_dims{0, 0};

  void check() const {
    if (hidden <= 0) throw ConfigError("model: hidden width must be positive");
    if (n_intra_units < 0 || n_inter_units < 0) throw ConfigError("model: unit counts must be non-negative");
    if (n_intra_units + n_inter_units < 1) throw ConfigError("model: at least one GCN unit is required");
    if (encoder_hidden_layers < 0) throw ConfigError("model: encoder hidden layer count must be non-negative");
    if (raw_dims[0] <= 0 || raw_dims[1] <= 0) throw ConfigError("model: raw feature widths must be positive");
  }
};

struct Dense {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

/// Fully connected stack with ReLU between layers and a linear output.
struct Mlp {
  std::vector<Dense> layers;

  Index in_width() const { return layers.front().weight.rows(); }
  Index out_width() const { return layers.back().weight.cols(); }
};

struct IntraUnit {
  Mlp edge;  // [v_s (c) v_r (c) e] : 3h -> h -> h
  Mlp node;  // [mean (c) v]        : 2h -> h -> h
};

struct InterUnit {
  Tensor kernel;  // h x 2h, applied to v_s (c) v_r
  Mlp edge;       // [W(v_s (c) v_r) (c) e] : 2h -> h -> h
  Mlp node;       // [mean (c) v]           : 2h -> h -> h
};

struct ModelParams {
  std::array<Mlp, 2> node_encoder;  // per modality
  std::array<Mlp, 3> edge_encoder;  // per edge-list role
  std::vector<IntraUnit> intra;
  std::vector<InterUnit> inter;
  Mlp decoder;  // h -> h -> 1, followed by sigmoid

  /// Every learnable tensor with a stable, unique name.
  std::vector<NamedTensor> named() const {
    std::vector<NamedTensor> out;
    auto add_mlp = [&out](const std::string& prefix, const Mlp& mlp) {
      for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        out.push_back({prefix + ".l" + std::to_string(l) + ".weight", mlp.layers[l].weight});
        out.push_back({prefix + ".l" + std::to_string(l) + ".bias", mlp.layers[l].bias});
      }
    };
    add_mlp("encoder.node1", node_encoder[0]);
    add_mlp("encoder.node2", node_encoder[1]);
    add_mlp("encoder.edge_intra1", edge_encoder[0]);
    add_mlp("encoder.edge_intra2", edge_encoder[1]);
    add_mlp("encoder.edge_inter", edge_encoder[2]);
    for (std::size_t u = 0; u < intra.size(); ++u) {
      const std::string p = "intra" + std::to_string(u + 1);
      add_mlp(p + ".edge", intra[u].edge);
      add_mlp(p + ".node", intra[u].node);
    }
    for (std::size_t u = 0; u < inter.size(); ++u) {
      const std::string p = "inter" + std::to_string(u + 1);
      out.push_back({p + ".kernel", inter[u].kernel});
      add_mlp(p + ".edge", inter[u].edge);
      add_mlp(p + ".node", inter[u].node);
    }
    add_mlp("decoder", decoder);
    return out;
  }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    for (auto& nt : named()) out.push_back(nt.tensor);
    return out;
  }

  std::vector<Matrix> snapshot() const {
    std::vector<Matrix> out;
    for (const auto& nt : named()) out.push_back(nt.tensor.value());
    return out;
  }

  void restore(const std::vector<Matrix>& values) {
    auto all = named();
    if (values.size() != all.size()) throw ShapeError("restore: snapshot size mismatch");
    for (std::size_t i = 0; i < all.size(); ++i) all[i].tensor.mutable_value() = values[i];
  }
};

namespace detail {

inline Dense make_dense(Index in, Index out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Matrix w(in, out);
  Matrix b(1, out);
  for (Index i = 0; i < in; ++i) {
    for (Index j = 0; j < out; ++j) w(i, j) = uniform(rng, -bound, bound);
  }
  for (Index j = 0; j < out; ++j) b(0, j) = uniform(rng, -bound, bound);
  return {Tensor::parameter(std::move(w)), Tensor::parameter(std::move(b))};
}

inline Mlp make_mlp(const std::vector<Index>& widths, Rng& rng) {
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) mlp.layers.push_back(make_dense(widths[i], widths[i + 1], rng));
  return mlp;
}

}  // namespace detail

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization from `seed`.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.check();
  Rng rng(seed);
  const Index h = cfg.hidden;
  const Index d1 = cfg.raw_dims[0];
  const Index d2 = cfg.raw_dims[1];
  auto encoder_widths = [&](Index in) {
    std::vector<Index> w{in};
    for (Index i = 0; i < cfg.encoder_hidden_layers; ++i) w.push_back(h);
    w.push_back(h);
    return w;
  };
  ModelParams p;
  p.node_encoder[0] = detail::make_mlp(encoder_widths(d1), rng);
  p.node_encoder[1] = detail::make_mlp(encoder_widths(d2), rng);
  p.edge_encoder[0] = detail::make_mlp(encoder_widths(2 * d1), rng);
  p.edge_encoder[1] = detail::make_mlp(encoder_widths(2 * d2), rng);
  p.edge_encoder[2] = detail::make_mlp(encoder_widths(d1 + d2), rng);
  for (Index u = 0; u < cfg.n_intra_units; ++u) {
    IntraUnit unit;
    unit.edge = detail::make_mlp({3 * h, h, h}, rng);
    unit.node = detail::make_mlp({2 * h, h, h}, rng);
    p.intra.push_back(std::move(unit));
  }
  for (Index u = 0; u < cfg.n_inter_units; ++u) {
    InterUnit unit;
    const double bound = 1.0 / std::sqrt(static_cast<double>(2 * h));
    Matrix k(h, 2 * h);
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < 2 * h; ++j) k(i, j) = uniform(rng, -bound, bound);
    }
    unit.kernel = Tensor::parameter(std::move(k));
    unit.edge = detail::make_mlp({2 * h, h, h}, rng);
    unit.node = detail::make_mlp({2 * h, h, h}, rng);
    p.inter.push_back(std::move(unit));
  }
  p.decoder = detail::make_mlp({h, h, 1}, rng);
  return p;
}

enum class UnitKind { Intra, Inter };

struct UnitStep {
  UnitKind kind;
  Index index;
};

/// intra, inter, intra, inter, ... with surplus units of the more numerous
/// kind appended at the end.
inline std::vector<UnitStep> unit_schedule(const ModelConfig& cfg) {
  std::vector<UnitStep> out;
  const Index paired = std::min(cfg.n_intra_units, cfg.n_inter_units);
  for (Index i = 0; i < paired; ++i) {
    out.push_back({UnitKind::Intra, i});
    out.push_back({UnitKind::Inter, i});
  }
  for (Index i = paired; i < cfg.n_intra_units; ++i) out.push_back({UnitKind::Intra, i});
  for (Index i = paired; i < cfg.n_inter_units; ++i) out.push_back({UnitKind::Inter, i});
  return out;
}

/// Index arrays derived once from a validated bundle and shared by every
/// forward pass over it.
struct PreparedGraph {
  struct Edges {
    std::shared_ptr<const IndexList> senders;
    std::shared_ptr<const IndexList> receivers;
    std::shared_ptr<const IndexList> senders_local;
    std::shared_ptr<const IndexList> receivers_local;
    Modality sender_modality = Modality::First;
    Modality receiver_modality = Modality::First;
    Tensor attrs;  // materialized raw attributes, when the bundle has them
    Index size() const { return static_cast<Index>(senders->size()); }
  };

  Index n = 0;
  std::array<Tensor, 2> features;
  IndexList stack_index;  // global node -> row in [modality-1 rows; modality-2 rows]
  std::array<Edges, 3> edges;

  explicit PreparedGraph(const GraphBundle& bundle) {
    require_valid(bundle);
    const NodeTable& nodes = bundle.nodes;
    n = nodes.size();
    features[0] = Tensor(nodes.features[0]);
    features[1] = Tensor(nodes.features[1]);
    const Index n1 = nodes.features[0].rows();
    stack_index.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      stack_index[k] = nodes.modality[k] == Modality::First ? nodes.local[k] : n1 + nodes.local[k];
    }
    const std::array<EdgeRole, 3> roles{EdgeRole::Intra1, EdgeRole::Intra2, EdgeRole::Inter};
    for (std::size_t r = 0; r < 3; ++r) {
      const EdgeList& list = bundle.edges(roles[r]);
      Edges e;
      e.senders = std::make_shared<const IndexList>(list.senders);
      e.receivers = std::make_shared<const IndexList>(list.receivers);
      IndexList sl(list.senders.size());
      IndexList rl(list.receivers.size());
      for (std::size_t k = 0; k < sl.size(); ++k) {
        sl[k] = nodes.local[static_cast<std::size_t>(list.senders[k])];
        rl[k] = nodes.local[static_cast<std::size_t>(list.receivers[k])];
      }
      e.senders_local = std::make_shared<const IndexList>(std::move(sl));
      e.receivers_local = std::make_shared<const IndexList>(std::move(rl));
      e.sender_modality = roles[r] == EdgeRole::Intra2 ? Modality::Second : Modality::First;
      e.receiver_modality = roles[r] == EdgeRole::Intra1 ? Modality::First : Modality::Second;
      e.attrs = list.attrs;
      edges[r] = std::move(e);
    }
  }

  const Edges& of(EdgeRole role) const { return edges[static_cast<std::size_t>(role)]; }
};

/// Current node and edge attributes during a forward pass.
struct LatentState {
  Tensor nodes;                // n x h
  std::array<Tensor, 3> edges;  // per role, |E| x h (undefined for empty lists)
};

namespace detail {

/// Applies `mlp` where the first layer's input is the column-concatenation
/// represented by `dense` and `gathered` terms; the terms' weight blocks are
/// supplied by the caller.
inline Tensor run_mlp(const Mlp& mlp, std::vector<DenseTerm> dense, std::vector<GatherTerm> gathered) {
  const bool single = mlp.layers.size() == 1;
  Tensor h = affine(dense, gathered, mlp.layers[0].bias, single ? Activation::None : Activation::Relu);
  for (std::size_t l = 1; l < mlp.layers.size(); ++l) {
    const bool last = l + 1 == mlp.layers.size();
    const std::vector<DenseTerm> term{{h, mlp.layers[l].weight}};
    h = affine(term, {}, mlp.layers[l].bias, last ? Activation::None : Activation::Relu);
  }
  return h;
}

inline Tensor first_block(const Mlp& mlp, Index begin, Index count) {
  return slice_rows(mlp.layers[0].weight, begin, count);
}

}  // namespace detail

inline LatentState encode(const PreparedGraph& g, const ModelParams& params, const ModelConfig& cfg) {
  for (std::size_t m = 0; m < 2; ++m) {
    if (g.features[m].rows() > 0 && g.features[m].cols() != cfg.raw_dims[m]) {
      throw ShapeError("encode: modality " + std::to_string(m + 1) + " features are " + g.features[m].shape() +
                       ", config expects width " + std::to_string(cfg.raw_dims[m]));
    }
  }
  LatentState s;
  std::array<Tensor, 2> latent;
  for (std::size_t m = 0; m < 2; ++m) {
    const Mlp& enc = params.node_encoder[m];
    latent[m] = detail::run_mlp(enc, {{g.features[m], enc.layers[0].weight}}, {});
  }
  s.nodes = gather_rows(concat_rows(latent[0], latent[1]), g.stack_index);

  for (std::size_t r = 0; r < 3; ++r) {
    const PreparedGraph::Edges& e = g.edges[r];
    if (e.size() == 0) continue;
    const Mlp& enc = params.edge_encoder[r];
    if (e.attrs.defined()) {
      s.edges[r] = detail::run_mlp(enc, {{e.attrs, enc.layers[0].weight}}, {});
      continue;
    }
    const Tensor& fs = g.features[slot(e.sender_modality)];
    const Tensor& fr = g.features[slot(e.receiver_modality)];
    const Tensor ps = matmul(fs, detail::first_block(enc, 0, fs.cols()));
    const Tensor pr = matmul(fr, detail::first_block(enc, fs.cols(), fr.cols()));
    s.edges[r] = detail::run_mlp(enc, {}, {{ps, e.senders_local}, {pr, e.receivers_local}});
  }
  return s;
}

/// v <- node_mlp(mean (c) v) for every node.
inline Tensor node_layer(const Tensor& nodes, const Tensor& aggregated, const Mlp& node_mlp, Index h) {
  return detail::run_mlp(node_mlp,
                         {{aggregated, detail::first_block(node_mlp, 0, h)},
                          {nodes, detail::first_block(node_mlp, h, h)}},
                         {});
}

/// Updated attributes for one intra edge list: e <- edge_mlp(v_s (c) v_r (c) e).
inline Tensor intra_edge_layer(const Tensor& nodes, const Tensor& edge_attrs, const PreparedGraph::Edges& e,
                               const IntraUnit& unit, Index h) {
  const Tensor ps = matmul(nodes, detail::first_block(unit.edge, 0, h));
  const Tensor pr = matmul(nodes, detail::first_block(unit.edge, h, h));
  return detail::run_mlp(unit.edge, {{edge_attrs, detail::first_block(unit.edge, 2 * h, h)}},
                         {{ps, e.senders}, {pr, e.receivers}});
}

/// W(v_s (c) v_r) for every inter edge.
inline Tensor inter_kernel_message(const Tensor& nodes, const PreparedGraph::Edges& e, const Tensor& kernel, Index h) {
  if (kernel.rows() != h || kernel.cols() != 2 * h) {
    throw ShapeError("inter kernel is " + kernel.shape() + ", expected " + shape_str(h, 2 * h));
  }
  const Tensor qs = matmul(nodes, transpose(slice_cols(kernel, 0, h)));
  const Tensor qr = matmul(nodes, transpose(slice_cols(kernel, h, h)));
  return affine({}, {{qs, e.senders}, {qr, e.receivers}}, Tensor{});
}

/// Updated inter-edge attributes: e <- edge_mlp(W(v_s (c) v_r) (c) e).
inline Tensor inter_edge_layer(const Tensor& nodes, const Tensor& edge_attrs, const PreparedGraph::Edges& e,
                               const InterUnit& unit, Index h) {
  const Tensor kernel_msg = inter_kernel_message(nodes, e, unit.kernel, h);
  return detail::run_mlp(unit.edge,
                         {{kernel_msg, detail::first_block(unit.edge, 0, h)},
                          {edge_attrs, detail::first_block(unit.edge, h, h)}},
                         {});
}

inline void apply_intra_unit(LatentState& s, const PreparedGraph& g, const IntraUnit& unit, Index h) {
  Tensor aggregated;
  for (EdgeRole role : {EdgeRole::Intra1, EdgeRole::Intra2}) {
    const auto r = static_cast<std::size_t>(role);
    const PreparedGraph::Edges& e = g.edges[r];
    if (e.size() == 0) continue;
    s.edges[r] = intra_edge_layer(s.nodes, s.edges[r], e, unit, h);
    // The two lists touch disjoint node sets, so their means simply add.
    const Tensor mean = incident_mean(s.edges[r], e.senders, e.receivers, g.n);
    aggregated = aggregated.defined() ? add(aggregated, mean) : mean;
  }
  if (!aggregated.defined()) aggregated = Tensor::zeros(g.n, h);
  s.nodes = node_layer(s.nodes, aggregated, unit.node, h);
}

inline void apply_inter_unit(LatentState& s, const PreparedGraph& g, const InterUnit& unit, Index h) {
  const auto r = static_cast<std::size_t>(EdgeRole::Inter);
  const PreparedGraph::Edges& e = g.edges[r];
  Tensor aggregated;
  if (e.size() > 0) {
    s.edges[r] = inter_edge_layer(s.nodes, s.edges[r], e, unit, h);
    aggregated = incident_mean(s.edges[r], e.senders, e.receivers, g.n);
  } else {
    aggregated = Tensor::zeros(g.n, h);
  }
  s.nodes = node_layer(s.nodes, aggregated, unit.node, h);
}

/// Runs the encoder and every GCN unit; returns the final latent state.
inline LatentState propagate(const PreparedGraph& g, const ModelParams& params, const ModelConfig& cfg) {
  if (cfg.n_intra_units + cfg.n_inter_units < 1) throw ConfigError("forward: at least one GCN unit is required");
  if (static_cast<Index>(params.intra.size()) != cfg.n_intra_units ||
      static_cast<Index>(params.inter.size()) != cfg.n_inter_units) {
    throw ConfigError("forward: parameter unit counts do not match the model config");
  }
  LatentState s = encode(g, params, cfg);
  for (const UnitStep& step : unit_schedule(cfg)) {
    if (step.kind == UnitKind::Intra) {
      apply_intra_unit(s, g, params.intra[static_cast<std::size_t>(step.index)], cfg.hidden);
    } else {
      apply_inter_unit(s, g, params.inter[static_cast<std::size_t>(step.index)], cfg.hidden);
    }
  }
  return s;
}

/// Probability per inter edge (or per listed inter edge when `subset` is set).
inline Tensor decode(const LatentState& s, const ModelParams& params, const IndexList* subset = nullptr) {
  Tensor attrs = s.edges[static_cast<std::size_t>(EdgeRole::Inter)];
  if (!attrs.defined()) return Tensor::zeros(0, 1);
  if (subset != nullptr) attrs = gather_rows(attrs, *subset);
  return sigmoid(detail::run_mlp(params.decoder, {{attrs, params.decoder.layers[0].weight}}, {}));
}

inline Tensor forward(const PreparedGraph& g, const ModelParams& params, const ModelConfig& cfg,
                      const IndexList* subset = nullptr) {
  return decode(propagate(g, params, cfg), params, subset);
}

inline Tensor forward(const GraphBundle& bundle, const ModelParams& params, const ModelConfig& cfg) {
  return forward(PreparedGraph(bundle), params, cfg);
}

/// Cross-entropy between P and the bundle's inter-edge labels.
inline Tensor loss(const Tensor& probabilities, const GraphBundle& bundle, Reduction reduction = Reduction::Sum) {
  if (!bundle.labels) throw StateError("loss: bundle has no labels");
  const auto& y = *bundle.labels;
  Matrix labels(static_cast<Index>(y.size()), 1);
  for (std::size_t i = 0; i < y.size(); ++i) labels(static_cast<Index>(i), 0) = y[i];
  Tensor out = bce_loss(probabilities, Tensor(std::move(labels)), reduction);
  if (!std::isfinite(out.item())) throw NumericError("loss: non-finite value");
  return out;
}

}  // namespace rrnet
