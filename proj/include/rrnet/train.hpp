#pragma once

// Task graphs, the full-batch training loop and single-run experiments.

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rrnet/build.hpp"
#include "rrnet/data.hpp"
#include "rrnet/gradcheck.hpp"
#include "rrnet/metrics.hpp"
#include "rrnet/model.hpp"
#include "rrnet/optim.hpp"

namespace rrnet {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Index epochs = 100;
  std::uint64_t seed = 0;
  Index eval_every = 1;
  Reduction reduction = Reduction::Mean;

  void check() const {
    if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (eval_every < 1) throw ConfigError("train: eval_every must be at least 1");
  }
};

/// Supervised edges plus an optional validation metric evaluated on the
/// full probability vector.
struct Objective {
  IndexList edges;
  Matrix targets;  // edges.size() x 1
  std::string metric_name = "none";
  bool higher_is_better = true;
  std::function<double(const Matrix&)> validate;
};

struct EpochRecord {
  Index epoch = 0;
  double loss = 0.0;
  std::optional<double> metric;
};

struct MetricsReport {
  std::string metric_name;
  std::vector<EpochRecord> history;
  Index best_epoch = 0;  // 0 when no validation ran
  double seconds = 0.0;
  std::vector<std::pair<std::string, double>> final_metrics;
};

/// Full-batch SGD on the objective edges. When validation runs, the
/// parameters of the best validation epoch are restored at the end. A zero
/// learning rate is accepted here (frozen run); configs reject it.
inline MetricsReport train(const PreparedGraph& g, ModelParams& params, const ModelConfig& cfg, const TrainConfig& tc,
                           const Objective& obj) {
  if (tc.epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (tc.eval_every < 1) throw ConfigError("train: eval_every must be at least 1");
  if (obj.edges.empty()) throw DataError("train: no labeled training edges");
  if (obj.targets.rows() != static_cast<Index>(obj.edges.size()) || obj.targets.cols() != 1) {
    throw ShapeError("train: targets " + shape_str(obj.targets.rows(), obj.targets.cols()) + " for " +
                     std::to_string(obj.edges.size()) + " edges");
  }
  const auto start = std::chrono::steady_clock::now();
  Sgd opt(params.tensors(), {tc.learning_rate, tc.momentum, tc.weight_decay});
  const Tensor targets(obj.targets);

  MetricsReport report;
  report.metric_name = obj.metric_name;
  std::optional<double> best;
  std::vector<Matrix> best_params;
  for (Index epoch = 1; epoch <= tc.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      {
        GradientTape tape;
        const Tensor p = forward(g, params, cfg, &obj.edges);
        const Tensor l = bce_loss(p, targets, tc.reduction);
        rec.loss = l.item();
        if (!std::isfinite(rec.loss)) throw NumericError("loss is not finite");
        tape.backward(l);
      }
      opt.step();
      opt.zero_grad();
      if (obj.validate && (epoch % tc.eval_every == 0 || epoch == tc.epochs)) {
        const double m = obj.validate(forward(g, params, cfg).value());
        rec.metric = m;
        if (!best || (obj.higher_is_better ? m > *best : m < *best)) {
          best = m;
          report.best_epoch = epoch;
          best_params = params.snapshot();
        }
      }
    } catch (const NumericError& e) {
      throw NumericError("training aborted at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    report.history.push_back(rec);
  }
  if (best) params.restore(best_params);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Bundle plus the edge index of every dataset record.
struct TaskGraph {
  GraphBundle bundle;
  IndexList record_edge;  // -1 when the record's pair is not a candidate edge
};

inline TaskGraph build_task_graph(const TaskDataset& ds, const BuildConfig& bc, std::uint64_t seed) {
  TaskGraph tg;
  if (ds.kind == TaskKind::Mapping) {
    EdgeList intra1 = build_knn_intra(ds.features1, bc.k_intra1, bc.metric);
    EdgeList intra2 = build_knn_intra(ds.features2, bc.k_intra2, bc.metric);
    EdgeList inter;
    switch (bc.inter_mode) {
      case InterMode::TopK:
        if (ds.confidence.rows() != ds.n1 || ds.confidence.cols() != ds.n2) {
          throw DataError("top-k inter edges need an n1 x n2 confidence matrix");
        }
        inter = build_topk_inter(ds.confidence, bc.k_inter);
        break;
      case InterMode::Full:
        inter = build_full_bipartite(ds.n1, ds.n2, bc.max_inter_edges);
        break;
      case InterMode::Observed:
        inter = build_observed_inter(ds.mapping);
        break;
    }
    tg.bundle = assemble_bundle(ds.features1, ds.features2, intra1, intra2, inter);
    tg.record_edge.assign(ds.mapping.size(), -1);
    std::map<std::pair<Index, Index>, Index> lookup;
    for (Index k = 0; k < inter.size(); ++k) lookup.emplace(std::make_pair(inter.senders[k], inter.receivers[k]), k);
    for (std::size_t r = 0; r < ds.mapping.size(); ++r) {
      auto it = lookup.find(ds.mapping[r]);
      if (it != lookup.end()) tg.record_edge[r] = it->second;
    }
    return tg;
  }

  Matrix users = init_uniform_embeddings(ds.n1, bc.embedding_dim, derive_seed(seed, "user-embeddings"));
  Matrix items = init_uniform_embeddings(ds.n2, bc.embedding_dim, derive_seed(seed, "item-embeddings"));
  EdgeList social = build_social_intra(ds.trust, ds.n1).edges;
  EdgeList inter;
  std::vector<std::pair<Index, Index>> pairs;
  for (const auto& r : ds.ratings) pairs.emplace_back(r.user, r.item);
  switch (bc.inter_mode) {
    case InterMode::Full:
      inter = build_full_bipartite(ds.n1, ds.n2, bc.max_inter_edges);
      break;
    case InterMode::Observed:
      inter = build_observed_inter(pairs);
      break;
    case InterMode::TopK:
      throw ConfigError("rating tasks need build.inter_mode=full or observed");
  }
  tg.bundle = assemble_bundle(std::move(users), std::move(items), social, {}, inter);
  tg.record_edge.resize(pairs.size());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto [u, i] = pairs[r];
    if (bc.inter_mode == InterMode::Full) {
      tg.record_edge[r] = u * ds.n2 + i;
    } else {
      // build_observed_inter sorts row-major.
      auto it = std::lower_bound(inter.senders.begin(), inter.senders.end(), u);
      Index k = static_cast<Index>(it - inter.senders.begin());
      while (inter.receivers[static_cast<std::size_t>(k)] != i) ++k;
      tg.record_edge[r] = k;
    }
  }
  return tg;
}

struct RunResult {
  MetricsReport report;
  ModelParams params;
};

inline std::vector<std::pair<Index, Index>> mapping_queries(const TaskDataset& ds, Split s) {
  std::vector<std::pair<Index, Index>> out;
  for (Index r : ds.records_in(s)) out.push_back(ds.mapping[static_cast<std::size_t>(r)]);
  return out;
}

/// Objective for `ds` on `tg`: mapping tasks label every candidate edge of a
/// training query (1 for the true partner, 0 otherwise); rating tasks label
/// the edges of training ratings with the normalized rating.
inline Objective make_objective(const TaskDataset& ds, const TaskGraph& tg) {
  Objective obj;
  std::vector<double> y;
  if (ds.kind == TaskKind::Mapping) {
    std::vector<char> train_query(static_cast<std::size_t>(ds.n1), 0);
    std::vector<Index> truth(static_cast<std::size_t>(ds.n1), -1);
    for (Index r : ds.records_in(Split::Train)) {
      const auto [i, j] = ds.mapping[static_cast<std::size_t>(r)];
      train_query[static_cast<std::size_t>(i)] = 1;
      truth[static_cast<std::size_t>(i)] = j;
    }
    const EdgeList& inter = tg.bundle.inter;
    const Index n1 = ds.n1;
    for (Index k = 0; k < inter.size(); ++k) {
      const auto s = static_cast<std::size_t>(inter.senders[k]);
      if (!train_query[s]) continue;
      obj.edges.push_back(k);
      y.push_back(inter.receivers[k] - n1 == truth[s] ? 1.0 : 0.0);
    }
    auto val = mapping_queries(ds, Split::Val);
    if (!val.empty()) {
      obj.metric_name = "val_accuracy";
      obj.higher_is_better = true;
      const GraphBundle* b = &tg.bundle;
      obj.validate = [b, val](const Matrix& p) { return eval_mapping_accuracy(p, *b, val); };
    }
  } else {
    for (Index r : ds.records_in(Split::Train)) {
      const auto& rec = ds.ratings[static_cast<std::size_t>(r)];
      obj.edges.push_back(tg.record_edge[static_cast<std::size_t>(r)]);
      y.push_back(rating_to_target(rec.value, ds.r_min, ds.r_max));
    }
    IndexList val_edges;
    std::vector<double> val_truth;
    for (Index r : ds.records_in(Split::Val)) {
      val_edges.push_back(tg.record_edge[static_cast<std::size_t>(r)]);
      val_truth.push_back(ds.ratings[static_cast<std::size_t>(r)].value);
    }
    if (!val_edges.empty()) {
      obj.metric_name = "val_rmse";
      obj.higher_is_better = false;
      const double lo = ds.r_min;
      const double hi = ds.r_max;
      obj.validate = [val_edges, val_truth, lo, hi](const Matrix& p) {
        std::vector<double> pred;
        for (Index k : val_edges) pred.push_back(rating_from_probability(p(k, 0), lo, hi));
        return eval_mae_rmse(pred, val_truth).rmse;
      };
    }
  }
  obj.targets = Matrix(static_cast<Index>(y.size()), 1);
  for (std::size_t i = 0; i < y.size(); ++i) obj.targets(static_cast<Index>(i), 0) = y[i];
  return obj;
}

/// Test-split metrics for a trained model: accuracy for mapping tasks, MAE
/// and RMSE for rating tasks.
inline std::vector<std::pair<std::string, double>> evaluate_test(const TaskDataset& ds, const TaskGraph& tg,
                                                                 const Matrix& p) {
  if (ds.kind == TaskKind::Mapping) {
    return {{"test_accuracy", eval_mapping_accuracy(p, tg.bundle, mapping_queries(ds, Split::Test))}};
  }
  std::vector<double> pred;
  std::vector<double> truth;
  for (Index r : ds.records_in(Split::Test)) {
    pred.push_back(rating_from_probability(p(tg.record_edge[static_cast<std::size_t>(r)], 0), ds.r_min, ds.r_max));
    truth.push_back(ds.ratings[static_cast<std::size_t>(r)].value);
  }
  const ErrorMetrics m = eval_mae_rmse(pred, truth);
  return {{"test_mae", m.mae}, {"test_rmse", m.rmse}};
}

/// Builds the graph for a split dataset, trains from `seed`-derived
/// parameters and evaluates on the test split.
inline RunResult run_task(const TaskDataset& ds, const BuildConfig& bc, ModelConfig mc, const TrainConfig& tc) {
  check_dataset(ds);
  if (ds.split.size() != ds.records()) throw StateError("run_task: dataset has no split");
  const TaskGraph tg = build_task_graph(ds, bc, tc.seed);
  mc.raw_dims = {tg.bundle.nodes.features[0].cols(), tg.bundle.nodes.features[1].cols()};
  const PreparedGraph g(tg.bundle);
  RunResult out{{}, init_params(mc, derive_seed(tc.seed, "params"))};
  out.report = train(g, out.params, mc, tc, make_objective(ds, tg));
  out.report.final_metrics = evaluate_test(ds, tg, forward(g, out.params, mc).value());
  return out;
}

/// Finite-difference check of the summed loss on a six-node-per-modality
/// synthetic bundle (k = 2 intra, K = 2 inter), every edge labeled.
inline GradcheckReport tiny_gradcheck(ModelConfig mc, std::uint64_t seed, GradcheckOptions options = {}) {
  SyntheticSpec spec;
  spec.n = 6;
  spec.clusters = 3;
  spec.d1 = 4;
  spec.d2 = 3;
  spec.latent_dim = 3;
  spec.noise = 0.1;
  TaskDataset ds = gen_synthetic_task(spec, derive_seed(seed, "gradcheck-data"));
  BuildConfig bc;
  bc.k_intra1 = 2;
  bc.k_intra2 = 2;
  bc.k_inter = 2;
  TaskGraph tg = build_task_graph(ds, bc, seed);
  std::vector<double> y;
  for (Index k = 0; k < tg.bundle.inter.size(); ++k) {
    const Index s = tg.bundle.inter.senders[k];
    y.push_back(tg.bundle.inter.receivers[k] - ds.n1 == ds.mapping[static_cast<std::size_t>(s)].second ? 1.0 : 0.0);
  }
  tg.bundle.labels = y;
  mc.raw_dims = {spec.d1, spec.d2};
  ModelParams params = init_params(mc, derive_seed(seed, "gradcheck-params"));
  const PreparedGraph g(tg.bundle);
  return gradcheck([&] { return loss(forward(g, params, mc), tg.bundle); }, params.named(), options);
}

}  // namespace rrnet
