#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "rrnet/train.hpp"

using namespace rrnet;

namespace {

TaskDataset three_cluster_task(double noise, std::uint64_t seed) {
  SyntheticSpec spec{.n = 60, .clusters = 3, .d1 = 16, .d2 = 12, .latent_dim = 4, .noise = noise};
  TaskDataset ds = gen_synthetic_task(spec, seed);
  split_dataset(ds, {0.6, 0.2, 0.2}, seed);
  return ds;
}

struct Fixture {
  TaskDataset ds;
  TaskGraph tg;
  ModelConfig mc;
  Objective obj;

  Fixture(double noise, std::uint64_t seed) : ds(three_cluster_task(noise, seed)) {
    BuildConfig bc;
    bc.k_intra1 = 3;
    bc.k_intra2 = 3;
    bc.k_inter = 3;
    tg = build_task_graph(ds, bc, seed);
    mc.hidden = 16;
    mc.raw_dims = {ds.features1.cols(), ds.features2.cols()};
    obj = make_objective(ds, tg);
  }
};

TrainConfig train_config(Index epochs, double lr) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.learning_rate = lr;
  tc.momentum = 0.5;
  return tc;
}

}  // namespace

TEST(Objective, MappingLabelsOnePositivePerTrainQuery) {
  Fixture f(0.1, 1);
  double positives = 0;
  for (Index k = 0; k < f.obj.targets.rows(); ++k) positives += f.obj.targets(k, 0);
  EXPECT_EQ(positives, static_cast<double>(f.ds.records_in(Split::Train).size()));
  EXPECT_EQ(f.obj.edges.size(), 3 * f.ds.records_in(Split::Train).size());
  EXPECT_EQ(f.obj.metric_name, "val_accuracy");
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
  Fixture f(0.1, 2);
  ModelParams p = init_params(f.mc, 3);
  const auto before = p.snapshot();
  TrainConfig tc = train_config(5, 0.0);
  train(PreparedGraph(f.tg.bundle), p, f.mc, tc, f.obj);
  EXPECT_EQ(before, p.snapshot());
}

TEST(Train, ThreeClusterLossDropsFivefoldIn200Epochs) {
  Fixture f(0.1, 4);
  ModelParams p = init_params(f.mc, 5);
  auto report = train(PreparedGraph(f.tg.bundle), p, f.mc, train_config(200, 0.2), f.obj);
  ASSERT_EQ(report.history.size(), 200u);
  EXPECT_LT(report.history.back().loss, 0.2 * report.history.front().loss);
}

TEST(Train, NoiselessLossDropsTwentyfoldIn300Epochs) {
  Fixture f(0.0, 6);
  ModelParams p = init_params(f.mc, 7);
  auto report = train(PreparedGraph(f.tg.bundle), p, f.mc, train_config(300, 0.2), f.obj);
  double best = report.history.front().loss;
  for (const auto& e : report.history) best = std::min(best, e.loss);
  EXPECT_LT(best, 0.05 * report.history.front().loss);
}

TEST(Train, BitReproducible) {
  Fixture f(0.1, 8);
  ModelParams a = init_params(f.mc, 9);
  ModelParams b = init_params(f.mc, 9);
  const PreparedGraph g(f.tg.bundle);
  auto ra = train(g, a, f.mc, train_config(30, 0.05), f.obj);
  auto rb = train(g, b, f.mc, train_config(30, 0.05), f.obj);
  for (std::size_t e = 0; e < ra.history.size(); ++e) {
    EXPECT_EQ(ra.history[e].loss, rb.history[e].loss);
    EXPECT_EQ(ra.history[e].metric, rb.history[e].metric);
  }
  EXPECT_EQ(a.snapshot(), b.snapshot());
}

TEST(Train, RestoresBestValidationEpoch) {
  Fixture f(0.3, 10);
  ModelParams p = init_params(f.mc, 11);
  const PreparedGraph g(f.tg.bundle);
  auto report = train(g, p, f.mc, train_config(60, 0.05), f.obj);
  ASSERT_GE(report.best_epoch, 1);
  double best = -1;
  for (const auto& e : report.history) best = std::max(best, *e.metric);
  EXPECT_EQ(*report.history[static_cast<std::size_t>(report.best_epoch - 1)].metric, best);
  EXPECT_EQ(f.obj.validate(forward(g, p, f.mc).value()), best);
}

TEST(Train, NonFiniteLossAbortsWithEpoch) {
  Fixture f(0.1, 12);
  ModelParams p = init_params(f.mc, 13);
  TrainConfig tc = train_config(5, 1e300);
  tc.momentum = 0.0;
  f.obj.validate = nullptr;  // otherwise the blow-up surfaces in epoch 1 validation
  try {
    train(PreparedGraph(f.tg.bundle), p, f.mc, tc, f.obj);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 2"), std::string::npos) << e.what();
  }
}

TEST(Train, RejectsEmptyObjective) {
  Fixture f(0.1, 14);
  ModelParams p = init_params(f.mc, 15);
  Objective empty;
  EXPECT_THROW(train(PreparedGraph(f.tg.bundle), p, f.mc, train_config(1, 0.1), empty), DataError);
  EXPECT_THROW(train_config(0, 0.1).check(), ConfigError);
  EXPECT_THROW(train_config(1, 0.0).check(), ConfigError);
}

TEST(TaskGraph, RatingRecordsMapToTheirEdges) {
  TaskDataset ds;
  ds.kind = TaskKind::Rating;
  ds.n1 = 4;
  ds.n2 = 3;
  ds.r_min = 1;
  ds.r_max = 5;
  ds.ratings = {{0, 2, 4}, {3, 0, 1}, {1, 1, 5}, {2, 2, 3}, {0, 0, 2}};
  ds.trust = {{0, 1}, {1, 0}, {2, 2}};
  for (InterMode mode : {InterMode::Full, InterMode::Observed}) {
    BuildConfig bc;
    bc.inter_mode = mode;
    bc.embedding_dim = 4;
    TaskGraph tg = build_task_graph(ds, bc, 1);
    EXPECT_EQ(tg.bundle.inter.size(), mode == InterMode::Full ? 12 : 5);
    EXPECT_EQ(tg.bundle.intra1.size(), 2);  // self-trust dropped
    for (std::size_t r = 0; r < ds.ratings.size(); ++r) {
      const Index k = tg.record_edge[r];
      EXPECT_EQ(tg.bundle.inter.senders[k], ds.ratings[r].user);
      EXPECT_EQ(tg.bundle.inter.receivers[k] - ds.n1, ds.ratings[r].item);
    }
  }
  BuildConfig topk;
  EXPECT_THROW(build_task_graph(ds, topk, 1), ConfigError);
}

TEST(RunTask, RatingPipelineReportsOrderedErrors) {
  TaskDataset ds;
  ds.kind = TaskKind::Rating;
  ds.n1 = 12;
  ds.n2 = 10;
  ds.r_min = 0.5;
  ds.r_max = 4.0;
  Rng rng(3);
  for (Index u = 0; u < ds.n1; ++u)
    for (Index i = 0; i < ds.n2; ++i)
      if (uniform01(rng) < 0.5) ds.ratings.push_back({u, i, 0.5 + 0.5 * static_cast<double>(uniform_index(rng, 8))});
  for (Index u = 0; u + 1 < ds.n1; ++u) ds.trust.emplace_back(u, u + 1);
  split_dataset(ds, {0.8, 0.1, 0.1}, 4);
  BuildConfig bc;
  bc.inter_mode = InterMode::Full;
  bc.embedding_dim = 8;
  ModelConfig mc;
  mc.hidden = 4;
  mc.n_intra_units = 2;
  mc.n_inter_units = 3;
  RunResult r = run_task(ds, bc, mc, train_config(20, 0.05));
  ASSERT_EQ(r.report.final_metrics.size(), 2u);
  EXPECT_EQ(r.report.final_metrics[0].first, "test_mae");
  EXPECT_LE(r.report.final_metrics[0].second, r.report.final_metrics[1].second);
  EXPECT_EQ(r.report.metric_name, "val_rmse");
}

TEST(TinyGradcheck, PassesAtDefaultTolerance) {
  ModelConfig mc;
  mc.hidden = 8;
  auto report = tiny_gradcheck(mc, 0);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}
