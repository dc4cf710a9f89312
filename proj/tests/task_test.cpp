#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>

#include "rrnet/data.hpp"
#include "rrnet/metrics.hpp"
#include "test_support.hpp"

using namespace rrnet;
using namespace rrnet::testing;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << text;
  return path;
}

GraphBundle candidate_bundle(const std::vector<std::pair<Index, Index>>& pairs, Index n1, Index n2) {
  EdgeList inter;
  for (const auto& [i, j] : pairs) inter.add(i, j);
  return assemble_bundle(Matrix::Ones(n1, 1), Matrix::Ones(n2, 1), {}, {}, inter);
}

}  // namespace

TEST(MaeRmse, Examples) {
  auto m = eval_mae_rmse({3, 4}, {4, 2});
  EXPECT_NEAR(m.mae, 1.5, 1e-12);
  EXPECT_NEAR(m.rmse, std::sqrt(2.5), 1e-12);
  m = eval_mae_rmse({1, 2, 3}, {1, 2, 3});
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  m = eval_mae_rmse({1.25, 2.25, 3.25}, {1, 2, 3});
  EXPECT_DOUBLE_EQ(m.mae, 0.25);
  EXPECT_DOUBLE_EQ(m.rmse, 0.25);
  EXPECT_THROW(eval_mae_rmse({}, {}), ContractError);
  EXPECT_THROW(eval_mae_rmse({1}, {1, 2}), ContractError);
}

TEST(MaeRmse, MaeNeverExceedsRmse) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto n = 1 + uniform_index(rng, 20);
    std::vector<double> a, b;
    for (std::uint64_t i = 0; i < n; ++i) {
      a.push_back(uniform(rng, 0.5, 4.0));
      b.push_back(uniform(rng, 0.5, 4.0));
    }
    const auto m = eval_mae_rmse(a, b);
    EXPECT_LE(m.mae, m.rmse);
  }
}

TEST(RatingMap, MidpointRoundTripAndGrid) {
  EXPECT_DOUBLE_EQ(rating_from_probability(0.5, 0.5, 4.0), 2.25);
  for (double r = 0.5; r <= 4.0; r += 0.5) {
    const double y = rating_to_target(r, 0.5, 4.0);
    EXPECT_NEAR(y, (r - 0.5) / 3.5, 1e-15);
    EXPECT_NEAR(rating_from_probability(y, 0.5, 4.0), r, 1e-14);
  }
  EXPECT_EQ(rating_to_target(0.5, 0.5, 4.0), 0.0);
  EXPECT_EQ(rating_to_target(4.0, 0.5, 4.0), 1.0);
  EXPECT_THROW(rating_to_target(1.0, 2.0, 2.0), ConfigError);
  EXPECT_THROW(rating_from_probability(0.5, 3.0, 1.0), ConfigError);
}

TEST(MappingAccuracy, PerfectAndPrunedCases) {
  GraphBundle b = candidate_bundle({{0, 0}, {0, 1}, {1, 0}, {1, 1}}, 2, 2);
  Matrix p(4, 1);
  p << 0.9, 0.1, 0.2, 0.8;
  EXPECT_DOUBLE_EQ(eval_mapping_accuracy(p, b, {{0, 0}, {1, 1}}), 1.0);
  GraphBundle pruned = candidate_bundle({{0, 1}, {1, 0}}, 2, 2);
  Matrix q(2, 1);
  q << 0.9, 0.9;
  EXPECT_DOUBLE_EQ(eval_mapping_accuracy(q, pruned, {{0, 0}, {1, 1}}), 0.0);
  EXPECT_THROW(eval_mapping_accuracy(Matrix::Zero(3, 1), b, {{0, 0}}), ShapeError);
}

TEST(MappingAccuracy, FourQueriesMatchEnumeration) {
  Rng rng(2);
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j) pairs.emplace_back(i, j);
  pairs.erase(pairs.begin() + 5);  // query 1 loses candidate 2
  GraphBundle b = candidate_bundle(pairs, 4, 3);
  Matrix p(static_cast<Index>(pairs.size()), 1);
  for (Index k = 0; k < p.rows(); ++k) p(k, 0) = std::round(uniform01(rng) * 4) / 4;  // ties likely
  const std::vector<std::pair<Index, Index>> queries{{0, 2}, {1, 2}, {2, 0}, {3, 1}};
  std::size_t correct = 0;
  for (const auto& [q, truth] : queries) {
    double best = -1;
    Index pick = -1;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      if (pairs[k].first == q && p(static_cast<Index>(k), 0) > best) {
        best = p(static_cast<Index>(k), 0);
        pick = pairs[k].second;
      }
    }
    correct += pick == truth;
  }
  EXPECT_DOUBLE_EQ(eval_mapping_accuracy(p, b, queries), correct / 4.0);
  Matrix logit = p.unaryExpr([](double x) { return std::exp(3 * x) - 7; });
  EXPECT_DOUBLE_EQ(eval_mapping_accuracy(logit, b, queries), correct / 4.0);
}

TEST(FilmTrustLoader, MinimalFile) {
  const auto r = write_temp("ft_min_r.txt", "1 1 3.5\n");
  const auto t = write_temp("ft_min_t.txt", "");
  TaskDataset ds = load_filmtrust(r, t);
  EXPECT_EQ(ds.n1, 1);
  EXPECT_EQ(ds.n2, 1);
  ASSERT_EQ(ds.ratings.size(), 1u);
  EXPECT_EQ(ds.ratings[0].value, 3.5);
}

TEST(FilmTrustLoader, DuplicatesKeepLastMatchingScanOracle) {
  const std::string text = "1 10 1.0\n2 10 2.0\n1 10 3.0\n3 20 4.0\n2 10 0.5\n";
  const auto r = write_temp("ft_dup_r.txt", text);
  const auto t = write_temp("ft_dup_t.txt", "1 2\n");
  TaskDataset ds = load_filmtrust(r, t);

  std::map<std::pair<long, long>, double> oracle;
  std::size_t dups = 0;
  std::istringstream ss(text);
  long u, i;
  double v;
  while (ss >> u >> i >> v) dups += !oracle.insert_or_assign({u, i}, v).second;
  EXPECT_EQ(ds.stats.duplicate_ratings, dups);
  ASSERT_EQ(ds.ratings.size(), oracle.size());
  for (const auto& rec : ds.ratings) {
    const auto key = std::make_pair(static_cast<long>(ds.user_ids[rec.user]), static_cast<long>(ds.item_ids[rec.item]));
    EXPECT_EQ(oracle.at(key), rec.value);
  }
}

TEST(FilmTrustLoader, ReindexingIsABijectionAndTrustIsFiltered) {
  const auto r = write_temp("ft_idx_r.txt", "100 5 1\n7 9 2\n42 5 3\nx y z\n7 5\n7 5 9.0\n7 5 1 1\n");
  const auto t = write_temp("ft_idx_t.txt", "7 42 1\n100 7\n7 999\nbad\n\n");
  TaskDataset ds = load_filmtrust(r, t);
  EXPECT_EQ(ds.user_ids, (std::vector<std::int64_t>{7, 42, 100}));
  EXPECT_EQ(ds.item_ids, (std::vector<std::int64_t>{5, 9}));
  EXPECT_EQ(ds.stats.malformed_ratings, 4u);
  EXPECT_EQ(ds.stats.malformed_trust, 1u);
  EXPECT_EQ(ds.stats.trust_outside_users, 1u);
  ASSERT_EQ(ds.trust.size(), 2u);
  EXPECT_EQ(ds.trust[0], (std::pair<Index, Index>{0, 1}));
  EXPECT_EQ(ds.trust[1], (std::pair<Index, Index>{2, 0}));
  for (std::size_t k = 0; k < ds.user_ids.size(); ++k) {
    EXPECT_EQ(detail::position_of(ds.user_ids, ds.user_ids[k]), static_cast<Index>(k));
  }
}

TEST(FilmTrustLoader, Errors) {
  EXPECT_THROW(load_filmtrust(::testing::TempDir() + "nope.txt", "x"), IoError);
  const auto r = write_temp("ft_bad_r.txt", "junk\n");
  EXPECT_THROW(load_filmtrust(r, r), DataError);
}

TEST(Split, PaperScaleCounts) {
  TaskDataset ds;
  ds.kind = TaskKind::Rating;
  ds.ratings.resize(35497);
  split_dataset(ds, {0.8, 0.1, 0.1}, 7);
  EXPECT_NEAR(static_cast<double>(ds.records_in(Split::Train).size()), 28398, 1);
  EXPECT_NEAR(static_cast<double>(ds.records_in(Split::Val).size()), 3550, 1);
  EXPECT_NEAR(static_cast<double>(ds.records_in(Split::Test).size()), 3549, 1);
  auto first = ds.split;
  split_dataset(ds, {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(first, ds.split);
  split_dataset(ds, {0.8, 0.1, 0.1}, 8);
  EXPECT_NE(first, ds.split);
  split_dataset(ds, {1, 0, 0}, 7);
  EXPECT_EQ(ds.records_in(Split::Train).size(), 35497u);
  EXPECT_THROW(split_dataset(ds, {0.5, 0.1, 0.1}, 1), ConfigError);
  EXPECT_THROW(split_dataset(ds, {1.2, -0.1, -0.1}, 1), ConfigError);
}

TEST(Synthetic, DeterministicAndWellFormed) {
  SyntheticSpec spec;
  TaskDataset a = gen_synthetic_task(spec, 3);
  TaskDataset b = gen_synthetic_task(spec, 3);
  EXPECT_EQ(a.features1, b.features1);
  EXPECT_EQ(a.features2, b.features2);
  EXPECT_EQ(a.confidence, b.confidence);
  EXPECT_NE(a.features1, gen_synthetic_task(spec, 4).features1);
  EXPECT_EQ(a.features1.cols(), spec.d1);
  EXPECT_EQ(a.features2.cols(), spec.d2);
  check_dataset(a);
  for (Index i = 0; i < a.n1; ++i) {
    // every prototype column outranks every other column
    EXPECT_GT(a.confidence.row(i).head(spec.clusters).minCoeff(), a.confidence.row(i).tail(a.n2 - spec.clusters).maxCoeff());
    EXPECT_EQ(a.mapping[static_cast<std::size_t>(i)].second, i % spec.clusters);
  }
  EXPECT_THROW(gen_synthetic_task({.n = 3, .clusters = 4}, 1), ConfigError);
}

TEST(Synthetic, NearestCentroidOracle) {
  SyntheticSpec noiseless{.n = 20, .clusters = 20, .noise = 0.0};
  TaskDataset ds = gen_synthetic_task(noiseless, 5);
  IndexList all(20);
  std::iota(all.begin(), all.end(), Index{0});
  EXPECT_DOUBLE_EQ(nearest_centroid_accuracy(ds, all), 1.0);

  SyntheticSpec noisy{.n = 60, .clusters = 10, .noise = 0.1};
  ds = gen_synthetic_task(noisy, 5);
  all.resize(60);
  std::iota(all.begin(), all.end(), Index{0});
  const double floor = nearest_centroid_accuracy(ds, all);
  RecordProperty("nearest_centroid_accuracy", std::to_string(floor));
  EXPECT_GT(floor, 0.1);
}
