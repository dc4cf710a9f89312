#pragma once

// Task datasets: FilmTrust-style rating files, seeded splits and a synthetic
// cross-modality mapping task.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rrnet/build.hpp"
#include "rrnet/random.hpp"

namespace rrnet {

enum class Split : std::uint8_t { Train, Val, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "?";
}

enum class TaskKind { Mapping, Rating };

struct Rating {
  Index user = 0;
  Index item = 0;
  double value = 0.0;
};

struct LoadStats {
  std::size_t malformed_ratings = 0;
  std::size_t duplicate_ratings = 0;
  std::size_t malformed_trust = 0;
  std::size_t trust_outside_users = 0;
};

/// Records are mapping pairs (Mapping) or ratings (Rating); `split` holds one
/// entry per record.
struct TaskDataset {
  TaskKind kind = TaskKind::Mapping;
  Index n1 = 0;
  Index n2 = 0;

  // Mapping tasks.
  Matrix features1;
  Matrix features2;
  Matrix confidence;  // n1 x n2 initial pair confidence for top-K candidates
  std::vector<std::pair<Index, Index>> mapping;

  // Rating tasks.
  std::vector<Rating> ratings;
  std::vector<std::pair<Index, Index>> trust;  // modality-1 local ids
  double r_min = 0.0;
  double r_max = 1.0;
  std::vector<std::int64_t> user_ids;  // local -> original
  std::vector<std::int64_t> item_ids;
  LoadStats stats;

  // Synthetic ground truth for the nearest-centroid oracle.
  Matrix latent1;
  Matrix centers;

  std::vector<Split> split;

  std::size_t records() const { return kind == TaskKind::Mapping ? mapping.size() : ratings.size(); }

  IndexList records_in(Split s) const {
    IndexList out;
    for (std::size_t i = 0; i < split.size(); ++i) {
      if (split[i] == s) out.push_back(static_cast<Index>(i));
    }
    return out;
  }
};

/// Contract checks on indices, rating range and split coverage.
inline void check_dataset(const TaskDataset& ds) {
  if (ds.kind == TaskKind::Mapping) {
    for (const auto& [i, j] : ds.mapping) {
      if (i < 0 || i >= ds.n1 || j < 0 || j >= ds.n2) {
        throw DataError("mapping pair (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
      }
    }
  } else {
    if (!(ds.r_max > ds.r_min)) throw ConfigError("rating range must satisfy r_max > r_min");
    for (const auto& r : ds.ratings) {
      if (r.user < 0 || r.user >= ds.n1 || r.item < 0 || r.item >= ds.n2) throw DataError("rating index out of range");
      if (r.value < ds.r_min || r.value > ds.r_max) {
        throw DataError("rating " + std::to_string(r.value) + " outside [" + std::to_string(ds.r_min) + ", " +
                        std::to_string(ds.r_max) + "]");
      }
    }
  }
  if (!ds.split.empty() && ds.split.size() != ds.records()) {
    throw DataError("split has " + std::to_string(ds.split.size()) + " entries for " + std::to_string(ds.records()) +
                    " records");
  }
}

namespace detail {

inline std::vector<std::int64_t> sorted_unique(std::vector<std::int64_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline Index position_of(const std::vector<std::int64_t>& sorted, std::int64_t id) {
  return static_cast<Index>(std::lower_bound(sorted.begin(), sorted.end(), id) - sorted.begin());
}

}  // namespace detail

/// Ratings "user item rating" and trust "truster trustee [weight]". Ids are
/// re-indexed contiguously in ascending order. For a repeated (user, item)
/// the last rating wins. Trust pairs whose endpoints are not rating users
/// are dropped and counted.
inline TaskDataset load_filmtrust(const std::string& ratings_path, const std::string& trust_path,
                                  std::pair<double, double> range = {0.5, 4.0}) {
  TaskDataset ds;
  ds.kind = TaskKind::Rating;
  ds.r_min = range.first;
  ds.r_max = range.second;
  if (!(ds.r_max > ds.r_min)) throw ConfigError("rating range must satisfy r_max > r_min");

  struct Raw {
    std::int64_t u, i;
    double r;
  };
  std::vector<Raw> raw;
  {
    std::ifstream in = open_input(ratings_path);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ss(line);
      long long u = 0;
      long long i = 0;
      double r = 0.0;
      std::string rest;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (!(ss >> u >> i >> r) || (ss >> rest) || !std::isfinite(r) || r < ds.r_min || r > ds.r_max) {
        ++ds.stats.malformed_ratings;
        continue;
      }
      raw.push_back({u, i, r});
    }
  }
  if (raw.empty()) throw DataError(ratings_path + ": no valid rating records");

  std::vector<std::int64_t> users;
  std::vector<std::int64_t> items;
  for (const auto& r : raw) {
    users.push_back(r.u);
    items.push_back(r.i);
  }
  ds.user_ids = detail::sorted_unique(std::move(users));
  ds.item_ids = detail::sorted_unique(std::move(items));
  ds.n1 = static_cast<Index>(ds.user_ids.size());
  ds.n2 = static_cast<Index>(ds.item_ids.size());

  std::map<std::pair<Index, Index>, std::size_t> slot;
  for (const auto& r : raw) {
    Rating rec{detail::position_of(ds.user_ids, r.u), detail::position_of(ds.item_ids, r.i), r.r};
    auto [it, fresh] = slot.emplace(std::make_pair(rec.user, rec.item), ds.ratings.size());
    if (fresh) {
      ds.ratings.push_back(rec);
    } else {
      ds.ratings[it->second] = rec;
      ++ds.stats.duplicate_ratings;
    }
  }

  std::ifstream in = open_input(trust_path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    long long u = 0;
    long long v = 0;
    if (!(ss >> u >> v)) {
      ++ds.stats.malformed_trust;
      continue;
    }
    const bool ku = std::binary_search(ds.user_ids.begin(), ds.user_ids.end(), u);
    const bool kv = std::binary_search(ds.user_ids.begin(), ds.user_ids.end(), v);
    if (!ku || !kv) {
      ++ds.stats.trust_outside_users;
      continue;
    }
    ds.trust.emplace_back(detail::position_of(ds.user_ids, u), detail::position_of(ds.user_ids, v));
  }
  return ds;
}

/// Seeded shuffle of record indices; the first round(f0 N) go to train, the
/// next round(f1 N) to validation and the remainder to test.
inline void split_dataset(TaskDataset& ds, std::array<double, 3> fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  if (!(fractions[0] > 0.0)) throw ConfigError("train fraction must be positive");
  const std::size_t n = ds.records();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(fractions[0] * n)));
  const auto n_val =
      std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(fractions[1] * n)));
  ds.split.assign(n, Split::Test);
  for (std::size_t k = 0; k < n; ++k) {
    ds.split[order[k]] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
  }
}

struct SyntheticSpec {
  Index n = 100;         // instances per modality
  Index clusters = 10;
  Index d1 = 16;
  Index d2 = 12;
  Index latent_dim = 8;
  double noise = 0.1;
};

/// Shared latent cluster centres; each instance is its centre plus Gaussian
/// noise, pushed through a fixed random linear map per modality. Modality-2
/// instances 0..C-1 are the noiseless cluster prototypes, and modality-1
/// instance i (cluster i mod C) maps to prototype i mod C. Prototype columns
/// get the highest initial confidence, so top-C candidates always hold the
/// true partner.
inline TaskDataset gen_synthetic_task(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.clusters < 1 || spec.clusters > spec.n) throw ConfigError("synthetic: clusters must lie in [1, n]");
  if (spec.d1 < 1 || spec.d2 < 1 || spec.latent_dim < 1) throw ConfigError("synthetic: dimensions must be positive");
  if (!(spec.noise >= 0.0)) throw ConfigError("synthetic: noise must be non-negative");
  Rng rng(seed);
  const Index n = spec.n;
  const Index c = spec.clusters;
  const Index l = spec.latent_dim;
  auto normal_matrix = [&rng](Index r, Index k, double scale) {
    Matrix m(r, k);
    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; j < k; ++j) m(i, j) = scale * standard_normal(rng);
    }
    return m;
  };

  TaskDataset ds;
  ds.kind = TaskKind::Mapping;
  ds.n1 = n;
  ds.n2 = n;
  ds.centers = normal_matrix(c, l, 1.0);
  const Matrix a1 = normal_matrix(l, spec.d1, 1.0 / std::sqrt(static_cast<double>(l)));
  const Matrix a2 = normal_matrix(l, spec.d2, 1.0 / std::sqrt(static_cast<double>(l)));

  ds.latent1 = Matrix(n, l);
  Matrix latent2(n, l);
  for (Index i = 0; i < n; ++i) {
    ds.latent1.row(i) = ds.centers.row(i % c);
    for (Index k = 0; k < l; ++k) ds.latent1(i, k) += spec.noise * standard_normal(rng);
  }
  for (Index j = 0; j < n; ++j) {
    latent2.row(j) = ds.centers.row(j % c);
    if (j >= c) {
      for (Index k = 0; k < l; ++k) latent2(j, k) += spec.noise * standard_normal(rng);
    }
  }
  ds.features1 = ds.latent1 * a1;
  ds.features2 = latent2 * a2;

  ds.confidence = Matrix(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) ds.confidence(i, j) = uniform01(rng) + (j < c ? 1.0 : 0.0);
  }
  for (Index i = 0; i < n; ++i) ds.mapping.emplace_back(i, i % c);
  return ds;
}

/// Fraction of modality-1 instances whose latent lies nearest to their own
/// cluster centre.
inline double nearest_centroid_accuracy(const TaskDataset& ds, const IndexList& records) {
  if (records.empty()) return 0.0;
  std::size_t correct = 0;
  for (Index r : records) {
    const auto [i, j] = ds.mapping[static_cast<std::size_t>(r)];
    Index best = 0;
    double best_d = (ds.latent1.row(i) - ds.centers.row(0)).squaredNorm();
    for (Index k = 1; k < ds.centers.rows(); ++k) {
      const double d = (ds.latent1.row(i) - ds.centers.row(k)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    if (best == j) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

}  // namespace rrnet
