#pragma once

// Graph constructors: KNN intra edges, top-K inter edges, social-relation
// intra edges, full bipartite inter edges, and uniform node embeddings.
// All builders work in modality-local indices; assemble_bundle() lifts them
// into a shared node table. Ties always go to the lower index.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rrnet/graph.hpp"
#include "rrnet/random.hpp"

namespace rrnet {

enum class Metric { Cosine, Euclidean };

inline const char* metric_name(Metric m) { return m == Metric::Cosine ? "cosine" : "euclidean"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "cosine") return Metric::Cosine;
  if (s == "euclidean") return Metric::Euclidean;
  throw ConfigError("unknown metric '" + s + "' (expected cosine or euclidean)");
}

enum class InterMode { TopK, Full, Observed };

inline const char* inter_mode_name(InterMode m) {
  switch (m) {
    case InterMode::TopK:
      return "topk";
    case InterMode::Full:
      return "full";
    case InterMode::Observed:
      return "observed";
  }
  return "?";
}

inline InterMode parse_inter_mode(const std::string& s) {
  if (s == "topk") return InterMode::TopK;
  if (s == "full") return InterMode::Full;
  if (s == "observed") return InterMode::Observed;
  throw ConfigError("unknown inter-edge mode '" + s + "' (expected topk, full or observed)");
}

struct BuildConfig {
  Index k_intra1 = 5;
  Index k_intra2 = 2;
  Index k_inter = 10;
  Metric metric = Metric::Cosine;
  InterMode inter_mode = InterMode::TopK;
  Index embedding_dim = 128;
  /// Upper bound on the number of inter edges a full bipartite build may emit.
  Index max_inter_edges = 5'000'000;
};

/// For each node i, adds edges j -> i from its k nearest neighbours j != i.
/// Mutual neighbours therefore produce both directions.
inline EdgeList build_knn_intra(const Matrix& features, Index k, Metric metric) {
  const Index n = features.rows();
  if (k < 0) throw ConfigError("knn: k must be non-negative");
  if (k == 0) return {};
  if (k >= n) {
    throw ConfigError("knn: k = " + std::to_string(k) + " must be smaller than the node count " + std::to_string(n));
  }

  // Larger score = closer.
  Matrix score;
  if (metric == Metric::Cosine) {
    Matrix unit = features;
    for (Index i = 0; i < n; ++i) {
      const double norm = features.row(i).norm();
      if (!(norm > 0.0)) throw NumericError("knn: row " + std::to_string(i) + " has zero norm under cosine metric");
      unit.row(i) /= norm;
    }
    score = unit * unit.transpose();
  } else {
    score.resize(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) score(i, j) = -(features.row(i) - features.row(j)).squaredNorm();
    }
  }

  EdgeList out;
  out.senders.reserve(static_cast<std::size_t>(n * k));
  out.receivers.reserve(static_cast<std::size_t>(n * k));
  IndexList order;
  for (Index i = 0; i < n; ++i) {
    order.clear();
    for (Index j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
      if (score(i, a) != score(i, b)) return score(i, a) > score(i, b);
      return a < b;
    });
    for (Index r = 0; r < k; ++r) out.add(order[static_cast<std::size_t>(r)], i);
  }
  return out;
}

/// For each modality-1 node i, edges i -> j to its K most confident partners.
inline EdgeList build_topk_inter(const Matrix& confidence, Index K) {
  const Index n1 = confidence.rows();
  const Index n2 = confidence.cols();
  if (K < 0 || K > n2) {
    throw ConfigError("top-k: K = " + std::to_string(K) + " must lie in [0, " + std::to_string(n2) + "]");
  }
  EdgeList out;
  IndexList order(static_cast<std::size_t>(n2));
  for (Index i = 0; i < n1; ++i) {
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + K, order.end(), [&](Index a, Index b) {
      if (confidence(i, a) != confidence(i, b)) return confidence(i, a) > confidence(i, b);
      return a < b;
    });
    for (Index r = 0; r < K; ++r) out.add(i, order[static_cast<std::size_t>(r)]);
  }
  return out;
}

struct SocialEdges {
  EdgeList edges;
  std::size_t rejected_self = 0;
  std::size_t duplicates = 0;
};

/// One directed edge u -> v per listed pair, first occurrence kept.
inline SocialEdges build_social_intra(const std::vector<std::pair<Index, Index>>& pairs, Index n) {
  SocialEdges out;
  std::set<std::pair<Index, Index>> seen;
  for (const auto& [u, v] : pairs) {
    if (u < 0 || u >= n || v < 0 || v >= n) {
      throw BoundsError("social pair (" + std::to_string(u) + ", " + std::to_string(v) + ") outside [0, " +
                        std::to_string(n) + ")");
    }
    if (u == v) {
      ++out.rejected_self;
      continue;
    }
    if (!seen.emplace(u, v).second) {
      ++out.duplicates;
      continue;
    }
    out.edges.add(u, v);
  }
  return out;
}

/// Every (i, j) pair in row-major order.
inline EdgeList build_full_bipartite(Index n1, Index n2, Index max_edges = BuildConfig{}.max_inter_edges) {
  if (n1 < 0 || n2 < 0) throw ConfigError("full bipartite: negative node count");
  if (n2 != 0 && n1 > max_edges / n2) {
    throw ResourceError("full bipartite: " + std::to_string(n1) + " x " + std::to_string(n2) +
                        " edges exceed the cap of " + std::to_string(max_edges) +
                        "; raise build.max_inter_edges or use top-k inter edges");
  }
  EdgeList out;
  out.senders.reserve(static_cast<std::size_t>(n1 * n2));
  out.receivers.reserve(static_cast<std::size_t>(n1 * n2));
  for (Index i = 0; i < n1; ++i) {
    for (Index j = 0; j < n2; ++j) out.add(i, j);
  }
  return out;
}

/// Inter edges only for the listed (modality-1, modality-2) pairs, deduplicated
/// and sorted row-major.
inline EdgeList build_observed_inter(std::vector<std::pair<Index, Index>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  EdgeList out;
  for (const auto& [u, v] : pairs) out.add(u, v);
  return out;
}

inline Matrix init_uniform_embeddings(Index n, Index dim, std::uint64_t seed) {
  if (n <= 0 || dim <= 0) throw ConfigError("embeddings: n and dim must be positive");
  Rng rng(seed);
  Matrix m(n, dim);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < dim; ++j) m(i, j) = uniform01(rng);
  }
  return m;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

/// Headerless CSV, one instance per row.
inline Matrix read_feature_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::logic_error&) {
        throw FormatError(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) +
                        " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no feature rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

inline void write_feature_csv(std::ostream& os, const Matrix& m) {
  std::ostringstream cell;
  cell.precision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      cell.str("");
      cell << m(i, j);
      os << (j ? "," : "") << cell.str();
    }
    os << '\n';
  }
}

/// Whitespace-separated "u v" per line; extra columns are ignored.
inline std::vector<std::pair<Index, Index>> read_pair_list(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<std::pair<Index, Index>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    long long u = 0;
    long long v = 0;
    if (!(ss >> u)) continue;  // blank line
    if (!(ss >> v)) throw FormatError(path + ":" + std::to_string(lineno) + ": expected 'u v'");
    out.emplace_back(static_cast<Index>(u), static_cast<Index>(v));
  }
  return out;
}

}  // namespace rrnet
