#pragma once

// Attributed graphs for two-modality relational reasoning.
//
// One NodeTable holds every node of both modalities under a global index.
// Raw features stay in one matrix per modality (the widths generally differ);
// `local[i]` is node i's row in its modality's matrix. The two intra edge
// lists and the inter edge list are views over that shared table.

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rrnet/tensor.hpp"

namespace rrnet {

enum class Modality : std::uint8_t { First = 1, Second = 2 };

inline std::size_t slot(Modality m) { return m == Modality::First ? 0 : 1; }

enum class EdgeRole { Intra1, Intra2, Inter };

inline const char* role_name(EdgeRole role) {
  switch (role) {
    case EdgeRole::Intra1:
      return "intra1";
    case EdgeRole::Intra2:
      return "intra2";
    case EdgeRole::Inter:
      return "inter";
  }
  return "?";
}

inline EdgeRole parse_role(const std::string& name) {
  if (name == "intra1") return EdgeRole::Intra1;
  if (name == "intra2") return EdgeRole::Intra2;
  if (name == "inter") return EdgeRole::Inter;
  throw FormatError("unknown edge-list role '" + name + "'");
}

struct NodeTable {
  std::vector<Modality> modality;
  std::vector<Index> local;
  std::array<Matrix, 2> features;

  Index size() const { return static_cast<Index>(modality.size()); }
  Index count(Modality m) const { return features[slot(m)].rows(); }
  auto feature_row(Index node) const {
    return features[slot(modality[static_cast<std::size_t>(node)])].row(local[static_cast<std::size_t>(node)]);
  }
};

struct EdgeList {
  IndexList senders;
  IndexList receivers;
  /// Materialized edge attributes; undefined until init_edge_attrs().
  Tensor attrs;

  Index size() const { return static_cast<Index>(senders.size()); }
  bool empty() const { return senders.empty(); }
  void add(Index sender, Index receiver) {
    senders.push_back(sender);
    receivers.push_back(receiver);
  }
};

struct GraphBundle {
  NodeTable nodes;
  EdgeList intra1;
  EdgeList intra2;
  EdgeList inter;
  /// Optional target per inter edge, in [0, 1].
  std::optional<std::vector<double>> labels;

  const EdgeList& edges(EdgeRole role) const {
    switch (role) {
      case EdgeRole::Intra1:
        return intra1;
      case EdgeRole::Intra2:
        return intra2;
      case EdgeRole::Inter:
        return inter;
    }
    return inter;
  }
  EdgeList& edges(EdgeRole role) { return const_cast<EdgeList&>(std::as_const(*this).edges(role)); }
};

/// Assembles a bundle from per-modality features and edge lists expressed in
/// modality-local indices. Modality-1 nodes receive global ids [0, n1),
/// modality-2 nodes [n1, n1 + n2). Inter edges go from modality 1 to 2.
inline GraphBundle assemble_bundle(Matrix features1, Matrix features2, const EdgeList& intra1_local,
                                   const EdgeList& intra2_local, const EdgeList& inter_local) {
  GraphBundle b;
  const Index n1 = features1.rows();
  const Index n2 = features2.rows();
  b.nodes.modality.assign(static_cast<std::size_t>(n1), Modality::First);
  b.nodes.modality.insert(b.nodes.modality.end(), static_cast<std::size_t>(n2), Modality::Second);
  b.nodes.local.resize(static_cast<std::size_t>(n1 + n2));
  for (Index i = 0; i < n1; ++i) b.nodes.local[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < n2; ++i) b.nodes.local[static_cast<std::size_t>(n1 + i)] = i;
  b.nodes.features[0] = std::move(features1);
  b.nodes.features[1] = std::move(features2);

  auto remap = [](const EdgeList& in, Index sender_offset, Index receiver_offset) {
    EdgeList out;
    out.senders.reserve(in.senders.size());
    out.receivers.reserve(in.receivers.size());
    for (std::size_t k = 0; k < in.senders.size(); ++k) {
      out.add(in.senders[k] + sender_offset, in.receivers[k] + receiver_offset);
    }
    return out;
  };
  b.intra1 = remap(intra1_local, 0, 0);
  b.intra2 = remap(intra2_local, n1, n1);
  b.inter = remap(inter_local, 0, n1);
  return b;
}

/// Sets every edge attribute to sender-features (c) receiver-features.
inline GraphBundle init_edge_attrs(GraphBundle bundle) {
  const NodeTable& nodes = bundle.nodes;
  for (std::size_t m = 0; m < 2; ++m) {
    Index expected = 0;
    for (std::size_t i = 0; i < nodes.modality.size(); ++i) expected += (slot(nodes.modality[i]) == m);
    if (expected > 0 && nodes.features[m].rows() != expected) {
      throw StateError("init_edge_attrs: modality " + std::to_string(m + 1) + " has " + std::to_string(expected) +
                       " nodes but " + std::to_string(nodes.features[m].rows()) + " feature rows");
    }
  }
  for (EdgeRole role : {EdgeRole::Intra1, EdgeRole::Intra2, EdgeRole::Inter}) {
    EdgeList& list = bundle.edges(role);
    Index width = 0;
    if (!list.empty()) {
      width = nodes.feature_row(list.senders[0]).size() + nodes.feature_row(list.receivers[0]).size();
    }
    Matrix attrs(list.size(), width);
    for (Index k = 0; k < list.size(); ++k) {
      const auto s = nodes.feature_row(list.senders[static_cast<std::size_t>(k)]);
      const auto r = nodes.feature_row(list.receivers[static_cast<std::size_t>(k)]);
      if (s.size() + r.size() != width) throw ShapeError("init_edge_attrs: mixed endpoint widths in one edge list");
      attrs.row(k).head(s.size()) = s;
      attrs.row(k).tail(r.size()) = r;
    }
    list.attrs = Tensor(std::move(attrs));
  }
  return bundle;
}

/// Indices of every edge in `role` touching `node` as sender or receiver, ascending.
inline IndexList incident_edges(const GraphBundle& bundle, Index node, EdgeRole role) {
  if (node < 0 || node >= bundle.nodes.size()) {
    throw BoundsError("incident_edges: node " + std::to_string(node) + " out of range [0, " +
                      std::to_string(bundle.nodes.size()) + ")");
  }
  const EdgeList& list = bundle.edges(role);
  IndexList out;
  for (Index k = 0; k < list.size(); ++k) {
    if (list.senders[static_cast<std::size_t>(k)] == node || list.receivers[static_cast<std::size_t>(k)] == node) {
      out.push_back(k);
    }
  }
  return out;
}

struct Violation {
  std::string kind;
  std::string detail;
};

/// Checks every structural invariant of a bundle. An empty result means the
/// bundle is well formed.
inline std::vector<Violation> validate(const GraphBundle& bundle) {
  std::vector<Violation> out;
  const NodeTable& nodes = bundle.nodes;
  const Index n = nodes.size();
  if (nodes.local.size() != nodes.modality.size()) {
    out.push_back({"node-table", "modality and local index tables differ in length"});
    return out;
  }
  std::array<std::set<Index>, 2> seen_local;
  for (Index i = 0; i < n; ++i) {
    const std::size_t m = slot(nodes.modality[static_cast<std::size_t>(i)]);
    const Index loc = nodes.local[static_cast<std::size_t>(i)];
    if (loc < 0 || loc >= nodes.features[m].rows() || !seen_local[m].insert(loc).second) {
      out.push_back({"node-table", "node " + std::to_string(i) + " has invalid feature row " + std::to_string(loc)});
    }
  }

  auto check_list = [&](EdgeRole role) {
    const EdgeList& list = bundle.edges(role);
    const std::string name = role_name(role);
    if (list.senders.size() != list.receivers.size()) {
      out.push_back({"edge-list", name + ": sender and receiver counts differ"});
      return;
    }
    auto where = [&](std::size_t k) {
      return name + " edge " + std::to_string(k) + " (" + std::to_string(list.senders[k]) + "->" +
             std::to_string(list.receivers[k]) + ")";
    };
    std::vector<std::size_t> in_range;
    in_range.reserve(list.senders.size());
    for (std::size_t k = 0; k < list.senders.size(); ++k) {
      const Index s = list.senders[k];
      const Index r = list.receivers[k];
      if (s < 0 || s >= n || r < 0 || r >= n) {
        out.push_back({"index-range", where(k)});
        continue;
      }
      in_range.push_back(k);
      if (s == r) out.push_back({"self-loop", where(k)});
      const Modality ms = nodes.modality[static_cast<std::size_t>(s)];
      const Modality mr = nodes.modality[static_cast<std::size_t>(r)];
      if (role == EdgeRole::Inter) {
        if (ms != Modality::First || mr != Modality::Second) out.push_back({"inter-modality", where(k)});
      } else {
        const Modality want = role == EdgeRole::Intra1 ? Modality::First : Modality::Second;
        if (ms != want || mr != want) out.push_back({"intra-modality", where(k)});
      }
    }
    auto key = [&](std::size_t k) { return std::make_pair(list.senders[k], list.receivers[k]); };
    std::stable_sort(in_range.begin(), in_range.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
    std::vector<std::size_t> dups;
    for (std::size_t i = 1; i < in_range.size(); ++i) {
      if (key(in_range[i]) == key(in_range[i - 1])) dups.push_back(in_range[i]);
    }
    std::sort(dups.begin(), dups.end());
    for (std::size_t k : dups) out.push_back({"duplicate-edge", where(k)});
    if (list.attrs.defined() && list.attrs.rows() != list.size()) {
      out.push_back({"edge-attr-shape", name + ": " + list.attrs.shape() + " attributes for " +
                                            std::to_string(list.size()) + " edges"});
    }
  };
  check_list(EdgeRole::Intra1);
  check_list(EdgeRole::Intra2);
  check_list(EdgeRole::Inter);

  if (bundle.labels) {
    if (static_cast<Index>(bundle.labels->size()) != bundle.inter.size()) {
      out.push_back({"label-length", std::to_string(bundle.labels->size()) + " labels for " +
                                         std::to_string(bundle.inter.size()) + " inter edges"});
    }
    for (std::size_t k = 0; k < bundle.labels->size(); ++k) {
      const double y = (*bundle.labels)[k];
      if (!(y >= 0.0 && y <= 1.0)) {
        out.push_back({"label-range", "label " + std::to_string(k) + " = " + std::to_string(y)});
      }
    }
  }
  return out;
}

inline void require_valid(const GraphBundle& bundle) {
  const auto violations = validate(bundle);
  if (violations.empty()) return;
  std::string msg = "invalid graph bundle:";
  for (std::size_t i = 0; i < violations.size() && i < 5; ++i) {
    msg += " [" + violations[i].kind + "] " + violations[i].detail + ";";
  }
  throw DataError(msg);
}

/// Relabels nodes: old node i becomes node perm[i]. Edge order is preserved.
inline GraphBundle permute_nodes(const GraphBundle& bundle, const IndexList& perm) {
  const Index n = bundle.nodes.size();
  if (static_cast<Index>(perm.size()) != n) throw ShapeError("permute_nodes: permutation length mismatch");
  GraphBundle out = bundle;
  for (Index i = 0; i < n; ++i) {
    const Index to = perm[static_cast<std::size_t>(i)];
    if (to < 0 || to >= n) throw BoundsError("permute_nodes: target " + std::to_string(to) + " out of range");
    out.nodes.modality[static_cast<std::size_t>(to)] = bundle.nodes.modality[static_cast<std::size_t>(i)];
    out.nodes.local[static_cast<std::size_t>(to)] = bundle.nodes.local[static_cast<std::size_t>(i)];
  }
  for (EdgeRole role : {EdgeRole::Intra1, EdgeRole::Intra2, EdgeRole::Inter}) {
    EdgeList& list = out.edges(role);
    for (auto& s : list.senders) s = perm[static_cast<std::size_t>(s)];
    for (auto& r : list.receivers) r = perm[static_cast<std::size_t>(r)];
  }
  return out;
}

/// Writes "role" then one "sender<TAB>receiver" line per edge.
inline void write_edge_list(std::ostream& os, EdgeRole role, const EdgeList& list) {
  os << role_name(role) << '\n';
  for (std::size_t k = 0; k < list.senders.size(); ++k) os << list.senders[k] << '\t' << list.receivers[k] << '\n';
}

inline std::pair<EdgeRole, EdgeList> read_edge_list(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("edge list: missing role header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const EdgeRole role = parse_role(line);
  EdgeList list;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("edge list line " + std::to_string(lineno) + ": missing tab");
    try {
      std::size_t used = 0;
      const long long s = std::stoll(line.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("sender");
      const std::string rest = line.substr(tab + 1);
      const long long r = std::stoll(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("receiver");
      list.add(static_cast<Index>(s), static_cast<Index>(r));
    } catch (const std::logic_error&) {
      throw FormatError("edge list line " + std::to_string(lineno) + ": expected two integers");
    }
  }
  return {role, std::move(list)};
}

}  // namespace rrnet
