#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "rrnet/graph.hpp"
#include "test_support.hpp"

using namespace rrnet;
using rrnet::testing::random_matrix;

namespace {

EdgeList edges(std::initializer_list<std::pair<Index, Index>> list) {
  EdgeList out;
  for (auto [s, r] : list) out.add(s, r);
  return out;
}

bool has_kind(const std::vector<Violation>& v, const std::string& kind) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.kind == kind; });
}

GraphBundle random_bundle(Rng& rng, Index n1, Index n2, Index d) {
  EdgeList i1, i2, inter;
  for (Index a = 0; a < n1; ++a)
    for (Index b = 0; b < n1; ++b)
      if (a != b && uniform01(rng) < 0.4) i1.add(a, b);
  for (Index a = 0; a < n2; ++a)
    for (Index b = 0; b < n2; ++b)
      if (a != b && uniform01(rng) < 0.4) i2.add(a, b);
  for (Index a = 0; a < n1; ++a)
    for (Index b = 0; b < n2; ++b)
      if (uniform01(rng) < 0.5) inter.add(a, b);
  return assemble_bundle(random_matrix(n1, d, rng), random_matrix(n2, d, rng), i1, i2, inter);
}

}  // namespace

TEST(InitEdgeAttrs, ConcatenatesSenderAndReceiver) {
  Matrix f1(2, 2);
  f1 << 1, 2, 3, 4;
  GraphBundle b = init_edge_attrs(assemble_bundle(f1, Matrix(0, 2), edges({{0, 1}}), {}, {}));
  EXPECT_EQ(b.intra1.attrs.value(), Tensor::from_rows({{1, 2, 3, 4}}).value());
}

TEST(InitEdgeAttrs, ZeroNodesGiveZeroEdges) {
  GraphBundle b = init_edge_attrs(
      assemble_bundle(Matrix::Zero(3, 2), Matrix::Zero(2, 3), edges({{0, 1}, {2, 0}}), edges({{1, 0}}),
                      edges({{0, 0}, {2, 1}})));
  EXPECT_TRUE(b.intra1.attrs.value().isZero(0.0));
  EXPECT_TRUE(b.inter.attrs.value().isZero(0.0));
  EXPECT_EQ(b.inter.attrs.cols(), 5);
}

TEST(InitEdgeAttrs, MatchesLoopOracleAndSplitsBack) {
  Rng rng(3);
  GraphBundle raw = random_bundle(rng, 3, 2, 4);
  GraphBundle b = init_edge_attrs(raw);
  for (EdgeRole role : {EdgeRole::Intra1, EdgeRole::Intra2, EdgeRole::Inter}) {
    const EdgeList& l = b.edges(role);
    for (Index k = 0; k < l.size(); ++k) {
      const Index s = l.senders[k], r = l.receivers[k];
      for (Index c = 0; c < 4; ++c) {
        EXPECT_EQ(l.attrs(k, c), b.nodes.feature_row(s)(c));
        EXPECT_EQ(l.attrs(k, 4 + c), b.nodes.feature_row(r)(c));
      }
    }
  }
  // Idempotent.
  GraphBundle again = init_edge_attrs(b);
  EXPECT_EQ(again.inter.attrs.value(), b.inter.attrs.value());
}

TEST(InitEdgeAttrs, MissingFeaturesIsStateError) {
  GraphBundle b = assemble_bundle(Matrix::Zero(2, 2), Matrix::Zero(1, 2), {}, {}, edges({{0, 0}}));
  b.nodes.features[1] = Matrix(0, 2);
  EXPECT_THROW(init_edge_attrs(b), StateError);
}

TEST(IncidentEdges, StarIsolatedAndScanOracle) {
  GraphBundle star = assemble_bundle(Matrix::Zero(5, 1), Matrix::Zero(1, 1),
                                     edges({{0, 1}, {2, 0}, {0, 3}, {4, 0}}), {}, {});
  EXPECT_EQ(incident_edges(star, 0, EdgeRole::Intra1), (IndexList{0, 1, 2, 3}));
  EXPECT_TRUE(incident_edges(star, 5, EdgeRole::Intra1).empty());
  EXPECT_THROW(incident_edges(star, 6, EdgeRole::Intra1), BoundsError);

  Rng rng(4);
  GraphBundle b = random_bundle(rng, 6, 1, 2);
  std::vector<int> hits(b.intra1.senders.size(), 0);
  for (Index u = 0; u < b.nodes.size(); ++u) {
    IndexList got = incident_edges(b, u, EdgeRole::Intra1);
    IndexList want;
    for (Index k = 0; k < b.intra1.size(); ++k)
      if (b.intra1.senders[k] == u || b.intra1.receivers[k] == u) want.push_back(k);
    EXPECT_EQ(got, want);
    for (Index k : got) ++hits[k];
  }
  // Every edge is seen once from each endpoint.
  for (int h : hits) EXPECT_EQ(h, 2);
}

TEST(Validate, WellFormedBundleIsOk) {
  Rng rng(5);
  GraphBundle b = random_bundle(rng, 4, 3, 2);
  b.labels = std::vector<double>(b.inter.senders.size(), 0.5);
  EXPECT_TRUE(validate(b).empty());
}

TEST(Validate, ReportsViolations) {
  GraphBundle b = assemble_bundle(Matrix::Zero(3, 1), Matrix::Zero(2, 1), edges({{0, 1}}), {}, edges({{0, 0}}));
  b.inter.add(0, 1);  // global ids: both endpoints are modality 1
  EXPECT_TRUE(has_kind(validate(b), "inter-modality"));

  GraphBundle dup = assemble_bundle(Matrix::Zero(3, 1), Matrix::Zero(2, 1), edges({{0, 1}, {0, 1}}), {}, {});
  EXPECT_TRUE(has_kind(validate(dup), "duplicate-edge"));

  GraphBundle loop = assemble_bundle(Matrix::Zero(3, 1), Matrix::Zero(2, 1), edges({{2, 2}}), {}, {});
  EXPECT_TRUE(has_kind(validate(loop), "self-loop"));

  GraphBundle cross = assemble_bundle(Matrix::Zero(3, 1), Matrix::Zero(2, 1), {}, {}, {});
  cross.intra2.add(0, 3);
  EXPECT_TRUE(has_kind(validate(cross), "intra-modality"));

  GraphBundle labels = assemble_bundle(Matrix::Zero(1, 1), Matrix::Zero(1, 1), {}, {}, edges({{0, 0}}));
  labels.labels = std::vector<double>{1.5, 0.0};
  EXPECT_TRUE(has_kind(validate(labels), "label-length"));
  EXPECT_TRUE(has_kind(validate(labels), "label-range"));
  EXPECT_THROW(require_valid(labels), DataError);
}

TEST(PermuteNodes, RemapsEdgesAndTags) {
  Rng rng(6);
  GraphBundle b = random_bundle(rng, 3, 3, 2);
  IndexList perm{4, 0, 5, 2, 1, 3};
  GraphBundle p = permute_nodes(b, perm);
  EXPECT_TRUE(validate(p).empty());
  for (Index k = 0; k < b.inter.size(); ++k) {
    EXPECT_EQ(p.nodes.feature_row(p.inter.senders[k]), b.nodes.feature_row(b.inter.senders[k]));
    EXPECT_EQ(p.nodes.feature_row(p.inter.receivers[k]), b.nodes.feature_row(b.inter.receivers[k]));
  }
}

TEST(EdgeListFormat, WritesRoleHeaderAndTabSeparatedPairs) {
  EdgeList l = edges({{0, 3}, {2, 1}});
  std::ostringstream os;
  write_edge_list(os, EdgeRole::Intra2, l);
  EXPECT_EQ(os.str(), "intra2\n0\t3\n2\t1\n");
  std::istringstream is(os.str());
  auto [role, back] = read_edge_list(is);
  EXPECT_EQ(role, EdgeRole::Intra2);
  EXPECT_EQ(back.senders, l.senders);
  EXPECT_EQ(back.receivers, l.receivers);

  std::istringstream bad_role("sideways\n0\t1\n");
  EXPECT_THROW(read_edge_list(bad_role), FormatError);
  std::istringstream bad_line("inter\n0 1\n");
  EXPECT_THROW(read_edge_list(bad_line), FormatError);
}
