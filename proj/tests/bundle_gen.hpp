#pragma once

#include "rrnet/graph.hpp"
#include "test_support.hpp"

namespace rrnet::testing {

/// Random bundle with n1 + n2 nodes, random feature widths and random edges
/// (no self-loops, no duplicates). Inter edges always exist.
inline GraphBundle random_small_bundle(Rng& rng, Index n1, Index n2, Index d1, Index d2, double density = 0.5) {
  EdgeList i1, i2, inter;
  for (Index a = 0; a < n1; ++a)
    for (Index b = 0; b < n1; ++b)
      if (a != b && uniform01(rng) < density) i1.add(a, b);
  for (Index a = 0; a < n2; ++a)
    for (Index b = 0; b < n2; ++b)
      if (a != b && uniform01(rng) < density) i2.add(a, b);
  for (Index a = 0; a < n1; ++a)
    for (Index b = 0; b < n2; ++b)
      if (uniform01(rng) < density) inter.add(a, b);
  if (inter.empty()) inter.add(0, 0);
  return assemble_bundle(random_matrix(n1, d1, rng), random_matrix(n2, d2, rng), i1, i2, inter);
}

}  // namespace rrnet::testing
