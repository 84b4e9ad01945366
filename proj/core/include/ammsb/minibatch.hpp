#pragma once

#include <vector>

#include "ammsb/graph.hpp"
#include "ammsb/random.hpp"

namespace ammsb {

enum class Stratum { kLink, kNonLink };

/// Pairs incident to one pivot node, all with the same observation
/// (links for kLink, non-links for kNonLink), and the factor that makes
/// scale * sum over the batch an unbiased estimate of the sum over all
/// training pairs.
struct EdgeBatch {
  int pivot = 0;
  Stratum kind = Stratum::kLink;
  double scale = 0.0;
  std::vector<Edge> pairs;  // (pivot, peer)

  int y() const { return kind == Stratum::kLink ? 1 : 0; }
};

/// Number of peers b != a that are neither linked to a nor held out with a.
int nonlink_population(const Graph& g, int a, const HeldOutSplit& heldout);

/// ceil(N / m).
int nonlink_stratum_size(int num_nodes, int m);

/// Uniform pivot, fair coin between its link and non-link strata.  An empty
/// stratum sends the coin to the other one; the scale accounts for it.
EdgeBatch sample_edge_strata(const Graph& g, int m, const HeldOutSplit& heldout, Rng& rng);

/// The stratum of `pivot` selected by `kind`, i.e. sample_edge_strata
/// conditioned on its pivot and coin.
EdgeBatch sample_edge_stratum(const Graph& g, int pivot, Stratum kind, int m,
                              const HeldOutSplit& heldout, Rng& rng);

/// Sorted distinct endpoints of the batch.
std::vector<int> batch_nodes(const EdgeBatch& batch);

/// Peers of a pivot for the local update: a neighbor stratum and a
/// non-neighbor stratum, each with its reweighting constant.
struct NodeBatch {
  int pivot = 0;
  std::vector<int> linked;
  std::vector<int> unlinked;
  double link_weight = 0.0;
  double nonlink_weight = 0.0;
};

/// min(n1, deg) neighbors and min(n0, population) non-neighbors without
/// replacement; weights are stratum size over sample size.
NodeBatch sample_node_batch(const Graph& g, int a, int n1, int n0,
                            const HeldOutSplit& heldout, Rng& rng);

/// n peers uniformly from all non-held-out b != a, split by adjacency; both
/// weights equal (population / n).
NodeBatch sample_node_batch_uniform(const Graph& g, int a, int n,
                                    const HeldOutSplit& heldout, Rng& rng);

}  // namespace ammsb
