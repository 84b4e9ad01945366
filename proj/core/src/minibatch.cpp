#include "ammsb/minibatch.hpp"

#include <algorithm>
#include <unordered_set>

#include "ammsb/error.hpp"

namespace ammsb {

namespace {

// Draws `count` distinct peers of `a` satisfying `admit`, out of a
// population of known size.  Rejection for sparse requests, enumeration
// otherwise.
template <typename Admit>
std::vector<int> sample_peers(int num_nodes, int a, int count, int population,
                              Admit&& admit, Rng& rng) {
  std::vector<int> out;
  if (count <= 0 || population <= 0) return out;
  count = std::min(count, population);
  if (2 * count >= population) {
    std::vector<int> all;
    all.reserve(population);
    for (int b = 0; b < num_nodes; ++b) {
      if (b != a && admit(b)) all.push_back(b);
    }
    out.reserve(count);
    std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
    return out;
  }
  std::uniform_int_distribution<int> node(0, num_nodes - 1);
  std::unordered_set<int> taken;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    const int b = node(rng);
    if (b == a || !admit(b) || !taken.insert(b).second) continue;
    out.push_back(b);
  }
  return out;
}

double link_branch_probability(int degree, int population) {
  if (degree > 0 && population > 0) return 0.5;
  return degree > 0 ? 1.0 : 0.0;
}

}  // namespace

int nonlink_population(const Graph& g, int a, const HeldOutSplit& heldout) {
  // Held-out links are already absent from the training adjacency, so every
  // held-out pair at `a` is a non-link of the training graph.
  return g.num_nodes() - 1 - g.degree(a) - heldout.excluded_count(a);
}

int nonlink_stratum_size(int num_nodes, int m) {
  if (m < 1) throw Error("stratification count m must be at least 1");
  return (num_nodes + m - 1) / m;
}

EdgeBatch sample_edge_stratum(const Graph& g, int pivot, Stratum kind, int m,
                              const HeldOutSplit& heldout, Rng& rng) {
  const int N = g.num_nodes();
  const int degree = g.degree(pivot);
  const int population = nonlink_population(g, pivot, heldout);
  const double q_link = link_branch_probability(degree, population);

  EdgeBatch batch;
  batch.pivot = pivot;
  batch.kind = kind;
  if (kind == Stratum::kLink) {
    if (degree == 0) throw Error("link stratum of an isolated node");
    for (int b : g.neighbors(pivot)) batch.pairs.emplace_back(pivot, b);
    batch.scale = static_cast<double>(N) / (2.0 * q_link);
    return batch;
  }
  if (population == 0) throw Error("empty non-link stratum");
  const int wanted = nonlink_stratum_size(N, m);
  auto admit = [&](int b) { return !g.has_link(pivot, b) && !heldout.contains(pivot, b); };
  const auto peers = sample_peers(N, pivot, wanted, population, admit, rng);
  for (int b : peers) batch.pairs.emplace_back(pivot, b);
  const double q_nonlink = 1.0 - q_link;
  batch.scale = static_cast<double>(N) * static_cast<double>(population) /
                (2.0 * q_nonlink * static_cast<double>(peers.size()));
  return batch;
}

EdgeBatch sample_edge_strata(const Graph& g, int m, const HeldOutSplit& heldout, Rng& rng) {
  const int N = g.num_nodes();
  if (N < 2) throw Error("edge sampling needs at least two nodes");
  if (m < 1) throw Error("stratification count m must be at least 1");
  std::uniform_int_distribution<int> node(0, N - 1);
  const int pivot = node(rng);
  const bool heads = std::bernoulli_distribution(0.5)(rng);
  Stratum kind = heads ? Stratum::kLink : Stratum::kNonLink;
  if (kind == Stratum::kLink && g.degree(pivot) == 0) kind = Stratum::kNonLink;
  if (kind == Stratum::kNonLink && nonlink_population(g, pivot, heldout) == 0) {
    kind = Stratum::kLink;
  }
  return sample_edge_stratum(g, pivot, kind, m, heldout, rng);
}

std::vector<int> batch_nodes(const EdgeBatch& batch) {
  std::vector<int> nodes;
  nodes.reserve(batch.pairs.size() + 1);
  nodes.push_back(batch.pivot);
  for (const auto& [a, b] : batch.pairs) {
    nodes.push_back(a);
    nodes.push_back(b);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

NodeBatch sample_node_batch(const Graph& g, int a, int n1, int n0,
                            const HeldOutSplit& heldout, Rng& rng) {
  if (n1 < 1 || n0 < 1) throw Error("node batch sizes must be at least 1");
  NodeBatch nb;
  nb.pivot = a;
  const auto neighbors = g.neighbors(a);
  const int degree = static_cast<int>(neighbors.size());
  if (degree > 0) {
    if (n1 >= degree) {
      nb.linked.assign(neighbors.begin(), neighbors.end());
    } else {
      std::sample(neighbors.begin(), neighbors.end(), std::back_inserter(nb.linked), n1, rng);
    }
    nb.link_weight = static_cast<double>(degree) / static_cast<double>(nb.linked.size());
  }
  const int population = nonlink_population(g, a, heldout);
  auto admit = [&](int b) { return !g.has_link(a, b) && !heldout.contains(a, b); };
  nb.unlinked = sample_peers(g.num_nodes(), a, n0, population, admit, rng);
  if (!nb.unlinked.empty()) {
    nb.nonlink_weight = static_cast<double>(population) / static_cast<double>(nb.unlinked.size());
  }
  return nb;
}

NodeBatch sample_node_batch_uniform(const Graph& g, int a, int n,
                                    const HeldOutSplit& heldout, Rng& rng) {
  if (n < 1) throw Error("node batch size must be at least 1");
  const int population = g.num_nodes() - 1 - heldout.excluded_count(a);
  auto admit = [&](int b) { return !heldout.contains(a, b); };
  const auto peers = sample_peers(g.num_nodes(), a, n, population, admit, rng);
  NodeBatch nb;
  nb.pivot = a;
  for (int b : peers) (g.has_link(a, b) ? nb.linked : nb.unlinked).push_back(b);
  if (!peers.empty()) {
    const double w = static_cast<double>(population) / static_cast<double>(peers.size());
    nb.link_weight = nb.linked.empty() ? 0.0 : w;
    nb.nonlink_weight = nb.unlinked.empty() ? 0.0 : w;
  }
  return nb;
}

}  // namespace ammsb
