#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ammsb/matrix.hpp"
#include "ammsb/random.hpp"

namespace ammsb {

using Edge = std::pair<int, int>;

// Key of the unordered pair {a, b}; symmetric in its arguments.
inline std::uint64_t pair_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

/// Undirected simple graph over dense node ids [0, N).
///
/// Adjacency lists are sorted, symmetric and free of self-loops.  Once built
/// the graph is immutable, so concurrent readers need no synchronization.
class Graph {
 public:
  Graph() = default;

  /// Builds the graph from an edge list.  Duplicate edges (in either
  /// orientation) collapse to one link; self-loops and out-of-range ids throw.
  Graph(int num_nodes, std::span<const Edge> edges);

  int num_nodes() const { return static_cast<int>(adj_.size()); }
  std::int64_t num_links() const { return num_links_; }
  std::int64_t num_pairs() const {
    const std::int64_t n = num_nodes();
    return n * (n - 1) / 2;
  }
  double density() const;

  std::span<const int> neighbors(int a) const { return adj_[a]; }
  int degree(int a) const { return static_cast<int>(adj_[a].size()); }
  bool has_link(int a, int b) const;

  /// All links as (a, b) with a < b, in lexicographic order.
  std::vector<Edge> links() const;

  bool operator==(const Graph&) const = default;

 private:
  std::vector<std::vector<int>> adj_;
  std::int64_t num_links_ = 0;
};

struct EdgeListLoad {
  Graph graph;
  // external_ids[i] is the id that node i carried in the file.
  std::vector<std::int64_t> external_ids;
  std::size_t duplicate_edges = 0;
  std::size_t self_loops = 0;
};

EdgeListLoad load_edge_list(const std::filesystem::path& path);
void write_edge_list(const Graph& g, const std::filesystem::path& path);

struct GroundTruth {
  Matrix pi;                  // N x K, row-stochastic
  std::vector<double> beta;   // K
};

struct SyntheticGraph {
  Graph graph;
  GroundTruth truth;
};

// Shapes of the Beta prior on community strength: beta ~ Beta(link, nonlink).
struct BetaPrior {
  double link_shape = 1.0;
  double nonlink_shape = 1.0;
};

/// Samples a graph from the assortative MMSB with beta_k ~ Beta(eta, eta).
SyntheticGraph generate_ammsb(int num_nodes, int num_communities, double alpha,
                              double eta, double delta, Rng& rng);

SyntheticGraph generate_ammsb(int num_nodes, int num_communities, double alpha,
                              BetaPrior prior, double delta, Rng& rng);

/// Same process with the community strengths fixed instead of drawn.
/// Accepts the closed boundaries beta in [0, 1] and delta in [0, 1).
SyntheticGraph generate_ammsb_with_beta(int num_nodes, double alpha,
                                        std::span<const double> beta,
                                        double delta, Rng& rng);

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth read_ground_truth(const std::filesystem::path& path);

struct HeldOutPair {
  int a = 0;
  int b = 0;
  int y = 0;
  bool operator==(const HeldOutPair&) const = default;
};

/// Test pairs removed from training.  Lookups are symmetric in (a, b).
class HeldOutSplit {
 public:
  HeldOutSplit() = default;
  explicit HeldOutSplit(int num_nodes) : per_node_(num_nodes, 0) {}
  HeldOutSplit(int num_nodes, std::vector<HeldOutPair> pairs);

  const std::vector<HeldOutPair>& test_pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  bool contains(int a, int b) const { return keys_.contains(pair_key(a, b)); }
  // Number of test pairs that touch node a.
  int excluded_count(int a) const { return per_node_.empty() ? 0 : per_node_[a]; }

 private:
  std::vector<HeldOutPair> pairs_;
  std::unordered_set<std::uint64_t> keys_;
  std::vector<int> per_node_;
};

struct SplitResult {
  Graph training;
  HeldOutSplit heldout;
  std::optional<std::string> warning;
};

/// Holds out ceil(fraction * links) links and as many non-links.  Held-out
/// links are removed from the training graph.
SplitResult split_heldout(const Graph& g, double fraction, Rng& rng);

void write_heldout(const HeldOutSplit& split, const std::filesystem::path& path);
HeldOutSplit read_heldout(int num_nodes, const std::filesystem::path& path);

}  // namespace ammsb
