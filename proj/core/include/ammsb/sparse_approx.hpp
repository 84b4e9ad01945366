#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ammsb/graph.hpp"
#include "ammsb/matrix.hpp"
#include "ammsb/minibatch.hpp"
#include "ammsb/model_state.hpp"
#include "ammsb/random.hpp"

namespace ammsb {

// Slack on cumulative-mass comparisons against the threshold, so that a cdf
// that equals tau up to rounding does not count as below it.
inline constexpr double kCdfTolerance = 1e-12;

/// Partition of the K communities of one node.
struct CommunitySplit {
  std::vector<int> active;     // in descending membership order
  std::vector<int> candidate;  // ascending ids
  std::vector<int> bulk;       // ascending ids
};

/// Active: the most probable community plus every community whose cumulative
/// mass in descending order stays below tau.  Candidates: the communities of
/// `neighbor_active` (sorted ids) that are not active.  Bulk: the rest, which
/// is always empty for tau >= 1.
CommunitySplit split_communities(std::span<const double> pi_a, double tau,
                                 std::span<const int> neighbor_active);

/// Means over a sampled subset of the pivot's bulk communities.
struct BulkSummary {
  double pi_bar_b = 0.0;    // mean membership of the peer
  double beta_bar = 0.0;    // mean community strength
  int batch_size = 0;
};

/// Shared approximation of f_local for every bulk community of the pivot.
double f_tilde(int y, double pi_a_bulk, const BulkSummary& bulk, double delta);

/// bulk_count * f_tilde + sum of the exact terms of explicit communities.
double z_tilde(int bulk_count, double f_tilde_value, std::span<const double> explicit_terms);

/// int((tau - cdf_before_bulk) / bulk_pi); zero once the explicit mass
/// ahead of the bulk representative reaches tau.
int promotion_count(double tau, double cdf_before_bulk, double bulk_pi);

struct SparseEntry {
  int community = 0;
  double phi = 0.0;
  bool active = false;  // false means candidate

  bool operator==(const SparseEntry&) const = default;
};

/// One node's memberships: explicit entries for active and candidate
/// communities, and one value shared by every bulk community.
struct SparseRow {
  std::vector<SparseEntry> entries;  // ascending community id
  double bulk_value = 0.0;
  int bulk_count = 0;

  double total() const;
  const SparseEntry* find(int k) const;
  std::size_t active_count() const;
  void densify_phi(std::span<double> phi) const;
  void densify_pi(std::span<double> pi) const;
  std::vector<int> active_communities() const;

  bool operator==(const SparseRow&) const = default;
};

struct SparseModel {
  int K = 0;
  double tau = 0.9;
  std::vector<SparseRow> rows;
  Matrix theta;
  // Number of nodes holding each community explicitly (active or candidate).
  std::vector<int> refcount;

  int num_nodes() const { return static_cast<int>(rows.size()); }
  /// Sorted union of the active sets of a's neighbors.
  std::vector<int> neighbor_active(const Graph& g, int a) const;
  /// (|active| + |candidate| + 1) / K for one node.
  double memory_ratio(int a) const;
  double mean_memory_ratio() const;
  double max_memory_ratio() const;
  Matrix dense_phi() const;
  void recount();
};

/// Draws the same phi rows and theta as init_state(hp, N, seed) and splits
/// each row, so tau >= 1 reproduces the dense start exactly.
SparseModel init_sparse_model(const HyperParams& hp, const Graph& g, double tau,
                              std::uint64_t seed);

/// Sparse view of a dense state (used when resuming from a checkpoint).
SparseModel sparse_from_dense(const ModelState& state, const Graph& g, double tau);

struct SparseUpdateOptions {
  int bulk_batch = 32;  // 0 = whole bulk
  bool noise = true;
};

/// Phi update of one node: every explicit entry individually and the bulk
/// representative once.  Structure and flags are unchanged; reads the
/// model only.  With an empty bulk this matches update_phi_row bit for bit
/// given the same noise stream.
SparseRow sparse_update_row(const SparseModel& model, const NodeBatch& nb,
                            std::span<const double> beta, const HyperParams& hp, double eps,
                            Rng& noise_rng, Rng& bulk_rng, SparseUpdateOptions opts = {});

/// theta_batch_gradient on sparse rows.  Z sums the communities explicit at
/// either endpoint directly and the block that is bulk at both in closed
/// form, so a pair costs O(explicit entries + |subset| log) rather than O(K).
Matrix sparse_theta_gradient(const SparseModel& model, const EdgeBatch& batch, double delta,
                             std::span<const int> subset);

/// Moves bulk communities found in `neighbor_active` (sorted) into explicit
/// candidate entries at the bulk value.  Memberships are unchanged.
void adopt_candidates(SparseRow& row, int K, std::span<const int> neighbor_active,
                      std::vector<int>& refcount);

/// Rebuilds the split of a freshly updated row: promotes bulk communities
/// while the explicit mass falls short of tau (preferring communities no node
/// holds), promotes bulk members active at a neighbor to candidates, and
/// demotes non-active entries that lie wholly past tau in the cdf and no
/// neighbor holds active into the bulk with their mass.  The entry whose
/// mass crosses tau stays explicit.
void promote_demote(SparseRow& row, int K, std::span<const int> neighbor_active, double tau,
                    std::vector<int>& refcount, Rng& rng);

}  // namespace ammsb
