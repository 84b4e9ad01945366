#include "ammsb/sparse_approx.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "ammsb/sampler_global.hpp"
#include "ammsb/sampler_local.hpp"
#include "oracles.hpp"

namespace ammsb {
namespace {

Graph ring(int n, int reach) {
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a)
    for (int d = 1; d <= reach; ++d) edges.emplace_back(a, (a + d) % n);
  return Graph(n, edges);
}

TEST(SplitCommunitiesTest, ThresholdExample) {
  const std::vector<double> pi = {0.5, 0.3, 0.1, 0.05, 0.05};
  const auto split = split_communities(pi, 0.9, {});
  EXPECT_EQ(split.active, (std::vector<int>{0, 1}));
  EXPECT_TRUE(split.candidate.empty());
  EXPECT_EQ(split.bulk, (std::vector<int>{2, 3, 4}));
}

TEST(SplitCommunitiesTest, ThresholdOneLeavesNoBulk) {
  const std::vector<double> pi = {0.05, 0.5, 0.1, 0.3, 0.05};
  const std::vector<int> neighbors = {0, 4};
  const auto split = split_communities(pi, 1.0, neighbors);
  EXPECT_EQ(split.active, (std::vector<int>{1, 3, 2, 0}));
  EXPECT_EQ(split.candidate, (std::vector<int>{4}));
  EXPECT_TRUE(split.bulk.empty());
}

TEST(SplitCommunitiesTest, TopCommunityIsAlwaysActive) {
  const std::vector<double> pi = {0.95, 0.05};
  EXPECT_EQ(split_communities(pi, 0.5, {}).active, (std::vector<int>{0}));
}

TEST(SplitCommunitiesTest, PartitionOnRandomVectors) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const int K = 2 + rep % 40;
    const auto pi = oracle::random_simplex(rng, K);
    std::vector<int> neighbors;
    for (int k = 0; k < K; ++k)
      if (u(rng) < 0.2) neighbors.push_back(k);
    const double tau = u(rng);
    const auto split = split_communities(pi, tau, neighbors);
    std::vector<int> all = split.active;
    all.insert(all.end(), split.candidate.begin(), split.candidate.end());
    all.insert(all.end(), split.bulk.begin(), split.bulk.end());
    std::sort(all.begin(), all.end());
    std::vector<int> expected(K);
    std::iota(expected.begin(), expected.end(), 0);
    ASSERT_EQ(all, expected);
    // Active: top community, then every prefix with cumulative mass below tau.
    double cdf = 0.0;
    for (std::size_t i = 0; i < split.active.size(); ++i) {
      cdf += pi[split.active[i]];
      if (i > 0) EXPECT_LT(cdf, tau);
      if (i > 0) EXPECT_LE(pi[split.active[i]], pi[split.active[i - 1]]);
    }
    for (int k : split.candidate) EXPECT_TRUE(std::binary_search(neighbors.begin(), neighbors.end(), k));
    for (int k : split.bulk) EXPECT_FALSE(std::binary_search(neighbors.begin(), neighbors.end(), k));
  }
}

TEST(BulkKernelTest, ConstantBulkIsExact) {
  // Communities 2..5 carry identical pi_a, pi_b and beta.
  const std::vector<double> pi_a = {0.4, 0.2, 0.1, 0.1, 0.1, 0.1};
  const std::vector<double> pi_b = {0.1, 0.5, 0.1, 0.1, 0.1, 0.1};
  const std::vector<double> beta = {0.7, 0.4, 0.3, 0.3, 0.3, 0.3};
  for (int y : {0, 1}) {
    const PairContext ctx{y, pi_a, pi_b, beta, 0.02};
    const BulkSummary bulk{0.1, 0.3, 4};
    const double ft = f_tilde(y, 0.1, bulk, 0.02);
    for (int k = 2; k < 6; ++k) EXPECT_NEAR(ft, f_local(ctx, k), 1e-15);
    const std::vector<double> exact = {f_local(ctx, 0), f_local(ctx, 1)};
    EXPECT_NEAR(z_tilde(4, ft, exact), z_norm(ctx), 1e-15);
  }
}

TEST(BulkKernelTest, EmptyBulkZIsExact) {
  const std::vector<double> pi_a = {0.6, 0.4}, pi_b = {0.3, 0.7}, beta = {0.8, 0.2};
  const PairContext ctx{1, pi_a, pi_b, beta, 0.01};
  const std::vector<double> exact = {f_local(ctx, 0), f_local(ctx, 1)};
  EXPECT_DOUBLE_EQ(z_tilde(0, 123.0, exact), z_norm(ctx));
}

// Mean over a random bulk subset of size m: error of f_tilde against the
// average of the exact bulk terms falls as m grows, and vanishes at m = |B|.
TEST(BulkKernelTest, SubsampledMeansConverge) {
  std::mt19937_64 rng(32);
  const int B = 200;
  const auto pi_b_bulk = oracle::random_positive(rng, B, 0.0, 0.004);
  const auto beta_bulk = oracle::random_positive(rng, B, 0.05, 0.95);
  const double pi_a_bulk = 0.002, delta = 0.01;
  std::vector<int> ids(B);
  std::iota(ids.begin(), ids.end(), 0);
  for (int y : {0, 1}) {
    double exact = 0.0;
    for (int k = 0; k < B; ++k) {
      exact += pi_a_bulk * (oracle::bern(beta_bulk[k], y) * pi_b_bulk[k] + oracle::bern(delta, y) * (1 - pi_b_bulk[k]));
    }
    exact /= B;
    // With every bulk member in the batch the means are exact, but f_tilde
    // still multiplies mean strength by mean membership.
    double full_pi = 0.0, full_beta = 0.0;
    for (int k = 0; k < B; ++k) full_pi += pi_b_bulk[k] / B, full_beta += beta_bulk[k] / B;
    const double full_err =
        std::abs(f_tilde(y, pi_a_bulk, {full_pi, full_beta, B}, delta) - exact) / exact;
    double previous = std::numeric_limits<double>::infinity();
    for (int m : {1, 4, 16, 64, B}) {
      double err = 0.0;
      const int reps = 2000;
      for (int r = 0; r < reps; ++r) {
        std::vector<int> pick;
        std::sample(ids.begin(), ids.end(), std::back_inserter(pick), m, rng);
        BulkSummary s{0.0, 0.0, m};
        for (int k : pick) {
          s.pi_bar_b += pi_b_bulk[k] / m;
          s.beta_bar += beta_bulk[k] / m;
        }
        err += std::abs(f_tilde(y, pi_a_bulk, s, delta) - exact) / exact / reps;
      }
      if (m == B) EXPECT_NEAR(err, full_err, 1e-12);
      EXPECT_LE(err, previous) << "m=" << m;
      previous = err;
    }
  }
}

TEST(PromotionTest, CountFormula) {
  EXPECT_EQ(promotion_count(0.9, 0.85, 0.01), 5);
  EXPECT_EQ(promotion_count(0.9, 0.9, 0.01), 0);
  EXPECT_EQ(promotion_count(0.9, 0.95, 0.01), 0);
}

TEST(PromotionTest, FiveStatesPromotedInARow) {
  SparseRow row;
  row.entries = {{0, 0.85, true}};
  row.bulk_count = 15;
  row.bulk_value = 0.01;
  std::vector<int> refcount(16, 0);
  refcount[0] = 1;
  Rng rng = make_stream(0, Stream::kPromote);
  promote_demote(row, 16, {}, 0.9, refcount, rng);
  EXPECT_EQ(row.bulk_count, 10);
  EXPECT_EQ(row.entries.size(), 6u);
  EXPECT_NEAR(row.total(), 1.0, 1e-12);
  for (const auto& e : row.entries) EXPECT_EQ(refcount[e.community], 1);
}

TEST(PromotionTest, NoPromotionOnceThresholdIsCovered) {
  SparseRow row;
  row.entries = {{3, 0.95, true}};
  row.bulk_count = 5;
  row.bulk_value = 0.01;
  std::vector<int> refcount(6, 0);
  refcount[3] = 1;
  Rng rng = make_stream(0, Stream::kPromote);
  promote_demote(row, 6, {}, 0.9, refcount, rng);
  EXPECT_EQ(row.bulk_count, 5);
  EXPECT_EQ(row.entries.size(), 1u);
}

TEST(PromotionTest, PrefersCommunitiesNobodyHolds) {
  const int K = 20;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SparseRow row;
    row.entries = {{0, 0.86, true}};
    row.bulk_count = K - 1;
    row.bulk_value = 0.14 / (K - 1);
    std::vector<int> refcount(K, 3);
    refcount[0] = 1;
    for (int k : {5, 9, 17}) refcount[k] = 0;
    Rng rng = make_stream(seed, Stream::kPromote);
    promote_demote(row, K, {}, 0.9, refcount, rng);
    // int(0.04 / (0.14 / 19)) = 5 promotions: the three unused first.
    ASSERT_EQ(row.entries.size(), 6u);
    for (int k : {5, 9, 17}) EXPECT_NE(row.find(k), nullptr) << k;
  }
}

// Independent statement of the invariants that hold after promote_demote.
void expect_row_invariants(const SparseRow& row, int K, double tau, std::span<const int> nbr) {
  std::set<int> seen;
  for (std::size_t j = 0; j < row.entries.size(); ++j) {
    EXPECT_TRUE(seen.insert(row.entries[j].community).second);
    if (j > 0) EXPECT_LT(row.entries[j - 1].community, row.entries[j].community);
    EXPECT_GT(row.entries[j].phi, 0.0);
  }
  EXPECT_EQ(static_cast<int>(row.entries.size()) + row.bulk_count, K);
  if (row.bulk_count > 0) EXPECT_GT(row.bulk_value, 0.0);

  // Descending walk over explicit entries and the bulk representative.
  const double total = row.total();
  std::vector<std::pair<double, int>> items;
  for (std::size_t j = 0; j < row.entries.size(); ++j) items.push_back({row.entries[j].phi / total, static_cast<int>(j)});
  if (row.bulk_count > 0) items.push_back({row.bulk_value / total, -1});
  std::stable_sort(items.begin(), items.end(), [](const auto& l, const auto& r) {
    if (l.first != r.first) return l.first > r.first;
    return l.second >= 0 && r.second < 0;
  });
  double cdf = 0.0;
  bool open = true;
  for (std::size_t pos = 0; pos < items.size(); ++pos) {
    const auto [mass, j] = items[pos];
    const double before = cdf;
    cdf += mass;
    if (j < 0) continue;
    const auto& e = row.entries[j];
    const bool should = open && (pos == 0 || cdf < tau - kCdfTolerance);
    EXPECT_EQ(e.active, should) << "community " << e.community;
    if (!should) open = false;
    if (!e.active) {
      // A candidate is either held active by a neighbor or crosses tau.
      const bool neighbor = std::binary_search(nbr.begin(), nbr.end(), e.community);
      EXPECT_TRUE(neighbor || pos == 0 || before < tau - kCdfTolerance) << "community " << e.community;
    }
  }
  // Neighbors' active communities are never in the bulk.
  for (int k : nbr) EXPECT_NE(row.find(k), nullptr) << k;
}

TEST(PromoteDemoteTest, InvariantsOnRandomStates) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::gamma_distribution<double> gamma(0.3, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const int K = 5 + rep % 60;
    const double tau = 0.5 + 0.49 * u(rng);
    SparseRow row;
    std::vector<int> refcount(K, 0);
    for (int k = 0; k < K; ++k) {
      if (u(rng) < 0.3) {
        row.entries.push_back({k, gamma(rng) + 1e-6, u(rng) < 0.5});
        ++refcount[k];
      } else {
        ++row.bulk_count;
      }
    }
    if (row.entries.empty()) {
      row.entries.push_back({0, 1.0, true});
      ++refcount[0];
      --row.bulk_count;
    }
    row.bulk_value = row.bulk_count > 0 ? 0.01 * (u(rng) + 0.01) : 0.0;
    std::vector<int> nbr;
    for (int k = 0; k < K; ++k)
      if (u(rng) < 0.1) nbr.push_back(k);
    const double mass = row.total();
    Rng prng = make_stream(rep, Stream::kPromote);
    promote_demote(row, K, nbr, tau, refcount, prng);
    expect_row_invariants(row, K, tau, nbr);
    EXPECT_NEAR(row.total(), mass, 1e-12 * mass);
    std::vector<int> counted(K, 0);
    for (const auto& e : row.entries) ++counted[e.community];
    EXPECT_EQ(refcount, counted);
  }
}

TEST(PromoteDemoteTest, ThresholdOneExpandsTheBulk) {
  SparseRow row;
  row.entries = {{1, 0.7, true}};
  row.bulk_count = 3;
  row.bulk_value = 0.1;
  std::vector<int> refcount(4, 0);
  refcount[1] = 1;
  Rng rng = make_stream(0, Stream::kPromote);
  promote_demote(row, 4, {}, 1.0, refcount, rng);
  EXPECT_EQ(row.bulk_count, 0);
  ASSERT_EQ(row.entries.size(), 4u);
  EXPECT_DOUBLE_EQ(row.find(0)->phi, 0.1);
  EXPECT_EQ(refcount, (std::vector<int>{1, 1, 1, 1}));
}

TEST(AdoptCandidatesTest, MovesNeighborCommunitiesOutOfTheBulk) {
  SparseRow row;
  row.entries = {{2, 0.8, true}};
  row.bulk_count = 4;
  row.bulk_value = 0.05;
  std::vector<int> refcount(5, 0);
  refcount[2] = 1;
  const std::vector<int> nbr = {0, 2, 4};
  adopt_candidates(row, 5, nbr, refcount);
  EXPECT_EQ(row.bulk_count, 2);
  ASSERT_NE(row.find(4), nullptr);
  EXPECT_FALSE(row.find(4)->active);
  EXPECT_DOUBLE_EQ(row.find(0)->phi, 0.05);
  EXPECT_DOUBLE_EQ(row.total(), 1.0);
  EXPECT_EQ(refcount, (std::vector<int>{1, 0, 1, 0, 1}));
}

TEST(SparseModelTest, ThresholdOneReproducesTheDenseStart) {
  const Graph g = ring(12, 2);
  const HyperParams hp{6, 0.2, 1.0, 1e-3};
  const SparseModel sparse = init_sparse_model(hp, g, 1.0, 5);
  const ModelState dense = init_state(hp, 12, 5);
  EXPECT_EQ(sparse.dense_phi(), dense.phi);
  EXPECT_EQ(sparse.theta, dense.theta);
  for (const auto& row : sparse.rows) EXPECT_EQ(row.bulk_count, 0);
  EXPECT_DOUBLE_EQ(sparse.mean_memory_ratio(), 7.0 / 6.0);
}

TEST(SparseModelTest, MemoryRatioCountsExplicitEntriesPlusOne) {
  const Graph g = ring(30, 1);
  const HyperParams hp{40, 0.02, 1.0, 1e-3};
  const SparseModel model = init_sparse_model(hp, g, 0.9, 6);
  double total = 0.0, worst = 0.0;
  for (int a = 0; a < 30; ++a) {
    const auto& row = model.rows[a];
    const double r = (row.entries.size() + 1.0) / 40.0;
    EXPECT_DOUBLE_EQ(model.memory_ratio(a), r);
    total += r;
    worst = std::max(worst, r);
    expect_row_invariants(row, 40, 0.9, model.neighbor_active(g, a));
  }
  EXPECT_DOUBLE_EQ(model.mean_memory_ratio(), total / 30);
  EXPECT_DOUBLE_EQ(model.max_memory_ratio(), worst);
  EXPECT_LT(model.mean_memory_ratio(), 0.5);
}

TEST(SparseModelTest, DensifiedRowsNormalize) {
  const Graph g = ring(10, 1);
  const SparseModel model = init_sparse_model(HyperParams{25, 0.04, 1.0, 1e-3}, g, 0.8, 7);
  std::vector<double> pi(25);
  for (const auto& row : model.rows) {
    row.densify_pi(pi);
    double t = 0.0;
    for (double v : pi) t += v;
    EXPECT_NEAR(t, 1.0, 1e-12);
  }
}

TEST(SparseUpdateTest, EmptyBulkMatchesDenseBitForBit) {
  const Graph g = ring(10, 2);
  const HyperParams hp{5, 0.3, 1.0, 1e-3};
  const SparseModel sparse = init_sparse_model(hp, g, 1.0, 8);
  const ModelState dense = init_state(hp, 10, 8);
  const auto beta = dense.beta();
  const HeldOutSplit none(10);
  for (int a = 0; a < 10; ++a) {
    Rng batch_rng = make_stream(a, Stream::kNodeBatch);
    const NodeBatch nb = sample_node_batch(g, a, 2, 3, none, batch_rng);
    Rng n1 = make_stream(a, Stream::kLocalNoise), n2 = make_stream(a, Stream::kLocalNoise);
    Rng bulk = make_stream(a, Stream::kBulkBatch);
    const SparseRow row = sparse_update_row(sparse, nb, beta, hp, 0.01, n1, bulk);
    const auto expected = update_phi_row(dense, nb, beta, hp, 0.01, n2);
    std::vector<double> got(5);
    row.densify_phi(got);
    EXPECT_EQ(got, expected);
  }
}

// Every node holds communities 0 and 1 explicitly and shares one bulk over
// the rest, and the bulk strengths are equal, so the bulk approximation is
// exact and the one-shot update must agree with the dense update.
TEST(SparseUpdateTest, ConstantBulkMatchesDenseUpdate) {
  const int N = 8, K = 7;
  const Graph g = ring(N, 2);
  const HyperParams hp{K, 0.3, 1.0, 0.01};
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  SparseModel model;
  model.K = K;
  model.tau = 0.9;
  model.theta = Matrix(K, 2);
  for (int k = 0; k < K; ++k) {
    model.theta(k, 0) = k < 2 ? u(rng) : 1.5;
    model.theta(k, 1) = k < 2 ? u(rng) : 0.7;
  }
  ModelState dense{Matrix(N, K), model.theta};
  for (int a = 0; a < N; ++a) {
    SparseRow row;
    row.entries = {{0, u(rng), true}, {1, u(rng), false}};
    row.bulk_count = K - 2;
    row.bulk_value = 0.1 * u(rng);
    row.densify_phi(dense.phi.row(a));
    model.rows.push_back(row);
  }
  model.recount();
  const auto beta = dense.beta();
  const HeldOutSplit none(N);
  for (int batch : {0, 2}) {
    for (int a = 0; a < N; ++a) {
      Rng batch_rng = make_stream(a, Stream::kNodeBatch);
      const NodeBatch nb = sample_node_batch(g, a, 3, 3, none, batch_rng);
      Rng n1 = make_stream(a, Stream::kLocalNoise), n2 = make_stream(a, Stream::kLocalNoise);
      Rng bulk = make_stream(a, Stream::kBulkBatch);
      const SparseRow row =
          sparse_update_row(model, nb, beta, hp, 0.01, n1, bulk, {.bulk_batch = batch, .noise = false});
      const auto expected = update_phi_row(dense, nb, beta, hp, 0.01, n2, {.noise = false});
      std::vector<double> got(K);
      row.densify_phi(got);
      for (int k = 0; k < K; ++k) EXPECT_NEAR(got[k], expected[k], 1e-12 * expected[k]) << "k=" << k;
      EXPECT_EQ(row.bulk_count, K - 2);
    }
  }
}

TEST(SparseThetaGradientTest, MatchesDenseGradient) {
  const Graph g = ring(40, 3);
  const HyperParams hp{30, 0.03, 1.0, 1e-3};
  const SparseModel model = init_sparse_model(hp, g, 0.85, 9);
  const Matrix phi = model.dense_phi();
  const HeldOutSplit none(40);
  std::vector<int> subset(30);
  std::iota(subset.begin(), subset.end(), 0);
  for (int rep = 0; rep < 30; ++rep) {
    Rng rng = make_stream(rep, Stream::kEdgeBatch);
    const EdgeBatch batch = sample_edge_strata(g, 2, none, rng);
    const auto nodes = batch_nodes(batch);
    NodeRows rows(nodes, 30);
    for (int a : nodes) normalize_into(phi.row(a), rows.row(a));
    const Matrix dense = theta_batch_gradient(model.theta, batch, rows, hp.delta, subset);
    const Matrix sparse = sparse_theta_gradient(model, batch, hp.delta, subset);
    for (std::size_t i = 0; i < dense.data().size(); ++i) {
      EXPECT_NEAR(sparse.data()[i], dense.data()[i], 1e-9 * (1.0 + std::abs(dense.data()[i])));
    }
  }
}

}  // namespace
}  // namespace ammsb
