#include "ammsb/samplers.hpp"

#include <algorithm>
#include <cmath>

#include <tbb/global_control.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "ammsb/error.hpp"
#include "ammsb/sampler_global.hpp"
#include "ammsb/sampler_local.hpp"

namespace ammsb {

class WorkerPool {
 public:
  // The global limit defaults to the core count; raise it so the requested
  // thread count is honored even on smaller machines.
  explicit WorkerPool(int threads)
      : limit_(tbb::global_control::max_allowed_parallelism,
               static_cast<std::size_t>(std::max(1, threads))),
        arena_(std::max(1, threads)) {}

  // Runs body(i) for i in [0, n).  Bodies must write disjoint outputs.
  template <typename Body>
  void run(std::size_t n, const Body& body) {
    arena_.execute([&] {
      tbb::parallel_for(std::size_t{0}, n, [&](std::size_t i) { body(i); });
    });
  }

 private:
  tbb::global_control limit_;
  tbb::task_arena arena_;
};

namespace {

void check_config(const SamplerConfig& cfg, const Graph& g) {
  cfg.hp.validate();
  if (cfg.m < 1) throw Error("m must be at least 1");
  if (cfg.n1 < 1 || cfg.n0 < 1) throw Error("n1 and n0 must be at least 1");
  if (cfg.threads < 1) throw Error("threads must be at least 1");
  if (!(cfg.tau > 0.0)) throw Error("tau must be positive");
  if (cfg.bulk_batch < 0) throw Error("bulk_batch must be non-negative (0 = whole bulk)");
  if (g.num_nodes() < 2) throw Error("graph needs at least two nodes");
}

NodeBatch draw_node_batch(const SamplerConfig& cfg, const Graph& g, const HeldOutSplit& heldout,
                          std::int64_t t, int a) {
  Rng rng = make_stream(cfg.seed, Stream::kNodeBatch, static_cast<std::uint64_t>(t),
                        static_cast<std::uint64_t>(a));
  if (cfg.local_sampling == LocalSampling::kUniform) {
    return sample_node_batch_uniform(g, a, cfg.n1 + cfg.n0, heldout, rng);
  }
  return sample_node_batch(g, a, cfg.n1, cfg.n0, heldout, rng);
}

Rng node_stream(const SamplerConfig& cfg, Stream tag, std::int64_t t, int a) {
  return make_stream(cfg.seed, tag, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(a));
}

}  // namespace

int default_stratification(int num_nodes) {
  return std::max(1, static_cast<int>(std::lround(num_nodes / 50.0)));
}

double default_global_fraction(int K) { return K < 100 ? 1.0 : 0.1; }

DenseSampler::DenseSampler(const Graph& g, const HeldOutSplit& heldout, SamplerConfig cfg,
                           ModelState init, std::int64_t first_iteration)
    : g_(g),
      heldout_(heldout),
      cfg_(cfg),
      state_(std::move(init)),
      t_(first_iteration),
      pool_(std::make_unique<WorkerPool>(cfg.threads)) {
  check_config(cfg_, g_);
  if (state_.num_nodes() != g_.num_nodes() || state_.num_communities() != cfg_.hp.K) {
    throw Error("initial state does not match graph size or K");
  }
}

DenseSampler::~DenseSampler() = default;

void DenseSampler::step() {
  const double eps = step_size(cfg_.schedule, t_);
  const int K = cfg_.hp.K;
  Rng edge_rng = make_stream(cfg_.seed, Stream::kEdgeBatch, static_cast<std::uint64_t>(t_));
  const EdgeBatch batch = sample_edge_strata(g_, cfg_.m, heldout_, edge_rng);
  const std::vector<int> nodes = batch_nodes(batch);
  const std::vector<double> beta = state_.beta();

  std::vector<std::vector<double>> rows(nodes.size());
  pool_->run(nodes.size(), [&](std::size_t i) {
    const int a = nodes[i];
    const NodeBatch nb = draw_node_batch(cfg_, g_, heldout_, t_, a);
    Rng noise = node_stream(cfg_, Stream::kLocalNoise, t_, a);
    rows[i] = update_phi_row(state_, nb, beta, cfg_.hp, eps, noise);
  });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), state_.phi.row(nodes[i]).begin());
  }

  NodeRows pi(nodes, K);
  for (int a : nodes) state_.pi_row(a, pi.row(a));
  Rng global = make_stream(cfg_.seed, Stream::kGlobal, static_cast<std::uint64_t>(t_));
  const auto subset = sample_community_subset(K, cfg_.global_update_fraction, global);
  update_theta(state_.theta, batch, pi, cfg_.hp.eta, cfg_.hp.delta, eps, subset, global);
  ++t_;
}

SparseSampler::SparseSampler(const Graph& g, const HeldOutSplit& heldout, SamplerConfig cfg,
                             SparseModel init, std::int64_t first_iteration)
    : g_(g),
      heldout_(heldout),
      cfg_(cfg),
      model_(std::move(init)),
      t_(first_iteration),
      pool_(std::make_unique<WorkerPool>(cfg.threads)) {
  check_config(cfg_, g_);
  if (model_.num_nodes() != g_.num_nodes() || model_.K != cfg_.hp.K) {
    throw Error("initial sparse model does not match graph size or K");
  }
}

SparseSampler::~SparseSampler() = default;

void SparseSampler::step() {
  const double eps = step_size(cfg_.schedule, t_);
  const int K = cfg_.hp.K;
  Rng edge_rng = make_stream(cfg_.seed, Stream::kEdgeBatch, static_cast<std::uint64_t>(t_));
  const EdgeBatch batch = sample_edge_strata(g_, cfg_.m, heldout_, edge_rng);
  const std::vector<int> nodes = batch_nodes(batch);
  const std::vector<double> beta = beta_from_theta(model_.theta);
  const SparseUpdateOptions opts{cfg_.bulk_batch, true};

  // Candidates are refreshed before the update as well as after it, so a
  // community a neighbor has just made active is not hiding in the bulk when
  // the bulk gradient is estimated.
  std::vector<std::vector<int>> neighbor_active(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    neighbor_active[i] = model_.neighbor_active(g_, nodes[i]);
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    adopt_candidates(model_.rows[nodes[i]], K, neighbor_active[i], model_.refcount);
  }

  std::vector<SparseRow> rows(nodes.size());
  pool_->run(nodes.size(), [&](std::size_t i) {
    const int a = nodes[i];
    const NodeBatch nb = draw_node_batch(cfg_, g_, heldout_, t_, a);
    Rng noise = node_stream(cfg_, Stream::kLocalNoise, t_, a);
    Rng bulk = node_stream(cfg_, Stream::kBulkBatch, t_, a);
    rows[i] = sparse_update_row(model_, nb, beta, cfg_.hp, eps, noise, bulk, opts);
  });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int a = nodes[i];
    model_.rows[a] = std::move(rows[i]);
    Rng promote = node_stream(cfg_, Stream::kPromote, t_, a);
    promote_demote(model_.rows[a], K, neighbor_active[i], model_.tau, model_.refcount, promote);
  }

  Rng global = make_stream(cfg_.seed, Stream::kGlobal, static_cast<std::uint64_t>(t_));
  const auto subset = sample_community_subset(K, cfg_.global_update_fraction, global);
  const bool any_bulk = std::any_of(nodes.begin(), nodes.end(),
                                    [&](int a) { return model_.rows[a].bulk_count > 0; });
  if (any_bulk) {
    const Matrix grad = sparse_theta_gradient(model_, batch, cfg_.hp.delta, subset);
    apply_theta_step(model_.theta, grad, subset, cfg_.hp.eta, eps, global);
  } else {
    // No approximation in play: take the dense path so the result matches
    // DenseSampler bit for bit.
    NodeRows pi(nodes, K);
    for (int a : nodes) model_.rows[a].densify_pi(pi.row(a));
    update_theta(model_.theta, batch, pi, cfg_.hp.eta, cfg_.hp.delta, eps, subset, global);
  }
  ++t_;
}

ModelState SparseSampler::dense_state() const { return {model_.dense_phi(), model_.theta}; }

}  // namespace ammsb
