#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ammsb/graph.hpp"
#include "ammsb/minibatch.hpp"
#include "ammsb/model_state.hpp"
#include "ammsb/sparse_approx.hpp"

namespace ammsb {

enum class LocalSampling { kStratified, kUniform };

struct SamplerConfig {
  HyperParams hp;
  StepSchedule schedule;
  int m = 1;
  int n1 = 10;
  int n0 = 10;
  LocalSampling local_sampling = LocalSampling::kStratified;
  double global_update_fraction = 1.0;
  int threads = 1;
  std::uint64_t seed = 0;
  // SGMC-M only.
  double tau = 0.9;
  int bulk_batch = 32;  // 0 = whole bulk
};

/// max(1, round(N / 50)), which keeps N/m near the middle of [30, 100].
int default_stratification(int num_nodes);

/// 1.0 below 100 communities, 0.1 from there on.
double default_global_fraction(int K);

class WorkerPool;

/// Dense SGMC.  Each iteration draws an edge batch, updates the phi row of
/// every batch endpoint against the state frozen at iteration start, commits
/// the rows in node order, then updates theta on a community subset.
///
/// All randomness comes from streams keyed by (seed, iteration, node), so the
/// trajectory does not depend on `threads`.
class DenseSampler {
 public:
  DenseSampler(const Graph& g, const HeldOutSplit& heldout, SamplerConfig cfg, ModelState init,
               std::int64_t first_iteration = 0);
  ~DenseSampler();

  void step();
  std::int64_t iteration() const { return t_; }
  const ModelState& state() const { return state_; }

 private:
  const Graph& g_;
  const HeldOutSplit& heldout_;
  SamplerConfig cfg_;
  ModelState state_;
  std::int64_t t_;
  std::unique_ptr<WorkerPool> pool_;
};

/// SGMC-M: the same loop over sparse rows, followed by promotion and
/// demotion of each updated row in node order.  Candidates come from the
/// neighbors' active sets as they were at iteration start.
class SparseSampler {
 public:
  SparseSampler(const Graph& g, const HeldOutSplit& heldout, SamplerConfig cfg,
                SparseModel init, std::int64_t first_iteration = 0);
  ~SparseSampler();

  void step();
  std::int64_t iteration() const { return t_; }
  const SparseModel& model() const { return model_; }
  /// Densified copy (bulk value expanded); used for checkpoints.
  ModelState dense_state() const;

 private:
  const Graph& g_;
  const HeldOutSplit& heldout_;
  SamplerConfig cfg_;
  SparseModel model_;
  std::int64_t t_;
  std::unique_ptr<WorkerPool> pool_;
};

}  // namespace ammsb
