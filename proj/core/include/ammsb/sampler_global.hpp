#pragma once

#include <span>
#include <vector>

#include "ammsb/kernels.hpp"
#include "ammsb/matrix.hpp"
#include "ammsb/minibatch.hpp"
#include "ammsb/model_state.hpp"
#include "ammsb/random.hpp"

namespace ammsb {

struct UpdateOptions {
  bool noise = true;
};

/// d/d theta_ki of log sum_z p(y, z | theta, pi) for one pair:
///   f(k, k) / Z * (|1 - i - y| / theta_ki - 1 / (theta_k0 + theta_k1)).
double grad_theta_pair(const PairContext& ctx, double theta_k0, double theta_k1, int k, int i);

/// scale * sum over the batch of grad_theta_pair, for each community in
/// `subset` (rows follow subset order, columns are i = 0, 1).
Matrix theta_batch_gradient(const Matrix& theta, const EdgeBatch& batch, const NodeRows& pi,
                            double delta, std::span<const int> subset);

/// Sorted random subset of ceil(fraction * K) communities; all of them when
/// fraction >= 1 (no random draws in that case).
std::vector<int> sample_community_subset(int K, double fraction, Rng& rng);

/// Reflected expanded-mean Langevin step on theta(subset[j], i) driven by
/// grad(j, i).  Noise is drawn in subset order, i = 0 before i = 1.
void apply_theta_step(Matrix& theta, const Matrix& grad, std::span<const int> subset, double eta,
                      double eps, Rng& rng, UpdateOptions opts = {});

/// Reflected expanded-mean Langevin step on theta(k, i) for k in `subset`.
/// `pi` must hold rows for every endpoint in the batch.
void update_theta(Matrix& theta, const EdgeBatch& batch, const NodeRows& pi, double eta,
                  double delta, double eps, std::span<const int> subset, Rng& rng,
                  UpdateOptions opts = {});

}  // namespace ammsb
