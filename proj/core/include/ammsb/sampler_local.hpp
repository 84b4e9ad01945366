#pragma once

#include <span>
#include <vector>

#include "ammsb/kernels.hpp"
#include "ammsb/minibatch.hpp"
#include "ammsb/model_state.hpp"
#include "ammsb/sampler_global.hpp"

namespace ammsb {

/// d/d phi_ak of log sum_z p(y, z | beta, phi) for one peer:
///   f_local(k) / (Z phi_ak) - 1 / sum_j phi_aj.
double grad_phi(const PairContext& ctx, std::span<const double> phi_a, int k);

/// Stratified estimate of sum_b grad_phi over all peers of the pivot:
/// link_weight * sum over linked peers + nonlink_weight * sum over the rest.
std::vector<double> phi_batch_gradient(const ModelState& state, const NodeBatch& nb,
                                       std::span<const double> beta, double delta);

/// New phi row of nb.pivot after one reflected Langevin step.  Reads the
/// state only, so distinct pivots can be processed concurrently.
std::vector<double> update_phi_row(const ModelState& state, const NodeBatch& nb,
                                   std::span<const double> beta, const HyperParams& hp,
                                   double eps, Rng& rng, UpdateOptions opts = {});

}  // namespace ammsb
