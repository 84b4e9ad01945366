#pragma once

#include <cstdint>
#include <vector>

#include "ammsb/graph.hpp"
#include "ammsb/matrix.hpp"
#include "ammsb/model_state.hpp"
#include "ammsb/random.hpp"

namespace ammsb {

/// Collapsed Gibbs state: explicit (z_ab, z_ba) for every training pair a < b,
/// with pi and beta integrated out.
struct AssignmentState {
  int num_nodes = 0;
  int K = 0;
  std::vector<Edge> pairs;      // training pairs, a < b, lexicographic
  std::vector<int> y;           // observation per pair
  std::vector<int> z_ab;        // community drawn by a for the pair
  std::vector<int> z_ba;        // community drawn by b for the pair
  std::vector<int> n;           // n[a * K + k] = #{b : z_ab = k}
  std::vector<int> s1;          // pairs with z_ab = z_ba = k and y = 1
  std::vector<int> s0;          // same with y = 0

  int count(int a, int k) const { return n[static_cast<std::size_t>(a) * K + k]; }
};

/// Uniform random assignments over every pair that is not held out.
AssignmentState init_assignments(const Graph& g, const HeldOutSplit& heldout, int K, Rng& rng);

/// Resamples each pair's (z_ab, z_ba) jointly from its K x K collapsed
/// conditional
///   (n_ak + alpha)(n_bl + alpha) L(k, l, y),
///   L(k, k, y) = (s_ky + eta) / (s_k1 + s_k0 + 2 eta),  L(k, l, y) = delta' otherwise,
/// with the pair's own contribution removed from every count.
void cgs_sweep(AssignmentState& state, const HyperParams& hp, Rng& rng);

/// Recounts n, s1, s0 from the assignments and compares.
bool counts_consistent(const AssignmentState& state);

struct PointEstimate {
  Matrix pi;
  std::vector<double> beta;
};

/// pi_ak = (n_ak + alpha) / (sum_j n_aj + K alpha),
/// beta_k = (s_k1 + eta) / (s_k1 + s_k0 + 2 eta).
PointEstimate cgs_estimate_params(const AssignmentState& state, const HyperParams& hp);

/// Log of the collapsed joint p(y, z) up to a constant: Dirichlet-multinomial
/// per node, Beta-Bernoulli per community, delta' for every mismatched pair.
double cgs_log_joint(const AssignmentState& state, const HyperParams& hp);

/// Log posterior density of (phi, theta) up to a constant: Gamma(alpha, 1)
/// and Gamma(eta, 1) priors plus log p(y_ab | pi, beta) over every training pair.
double log_posterior(const ModelState& state, const Graph& g, const HeldOutSplit& heldout,
                     const HyperParams& hp);

/// Exact gradient of log_posterior's likelihood part with respect to phi
/// (first) and theta (second).
struct FullGradient {
  Matrix phi;
  Matrix theta;
};
FullGradient full_likelihood_gradient(const ModelState& state, const Graph& g,
                                      const HeldOutSplit& heldout, double delta);

struct LmcResult {
  bool accepted = false;
  double log_accept_ratio = 0.0;
};

/// One Metropolis-adjusted Langevin step on all of (phi, theta) at once.
/// Proposal x' ~ N(x + eps/2 (prior - x + x dlogL/dx), eps x) per coordinate;
/// any non-positive coordinate is rejected outright.  A rejected step leaves
/// `state` untouched.
LmcResult lmc_step(ModelState& state, const Graph& g, const HeldOutSplit& heldout,
                   const HyperParams& hp, double eps, Rng& rng);

}  // namespace ammsb
