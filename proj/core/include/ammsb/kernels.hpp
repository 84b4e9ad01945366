#pragma once

#include <span>

namespace ammsb {

/// Everything the pair likelihood needs: the observation, both membership
/// vectors, community strengths and the background link probability.
struct PairContext {
  int y = 0;
  std::span<const double> pi_a;
  std::span<const double> pi_b;
  std::span<const double> beta;
  double delta = 0.0;
};

/// p^y (1 - p)^(1 - y) for y in {0, 1}.
inline double bernoulli(double p, int y) { return y ? p : 1.0 - p; }

/// f_local for one community from scalars; shared by the dense and the sparse
/// paths so both round identically.
inline double local_term(double pi_ak, double pi_bk, double strength_lik,
                         double background_lik) {
  return pi_ak * (strength_lik * pi_bk + background_lik * (1.0 - pi_bk));
}

/// Unnormalized posterior of (z_ab, z_ba) = (k, l).
double f_pair(const PairContext& ctx, int k, int l);

/// Sum of f_pair over all K^2 community pairs, in O(K).
double z_norm(const PairContext& ctx);

/// f_pair summed over the peer's community: pi_ak {beta_k' pi_bk + delta' (1 - pi_bk)}.
double f_local(const PairContext& ctx, int k);

/// p(y_ab | pi, beta): the model's marginal probability of the observation.
double pair_likelihood(const PairContext& ctx);

}  // namespace ammsb
