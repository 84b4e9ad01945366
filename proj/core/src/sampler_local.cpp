#include "ammsb/sampler_local.hpp"

#include "ammsb/error.hpp"

namespace ammsb {

double grad_phi(const PairContext& ctx, std::span<const double> phi_a, int k) {
  return f_local(ctx, k) / (z_norm(ctx) * phi_a[k]) - 1.0 / row_sum(phi_a);
}

std::vector<double> phi_batch_gradient(const ModelState& state, const NodeBatch& nb,
                                       std::span<const double> beta, double delta) {
  const int K = state.num_communities();
  const int a = nb.pivot;
  const auto phi_a = state.phi.row(a);
  const double total = row_sum(phi_a);
  std::vector<double> pi_a(K), pi_b(K), terms(K), grad(K, 0.0);
  normalize_into(phi_a, pi_a);

  auto accumulate = [&](const std::vector<int>& peers, double weight, int y) {
    const double background = bernoulli(delta, y);
    for (int b : peers) {
      normalize_into(state.phi.row(b), pi_b);
      double z = 0.0;
      for (int k = 0; k < K; ++k) {
        terms[k] = local_term(pi_a[k], pi_b[k], bernoulli(beta[k], y), background);
        z += terms[k];
      }
      for (int k = 0; k < K; ++k) {
        grad[k] += weight * (terms[k] / (z * phi_a[k]) - 1.0 / total);
      }
    }
  };
  accumulate(nb.linked, nb.link_weight, 1);
  accumulate(nb.unlinked, nb.nonlink_weight, 0);
  return grad;
}

std::vector<double> update_phi_row(const ModelState& state, const NodeBatch& nb,
                                   std::span<const double> beta, const HyperParams& hp,
                                   double eps, Rng& rng, UpdateOptions opts) {
  if (eps < 0.0) throw Error("step size must be non-negative");
  const auto phi_a = state.phi.row(nb.pivot);
  std::vector<double> out(phi_a.begin(), phi_a.end());
  if (eps == 0.0) return out;
  const auto grad = phi_batch_gradient(state, nb, beta, hp.delta);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double z = opts.noise ? normal(rng) : 0.0;
    out[k] = riemannian_step(phi_a[k], hp.alpha, grad[k], eps, z);
  }
  return out;
}

}  // namespace ammsb
