#include "ammsb/sampler_global.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ammsb/error.hpp"

namespace ammsb {

double grad_theta_pair(const PairContext& ctx, double theta_k0, double theta_k1, int k, int i) {
  const double theta_ki = i == 0 ? theta_k0 : theta_k1;
  const double indicator = std::abs(1 - i - ctx.y);
  return f_pair(ctx, k, k) / z_norm(ctx) * (indicator / theta_ki - 1.0 / (theta_k0 + theta_k1));
}

Matrix theta_batch_gradient(const Matrix& theta, const EdgeBatch& batch, const NodeRows& pi,
                            double delta, std::span<const int> subset) {
  const auto beta = beta_from_theta(theta);
  const int y = batch.y();
  Matrix grad(subset.size(), 2);
  for (const auto& [a, b] : batch.pairs) {
    const PairContext ctx{y, pi.row(a), pi.row(b), beta, delta};
    const double inv_z = 1.0 / z_norm(ctx);
    for (std::size_t j = 0; j < subset.size(); ++j) {
      const int k = subset[j];
      const double weight = f_pair(ctx, k, k) * inv_z;
      const double total = theta(k, 0) + theta(k, 1);
      for (int i = 0; i < 2; ++i) {
        const double indicator = std::abs(1 - i - y);
        grad(j, i) += weight * (indicator / theta(k, i) - 1.0 / total);
      }
    }
  }
  for (auto& g : grad.data()) g *= batch.scale;
  return grad;
}

std::vector<int> sample_community_subset(int K, double fraction, Rng& rng) {
  std::vector<int> all(K);
  std::iota(all.begin(), all.end(), 0);
  if (fraction >= 1.0) return all;
  if (!(fraction > 0.0)) throw Error("global update fraction must be positive");
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(K))));
  std::vector<int> out;
  out.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, rng);
  return out;
}

void apply_theta_step(Matrix& theta, const Matrix& grad, std::span<const int> subset, double eta,
                      double eps, Rng& rng, UpdateOptions opts) {
  if (eps < 0.0) throw Error("step size must be non-negative");
  if (eps == 0.0) return;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < subset.size(); ++j) {
    const int k = subset[j];
    for (int i = 0; i < 2; ++i) {
      const double z = opts.noise ? normal(rng) : 0.0;
      theta(k, i) = riemannian_step(theta(k, i), eta, grad(j, i), eps, z);
    }
  }
}

void update_theta(Matrix& theta, const EdgeBatch& batch, const NodeRows& pi, double eta,
                  double delta, double eps, std::span<const int> subset, Rng& rng,
                  UpdateOptions opts) {
  if (eps < 0.0) throw Error("step size must be non-negative");
  if (eps == 0.0) return;
  const Matrix grad = theta_batch_gradient(theta, batch, pi, delta, subset);
  apply_theta_step(theta, grad, subset, eta, eps, rng, opts);
}

}  // namespace ammsb
