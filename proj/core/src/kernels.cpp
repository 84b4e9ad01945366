#include "ammsb/kernels.hpp"

namespace ammsb {

double f_pair(const PairContext& ctx, int k, int l) {
  if (k == l) return bernoulli(ctx.beta[k], ctx.y) * ctx.pi_a[k] * ctx.pi_b[k];
  return bernoulli(ctx.delta, ctx.y) * ctx.pi_a[k] * ctx.pi_b[l];
}

double z_norm(const PairContext& ctx) {
  const double background = bernoulli(ctx.delta, ctx.y);
  double z = background;
  for (std::size_t k = 0; k < ctx.beta.size(); ++k) {
    z += (bernoulli(ctx.beta[k], ctx.y) - background) * ctx.pi_a[k] * ctx.pi_b[k];
  }
  return z;
}

double f_local(const PairContext& ctx, int k) {
  return local_term(ctx.pi_a[k], ctx.pi_b[k], bernoulli(ctx.beta[k], ctx.y),
                    bernoulli(ctx.delta, ctx.y));
}

double pair_likelihood(const PairContext& ctx) {
  double same = 0.0;
  double overlap = 0.0;
  for (std::size_t k = 0; k < ctx.beta.size(); ++k) {
    const double w = ctx.pi_a[k] * ctx.pi_b[k];
    same += w * bernoulli(ctx.beta[k], ctx.y);
    overlap += w;
  }
  return same + (1.0 - overlap) * bernoulli(ctx.delta, ctx.y);
}

}  // namespace ammsb
