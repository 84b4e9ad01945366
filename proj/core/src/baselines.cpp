#include "ammsb/baselines.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ammsb/error.hpp"
#include "ammsb/kernels.hpp"

namespace ammsb {

namespace {

template <typename Visit>
void for_each_training_pair(const Graph& g, const HeldOutSplit& heldout, Visit visit) {
  const int N = g.num_nodes();
  for (int a = 0; a < N; ++a) {
    for (int b = a + 1; b < N; ++b) {
      if (!heldout.contains(a, b)) visit(a, b, g.has_link(a, b) ? 1 : 0);
    }
  }
}

struct Counts {
  std::vector<int> n, s1, s0;
};

Counts recount(const AssignmentState& st) {
  Counts c{std::vector<int>(static_cast<std::size_t>(st.num_nodes) * st.K, 0),
           std::vector<int>(st.K, 0), std::vector<int>(st.K, 0)};
  for (std::size_t p = 0; p < st.pairs.size(); ++p) {
    const auto [a, b] = st.pairs[p];
    ++c.n[static_cast<std::size_t>(a) * st.K + st.z_ab[p]];
    ++c.n[static_cast<std::size_t>(b) * st.K + st.z_ba[p]];
    if (st.z_ab[p] == st.z_ba[p]) ++(st.y[p] ? c.s1 : c.s0)[st.z_ab[p]];
  }
  return c;
}

}  // namespace

AssignmentState init_assignments(const Graph& g, const HeldOutSplit& heldout, int K, Rng& rng) {
  if (K < 1) throw Error("K must be at least 1");
  AssignmentState st;
  st.num_nodes = g.num_nodes();
  st.K = K;
  std::uniform_int_distribution<int> community(0, K - 1);
  for_each_training_pair(g, heldout, [&](int a, int b, int y) {
    st.pairs.emplace_back(a, b);
    st.y.push_back(y);
    st.z_ab.push_back(community(rng));
    st.z_ba.push_back(community(rng));
  });
  auto c = recount(st);
  st.n = std::move(c.n);
  st.s1 = std::move(c.s1);
  st.s0 = std::move(c.s0);
  return st;
}

void cgs_sweep(AssignmentState& st, const HyperParams& hp, Rng& rng) {
  const int K = st.K;
  std::vector<double> weights(static_cast<std::size_t>(K) * K);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t p = 0; p < st.pairs.size(); ++p) {
    const auto [a, b] = st.pairs[p];
    const int y = st.y[p];
    int* na = &st.n[static_cast<std::size_t>(a) * K];
    int* nb = &st.n[static_cast<std::size_t>(b) * K];
    --na[st.z_ab[p]];
    --nb[st.z_ba[p]];
    if (st.z_ab[p] == st.z_ba[p]) --(y ? st.s1 : st.s0)[st.z_ab[p]];

    const double background = bernoulli(hp.delta, y);
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      const double wa = na[k] + hp.alpha;
      for (int l = 0; l < K; ++l) {
        double lik = background;
        if (k == l) {
          const double sy = (y ? st.s1[k] : st.s0[k]) + hp.eta;
          lik = sy / (st.s1[k] + st.s0[k] + 2.0 * hp.eta);
        }
        const double w = wa * (nb[l] + hp.alpha) * lik;
        weights[static_cast<std::size_t>(k) * K + l] = w;
        total += w;
      }
    }
    const double u = unit(rng) * total;
    std::size_t pick = 0;
    double cdf = weights[0];
    while (cdf <= u && pick + 1 < weights.size()) cdf += weights[++pick];

    const int k = static_cast<int>(pick) / K;
    const int l = static_cast<int>(pick) % K;
    st.z_ab[p] = k;
    st.z_ba[p] = l;
    ++na[k];
    ++nb[l];
    if (k == l) ++(y ? st.s1 : st.s0)[k];
  }
}

bool counts_consistent(const AssignmentState& st) {
  const auto c = recount(st);
  return c.n == st.n && c.s1 == st.s1 && c.s0 == st.s0;
}

PointEstimate cgs_estimate_params(const AssignmentState& st, const HyperParams& hp) {
  PointEstimate est{Matrix(st.num_nodes, st.K), std::vector<double>(st.K)};
  for (int a = 0; a < st.num_nodes; ++a) {
    double total = 0.0;
    for (int k = 0; k < st.K; ++k) total += st.count(a, k);
    for (int k = 0; k < st.K; ++k) {
      est.pi(a, k) = (st.count(a, k) + hp.alpha) / (total + st.K * hp.alpha);
    }
  }
  for (int k = 0; k < st.K; ++k) {
    est.beta[k] = (st.s1[k] + hp.eta) / (st.s1[k] + st.s0[k] + 2.0 * hp.eta);
  }
  return est;
}

double cgs_log_joint(const AssignmentState& st, const HyperParams& hp) {
  double lp = 0.0;
  for (int a = 0; a < st.num_nodes; ++a) {
    double total = 0.0;
    for (int k = 0; k < st.K; ++k) {
      lp += std::lgamma(st.count(a, k) + hp.alpha);
      total += st.count(a, k);
    }
    lp -= std::lgamma(total + st.K * hp.alpha);
  }
  for (int k = 0; k < st.K; ++k) {
    lp += std::lgamma(st.s1[k] + hp.eta) + std::lgamma(st.s0[k] + hp.eta) -
          std::lgamma(st.s1[k] + st.s0[k] + 2.0 * hp.eta);
  }
  for (std::size_t p = 0; p < st.pairs.size(); ++p) {
    if (st.z_ab[p] != st.z_ba[p]) lp += std::log(bernoulli(hp.delta, st.y[p]));
  }
  return lp;
}

double log_posterior(const ModelState& state, const Graph& g, const HeldOutSplit& heldout,
                     const HyperParams& hp) {
  double lp = 0.0;
  for (double x : state.phi.data()) lp += (hp.alpha - 1.0) * std::log(x) - x;
  for (double x : state.theta.data()) lp += (hp.eta - 1.0) * std::log(x) - x;
  const Matrix pi = state.pi();
  const auto beta = state.beta();
  for_each_training_pair(g, heldout, [&](int a, int b, int y) {
    lp += std::log(z_norm(PairContext{y, pi.row(a), pi.row(b), beta, hp.delta}));
  });
  return lp;
}

FullGradient full_likelihood_gradient(const ModelState& state, const Graph& g,
                                      const HeldOutSplit& heldout, double delta) {
  const int N = state.num_nodes();
  const int K = state.num_communities();
  FullGradient grad{Matrix(N, K), Matrix(K, 2)};
  const Matrix pi = state.pi();
  const auto beta = state.beta();
  std::vector<double> totals(N);
  for (int a = 0; a < N; ++a) totals[a] = row_sum(state.phi.row(a));

  for_each_training_pair(g, heldout, [&](int a, int b, int y) {
    const PairContext ctx{y, pi.row(a), pi.row(b), beta, delta};
    const double z = z_norm(ctx);
    const double background = bernoulli(delta, y);
    for (int k = 0; k < K; ++k) {
      const double excess = bernoulli(beta[k], y) - background;
      // d log Z / d phi_ak = ((s_k - d') pi_bk + d' - Z) / (Z S_a)
      grad.phi(a, k) += (excess * pi(b, k) + background - z) / (z * totals[a]);
      grad.phi(b, k) += (excess * pi(a, k) + background - z) / (z * totals[b]);
      const double weight = f_pair(ctx, k, k) / z;
      const double theta_k = state.theta(k, 0) + state.theta(k, 1);
      for (int i = 0; i < 2; ++i) {
        const double indicator = std::abs(1 - i - y);
        grad.theta(k, i) += weight * (indicator / state.theta(k, i) - 1.0 / theta_k);
      }
    }
  });
  return grad;
}

namespace {

struct Drift {
  Matrix phi_mean;
  Matrix theta_mean;
};

Drift langevin_mean(const ModelState& s, const FullGradient& g, const HyperParams& hp,
                    double eps) {
  Drift d{s.phi, s.theta};
  auto shift = [&](std::span<double> mean, std::span<const double> x, std::span<const double> gx,
                   double prior) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      mean[i] = x[i] + 0.5 * eps * (prior - x[i] + x[i] * gx[i]);
    }
  };
  shift(d.phi_mean.data(), s.phi.data(), g.phi.data(), hp.alpha);
  shift(d.theta_mean.data(), s.theta.data(), g.theta.data(), hp.eta);
  return d;
}

// log N(to; mean, eps * scale) summed over coordinates.
double log_proposal(std::span<const double> to, std::span<const double> mean,
                    std::span<const double> scale, double eps) {
  double lp = 0.0;
  for (std::size_t i = 0; i < to.size(); ++i) {
    const double var = eps * scale[i];
    const double d = to[i] - mean[i];
    lp += -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
  }
  return lp;
}

}  // namespace

LmcResult lmc_step(ModelState& state, const Graph& g, const HeldOutSplit& heldout,
                   const HyperParams& hp, double eps, Rng& rng) {
  if (!(eps > 0.0)) throw Error("LMC step size must be positive");
  const auto grad = full_likelihood_gradient(state, g, heldout, hp.delta);
  const Drift forward = langevin_mean(state, grad, hp, eps);

  ModelState proposal = state;
  std::normal_distribution<double> normal(0.0, 1.0);
  bool positive = true;
  auto propose = [&](std::span<double> out, std::span<const double> mean,
                     std::span<const double> x) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = mean[i] + std::sqrt(eps * x[i]) * normal(rng);
      if (!(out[i] > 0.0)) positive = false;
    }
  };
  propose(proposal.phi.data(), forward.phi_mean.data(), state.phi.data());
  propose(proposal.theta.data(), forward.theta_mean.data(), state.theta.data());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  if (!positive) return {false, -std::numeric_limits<double>::infinity()};

  const auto grad_new = full_likelihood_gradient(proposal, g, heldout, hp.delta);
  const Drift backward = langevin_mean(proposal, grad_new, hp, eps);

  double ratio = log_posterior(proposal, g, heldout, hp) - log_posterior(state, g, heldout, hp);
  ratio += log_proposal(state.phi.data(), backward.phi_mean.data(), proposal.phi.data(), eps) +
           log_proposal(state.theta.data(), backward.theta_mean.data(), proposal.theta.data(),
                        eps);
  ratio -= log_proposal(proposal.phi.data(), forward.phi_mean.data(), state.phi.data(), eps) +
           log_proposal(proposal.theta.data(), forward.theta_mean.data(), state.theta.data(),
                        eps);
  const bool accept = std::log(u) < ratio;
  if (accept) state = std::move(proposal);
  return {accept, ratio};
}

}  // namespace ammsb
