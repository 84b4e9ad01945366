#pragma once

// Independent reference computations for the tests.  Nothing here calls into
// the library's kernels, so agreement means two code paths agree.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace oracle {

inline std::vector<double> random_simplex(std::mt19937_64& rng, int K) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(K);
  for (double& x : v) x = e(rng) + 1e-3;
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= s;
  return v;
}

inline std::vector<double> random_positive(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline double bern(double p, int y) { return y == 1 ? p : 1.0 - p; }

// sum over (z_ab, z_ba) of p(z_ab) p(z_ba) p(y | z_ab, z_ba): K^2 terms.
inline double pair_probability(int y, std::span<const double> pi_a, std::span<const double> pi_b,
                               std::span<const double> beta, double delta) {
  const std::size_t K = pi_a.size();
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t l = 0; l < K; ++l) {
      const double p = k == l ? beta[k] : delta;
      total += pi_a[k] * pi_b[l] * bern(p, y);
    }
  }
  return total;
}

inline std::vector<double> normalized(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  const double s = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= s;
  return out;
}

// theta laid out as K rows of (theta_k0, theta_k1).
inline std::vector<double> beta_of(std::span<const double> theta) {
  std::vector<double> beta(theta.size() / 2);
  for (std::size_t k = 0; k < beta.size(); ++k) {
    beta[k] = theta[2 * k + 1] / (theta[2 * k] + theta[2 * k + 1]);
  }
  return beta;
}

// Central difference of f along coordinate i with a relative step.
inline double central_difference(const std::function<double(std::span<const double>)>& f,
                                 std::vector<double> x, std::size_t i, double rel = 1e-5) {
  const double h = rel * std::abs(x[i]);
  const double x0 = x[i];
  x[i] = x0 + h;
  const double up = f(x);
  x[i] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

// Calls fn on every size-`size` subset of `items`, in lexicographic order.
inline void for_each_subset(const std::vector<int>& items, int size,
                            const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> picked;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (static_cast<int>(picked.size()) == size) {
      fn(picked);
      return;
    }
    for (std::size_t i = start; i < items.size(); ++i) {
      picked.push_back(items[i]);
      rec(i + 1);
      picked.pop_back();
    }
  };
  rec(0);
}

inline double binomial(int n, int k) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

// Log collapsed joint p(y, z) with pi ~ Dir(alpha), beta_k ~ Beta(eta, eta):
// Dirichlet-multinomial per node, Beta-Bernoulli per community, delta for
// every pair whose two draws differ.
struct CollapsedProblem {
  int N = 0;
  int K = 0;
  double alpha = 1.0;
  double eta = 1.0;
  double delta = 0.1;
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> y;

  double log_joint(std::span<const int> z_ab, std::span<const int> z_ba) const {
    std::vector<int> n(static_cast<std::size_t>(N) * K, 0);
    std::vector<int> s1(K, 0), s0(K, 0);
    double lp = 0.0;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      ++n[pairs[p].first * K + z_ab[p]];
      ++n[pairs[p].second * K + z_ba[p]];
      if (z_ab[p] == z_ba[p]) {
        ++(y[p] ? s1 : s0)[z_ab[p]];
      } else {
        lp += std::log(bern(delta, y[p]));
      }
    }
    for (int a = 0; a < N; ++a) {
      int total = 0;
      for (int k = 0; k < K; ++k) {
        lp += std::lgamma(n[a * K + k] + alpha) - std::lgamma(alpha);
        total += n[a * K + k];
      }
      lp += std::lgamma(K * alpha) - std::lgamma(total + K * alpha);
    }
    for (int k = 0; k < K; ++k) {
      lp += std::lgamma(s1[k] + eta) + std::lgamma(s0[k] + eta) - std::lgamma(s1[k] + s0[k] + 2 * eta) -
            (2 * std::lgamma(eta) - std::lgamma(2 * eta));
    }
    return lp;
  }
};

}  // namespace oracle
