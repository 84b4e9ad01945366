#include "ammsb/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ammsb/error.hpp"

namespace ammsb {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng make_stream(std::uint64_t seed, Stream tag, std::uint64_t counter,
                std::uint64_t id) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
  h = splitmix64(h ^ counter);
  h = splitmix64(h ^ id);
  return Rng(h);
}

double sample_log_gamma(Rng& rng, double shape) {
  if (!(shape > 0.0)) throw Error("gamma shape must be positive");
  if (shape >= 1.0) {
    std::gamma_distribution<double> gamma(shape, 1.0);
    return std::log(gamma(rng));
  }
  std::gamma_distribution<double> boosted(shape + 1.0, 1.0);
  const double g = boosted(rng);
  // U in (0, 1]: avoid log(0).
  const double u = 1.0 - std::generate_canonical<double, 53>(rng);
  return std::log(g) + std::log(u) / shape;
}

double sample_gamma(Rng& rng, double shape) {
  return std::exp(sample_log_gamma(rng, shape));
}

double sample_beta(Rng& rng, double a, double b) {
  const double la = sample_log_gamma(rng, a);
  const double lb = sample_log_gamma(rng, b);
  const double m = std::max(la, lb);
  const double ea = std::exp(la - m);
  const double eb = std::exp(lb - m);
  return ea / (ea + eb);
}

void sample_dirichlet(Rng& rng, double alpha, std::span<double> out) {
  if (out.empty()) return;
  double top = -std::numeric_limits<double>::infinity();
  for (auto& v : out) {
    v = sample_log_gamma(rng, alpha);
    top = std::max(top, v);
  }
  double sum = 0.0;
  for (auto& v : out) {
    v = std::exp(v - top);
    sum += v;
  }
  for (auto& v : out) v /= sum;
}

}  // namespace ammsb
