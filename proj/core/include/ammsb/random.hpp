#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace ammsb {

using Rng = std::mt19937_64;

// Every random decision of a sampler is drawn from its own stream, keyed by
// (seed, tag, counter, id).  Streams never depend on thread scheduling, so a
// run is reproducible for any worker count.
enum class Stream : std::uint64_t {
  kInitPhi = 1,
  kInitTheta,
  kEdgeBatch,
  kNodeBatch,
  kLocalNoise,
  kBulkBatch,
  kPromote,
  kGlobal,
  kHeldOut,
  kGenerator,
  kCgs,
  kLmc,
};

std::uint64_t splitmix64(std::uint64_t x);

Rng make_stream(std::uint64_t seed, Stream tag, std::uint64_t counter = 0,
                std::uint64_t id = 0);

// Gamma(shape, 1).  Shapes below one are boosted: draw Gamma(shape + 1) and
// multiply by U^(1/shape).
double sample_gamma(Rng& rng, double shape);

// Natural log of a Gamma(shape, 1) draw; stays finite for tiny shapes where
// the draw itself underflows.
double sample_log_gamma(Rng& rng, double shape);

double sample_beta(Rng& rng, double a, double b);

// Symmetric Dirichlet(alpha) into `out`, normalized in log space.
void sample_dirichlet(Rng& rng, double alpha, std::span<double> out);

}  // namespace ammsb
