#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ammsb/matrix.hpp"
#include "ammsb/random.hpp"

namespace ammsb {

inline constexpr double kMinParameter = 1e-12;

struct HyperParams {
  int K = 1;
  double alpha = 1.0;
  double eta = 1.0;
  double delta = 1e-7;

  /// alpha = 1/K, eta = 1, delta = 1e-7.
  static HyperParams defaults(int K);
  void validate() const;
};

/// Expanded-mean sampler state.  phi is N x K (memberships up to scale),
/// theta is K x 2 with beta_k = theta(k, 1) / (theta(k, 0) + theta(k, 1)).
struct ModelState {
  Matrix phi;
  Matrix theta;

  int num_nodes() const { return static_cast<int>(phi.rows()); }
  int num_communities() const { return static_cast<int>(theta.rows()); }

  void pi_row(int a, std::span<double> out) const;
  std::vector<double> pi_row(int a) const;
  Matrix pi() const;
  std::vector<double> beta() const;

  bool operator==(const ModelState&) const = default;
};

double row_sum(std::span<const double> values);
void normalize_into(std::span<const double> phi_row, std::span<double> out);
std::vector<double> beta_from_theta(const Matrix& theta);

/// phi(a, k) ~ Gamma(alpha, 1) drawn from the node's own init stream.
void sample_phi_row(const HyperParams& hp, std::uint64_t seed, int a, std::span<double> out);
Matrix sample_theta(const HyperParams& hp, std::uint64_t seed);
ModelState init_state(const HyperParams& hp, int num_nodes, std::uint64_t seed);

/// Expanded-mean Langevin step with reflection at zero:
///   |x + eps/2 (prior_shape - x + grad) + sqrt(x) * sqrt(eps) * z|
/// clamped to kMinParameter.  `z` is a standard normal draw.
inline double riemannian_step(double x, double prior_shape, double grad, double eps,
                              double z) {
  const double moved =
      std::abs(x + 0.5 * eps * (prior_shape - x + grad) + std::sqrt(x) * std::sqrt(eps) * z);
  return moved < kMinParameter ? kMinParameter : moved;
}

struct StepSchedule {
  double tau0 = 1024.0;
  double kappa = 0.5;
  std::optional<double> fixed;

  static StepSchedule constant(double eps) { return {0.0, 0.0, eps}; }
};

/// (tau0 + t)^(-kappa), or the fixed step.
double step_size(const StepSchedule& s, std::int64_t t);

// Dense membership rows for a subset of nodes (e.g. the endpoints of a batch).
class NodeRows {
 public:
  NodeRows() = default;
  NodeRows(std::vector<int> sorted_nodes, int K);

  const std::vector<int>& nodes() const { return nodes_; }
  std::span<double> row(int node);
  std::span<const double> row(int node) const;
  bool contains(int node) const;

 private:
  std::size_t index_of(int node) const;
  std::vector<int> nodes_;
  Matrix values_;
};

struct Checkpoint {
  Matrix phi;
  Matrix theta;
  std::optional<std::int64_t> iteration;
};

/// "ammsb-checkpoint v1 N K", N rows of phi, K rows of theta, 17 significant
/// digits; an optional trailing "# iteration t" comment.
void write_checkpoint(std::ostream& out, const Matrix& phi, const Matrix& theta,
                      std::optional<std::int64_t> iteration = std::nullopt);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace ammsb
