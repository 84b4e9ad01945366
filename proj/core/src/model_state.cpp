#include "ammsb/model_state.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ammsb/error.hpp"

namespace ammsb {

HyperParams HyperParams::defaults(int K) {
  return HyperParams{K, 1.0 / static_cast<double>(K), 1.0, 1e-7};
}

void HyperParams::validate() const {
  if (K < 1) throw Error("K must be at least 1");
  if (!(alpha > 0.0)) throw Error("alpha must be positive");
  if (!(eta > 0.0)) throw Error("eta must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw Error("delta must lie in (0, 1)");
}

double row_sum(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

void normalize_into(std::span<const double> phi_row, std::span<double> out) {
  const double s = row_sum(phi_row);
  for (std::size_t k = 0; k < phi_row.size(); ++k) out[k] = phi_row[k] / s;
}

void ModelState::pi_row(int a, std::span<double> out) const {
  normalize_into(phi.row(a), out);
}

std::vector<double> ModelState::pi_row(int a) const {
  std::vector<double> out(phi.cols());
  pi_row(a, out);
  return out;
}

Matrix ModelState::pi() const {
  Matrix out(phi.rows(), phi.cols());
  for (std::size_t a = 0; a < phi.rows(); ++a) normalize_into(phi.row(a), out.row(a));
  return out;
}

std::vector<double> beta_from_theta(const Matrix& theta) {
  std::vector<double> beta(theta.rows());
  for (std::size_t k = 0; k < theta.rows(); ++k) {
    beta[k] = theta(k, 1) / (theta(k, 0) + theta(k, 1));
  }
  return beta;
}

std::vector<double> ModelState::beta() const { return beta_from_theta(theta); }

void sample_phi_row(const HyperParams& hp, std::uint64_t seed, int a, std::span<double> out) {
  auto rng = make_stream(seed, Stream::kInitPhi, 0, static_cast<std::uint64_t>(a));
  for (auto& v : out) v = std::max(sample_gamma(rng, hp.alpha), kMinParameter);
}

Matrix sample_theta(const HyperParams& hp, std::uint64_t seed) {
  auto rng = make_stream(seed, Stream::kInitTheta);
  Matrix theta(hp.K, 2);
  for (auto& v : theta.data()) v = std::max(sample_gamma(rng, hp.eta), kMinParameter);
  return theta;
}

ModelState init_state(const HyperParams& hp, int num_nodes, std::uint64_t seed) {
  hp.validate();
  if (num_nodes < 1) throw Error("need at least one node");
  ModelState state{Matrix(num_nodes, hp.K), sample_theta(hp, seed)};
  for (int a = 0; a < num_nodes; ++a) sample_phi_row(hp, seed, a, state.phi.row(a));
  return state;
}

double step_size(const StepSchedule& s, std::int64_t t) {
  if (t < 0) throw Error("iteration index must be non-negative");
  if (s.fixed) {
    if (!(*s.fixed > 0.0)) throw Error("fixed step must be positive");
    return *s.fixed;
  }
  const double base = s.tau0 + static_cast<double>(t);
  if (!(base > 0.0)) throw Error("step schedule tau0 + t must be positive");
  if (s.kappa < 0.0) throw Error("kappa must be non-negative");
  return std::pow(base, -s.kappa);
}

NodeRows::NodeRows(std::vector<int> sorted_nodes, int K)
    : nodes_(std::move(sorted_nodes)), values_(nodes_.size(), K) {}

std::size_t NodeRows::index_of(int node) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), node);
  if (it == nodes_.end() || *it != node) {
    throw Error("node " + std::to_string(node) + " has no cached row");
  }
  return static_cast<std::size_t>(it - nodes_.begin());
}

bool NodeRows::contains(int node) const {
  return std::binary_search(nodes_.begin(), nodes_.end(), node);
}

std::span<double> NodeRows::row(int node) { return values_.row(index_of(node)); }
std::span<const double> NodeRows::row(int node) const { return values_.row(index_of(node)); }

void write_checkpoint(std::ostream& out, const Matrix& phi, const Matrix& theta,
                      std::optional<std::int64_t> iteration) {
  out << "ammsb-checkpoint v1 " << phi.rows() << ' ' << phi.cols() << '\n';
  out << std::setprecision(17);
  auto write_rows = [&](const Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = m.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
      out << '\n';
    }
  };
  write_rows(phi);
  write_rows(theta);
  if (iteration) out << "# iteration " << *iteration << '\n';
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error("empty checkpoint");
  std::istringstream h(header);
  std::string magic, version;
  long long n = 0, k = 0;
  if (!(h >> magic >> version) || magic != "ammsb-checkpoint") {
    throw Error("not an ammsb checkpoint");
  }
  if (version != "v1") throw Error("unsupported checkpoint version " + version);
  if (!(h >> n >> k) || n < 1 || k < 1) throw Error("bad checkpoint dimensions");

  Checkpoint cp{Matrix(n, k), Matrix(k, 2), std::nullopt};
  for (auto& v : cp.phi.data()) {
    if (!(in >> v) || !(v > 0.0)) throw Error("truncated or non-positive phi in checkpoint");
  }
  for (auto& v : cp.theta.data()) {
    if (!(in >> v) || !(v > 0.0)) throw Error("truncated or non-positive theta in checkpoint");
  }
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream t(line);
    std::string hash, word;
    std::int64_t iter = 0;
    if (t >> hash >> word >> iter && hash == "#" && word == "iteration") cp.iteration = iter;
  }
  return cp;
}

}  // namespace ammsb
