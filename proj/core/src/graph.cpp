#include "ammsb/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "ammsb/error.hpp"

namespace ammsb {

Graph::Graph(int num_nodes, std::span<const Edge> edges) : adj_(num_nodes) {
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) {
      throw Error("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                  ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    if (a == b) throw Error("self-loop at node " + std::to_string(a));
    adj_[a].push_back(b);
    adj_[b].push_back(a);
  }
  std::int64_t total = 0;
  for (auto& list : adj_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    total += static_cast<std::int64_t>(list.size());
  }
  num_links_ = total / 2;
}

double Graph::density() const {
  const auto pairs = num_pairs();
  return pairs == 0 ? 0.0 : static_cast<double>(num_links_) / static_cast<double>(pairs);
}

bool Graph::has_link(int a, int b) const {
  const auto& list = adj_[a];
  return std::binary_search(list.begin(), list.end(), b);
}

std::vector<Edge> Graph::links() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(num_links_));
  for (int a = 0; a < num_nodes(); ++a) {
    for (int b : adj_[a]) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

namespace {

bool parse_id(std::string_view token, std::int64_t& out) {
  if (token.empty()) return false;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end && out >= 0;
}

}  // namespace

EdgeListLoad load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read edge list " + path.string());

  EdgeListLoad result;
  std::unordered_map<std::int64_t, int> dense;
  auto intern = [&](std::int64_t id) {
    auto [it, inserted] = dense.try_emplace(id, static_cast<int>(dense.size()));
    if (inserted) result.external_ids.push_back(id);
    return it->second;
  };

  std::vector<Edge> edges;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;

    std::istringstream fields(line);
    std::string ta, tb, extra;
    std::int64_t ia = 0, ib = 0;
    if (!(fields >> ta >> tb) || (fields >> extra) || !parse_id(ta, ia) ||
        !parse_id(tb, ib)) {
      throw Error(path.string() + ":" + std::to_string(line_no) +
                  ": expected two non-negative integer node ids");
    }
    const int a = intern(ia);
    const int b = intern(ib);
    if (a == b) {
      ++result.self_loops;
      continue;
    }
    if (!seen.insert(pair_key(a, b)).second) {
      ++result.duplicate_edges;
      continue;
    }
    edges.emplace_back(a, b);
  }
  if (edges.empty()) throw Error("edge list " + path.string() + " has no links");
  result.graph = Graph(static_cast<int>(dense.size()), edges);
  return result;
}

void write_edge_list(const Graph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [a, b] : g.links()) out << a << ' ' << b << '\n';
}

namespace {

void validate_generator(int num_nodes, double alpha, double delta) {
  if (num_nodes < 2) throw Error("generator needs at least two nodes");
  if (!(alpha > 0.0)) throw Error("alpha must be positive");
  if (!(delta >= 0.0 && delta < 1.0)) throw Error("delta must lie in [0, 1)");
}

SyntheticGraph generate_from(int num_nodes, double alpha, std::vector<double> beta,
                             double delta, Rng& pi_rng, Rng& link_rng) {
  const int K = static_cast<int>(beta.size());
  SyntheticGraph out;
  out.truth.beta = std::move(beta);
  out.truth.pi = Matrix(num_nodes, K);
  Matrix cdf(num_nodes, K);
  for (int a = 0; a < num_nodes; ++a) {
    auto row = out.truth.pi.row(a);
    sample_dirichlet(pi_rng, alpha, row);
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      acc += row[k];
      cdf(a, k) = acc;
    }
  }

  auto draw = [&](int a) {
    const auto row = cdf.row(a);
    const double u = std::generate_canonical<double, 53>(link_rng) * row.back();
    const auto it = std::upper_bound(row.begin(), row.end(), u);
    return std::min<int>(static_cast<int>(it - row.begin()), K - 1);
  };

  std::vector<Edge> edges;
  for (int a = 0; a < num_nodes; ++a) {
    for (int b = a + 1; b < num_nodes; ++b) {
      const int zab = draw(a);
      const int zba = draw(b);
      const double r = (zab == zba) ? out.truth.beta[zab] : delta;
      if (std::generate_canonical<double, 53>(link_rng) < r) edges.emplace_back(a, b);
    }
  }
  out.graph = Graph(num_nodes, edges);
  return out;
}

}  // namespace

SyntheticGraph generate_ammsb(int num_nodes, int num_communities, double alpha,
                              double eta, double delta, Rng& rng) {
  return generate_ammsb(num_nodes, num_communities, alpha, BetaPrior{eta, eta},
                        delta, rng);
}

SyntheticGraph generate_ammsb(int num_nodes, int num_communities, double alpha,
                              BetaPrior prior, double delta, Rng& rng) {
  validate_generator(num_nodes, alpha, delta);
  if (num_communities < 1) throw Error("need at least one community");
  if (!(prior.link_shape > 0.0) || !(prior.nonlink_shape > 0.0)) {
    throw Error("beta prior shapes must be positive");
  }
  if (!(delta > 0.0)) throw Error("delta must lie in (0, 1)");
  // Independent sub-streams keep memberships and links fixed when only the
  // strength prior changes.
  Rng beta_rng(rng());
  Rng pi_rng(rng());
  Rng link_rng(rng());
  std::vector<double> beta(num_communities);
  for (auto& b : beta) b = sample_beta(beta_rng, prior.link_shape, prior.nonlink_shape);
  return generate_from(num_nodes, alpha, std::move(beta), delta, pi_rng, link_rng);
}

SyntheticGraph generate_ammsb_with_beta(int num_nodes, double alpha,
                                        std::span<const double> beta, double delta,
                                        Rng& rng) {
  validate_generator(num_nodes, alpha, delta);
  if (beta.empty()) throw Error("need at least one community");
  for (double b : beta) {
    if (!(b >= 0.0 && b <= 1.0)) throw Error("community strength outside [0, 1]");
  }
  Rng beta_rng(rng());  // keep stream layout identical to generate_ammsb
  Rng pi_rng(rng());
  Rng link_rng(rng());
  (void)beta_rng;
  return generate_from(num_nodes, alpha, std::vector<double>(beta.begin(), beta.end()),
                       delta, pi_rng, link_rng);
}

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "ammsb-ground-truth v1 " << truth.pi.rows() << ' ' << truth.pi.cols() << '\n';
  out << std::setprecision(17);
  for (std::size_t a = 0; a < truth.pi.rows(); ++a) {
    for (std::size_t k = 0; k < truth.pi.cols(); ++k) {
      out << (k ? " " : "") << truth.pi(a, k);
    }
    out << '\n';
  }
  for (std::size_t k = 0; k < truth.beta.size(); ++k) {
    out << (k ? " " : "") << truth.beta[k];
  }
  out << '\n';
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::string magic, version;
  std::size_t n = 0, k = 0;
  if (!(in >> magic >> version >> n >> k) || magic != "ammsb-ground-truth" ||
      version != "v1") {
    throw Error(path.string() + ": not a ground-truth file");
  }
  GroundTruth truth{Matrix(n, k), std::vector<double>(k)};
  for (auto& v : truth.pi.data()) {
    if (!(in >> v)) throw Error(path.string() + ": truncated membership matrix");
  }
  for (auto& v : truth.beta) {
    if (!(in >> v)) throw Error(path.string() + ": truncated strengths");
  }
  return truth;
}

HeldOutSplit::HeldOutSplit(int num_nodes, std::vector<HeldOutPair> pairs)
    : pairs_(std::move(pairs)), per_node_(num_nodes, 0) {
  for (auto& p : pairs_) {
    if (p.a == p.b || p.a < 0 || p.b < 0 || p.a >= num_nodes || p.b >= num_nodes) {
      throw Error("invalid held-out pair");
    }
    if (p.a > p.b) std::swap(p.a, p.b);
    if (!keys_.insert(pair_key(p.a, p.b)).second) throw Error("duplicate held-out pair");
    ++per_node_[p.a];
    ++per_node_[p.b];
  }
}

SplitResult split_heldout(const Graph& g, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("held-out fraction must lie in (0, 1)");
  const int N = g.num_nodes();
  const auto count = static_cast<std::int64_t>(
      std::ceil(fraction * static_cast<double>(g.num_links()) - 1e-9));
  if (count > g.num_links()) throw Error("not enough links to hold out");
  if (count > g.num_pairs() - g.num_links()) throw Error("not enough non-links to hold out");

  const auto links = g.links();
  std::vector<Edge> chosen;
  chosen.reserve(count);
  std::sample(links.begin(), links.end(), std::back_inserter(chosen), count, rng);

  std::vector<HeldOutPair> pairs;
  pairs.reserve(2 * count);
  std::unordered_set<std::uint64_t> taken;
  for (const auto& [a, b] : chosen) {
    pairs.push_back({a, b, 1});
    taken.insert(pair_key(a, b));
  }
  std::uniform_int_distribution<int> node(0, N - 1);
  std::int64_t nonlinks = 0;
  while (nonlinks < count) {
    int a = node(rng);
    int b = node(rng);
    if (a == b || g.has_link(a, b) || !taken.insert(pair_key(a, b)).second) continue;
    if (a > b) std::swap(a, b);
    pairs.push_back({a, b, 0});
    ++nonlinks;
  }

  std::unordered_set<std::uint64_t> removed;
  for (const auto& [a, b] : chosen) removed.insert(pair_key(a, b));
  std::vector<Edge> kept;
  kept.reserve(links.size() - chosen.size());
  for (const auto& [a, b] : links) {
    if (!removed.contains(pair_key(a, b))) kept.emplace_back(a, b);
  }

  SplitResult result{Graph(N, kept), HeldOutSplit(N, std::move(pairs)), std::nullopt};
  if (fraction > 0.5 || result.training.num_links() < N / 2) {
    result.warning = "held-out fraction " + std::to_string(fraction) + " leaves only " +
                     std::to_string(result.training.num_links()) + " training links";
  }
  return result;
}

void write_heldout(const HeldOutSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : split.test_pairs()) out << p.a << ' ' << p.b << ' ' << p.y << '\n';
}

HeldOutSplit read_heldout(int num_nodes, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<HeldOutPair> pairs;
  HeldOutPair p;
  while (in >> p.a >> p.b >> p.y) {
    if (p.y != 0 && p.y != 1) throw Error(path.string() + ": label must be 0 or 1");
    pairs.push_back(p);
  }
  if (!in.eof()) throw Error(path.string() + ": malformed held-out pair");
  return HeldOutSplit(num_nodes, std::move(pairs));
}

}  // namespace ammsb
