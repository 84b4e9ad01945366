#include "ammsb/sparse_approx.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_set>

#include "ammsb/error.hpp"
#include "ammsb/kernels.hpp"
#include "ammsb/sampler_global.hpp"

namespace ammsb {

namespace {

// Descending membership order with ties broken by community id.
std::vector<int> descending_order(std::span<const double> pi) {
  std::vector<int> order(pi.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return pi[l] > pi[r]; });
  return order;
}

bool below_threshold(double cdf, double tau) { return cdf < tau - kCdfTolerance; }

// Communities in [0, K) that have no explicit entry, ascending.
std::vector<int> bulk_members(const SparseRow& row, int K) {
  std::vector<int> out;
  out.reserve(row.bulk_count);
  std::size_t j = 0;
  for (int k = 0; k < K; ++k) {
    if (j < row.entries.size() && row.entries[j].community == k) {
      ++j;
      continue;
    }
    out.push_back(k);
  }
  return out;
}

struct CdfScan {
  double before_bulk = 0.0;
  double bulk_mass = 0.0;
  // Per entry: the cdf ahead of it is still below tau, so some of its mass
  // lies on the near side of the threshold.
  std::vector<char> straddles;
};

// Sets active flags by the threshold rule over the explicit entries and the
// bulk representative, sorted by mass.
CdfScan assign_flags(SparseRow& row, double tau) {
  const double total = row.total();
  struct Item {
    double mass;
    int index;  // -1 for the bulk representative
  };
  std::vector<Item> items;
  items.reserve(row.entries.size() + 1);
  for (std::size_t j = 0; j < row.entries.size(); ++j) {
    items.push_back({row.entries[j].phi / total, static_cast<int>(j)});
  }
  CdfScan scan;
  scan.straddles.assign(row.entries.size(), 0);
  const bool has_bulk = row.bulk_count > 0;
  if (has_bulk) {
    scan.bulk_mass = row.bulk_value / total;
    items.push_back({scan.bulk_mass, -1});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& l, const Item& r) {
    if (l.mass != r.mass) return l.mass > r.mass;
    return l.index >= 0 && r.index < 0;
  });

  double cdf = 0.0;
  bool open = true;
  for (std::size_t pos = 0; pos < items.size(); ++pos) {
    const auto& item = items[pos];
    if (item.index < 0) {
      scan.before_bulk = cdf;
      cdf += item.mass;
      continue;
    }
    scan.straddles[item.index] = pos == 0 || below_threshold(cdf, tau);
    cdf += item.mass;
    auto& entry = row.entries[item.index];
    entry.active = open && (pos == 0 || below_threshold(cdf, tau));
    if (!entry.active) open = false;
  }
  if (!has_bulk) scan.before_bulk = cdf;
  return scan;
}

void insert_entry(SparseRow& row, int k, double phi) {
  auto it = std::lower_bound(row.entries.begin(), row.entries.end(), k,
                             [](const SparseEntry& e, int c) { return e.community < c; });
  row.entries.insert(it, SparseEntry{k, phi, false});
}

using RowSource = std::function<void(int, std::span<double>)>;

SparseModel build_sparse_model(int K, double tau, const Graph& g, const RowSource& fill_row,
                               Matrix theta) {
  if (!(tau > 0.0)) throw Error("threshold tau must be positive");
  const int N = g.num_nodes();
  SparseModel model;
  model.K = K;
  model.tau = tau;
  model.theta = std::move(theta);
  model.rows.resize(N);

  std::vector<double> phi(K), pi(K);
  std::vector<std::vector<int>> active(N);
  for (int a = 0; a < N; ++a) {
    fill_row(a, phi);
    normalize_into(phi, pi);
    auto split = split_communities(pi, tau, {});
    active[a] = std::move(split.active);
    std::sort(active[a].begin(), active[a].end());
  }

  for (int a = 0; a < N; ++a) {
    std::vector<int> neighbor_active;
    for (int b : g.neighbors(a)) {
      neighbor_active.insert(neighbor_active.end(), active[b].begin(), active[b].end());
    }
    std::sort(neighbor_active.begin(), neighbor_active.end());
    neighbor_active.erase(std::unique(neighbor_active.begin(), neighbor_active.end()),
                          neighbor_active.end());

    fill_row(a, phi);
    normalize_into(phi, pi);
    auto split = split_communities(pi, tau, neighbor_active);
    // The community whose mass crosses tau starts explicit, as
    // promote_demote would leave it.
    double active_mass = 0.0;
    for (int k : split.active) active_mass += pi[k];
    if (!split.bulk.empty() && below_threshold(active_mass, tau)) {
      const int crossing = descending_order(pi)[split.active.size()];
      const auto it = std::lower_bound(split.bulk.begin(), split.bulk.end(), crossing);
      if (it != split.bulk.end() && *it == crossing) {
        split.bulk.erase(it);
        split.candidate.push_back(crossing);
      }
    }
    auto& row = model.rows[a];
    for (int k : split.active) row.entries.push_back({k, phi[k], true});
    for (int k : split.candidate) row.entries.push_back({k, phi[k], false});
    std::sort(row.entries.begin(), row.entries.end(),
              [](const SparseEntry& l, const SparseEntry& r) { return l.community < r.community; });
    row.bulk_count = static_cast<int>(split.bulk.size());
    double bulk_mass = 0.0;
    for (int k : split.bulk) bulk_mass += phi[k];
    row.bulk_value = row.bulk_count > 0 ? std::max(bulk_mass / row.bulk_count, kMinParameter) : 0.0;
  }
  model.recount();
  return model;
}

}  // namespace

CommunitySplit split_communities(std::span<const double> pi_a, double tau,
                                 std::span<const int> neighbor_active) {
  if (!(tau > 0.0)) throw Error("threshold tau must be positive");
  const int K = static_cast<int>(pi_a.size());
  CommunitySplit split;
  std::vector<char> is_active(K, 0);
  double cdf = 0.0;
  for (int k : descending_order(pi_a)) {
    cdf += pi_a[k];
    if (!split.active.empty() && !below_threshold(cdf, tau)) break;
    split.active.push_back(k);
    is_active[k] = 1;
  }
  if (tau >= 1.0) {
    for (int k = 0; k < K; ++k) {
      if (!is_active[k]) split.candidate.push_back(k);
    }
    return split;
  }
  std::vector<char> is_candidate(K, 0);
  for (int k : neighbor_active) {
    if (k >= 0 && k < K && !is_active[k] && !is_candidate[k]) is_candidate[k] = 1;
  }
  for (int k = 0; k < K; ++k) {
    if (is_candidate[k]) {
      split.candidate.push_back(k);
    } else if (!is_active[k]) {
      split.bulk.push_back(k);
    }
  }
  return split;
}

double f_tilde(int y, double pi_a_bulk, const BulkSummary& bulk, double delta) {
  return local_term(pi_a_bulk, bulk.pi_bar_b, bernoulli(bulk.beta_bar, y), bernoulli(delta, y));
}

double z_tilde(int bulk_count, double f_tilde_value, std::span<const double> explicit_terms) {
  double z = 0.0;
  for (double t : explicit_terms) z += t;
  if (bulk_count > 0) z += bulk_count * f_tilde_value;
  return z;
}

int promotion_count(double tau, double cdf_before_bulk, double bulk_pi) {
  if (!below_threshold(cdf_before_bulk, tau) || !(bulk_pi > 0.0)) return 0;
  const double n = std::floor((tau - cdf_before_bulk) / bulk_pi + 1e-9);
  return n >= static_cast<double>(INT_MAX) ? INT_MAX : static_cast<int>(n);
}

double SparseRow::total() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.phi;
  if (bulk_count > 0) s += bulk_count * bulk_value;
  return s;
}

const SparseEntry* SparseRow::find(int k) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), k,
                             [](const SparseEntry& e, int c) { return e.community < c; });
  return (it != entries.end() && it->community == k) ? &*it : nullptr;
}

std::size_t SparseRow::active_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const SparseEntry& e) { return e.active; }));
}

void SparseRow::densify_phi(std::span<double> phi) const {
  std::fill(phi.begin(), phi.end(), bulk_count > 0 ? bulk_value : 0.0);
  for (const auto& e : entries) phi[e.community] = e.phi;
}

void SparseRow::densify_pi(std::span<double> pi) const {
  const double s = total();
  std::fill(pi.begin(), pi.end(), bulk_count > 0 ? bulk_value / s : 0.0);
  for (const auto& e : entries) pi[e.community] = e.phi / s;
}

std::vector<int> SparseRow::active_communities() const {
  std::vector<int> out;
  for (const auto& e : entries) {
    if (e.active) out.push_back(e.community);
  }
  return out;
}

std::vector<int> SparseModel::neighbor_active(const Graph& g, int a) const {
  std::vector<int> out;
  for (int b : g.neighbors(a)) {
    for (const auto& e : rows[b].entries) {
      if (e.active) out.push_back(e.community);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double SparseModel::memory_ratio(int a) const {
  return static_cast<double>(rows[a].entries.size() + 1) / static_cast<double>(K);
}

double SparseModel::mean_memory_ratio() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (int a = 0; a < num_nodes(); ++a) s += memory_ratio(a);
  return s / static_cast<double>(rows.size());
}

double SparseModel::max_memory_ratio() const {
  double m = 0.0;
  for (int a = 0; a < num_nodes(); ++a) m = std::max(m, memory_ratio(a));
  return m;
}

Matrix SparseModel::dense_phi() const {
  Matrix phi(rows.size(), K);
  for (std::size_t a = 0; a < rows.size(); ++a) rows[a].densify_phi(phi.row(a));
  return phi;
}

void SparseModel::recount() {
  refcount.assign(K, 0);
  for (const auto& row : rows) {
    for (const auto& e : row.entries) ++refcount[e.community];
  }
}

SparseModel init_sparse_model(const HyperParams& hp, const Graph& g, double tau,
                              std::uint64_t seed) {
  hp.validate();
  return build_sparse_model(
      hp.K, tau, g, [&](int a, std::span<double> out) { sample_phi_row(hp, seed, a, out); },
      sample_theta(hp, seed));
}

SparseModel sparse_from_dense(const ModelState& state, const Graph& g, double tau) {
  if (state.num_nodes() != g.num_nodes()) throw Error("state and graph disagree on N");
  return build_sparse_model(
      state.num_communities(), tau, g,
      [&](int a, std::span<double> out) {
        const auto row = state.phi.row(a);
        std::copy(row.begin(), row.end(), out.begin());
      },
      state.theta);
}

SparseRow sparse_update_row(const SparseModel& model, const NodeBatch& nb,
                            std::span<const double> beta, const HyperParams& hp, double eps,
                            Rng& noise_rng, Rng& bulk_rng, SparseUpdateOptions opts) {
  if (eps < 0.0) throw Error("step size must be non-negative");
  const SparseRow& row = model.rows[nb.pivot];
  SparseRow out = row;
  if (eps == 0.0) return out;

  const std::size_t E = row.entries.size();
  const double total_a = row.total();
  const bool has_bulk = row.bulk_count > 0;

  std::vector<double> pi_a(E);
  for (std::size_t j = 0; j < E; ++j) pi_a[j] = row.entries[j].phi / total_a;

  // With the whole bulk in the batch the means are taken in closed form:
  // everything not explicit at the pivot, divided by the bulk size.
  const bool full_bulk = has_bulk && (opts.bulk_batch <= 0 || opts.bulk_batch >= row.bulk_count);
  std::vector<int> bulk_batch;
  double beta_bar = 0.0;
  double pi_a_bulk = 0.0;
  if (has_bulk) {
    if (full_bulk) {
      double explicit_beta = 0.0;
      for (const auto& e : row.entries) explicit_beta += beta[e.community];
      double all_beta = 0.0;
      for (double b : beta) all_beta += b;
      beta_bar = std::max(0.0, all_beta - explicit_beta) / row.bulk_count;
    } else {
      std::uniform_int_distribution<int> community(0, model.K - 1);
      std::unordered_set<int> taken;
      while (static_cast<int>(bulk_batch.size()) < opts.bulk_batch) {
        const int k = community(bulk_rng);
        if (row.find(k) != nullptr || !taken.insert(k).second) continue;
        bulk_batch.push_back(k);
      }
      for (int k : bulk_batch) beta_bar += beta[k];
      beta_bar /= static_cast<double>(bulk_batch.size());
    }
    pi_a_bulk = row.bulk_value / total_a;
  }

  std::vector<double> terms(E), grad(E, 0.0);
  double grad_bulk = 0.0;

  auto accumulate = [&](const std::vector<int>& peers, double weight, int y) {
    const double background = bernoulli(hp.delta, y);
    for (int b : peers) {
      const SparseRow& peer = model.rows[b];
      const double total_b = peer.total();
      double z = 0.0;
      double peer_explicit = 0.0;  // peer's membership on the pivot's explicit communities
      std::size_t p = 0;
      for (std::size_t j = 0; j < E; ++j) {
        const int k = row.entries[j].community;
        while (p < peer.entries.size() && peer.entries[p].community < k) ++p;
        const bool match = p < peer.entries.size() && peer.entries[p].community == k;
        const double pi_bk = (match ? peer.entries[p].phi : peer.bulk_value) / total_b;
        peer_explicit += pi_bk;
        terms[j] = local_term(pi_a[j], pi_bk, bernoulli(beta[k], y), background);
        z += terms[j];
      }
      double shared = 0.0;
      if (has_bulk) {
        BulkSummary summary{0.0, beta_bar, row.bulk_count};
        if (full_bulk) {
          summary.pi_bar_b = std::max(0.0, 1.0 - peer_explicit) / row.bulk_count;
        } else {
          summary.batch_size = static_cast<int>(bulk_batch.size());
          for (int k : bulk_batch) {
            const SparseEntry* e = peer.find(k);
            summary.pi_bar_b += (e ? e->phi : peer.bulk_value) / total_b;
          }
          summary.pi_bar_b /= static_cast<double>(bulk_batch.size());
        }
        shared = f_tilde(y, pi_a_bulk, summary, hp.delta);
        z += row.bulk_count * shared;
      }
      for (std::size_t j = 0; j < E; ++j) {
        grad[j] += weight * (terms[j] / (z * row.entries[j].phi) - 1.0 / total_a);
      }
      if (has_bulk) grad_bulk += weight * (shared / (z * row.bulk_value) - 1.0 / total_a);
    }
  };
  accumulate(nb.linked, nb.link_weight, 1);
  accumulate(nb.unlinked, nb.nonlink_weight, 0);

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < E; ++j) {
    const double z = opts.noise ? normal(noise_rng) : 0.0;
    out.entries[j].phi = riemannian_step(row.entries[j].phi, hp.alpha, grad[j], eps, z);
  }
  if (has_bulk) {
    const double z = opts.noise ? normal(noise_rng) : 0.0;
    out.bulk_value = riemannian_step(row.bulk_value, hp.alpha, grad_bulk, eps, z);
  }
  return out;
}

Matrix sparse_theta_gradient(const SparseModel& model, const EdgeBatch& batch, double delta,
                             std::span<const int> subset) {
  const auto beta = beta_from_theta(model.theta);
  const int y = batch.y();
  const double background = bernoulli(delta, y);
  double excess_all = 0.0;
  for (double b : beta) excess_all += bernoulli(b, y) - background;

  auto value = [](const SparseRow& row, int k) {
    const SparseEntry* e = row.find(k);
    return e ? e->phi : row.bulk_value;
  };

  Matrix grad(subset.size(), 2);
  for (const auto& [a, b] : batch.pairs) {
    const SparseRow& ra = model.rows[a];
    const SparseRow& rb = model.rows[b];
    const double ta = ra.total();
    const double tb = rb.total();

    double z = 0.0;
    double excess_union = 0.0;
    auto add = [&](int k, double phi_a, double phi_b) {
      const double excess = bernoulli(beta[k], y) - background;
      z += excess * (phi_a / ta) * (phi_b / tb);
      excess_union += excess;
    };
    std::size_t i = 0, j = 0;
    while (i < ra.entries.size() || j < rb.entries.size()) {
      const int ka = i < ra.entries.size() ? ra.entries[i].community : INT_MAX;
      const int kb = j < rb.entries.size() ? rb.entries[j].community : INT_MAX;
      if (ka == kb) {
        add(ka, ra.entries[i++].phi, rb.entries[j++].phi);
      } else if (ka < kb) {
        add(ka, ra.entries[i++].phi, rb.bulk_value);
      } else {
        add(kb, ra.bulk_value, rb.entries[j++].phi);
      }
    }
    if (ra.bulk_count > 0 && rb.bulk_count > 0) {
      z += (ra.bulk_value / ta) * (rb.bulk_value / tb) * (excess_all - excess_union);
    }
    z += background;

    for (std::size_t s = 0; s < subset.size(); ++s) {
      const int k = subset[s];
      const double weight =
          bernoulli(beta[k], y) * (value(ra, k) / ta) * (value(rb, k) / tb) / z;
      const double total = model.theta(k, 0) + model.theta(k, 1);
      for (int c = 0; c < 2; ++c) {
        const double indicator = std::abs(1 - c - y);
        grad(s, c) += weight * (indicator / model.theta(k, c) - 1.0 / total);
      }
    }
  }
  for (auto& g : grad.data()) g *= batch.scale;
  return grad;
}

void adopt_candidates(SparseRow& row, int K, std::span<const int> neighbor_active,
                      std::vector<int>& refcount) {
  for (int k : neighbor_active) {
    if (row.bulk_count == 0) break;
    if (k < 0 || k >= K || row.find(k) != nullptr) continue;
    insert_entry(row, k, row.bulk_value);
    ++refcount[k];
    --row.bulk_count;
  }
}

void promote_demote(SparseRow& row, int K, std::span<const int> neighbor_active, double tau,
                    std::vector<int>& refcount, Rng& rng) {
  if (tau >= 1.0) {
    if (row.bulk_count > 0) {
      for (int k : bulk_members(row, K)) {
        insert_entry(row, k, row.bulk_value);
        ++refcount[k];
      }
      row.bulk_count = 0;
    }
    assign_flags(row, tau);
    return;
  }

  const CdfScan scan = assign_flags(row, tau);
  if (row.bulk_count > 0) {
    const int wanted =
        std::min(row.bulk_count, promotion_count(tau, scan.before_bulk, scan.bulk_mass));
    if (wanted > 0) {
      std::vector<int> unused, used;
      for (int k : bulk_members(row, K)) (refcount[k] == 0 ? unused : used).push_back(k);
      std::vector<int> chosen;
      chosen.reserve(wanted);
      std::sample(unused.begin(), unused.end(), std::back_inserter(chosen),
                  std::min<std::size_t>(wanted, unused.size()), rng);
      if (static_cast<int>(chosen.size()) < wanted) {
        std::sample(used.begin(), used.end(), std::back_inserter(chosen),
                    wanted - chosen.size(), rng);
      }
      for (int k : chosen) {
        insert_entry(row, k, row.bulk_value);
        ++refcount[k];
      }
      row.bulk_count -= static_cast<int>(chosen.size());
    }
  }

  adopt_candidates(row, K, neighbor_active, refcount);

  // Demote entries lying wholly past tau in the cdf.  The entry that
  // crosses tau stays as a candidate, so the explicit mass keeps covering tau
  // and the bulk does not swallow a large community.
  for (;;) {
    const CdfScan flags = assign_flags(row, tau);
    double absorbed = 0.0;
    int demoted = 0;
    std::size_t index = 0;
    std::erase_if(row.entries, [&](const SparseEntry& e) {
      if (flags.straddles[index++] ||
          std::binary_search(neighbor_active.begin(), neighbor_active.end(), e.community)) {
        return false;
      }
      absorbed += e.phi;
      ++demoted;
      --refcount[e.community];
      return true;
    });
    if (demoted == 0) break;
    const double mass = row.bulk_count * row.bulk_value + absorbed;
    row.bulk_count += demoted;
    row.bulk_value = std::max(mass / row.bulk_count, kMinParameter);
  }
}

}  // namespace ammsb
