#include "ammsb/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "ammsb/baselines.hpp"
#include "ammsb/error.hpp"
#include "ammsb/kernels.hpp"
#include "ammsb/model_state.hpp"
#include "ammsb/samplers.hpp"
#include "ammsb/sparse_approx.hpp"

namespace ammsb {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw Error("config key '" + key + "': expected 0/1/true/false, got '" + text + "'");
}

void reject_unknown(const std::map<std::string, std::string>& kv,
                    const std::vector<std::string>& valid) {
  for (const auto& [key, value] : kv) {
    if (std::find(valid.begin(), valid.end(), key) != valid.end()) continue;
    std::string list;
    for (const auto& v : valid) list += (list.empty() ? "" : ", ") + v;
    throw Error("unknown config key '" + key + "'; valid keys: " + list);
  }
}

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p : base / p;
}

// Reads an optional key through `parse`, leaving `out` alone when absent.
template <typename T, typename Parse>
void read(const std::map<std::string, std::string>& kv, const std::string& key, T& out,
          Parse parse) {
  if (auto it = kv.find(key); it != kv.end()) out = parse(key, it->second);
}

template <typename T>
auto number() {
  return [](const std::string& k, const std::string& v) { return parse_number<T>(k, v); };
}

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

// Sums and sample count of a perplexity accumulator, for resuming.
struct AccumulatorFile {
  std::size_t samples = 0;
  double seconds = 0.0;
  std::vector<double> sums;
};

void write_accumulator(const fs::path& path, const PerplexityAccumulator& acc, double seconds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "ammsb-accumulator v1 " << acc.pairs().size() << ' ' << acc.samples() << '\n';
  out << std::setprecision(17) << seconds << '\n';
  for (double s : acc.sums()) out << s << '\n';
}

std::optional<AccumulatorFile> read_accumulator(const fs::path& path, std::size_t pairs) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string magic, version;
  std::size_t count = 0;
  AccumulatorFile f;
  in >> magic >> version >> count >> f.samples >> f.seconds;
  if (!in || magic != "ammsb-accumulator" || version != "v1") {
    throw Error(path.string() + ": not an accumulator file");
  }
  if (count != pairs) throw Error(path.string() + ": held-out pair count mismatch");
  f.sums.resize(count);
  for (auto& s : f.sums) in >> s;
  if (!in) throw Error(path.string() + ": truncated accumulator");
  return f;
}

ModelState cgs_as_state(const AssignmentState& st, const HyperParams& hp) {
  ModelState s{Matrix(st.num_nodes, st.K), Matrix(st.K, 2)};
  for (int a = 0; a < st.num_nodes; ++a) {
    for (int k = 0; k < st.K; ++k) s.phi(a, k) = st.count(a, k) + hp.alpha;
  }
  for (int k = 0; k < st.K; ++k) {
    s.theta(k, 0) = st.s0[k] + hp.eta;
    s.theta(k, 1) = st.s1[k] + hp.eta;
  }
  return s;
}

// One algorithm behind a uniform interface for the run loop.
struct Driver {
  std::function<void()> step;
  std::function<void(PerplexityAccumulator&)> absorb;
  std::function<ModelState()> snapshot;
  std::function<std::optional<double>()> mem_ratio = [] { return std::nullopt; };
  std::function<std::optional<double>()> max_mem_ratio = [] { return std::nullopt; };
  std::function<std::optional<double>()> accept_rate = [] { return std::nullopt; };
};

}  // namespace

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw Error(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw Error(where + ": expected 'key = value'");
    if (!kv.emplace(key, value).second) throw Error(where + ": duplicate key '" + key + "'");
  }
  return kv;
}

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k = {
      "dataset",      "algorithm",        "K",         "alpha",          "eta",
      "delta",        "tau",              "kappa",     "tau0",           "fixed_step",
      "m",            "n1",               "n0",        "heldout_fraction", "max_iters",
      "eval_interval", "burn_in",         "seed",      "global_update_fraction",
      "threads",      "out_dir",          "resume",    "record_wallclock", "local_sampling",
      "bulk_batch"};
  return k;
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& kv,
                                            const fs::path& base_dir) {
  reject_unknown(kv, keys());
  ExperimentConfig c;
  auto path = [&](const std::string&, const std::string& v) { return resolve(base_dir, v); };
  auto text = [](const std::string&, const std::string& v) { return v; };
  if (!kv.contains("dataset")) throw Error("config is missing 'dataset'");
  if (!kv.contains("K")) throw Error("config is missing 'K'");
  read(kv, "dataset", c.dataset, path);
  read(kv, "algorithm", c.algorithm, text);
  read(kv, "K", c.K, number<int>());
  read(kv, "alpha", c.alpha, number<double>());
  read(kv, "eta", c.eta, number<double>());
  read(kv, "delta", c.delta, number<double>());
  read(kv, "tau", c.tau, number<double>());
  read(kv, "kappa", c.kappa, number<double>());
  read(kv, "tau0", c.tau0, number<double>());
  read(kv, "fixed_step", c.fixed_step, number<double>());
  read(kv, "m", c.m, number<int>());
  read(kv, "n1", c.n1, number<int>());
  read(kv, "n0", c.n0, number<int>());
  read(kv, "heldout_fraction", c.heldout_fraction, number<double>());
  read(kv, "max_iters", c.max_iters, number<std::int64_t>());
  read(kv, "eval_interval", c.eval_interval, number<std::int64_t>());
  read(kv, "burn_in", c.burn_in, number<std::int64_t>());
  read(kv, "seed", c.seed, number<std::uint64_t>());
  read(kv, "global_update_fraction", c.global_update_fraction, number<double>());
  read(kv, "threads", c.threads, number<int>());
  read(kv, "out_dir", c.out_dir, path);
  read(kv, "resume", c.resume, path);
  read(kv, "record_wallclock", c.record_wallclock, parse_bool);
  read(kv, "local_sampling", c.local_sampling, text);
  read(kv, "bulk_batch", c.bulk_batch, number<int>());
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  return from_map(read_key_values(path), path.parent_path());
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> algorithms = {"sgmc", "sgmc-m", "cgs", "lmc"};
  if (!algorithms.contains(algorithm)) {
    throw Error("algorithm must be one of sgmc, sgmc-m, cgs, lmc (got '" + algorithm + "')");
  }
  if (local_sampling != "stratified" && local_sampling != "uniform") {
    throw Error("local_sampling must be 'stratified' or 'uniform'");
  }
  if (K < 1) throw Error("K must be at least 1");
  if (max_iters < 0) throw Error("max_iters must be non-negative");
  if (eval_interval < 1) throw Error("eval_interval must be at least 1");
  if (burn_in < 0) throw Error("burn_in must be non-negative");
  if (threads < 1) throw Error("threads must be at least 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw Error("tau must lie in (0, 1]");
  if (fixed_step && !(*fixed_step > 0.0)) throw Error("fixed_step must be positive");
  if (!fixed_step && (tau0 < 0.0 || kappa < 0.0)) throw Error("tau0 and kappa must be >= 0");
  if (m && *m < 1) throw Error("m must be at least 1");
  if (bulk_batch < 0) throw Error("bulk_batch must be non-negative (0 = whole bulk)");
  if (global_update_fraction && !(*global_update_fraction > 0.0)) {
    throw Error("global_update_fraction must be positive");
  }
  HyperParams{K, alpha.value_or(1.0 / K), eta, delta}.validate();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto load = load_edge_list(cfg.dataset);
  if (load.duplicate_edges + load.self_loops > 0) {
    std::cerr << cfg.dataset.string() << ": dropped " << load.duplicate_edges
              << " duplicate edges and " << load.self_loops << " self-loops\n";
  }
  const Graph& full = load.graph;
  Rng split_rng = make_stream(cfg.seed, Stream::kHeldOut);
  const SplitResult split = split_heldout(full, cfg.heldout_fraction, split_rng);
  if (split.warning) std::cerr << "warning: " << *split.warning << '\n';
  const Graph& g = split.training;
  const HeldOutSplit& heldout = split.heldout;

  const HyperParams hp{cfg.K, cfg.alpha.value_or(1.0 / cfg.K), cfg.eta, cfg.delta};
  SamplerConfig sc;
  sc.hp = hp;
  sc.schedule = cfg.fixed_step ? StepSchedule::constant(*cfg.fixed_step)
                               : StepSchedule{cfg.tau0, cfg.kappa, std::nullopt};
  sc.m = cfg.m.value_or(default_stratification(g.num_nodes()));
  sc.n1 = cfg.n1;
  sc.n0 = cfg.n0;
  sc.local_sampling =
      cfg.local_sampling == "uniform" ? LocalSampling::kUniform : LocalSampling::kStratified;
  sc.global_update_fraction = cfg.global_update_fraction.value_or(default_global_fraction(cfg.K));
  sc.threads = cfg.threads;
  sc.seed = cfg.seed;
  sc.tau = cfg.tau;
  sc.bulk_batch = cfg.bulk_batch;

  fs::create_directories(cfg.out_dir);
  write_heldout(heldout, cfg.out_dir / "heldout.txt");

  std::int64_t start = 0;
  std::optional<ModelState> resumed;
  PerplexityAccumulator acc(heldout);
  double seconds = 0.0;
  if (cfg.resume) {
    if (cfg.algorithm == "cgs") throw Error("resume is not supported for cgs");
    std::ifstream in(*cfg.resume);
    if (!in) throw Error("cannot read checkpoint " + cfg.resume->string());
    Checkpoint ck = read_checkpoint(in);
    if (static_cast<int>(ck.phi.rows()) != g.num_nodes() ||
        static_cast<int>(ck.phi.cols()) != cfg.K) {
      throw Error("checkpoint shape does not match dataset and K");
    }
    if (!ck.iteration) throw Error("checkpoint has no iteration marker; cannot resume");
    start = *ck.iteration;
    resumed = ModelState{std::move(ck.phi), std::move(ck.theta)};
    if (auto saved = read_accumulator(cfg.resume->parent_path() / "accumulator.txt",
                                      heldout.size())) {
      acc.restore(std::move(saved->sums), saved->samples);
      seconds = saved->seconds;
    }
  }

  Driver driver;
  std::unique_ptr<DenseSampler> dense;
  std::unique_ptr<SparseSampler> sparse;
  std::optional<AssignmentState> cgs;
  Rng cgs_rng = make_stream(cfg.seed, Stream::kCgs);
  std::optional<ModelState> lmc;
  std::int64_t lmc_t = start;
  std::int64_t accepted = 0, proposed = 0;

  if (cfg.algorithm == "sgmc") {
    dense = std::make_unique<DenseSampler>(
        g, heldout, sc, resumed ? *resumed : init_state(hp, g.num_nodes(), cfg.seed), start);
    driver.step = [&] { dense->step(); };
    driver.absorb = [&](PerplexityAccumulator& a) {
      a.absorb_sample(dense->state().pi(), dense->state().beta(), hp.delta);
    };
    driver.snapshot = [&] { return dense->state(); };
  } else if (cfg.algorithm == "sgmc-m") {
    SparseModel init = resumed ? sparse_from_dense(*resumed, g, cfg.tau)
                               : init_sparse_model(hp, g, cfg.tau, cfg.seed);
    sparse = std::make_unique<SparseSampler>(g, heldout, sc, std::move(init), start);
    driver.step = [&] { sparse->step(); };
    driver.absorb = [&](PerplexityAccumulator& a) {
      const auto& model = sparse->model();
      a.absorb_sample([&](int node, std::span<double> out) { model.rows[node].densify_pi(out); },
                      cfg.K, beta_from_theta(model.theta), hp.delta);
    };
    driver.snapshot = [&] { return sparse->dense_state(); };
    driver.mem_ratio = [&]() -> std::optional<double> { return sparse->model().mean_memory_ratio(); };
    driver.max_mem_ratio = [&]() -> std::optional<double> {
      return sparse->model().max_memory_ratio();
    };
  } else if (cfg.algorithm == "cgs") {
    cgs = init_assignments(g, heldout, cfg.K, cgs_rng);
    driver.step = [&] { cgs_sweep(*cgs, hp, cgs_rng); };
    driver.absorb = [&](PerplexityAccumulator& a) {
      const auto est = cgs_estimate_params(*cgs, hp);
      a.absorb_sample(est.pi, est.beta, hp.delta);
    };
    driver.snapshot = [&] { return cgs_as_state(*cgs, hp); };
  } else {
    lmc = resumed ? *resumed : init_state(hp, g.num_nodes(), cfg.seed);
    driver.step = [&] {
      Rng rng = make_stream(cfg.seed, Stream::kLmc, static_cast<std::uint64_t>(lmc_t));
      const auto r = lmc_step(*lmc, g, heldout, hp, step_size(sc.schedule, lmc_t), rng);
      accepted += r.accepted ? 1 : 0;
      ++proposed;
      ++lmc_t;
    };
    driver.absorb = [&](PerplexityAccumulator& a) {
      a.absorb_sample(lmc->pi(), lmc->beta(), hp.delta);
    };
    driver.snapshot = [&] { return *lmc; };
    driver.accept_rate = [&]() -> std::optional<double> {
      return proposed ? std::optional<double>(static_cast<double>(accepted) / proposed)
                      : std::nullopt;
    };
  }

  ExperimentResult result;
  result.constant_rate_perplexity = constant_rate_perplexity(g, heldout);
  TraceWriter trace(cfg.out_dir / "trace.csv");
  double last_perplexity = std::nan("");
  for (std::int64_t it = start; it < cfg.max_iters; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    driver.step();
    seconds += elapsed_seconds(t0);
    const std::int64_t done = it + 1;
    if (done % cfg.eval_interval != 0 && done != cfg.max_iters) continue;

    double perplexity = 0.0;
    if (done > cfg.burn_in) {
      driver.absorb(acc);
      perplexity = acc.perplexity();
    } else {
      // Still burning in: report the current sample on its own.
      PerplexityAccumulator single(heldout);
      driver.absorb(single);
      perplexity = single.perplexity();
    }
    if (std::isinf(perplexity) && !std::isinf(last_perplexity)) {
      std::cerr << "warning: " << acc.zero_pairs()
                << " held-out pairs have zero predictive probability\n";
    }
    last_perplexity = perplexity;
    TraceRow row{done, cfg.record_wallclock ? std::optional<double>(seconds) : std::nullopt,
                 perplexity, driver.mem_ratio(), driver.accept_rate()};
    trace.write(row);
    result.trace.push_back(row);
  }

  result.iterations = cfg.max_iters;
  result.sampling_seconds = seconds;
  result.final_perplexity = acc.samples() > 0 ? acc.perplexity() : last_perplexity;
  result.mean_mem_ratio = driver.mem_ratio();
  result.max_mem_ratio = driver.max_mem_ratio();
  result.accept_rate = driver.accept_rate();

  {
    std::ofstream out(cfg.out_dir / "checkpoint.txt");
    if (!out) throw Error("cannot write checkpoint");
    const ModelState s = driver.snapshot();
    write_checkpoint(out, s.phi, s.theta, std::max<std::int64_t>(cfg.max_iters, start));
  }
  write_accumulator(cfg.out_dir / "accumulator.txt", acc, seconds);
  {
    std::ofstream out(cfg.out_dir / "summary.txt");
    if (!out) throw Error("cannot write summary");
    out << std::setprecision(10);
    out << "algorithm " << cfg.algorithm << '\n';
    out << "iterations " << result.iterations << '\n';
    out << "samples " << acc.samples() << '\n';
    out << "final_perplexity " << result.final_perplexity << '\n';
    out << "constant_rate_perplexity " << result.constant_rate_perplexity << '\n';
    out << "runtime_seconds " << result.sampling_seconds << '\n';
    if (result.mean_mem_ratio) {
      out << "mem_ratio_mean " << *result.mean_mem_ratio << '\n';
      out << "mem_ratio_max " << *result.max_mem_ratio << '\n';
    }
    if (result.accept_rate) out << "accept_rate " << *result.accept_rate << '\n';
  }
  return result;
}

const std::vector<std::string>& SynthConfig::keys() {
  static const std::vector<std::string> k = {"N",           "K",     "alpha", "eta",    "eta_link",
                                             "eta_nonlink", "delta", "seed",  "out_dir"};
  return k;
}

SynthConfig SynthConfig::from_map(const std::map<std::string, std::string>& kv,
                                  const fs::path& base_dir) {
  reject_unknown(kv, keys());
  SynthConfig c;
  if (kv.contains("eta") && (kv.contains("eta_link") || kv.contains("eta_nonlink"))) {
    throw Error("give either 'eta' or 'eta_link'/'eta_nonlink', not both");
  }
  read(kv, "N", c.N, number<int>());
  read(kv, "K", c.K, number<int>());
  read(kv, "alpha", c.alpha, number<double>());
  if (kv.contains("eta")) {
    read(kv, "eta", c.eta_link, number<double>());
    c.eta_nonlink = c.eta_link;
  }
  read(kv, "eta_link", c.eta_link, number<double>());
  read(kv, "eta_nonlink", c.eta_nonlink, number<double>());
  read(kv, "delta", c.delta, number<double>());
  read(kv, "seed", c.seed, number<std::uint64_t>());
  read(kv, "out_dir", c.out_dir,
       [&](const std::string&, const std::string& v) { return resolve(base_dir, v); });
  return c;
}

SynthConfig SynthConfig::load(const fs::path& path) {
  return from_map(read_key_values(path), path.parent_path());
}

SyntheticGraph make_synthetic(const SynthConfig& cfg) {
  Rng rng = make_stream(cfg.seed, Stream::kGenerator);
  auto data = generate_ammsb(cfg.N, cfg.K, cfg.alpha,
                             BetaPrior{cfg.eta_link, cfg.eta_nonlink}, cfg.delta, rng);
  fs::create_directories(cfg.out_dir);
  write_edge_list(data.graph, cfg.out_dir / "graph.txt");
  write_ground_truth(data.truth, cfg.out_dir / "ground_truth.txt");
  return data;
}

CheckpointEvaluation evaluate_checkpoint(const fs::path& checkpoint, const fs::path& dataset,
                                         double delta) {
  std::ifstream in(checkpoint);
  if (!in) throw Error("cannot read checkpoint " + checkpoint.string());
  const Checkpoint ck = read_checkpoint(in);
  const ModelState state{ck.phi, ck.theta};
  const int N = state.num_nodes();

  // Three columns per line means a held-out file, two an edge list.
  std::ifstream probe(dataset);
  if (!probe) throw Error("cannot read dataset " + dataset.string());
  std::string line;
  std::size_t columns = 0;
  while (std::getline(probe, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string token;
    while (fields >> token) ++columns;
    break;
  }

  std::vector<HeldOutPair> pairs;
  if (columns == 3) {
    pairs = read_heldout(N, dataset).test_pairs();
  } else {
    const auto load = load_edge_list(dataset);
    if (load.graph.num_nodes() != N) {
      throw Error("dataset has " + std::to_string(load.graph.num_nodes()) +
                  " nodes but the checkpoint has " + std::to_string(N));
    }
    for (int a = 0; a < N; ++a) {
      for (int b = a + 1; b < N; ++b) pairs.push_back({a, b, load.graph.has_link(a, b) ? 1 : 0});
    }
  }
  for (const auto& p : pairs) {
    if (p.a < 0 || p.b < 0 || p.a >= N || p.b >= N) {
      throw Error("pair (" + std::to_string(p.a) + ", " + std::to_string(p.b) +
                  ") is outside the checkpoint's " + std::to_string(N) + " nodes");
    }
  }
  PerplexityAccumulator acc(pairs);
  acc.absorb_sample(state.pi(), state.beta(), delta);
  return {acc.perplexity(), pairs.size()};
}

}  // namespace ammsb
