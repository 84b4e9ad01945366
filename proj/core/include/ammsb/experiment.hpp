#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ammsb/eval.hpp"
#include "ammsb/graph.hpp"

namespace ammsb {

/// Flat "key = value" file.  '#' starts a comment; blank lines are skipped;
/// a repeated key is an error.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

struct ExperimentConfig {
  std::filesystem::path dataset;
  std::string algorithm = "sgmc";  // sgmc | sgmc-m | cgs | lmc
  int K = 0;
  std::optional<double> alpha;     // 1/K when unset
  double eta = 1.0;
  double delta = 1e-7;
  double tau = 0.9;
  double kappa = 0.5;
  double tau0 = 1024.0;
  std::optional<double> fixed_step;
  std::optional<int> m;            // round(N / 50) when unset
  int n1 = 10;
  int n0 = 10;
  double heldout_fraction = 0.01;
  std::int64_t max_iters = 1000;
  std::int64_t eval_interval = 10;
  std::int64_t burn_in = 0;
  std::uint64_t seed = 0;
  std::optional<double> global_update_fraction;
  int threads = 1;
  std::filesystem::path out_dir = ".";
  std::optional<std::filesystem::path> resume;
  bool record_wallclock = true;
  std::string local_sampling = "stratified";  // stratified | uniform
  int bulk_batch = 32;

  static const std::vector<std::string>& keys();
  /// Relative paths resolve against `base_dir`.  Unknown keys throw with the
  /// list of valid ones.
  static ExperimentConfig from_map(const std::map<std::string, std::string>& kv,
                                   const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
};

struct ExperimentResult {
  std::vector<TraceRow> trace;
  double final_perplexity = 0.0;
  double constant_rate_perplexity = 0.0;
  double sampling_seconds = 0.0;
  std::optional<double> mean_mem_ratio;
  std::optional<double> max_mem_ratio;
  std::optional<double> accept_rate;
  std::int64_t iterations = 0;
};

/// Loads the dataset, holds out pairs, runs the sampler and writes
/// trace.csv, checkpoint.txt, heldout.txt, accumulator.txt and summary.txt
/// into out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SynthConfig {
  int N = 75;
  int K = 4;
  // Mostly single-community members; density depends on K, eta and delta
  // only, not on alpha.
  double alpha = 0.05;
  double eta_link = 9.0;
  double eta_nonlink = 1.0;
  double delta = 0.1;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";

  static const std::vector<std::string>& keys();
  static SynthConfig from_map(const std::map<std::string, std::string>& kv,
                              const std::filesystem::path& base_dir);
  static SynthConfig load(const std::filesystem::path& path);
};

/// Generates the graph and writes graph.txt and ground_truth.txt.
SyntheticGraph make_synthetic(const SynthConfig& cfg);

struct CheckpointEvaluation {
  double perplexity = 0.0;
  std::size_t pairs = 0;
};

/// Perplexity of a checkpoint's point estimate.  `dataset` is either a
/// held-out file ("a b y" lines) or an edge list, in which case every pair of
/// the graph is scored.
CheckpointEvaluation evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                         const std::filesystem::path& dataset, double delta);

}  // namespace ammsb
