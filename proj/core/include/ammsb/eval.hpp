#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ammsb/graph.hpp"
#include "ammsb/matrix.hpp"

namespace ammsb {

// Writes node a's membership vector into the span.
using RowFiller = std::function<void(int, std::span<double>)>;

/// Running sums of p(y_ab | pi_t, beta_t) over posterior samples, one per
/// held-out pair.  Probabilities are averaged first and logged afterwards.
class PerplexityAccumulator {
 public:
  explicit PerplexityAccumulator(std::vector<HeldOutPair> pairs);
  explicit PerplexityAccumulator(const HeldOutSplit& heldout)
      : PerplexityAccumulator(heldout.test_pairs()) {}

  /// One sample given directly as per-pair probabilities.
  void absorb(std::span<const double> probabilities);
  void absorb_sample(const Matrix& pi, std::span<const double> beta, double delta);
  /// Membership rows produced on demand, e.g. densified sparse rows.
  void absorb_sample(const RowFiller& rows, int K, std::span<const double> beta, double delta);

  /// Replaces the running sums, e.g. when resuming a run.
  void restore(std::vector<double> sums, std::size_t samples);

  std::size_t samples() const { return samples_; }
  const std::vector<double>& sums() const { return sums_; }
  const std::vector<HeldOutPair>& pairs() const { return pairs_; }
  std::vector<double> averages() const;
  /// Pairs whose average probability is exactly zero.
  std::size_t zero_pairs() const;

  /// exp(-mean log average).  +infinity when some average is zero; throws
  /// when nothing has been absorbed.
  double perplexity() const;

 private:
  std::vector<HeldOutPair> pairs_;
  std::vector<double> sums_;
  std::size_t samples_ = 0;
};

/// exp(-mean log p) for per-pair average probabilities.
double perplexity_from_averages(std::span<const double> averages);

/// Perplexity of predicting every held-out pair with the training link rate.
double constant_rate_perplexity(const Graph& training, const HeldOutSplit& heldout);

struct TraceRow {
  std::int64_t iteration = 0;
  std::optional<double> seconds;
  double perplexity = 0.0;
  std::optional<double> mem_ratio;
  std::optional<double> accept_rate;
};

/// CSV trace with header iter,seconds,perplexity,mem_ratio,accept_rate.
/// Inapplicable columns are left empty; numbers use the shortest form that
/// round-trips.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path, bool append = false);
  void write(const TraceRow& row);

 private:
  std::ofstream out_;
};

std::string format_double(double v);

}  // namespace ammsb
