#include "ammsb/eval.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "ammsb/error.hpp"
#include "ammsb/kernels.hpp"

namespace ammsb {

PerplexityAccumulator::PerplexityAccumulator(std::vector<HeldOutPair> pairs)
    : pairs_(std::move(pairs)), sums_(pairs_.size(), 0.0) {}

void PerplexityAccumulator::absorb(std::span<const double> probabilities) {
  if (probabilities.size() != pairs_.size()) {
    throw Error("sample has " + std::to_string(probabilities.size()) + " probabilities for " +
                std::to_string(pairs_.size()) + " held-out pairs");
  }
  for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += probabilities[i];
  ++samples_;
}

void PerplexityAccumulator::absorb_sample(const Matrix& pi, std::span<const double> beta,
                                          double delta) {
  std::vector<double> p(pairs_.size());
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& q = pairs_[i];
    p[i] = pair_likelihood(PairContext{q.y, pi.row(q.a), pi.row(q.b), beta, delta});
  }
  absorb(p);
}

void PerplexityAccumulator::absorb_sample(const RowFiller& rows, int K,
                                          std::span<const double> beta, double delta) {
  std::vector<double> pi_a(K), pi_b(K), p(pairs_.size());
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& q = pairs_[i];
    rows(q.a, pi_a);
    rows(q.b, pi_b);
    p[i] = pair_likelihood(PairContext{q.y, pi_a, pi_b, beta, delta});
  }
  absorb(p);
}

void PerplexityAccumulator::restore(std::vector<double> sums, std::size_t samples) {
  if (sums.size() != pairs_.size()) throw Error("restored sums do not match the held-out pairs");
  sums_ = std::move(sums);
  samples_ = samples;
}

std::vector<double> PerplexityAccumulator::averages() const {
  std::vector<double> out(sums_.size());
  for (std::size_t i = 0; i < sums_.size(); ++i) out[i] = sums_[i] / static_cast<double>(samples_);
  return out;
}

std::size_t PerplexityAccumulator::zero_pairs() const {
  std::size_t n = 0;
  for (double s : sums_) n += s == 0.0 ? 1 : 0;
  return n;
}

double PerplexityAccumulator::perplexity() const {
  if (samples_ == 0) throw Error("perplexity requested before any sample was absorbed");
  return perplexity_from_averages(averages());
}

double perplexity_from_averages(std::span<const double> averages) {
  if (averages.empty()) throw Error("perplexity needs at least one held-out pair");
  double log_sum = 0.0;
  for (double p : averages) {
    if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
    log_sum += std::log(p);
  }
  return std::exp(-log_sum / static_cast<double>(averages.size()));
}

double constant_rate_perplexity(const Graph& training, const HeldOutSplit& heldout) {
  const double pairs = static_cast<double>(training.num_pairs()) - static_cast<double>(heldout.size());
  const double rate = static_cast<double>(training.num_links()) / pairs;
  std::vector<double> p;
  p.reserve(heldout.size());
  for (const auto& q : heldout.test_pairs()) p.push_back(bernoulli(rate, q.y));
  return perplexity_from_averages(p);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

TraceWriter::TraceWriter(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw Error("cannot write trace file " + path.string());
  if (!append) out_ << "iter,seconds,perplexity,mem_ratio,accept_rate\n";
}

void TraceWriter::write(const TraceRow& row) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out_ << row.iteration << ',' << opt(row.seconds) << ',' << format_double(row.perplexity) << ','
       << opt(row.mem_ratio) << ',' << opt(row.accept_rate) << '\n';
  out_.flush();
}

}  // namespace ammsb
