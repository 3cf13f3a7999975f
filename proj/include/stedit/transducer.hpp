#pragma once

// Memoryless conditional edit transducer: the table c(b|a), forward/backward
// dynamic programs, p_e(x'|x), d_e and EM training.

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stedit/strings.hpp"

namespace stedit {

class DegeneratePair : public Error {
 public:
  DegeneratePair(const std::string& what, std::size_t pair_index)
      : Error(what), pair_index_(pair_index) {}
  std::size_t pair_index() const noexcept { return pair_index_; }

 private:
  std::size_t pair_index_;
};

/// c(out|in) over (Σ∪{$})². Row `in` = 0 holds insertions c(b|$) and the
/// termination probability c($|$); column `out` = 0 holds deletions c($|a).
class MemorylessTransducer {
 public:
  MemorylessTransducer() = default;
  explicit MemorylessTransducer(AlphabetPtr alphabet);
  MemorylessTransducer(AlphabetPtr alphabet, std::vector<double> row_major);

  const AlphabetPtr& alphabet() const noexcept { return alphabet_; }
  std::size_t dim() const noexcept { return dim_; }

  /// c(out | in).
  double& operator()(Symbol in, Symbol out) { return c_[idx(in, out)]; }
  double operator()(Symbol in, Symbol out) const { return c_[idx(in, out)]; }

  double termination() const { return c_[0]; }
  std::span<const double> values() const noexcept { return c_; }

 private:
  std::size_t idx(Symbol in, Symbol out) const {
    return static_cast<std::size_t>(in) * dim_ + static_cast<std::size_t>(out);
  }

  AlphabetPtr alphabet_;
  std::size_t dim_ = 0;
  std::vector<double> c_;
};

struct ValidationReport {
  bool ok = true;
  /// One human-readable entry per violated constraint, with its residual.
  std::vector<std::string> violations;
  /// Largest absolute normalization residual over all constraints.
  double max_residual = 0.0;
};

ValidationReport validate(const MemorylessTransducer& t, double tol = 1e-9);

/// Largest |1 - Σ| over the |Σ|+1 normalization constraints.
double normalization_residual(const MemorylessTransducer& t);

/// Both constraints hold exactly; mass is spread uniformly inside each.
MemorylessTransducer uniform_init(AlphabetPtr alphabet);

/// (|x|+1)×(|x'|+1) table of log-domain forward or backward values.
struct DpTable {
  std::size_t rows = 0, cols = 0;
  std::vector<double> log_values;
  /// log p_e(x'|x)
  double log_prob = -std::numeric_limits<double>::infinity();

  double at(std::size_t i, std::size_t j) const { return log_values[i * cols + j]; }
};

/// α(i,j): log-mass of turning x[0,i) into x'[0,j).
DpTable forward(const MemorylessTransducer& t, const Str& x, const Str& xp);
/// β(i,j): log-mass of turning x[i,|x|) into x'[j,|x'|).
DpTable backward(const MemorylessTransducer& t, const Str& x, const Str& xp);

/// p_e(x'|x) = c($|$)·α(x'|x).
double cond_prob(const MemorylessTransducer& t, const Str& x, const Str& xp);
double log_cond_prob(const MemorylessTransducer& t, const Str& x, const Str& xp);

/// d_e(x, x') = -log p_e(x'|x); +inf when p_e underflows to 0.
double edit_dissimilarity(const MemorylessTransducer& t, const Str& x, const Str& xp);

struct StrPair {
  Str input;
  Str output;
};

/// E-step output: the auxiliary table δ indexed (in, out), row-major.
struct ExpectedCounts {
  std::size_t dim = 0;
  std::vector<double> delta;
  double mean_loglik = 0.0;

  double operator()(Symbol in, Symbol out) const {
    return delta[static_cast<std::size_t>(in) * dim + static_cast<std::size_t>(out)];
  }
};

/// Reference E-step, single-threaded.
ExpectedCounts expected_counts_serial(const MemorylessTransducer& t, std::span<const StrPair> pairs);
/// OpenMP E-step. Pairs are reduced in fixed-size chunks in index order, so
/// the result is bit-identical to the serial reference for any thread count.
ExpectedCounts expected_counts(const MemorylessTransducer& t, std::span<const StrPair> pairs);

/// M-step. `smoothing` is added to every δ cell first. Inputs symbols with no
/// expected mass keep the shape of their row in `previous`.
MemorylessTransducer maximize(const ExpectedCounts& counts, const MemorylessTransducer& previous,
                              double smoothing);

struct EmOptions {
  int max_iter = 200;
  /// Stop once the mean log-likelihood improves by less than this.
  double tol = 1e-6;
  double smoothing = 1e-9;
  bool parallel = true;
};

struct EmReport {
  int iterations = 0;
  /// Mean log p_e over the pairs: entry 0 for the initial model, entry k
  /// after the k-th M-step.
  std::vector<double> loglik_trace;
  /// normalization_residual after each M-step.
  std::vector<double> residual_trace;
  bool converged = false;
};

struct EmResult {
  MemorylessTransducer model;
  EmReport report;
};

EmResult em_fit(std::span<const StrPair> pairs, const MemorylessTransducer& init,
                const EmOptions& options = {});

/// CSV: "# alphabet=... smoothing=..." line, header ",$,a,b,...", then one
/// row per input symbol: "<in>,c($|in),c(a|in),...".
void save_transducer(std::ostream& out, const MemorylessTransducer& t, const Metadata& meta = {});
struct LoadedTransducer {
  MemorylessTransducer model;
  Metadata meta;
};
LoadedTransducer load_transducer(std::istream& in);

/// "iteration,mean_loglik" rows.
void save_em_report(std::ostream& out, const EmReport& report);

}  // namespace stedit
