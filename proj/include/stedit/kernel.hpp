#pragma once

// Marginalized edit kernel K_e(x,x') = Σ_s p_e(s|x)·p_e(s|x'), its landmark
// approximation, Gram matrices, PSD checks and export.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stedit/automata.hpp"
#include "stedit/transducer.hpp"

namespace stedit {

class ModelDegeneracy : public Error {
 public:
  using Error::Error;
};

/// A kernel evaluation failed inside a batch; carries the offending pair.
class KernelPairError : public Error {
 public:
  KernelPairError(const std::string& what, std::size_t i, std::size_t j) : Error(what), i_(i), j_(j) {}
  std::size_t i() const noexcept { return i_; }
  std::size_t j() const noexcept { return j_; }

 private:
  std::size_t i_, j_;
};

/// Solves (I - M) v = ρ by back-substitution in reverse state order.
std::vector<double> solve_geometric(const SummedIntersection& a);

double kernel_exact(const MemorylessTransducer& t, const Str& x, const Str& xp);

/// Σ over landmarks s of p_e(s|x)·p_e(s|x').
double kernel_approx(const MemorylessTransducer& t, const Str& x, const Str& xp, std::span<const Str> landmarks);

enum class GramMode { Exact, Approximate, Baseline };

struct GramMatrix {
  std::size_t n = 0;
  std::vector<double> values;  ///< row-major n×n
  std::vector<Str> strings;
  GramMode mode = GramMode::Exact;
  std::size_t landmark_count = 0;  ///< approximate mode only
  std::string baseline;            ///< baseline mode only
  bool normalized = false;

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
};

struct GramOptions {
  GramMode mode = GramMode::Exact;
  std::vector<Str> landmarks;  ///< required for approximate mode
  bool normalize = false;
};

/// Reference implementation, one pair at a time.
GramMatrix gram_serial(const MemorylessTransducer& t, std::span<const Str> xs, const GramOptions& options = {});
/// OpenMP over upper-triangle pairs; output is position-addressed and
/// identical to gram_serial.
GramMatrix gram(const MemorylessTransducer& t, std::span<const Str> xs, const GramOptions& options = {});

/// Gram matrix of an arbitrary symmetric similarity (baseline mode).
GramMatrix gram_baseline(std::span<const Str> xs, const std::string& name,
                         const std::function<double(const Str&, const Str&)>& similarity, bool normalize = false,
                         bool parallel = true);

/// K(i,j) / sqrt(K(i,i)·K(j,j)); entries touching a nonpositive diagonal become 0.
void normalize_gram(GramMatrix& g);

struct PsdReport {
  bool ok = false;
  double lambda_min = 0.0;
  double trace = 0.0;
};

/// Passes when λ_min ≥ -tol·|trace|. Asymmetry beyond 1e-12 is an error.
PsdReport check_psd(const GramMatrix& g, double tol = 1e-8);
PsdReport check_psd(std::size_t n, std::span<const double> values, double tol = 1e-8);

enum class GramFormat { PrecomputedKernel, Csv };

std::string mode_name(const GramMatrix& g);

/// Precomputed-kernel lines: "<label> 0:<row> 1:<K(i,1)> ..." with 17
/// significant digits. CSV: metadata line, header of item indices, rows.
void export_gram(std::ostream& out, const GramMatrix& g, std::span<const std::string> labels, GramFormat format);
void export_gram(const std::filesystem::path& path, const GramMatrix& g, std::span<const std::string> labels,
                 GramFormat format);

/// Reads the CSV export back. Strings are not stored, so `strings` is empty.
GramMatrix read_gram_csv(std::istream& in);
/// Reads a precomputed-kernel export; labels are appended to `labels`.
GramMatrix read_gram_precomputed(std::istream& in, std::vector<std::string>* labels = nullptr);

}  // namespace stedit
