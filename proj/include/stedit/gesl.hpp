#pragma once

// Good edit similarity learning with the hinge loss: pairing strategies and a
// solver for
//
//   min  1/|P| Σ_P ℓ(C, z_i, z_j) + β‖C‖²_F
//   s.t. C ≥ 0,  B1 ≥ ln 2,  0 ≤ B2 ≤ ln 2,  B1 − B2 = η
//
// with ℓ = [B1 − e_C]_+ on pairs of different labels and [e_C − B2]_+ on
// pairs with the same label.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stedit/sample.hpp"
#include "stedit/strings.hpp"

namespace stedit {

/// γ = (e^η − 1)/(e^η + 1), evaluated through expm1 so that γ(ln 3) is
/// exactly 1/2.
double gamma_from_eta(double eta);

enum class PairStrategy { Levenshtein, Random };

struct PairEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  bool same_class = false;

  bool operator==(const PairEntry&) const = default;
};

struct PairSet {
  std::vector<PairEntry> entries;
  std::size_t n_t = 0;  ///< anchors
  std::size_t n_l = 0;  ///< partners per anchor (2N)
  PairStrategy strategy = PairStrategy::Levenshtein;
  std::uint64_t seed = 0;

  double alpha() const { return n_t ? static_cast<double>(n_l) / static_cast<double>(n_t) : 0.0; }
};

/// For every anchor, N partners of its own class and N of other classes.
/// Levenshtein: nearest same-class and farthest other-class items (ties by
/// index). Random: seeded draws without replacement.
PairSet make_pairs(PairStrategy strategy, std::span<const LabeledStr> sample, std::size_t n, std::uint64_t seed = 0);

struct GeslOptions {
  double beta = 1.0;
  double eta = 1.0986122886681098;  ///< ln 3, i.e. γ = 1/2
  bool symmetric = false;           ///< constrain C = Cᵀ
  ScriptTieBreak tie = ScriptTieBreak::SubstituteDeleteInsert;
  /// Inner stop: duality gap ≤ gap_tol·max(1, objective).
  double gap_tol = 1e-13;
  long max_sweeps = 200000;
  /// Golden-section stop on the B2 interval width.
  double b2_tol = 1e-12;
  bool parallel = true;
};

/// Script counts, one sparse vector per pair, in the layout of CostMatrix.
struct GeslProblem {
  struct Entry {
    std::size_t index = 0;
    double count = 0.0;
  };
  std::size_t dim = 0;
  std::vector<std::vector<Entry>> counts;
  std::vector<bool> same;  ///< label agreement per pair
  double eta = 0.0;
  double beta = 1.0;

  std::size_t size() const noexcept { return same.size(); }
};

GeslProblem make_gesl_problem(const PairSet& pairs, std::span<const LabeledStr> sample, const GeslOptions& options);

/// The full objective at an arbitrary point (B1 and B2 taken as given).
double gesl_objective(const GeslProblem& problem, const CostMatrix& c, double b1, double b2);

struct GeslSolution {
  CostMatrix costs;
  double b1 = 0.0;
  double b2 = 0.0;
  double objective = 0.0;
  double duality_gap = 0.0;  ///< of the final inner problem
  int outer_iterations = 0;
  long inner_sweeps = 0;
  std::vector<double> dual;  ///< hinge multipliers in [0,1], one per pair
  double b2_lower = 0.0;
  double b2_upper = 0.0;
};

class GeslNonConvergence : public Error {
 public:
  GeslNonConvergence(const std::string& what, GeslSolution last) : Error(what), last_(std::move(last)) {}
  const GeslSolution& last_iterate() const noexcept { return last_; }

 private:
  GeslSolution last_;
};

GeslSolution gesl_fit(const GeslProblem& problem, const GeslOptions& options = {});
GeslSolution gesl_fit(const PairSet& pairs, std::span<const LabeledStr> sample, const GeslOptions& options = {});

/// Norm of the smallest projected subgradient of the objective at the
/// solution. Multipliers of pairs sitting on a hinge kink are re-optimized.
double gesl_optimality_residual(const GeslProblem& problem, const GeslSolution& solution);

/// √(max(η, ln 2)/β): no optimum has a larger Frobenius norm.
double gesl_norm_bound(double eta, double beta);

}  // namespace stedit
