#pragma once

// (ε,γ)-goodness curves, similarity standardization, the L1-regularized
// hinge-loss linear program over similarity landmarks, and multiclass
// wrappers.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stedit/baselines.hpp"
#include "stedit/sample.hpp"

namespace stedit {

/// z-score with population standard deviation, then clipped to [-1, 1].
struct SimilarityNormalizer {
  double mean = 0.0;
  double sd = 1.0;

  double operator()(double raw) const;
};

/// Throws InvalidArgument when the calibration scores have zero variance.
SimilarityNormalizer fit_similarity_normalizer(std::span<const double> raw);
SimilarityHandle normalized_similarity(SimilarityHandle raw, SimilarityNormalizer normalizer);

/// Cosine-normalized similarity K(a,b)/sqrt(K(a,a)·K(b,b)), 0 when either
/// self-similarity is nonpositive.
SimilarityHandle cosine_normalized(SimilarityHandle raw);

struct GoodnessCurve {
  std::vector<double> gammas;
  std::vector<double> epsilons;
  double tau = 1.0;
  std::vector<double> margins;  ///< per example
};

/// Margin of example i: mean over the reasonable set R of s_ij·K(i,j), with
/// s_ij = +1 for equal labels and -1 otherwise. Empty R means every example.
std::vector<double> goodness_margins(std::size_t n, std::span<const double> k, std::span<const std::string> labels,
                                     std::span<const std::size_t> reasonable = {});

/// ε(γ) = fraction of examples whose margin is below γ.
GoodnessCurve estimate_goodness_curve(std::size_t n, std::span<const double> k, std::span<const std::string> labels,
                                      std::span<const double> gammas, std::span<const std::size_t> reasonable = {});

/// `count` evenly spaced values in [lo, hi].
std::vector<double> gamma_grid(double lo, double hi, std::size_t count);

/// "gamma,epsilon" rows.
void save_goodness_curve(std::ostream& out, const GoodnessCurve& curve);

// L1-regularized hinge loss over landmarks:
//   min_α Σ_i [1 − y_i Σ_j α_j K(x_i, l_j)]_+ + λ‖α‖_1
// `k` is the n×L row-major matrix K(x_i, l_j); labels are ±1.

double balcan_objective(std::size_t n, std::size_t l, std::span<const double> k, std::span<const int> y,
                        std::span<const double> alpha, double lambda);

/// Smallest λ for which α = 0 is optimal: max_j |Σ_i y_i K(x_i, l_j)|.
double balcan_lambda_threshold(std::size_t n, std::size_t l, std::span<const double> k, std::span<const int> y);

struct BalcanOptions {
  long max_pivots = 200000;
};

struct BalcanSolution {
  std::vector<double> alpha;
  double objective = 0.0;
  long pivots = 0;
};

class BalcanSolverError : public Error {
 public:
  BalcanSolverError(const std::string& what, BalcanSolution last) : Error(what), last_(std::move(last)) {}
  const BalcanSolution& last_iterate() const noexcept { return last_; }

 private:
  BalcanSolution last_;
};

/// Exact solution of the linear program by primal simplex.
BalcanSolution balcan_solve(std::size_t n, std::size_t l, std::span<const double> k, std::span<const int> y,
                            double lambda, const BalcanOptions& options = {});

struct SparseLinearModel {
  std::vector<double> alpha;
  std::vector<Str> landmarks;
  std::vector<std::size_t> landmark_indices;
  double lambda = 0.0;
  std::string similarity;
  std::string positive;  ///< label predicted for a nonnegative margin
  std::string negative;  ///< empty for "everything else"
  double objective = 0.0;

  std::size_t sparsity() const;
};

struct LinearPrediction {
  double margin = 0.0;
  int label = 1;  ///< sign of the margin, with 0 mapped to +1
};

/// K(x_i, l_j) for every training item and landmark.
std::vector<double> similarity_matrix(const SimilarityHandle& sim, std::span<const LabeledStr> items,
                                      std::span<const LabeledStr> landmarks, bool parallel = true);

/// Binary fit; items labelled `positive` get y = +1, all others y = -1.
SparseLinearModel balcan_fit(const SimilarityHandle& sim, std::span<const LabeledStr> train,
                             std::span<const LabeledStr> landmarks, const std::string& positive, double lambda,
                             const BalcanOptions& options = {});

LinearPrediction linear_predict(const SparseLinearModel& model, const SimilarityHandle& sim, const Str& query);

enum class MulticlassStrategy { OneVsAll, OneVsOne };

struct MulticlassModel {
  MulticlassStrategy strategy = MulticlassStrategy::OneVsAll;
  std::vector<std::string> classes;  ///< label order of the training set
  std::vector<SparseLinearModel> models;
};

/// Landmarks default to the training set when `landmarks` is empty.
MulticlassModel fit_multiclass(MulticlassStrategy strategy, const SimilarityHandle& sim,
                               std::span<const LabeledStr> train, std::span<const LabeledStr> landmarks, double lambda,
                               const BalcanOptions& options = {});

/// One-vs-all: largest margin, ties to the earliest class. One-vs-one:
/// most votes, ties by total margin and then by class order.
std::string predict_multiclass(const MulticlassModel& model, const SimilarityHandle& sim, const Str& query);

/// CSV "model,positive,negative,landmark_index,landmark,alpha" with a
/// metadata line holding strategy, lambda and similarity.
void save_multiclass(std::ostream& out, const MulticlassModel& model);
MulticlassModel load_multiclass(std::istream& in, const AlphabetPtr& alphabet);

std::string strategy_name(MulticlassStrategy s);

}  // namespace stedit
