#pragma once

// Reference (dis)similarities and the k-nearest-neighbor classifier.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stedit/sample.hpp"
#include "stedit/transducer.hpp"

namespace stedit {

enum class Orientation { Similarity, Dissimilarity };

struct SimilarityHandle {
  std::string name;
  std::function<double(const Str&, const Str&)> evaluate;
  Orientation orientation = Orientation::Similarity;

  double operator()(const Str& a, const Str& b) const { return evaluate(a, b); }
};

/// exp(t/2 · (log p_e(x'|x) + log p_e(x|x'))). Returns 0 when either
/// probability is 0 and sets *zero_probability if given.
double k_lj(const MemorylessTransducer& t, double tpow, const Str& x, const Str& xp,
            bool* zero_probability = nullptr);

/// ½(d(x,x0)² + d(x0,x')² − d(x,x')²) with d = Levenshtein distance.
double k_nb(const Str& x0, const Str& x, const Str& xp);

/// Which conditional d_e uses when comparing a query with a training item.
enum class DeDirection {
  TrainGivenQuery,  ///< -log p_e(train | query), the default
  QueryGivenTrain,  ///< -log p_e(query | train)
};

SimilarityHandle levenshtein_measure();
/// The handle's arguments are (query, train item).
SimilarityHandle edit_dissimilarity_measure(MemorylessTransducer t, DeDirection direction = DeDirection::TrainGivenQuery);
SimilarityHandle edit_kernel_measure(MemorylessTransducer t);
SimilarityHandle k_lj_measure(MemorylessTransducer t, double tpow);
SimilarityHandle k_nb_measure(Str zero_string);
SimilarityHandle cost_similarity_measure(CostMatrix c);

/// Indices of the k nearest training items, nearest first. Equal scores keep
/// training order.
std::vector<std::size_t> nearest_neighbors(const SimilarityHandle& measure, std::span<const LabeledStr> train,
                                           std::size_t k, const Str& query, bool parallel = false);

/// Majority label among the k nearest; vote ties go to the label that appears
/// first in the training set.
std::string knn_classify(const SimilarityHandle& measure, std::span<const LabeledStr> train, std::size_t k,
                         const Str& query, bool parallel = false);

/// Classifies every query, one query per thread when `parallel`.
std::vector<std::string> knn_classify_batch_serial(const SimilarityHandle& measure, std::span<const LabeledStr> train,
                                                   std::size_t k, std::span<const Str> queries);
std::vector<std::string> knn_classify_batch(const SimilarityHandle& measure, std::span<const LabeledStr> train,
                                            std::size_t k, std::span<const Str> queries);

}  // namespace stedit
