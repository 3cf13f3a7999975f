#include "stedit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include "stedit/kernel.hpp"

namespace stedit {

double k_lj(const MemorylessTransducer& t, double tpow, const Str& x, const Str& xp, bool* zero_probability) {
  if (!(tpow > 0.0)) throw InvalidArgument("k_lj: t must be positive");
  const double a = log_cond_prob(t, x, xp);
  const double b = log_cond_prob(t, xp, x);
  const bool zero = std::isinf(a) || std::isinf(b);
  if (zero_probability) *zero_probability = zero;
  if (zero) return 0.0;
  return std::exp(0.5 * tpow * (a + b));
}

double k_nb(const Str& x0, const Str& x, const Str& xp) {
  const double a = levenshtein(x, x0);
  const double b = levenshtein(x0, xp);
  const double c = levenshtein(x, xp);
  return 0.5 * (a * a + b * b - c * c);
}

SimilarityHandle levenshtein_measure() {
  return {"lev", [](const Str& a, const Str& b) { return static_cast<double>(levenshtein(a, b)); },
          Orientation::Dissimilarity};
}

SimilarityHandle edit_dissimilarity_measure(MemorylessTransducer t, DeDirection direction) {
  if (direction == DeDirection::TrainGivenQuery)
    return {"de", [t = std::move(t)](const Str& q, const Str& item) { return edit_dissimilarity(t, q, item); },
            Orientation::Dissimilarity};
  return {"de-reverse", [t = std::move(t)](const Str& q, const Str& item) { return edit_dissimilarity(t, item, q); },
          Orientation::Dissimilarity};
}

SimilarityHandle edit_kernel_measure(MemorylessTransducer t) {
  return {"ke", [t = std::move(t)](const Str& a, const Str& b) { return kernel_exact(t, a, b); },
          Orientation::Similarity};
}

SimilarityHandle k_lj_measure(MemorylessTransducer t, double tpow) {
  return {"klj", [t = std::move(t), tpow](const Str& a, const Str& b) { return k_lj(t, tpow, a, b); },
          Orientation::Similarity};
}

SimilarityHandle k_nb_measure(Str zero_string) {
  return {"knb", [x0 = std::move(zero_string)](const Str& a, const Str& b) { return k_nb(x0, a, b); },
          Orientation::Similarity};
}

SimilarityHandle cost_similarity_measure(CostMatrix c) {
  return {"kc", [c = std::move(c)](const Str& a, const Str& b) { return edit_similarity(c, a, b); },
          Orientation::Similarity};
}

std::vector<std::size_t> nearest_neighbors(const SimilarityHandle& measure, std::span<const LabeledStr> train,
                                           std::size_t k, const Str& query, bool parallel) {
  if (train.empty()) throw InvalidArgument("knn: empty training set");
  if (k == 0 || k > train.size())
    throw InvalidArgument("knn: k must be in [1, " + std::to_string(train.size()) + "]");
  const auto n = static_cast<std::ptrdiff_t>(train.size());
  std::vector<double> key(train.size());
  std::vector<std::exception_ptr> errors(train.size());
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      const double v = measure(query, train[u].str);
      double kv = measure.orientation == Orientation::Dissimilarity ? v : -v;
      if (std::isnan(kv)) kv = std::numeric_limits<double>::infinity();
      key[u] = kv;
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return key[a] < key[b] || (key[a] == key[b] && a < b); });
  idx.resize(k);
  return idx;
}

std::string knn_classify(const SimilarityHandle& measure, std::span<const LabeledStr> train, std::size_t k,
                         const Str& query, bool parallel) {
  const auto nn = nearest_neighbors(measure, train, k, query, parallel);
  const auto order = label_order(train);
  std::vector<std::size_t> votes(order.size(), 0);
  for (std::size_t i : nn)
    votes[static_cast<std::size_t>(std::find(order.begin(), order.end(), train[i].label) - order.begin())]++;
  // max_element returns the first maximum, i.e. the earliest label.
  return order[static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin())];
}

std::vector<std::string> knn_classify_batch_serial(const SimilarityHandle& measure, std::span<const LabeledStr> train,
                                                   std::size_t k, std::span<const Str> queries) {
  std::vector<std::string> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(knn_classify(measure, train, k, q));
  return out;
}

std::vector<std::string> knn_classify_batch(const SimilarityHandle& measure, std::span<const LabeledStr> train,
                                            std::size_t k, std::span<const Str> queries) {
  std::vector<std::string> out(queries.size());
  std::vector<std::exception_ptr> errors(queries.size());
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      out[u] = knn_classify(measure, train, k, queries[u]);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace stedit
