#include "stedit/goodness.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "text_util.hpp"

namespace stedit {

double SimilarityNormalizer::operator()(double raw) const { return std::clamp((raw - mean) / sd, -1.0, 1.0); }

SimilarityNormalizer fit_similarity_normalizer(std::span<const double> raw) {
  if (raw.size() < 2) throw InvalidArgument("similarity normalization needs at least two scores");
  const double n = static_cast<double>(raw.size());
  const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / n;
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  var /= n;
  if (!(var > 0.0)) throw InvalidArgument("degenerate similarity: calibration scores have zero variance");
  return {mean, std::sqrt(var)};
}

SimilarityHandle normalized_similarity(SimilarityHandle raw, SimilarityNormalizer normalizer) {
  const std::string name = raw.name + "-z";
  return {name, [raw = std::move(raw), normalizer](const Str& a, const Str& b) { return normalizer(raw(a, b)); },
          Orientation::Similarity};
}

SimilarityHandle cosine_normalized(SimilarityHandle raw) {
  const std::string name = raw.name + "-cos";
  return {name,
          [raw = std::move(raw)](const Str& a, const Str& b) {
            const double aa = raw(a, a), bb = raw(b, b);
            if (!(aa > 0.0) || !(bb > 0.0)) return 0.0;
            return raw(a, b) / std::sqrt(aa * bb);
          },
          Orientation::Similarity};
}

std::vector<double> goodness_margins(std::size_t n, std::span<const double> k, std::span<const std::string> labels,
                                     std::span<const std::size_t> reasonable) {
  if (n == 0) throw InvalidArgument("goodness: empty sample");
  if (k.size() != n * n || labels.size() != n) throw DimensionMismatch("goodness: similarity/label size mismatch");
  std::vector<std::size_t> r(reasonable.begin(), reasonable.end());
  if (r.empty()) {
    r.resize(n);
    std::iota(r.begin(), r.end(), std::size_t{0});
  }
  for (std::size_t j : r)
    if (j >= n) throw InvalidArgument("goodness: reasonable index out of range");
  std::vector<double> margins(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j : r) s += (labels[i] == labels[j] ? 1.0 : -1.0) * k[i * n + j];
    margins[i] = s / static_cast<double>(r.size());
  }
  return margins;
}

GoodnessCurve estimate_goodness_curve(std::size_t n, std::span<const double> k, std::span<const std::string> labels,
                                      std::span<const double> gammas, std::span<const std::size_t> reasonable) {
  GoodnessCurve curve;
  curve.margins = goodness_margins(n, k, labels, reasonable);
  curve.gammas.assign(gammas.begin(), gammas.end());
  std::sort(curve.gammas.begin(), curve.gammas.end());
  auto sorted = curve.margins;
  std::sort(sorted.begin(), sorted.end());
  for (double g : curve.gammas) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), g) - sorted.begin();
    curve.epsilons.push_back(static_cast<double>(below) / static_cast<double>(n));
  }
  return curve;
}

std::vector<double> gamma_grid(double lo, double hi, std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {lo};
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return g;
}

void save_goodness_curve(std::ostream& out, const GoodnessCurve& curve) {
  out << "gamma,epsilon\n";
  for (std::size_t i = 0; i < curve.gammas.size(); ++i)
    out << detail::format_double(curve.gammas[i]) << ',' << detail::format_double(curve.epsilons[i]) << '\n';
}

namespace {

void check_lp_input(std::size_t n, std::size_t l, std::span<const double> k, std::span<const int> y) {
  if (n == 0 || l == 0) throw InvalidArgument("linear program needs at least one example and one landmark");
  if (k.size() != n * l) throw DimensionMismatch("similarity matrix must be n×L");
  if (y.size() != n) throw DimensionMismatch("one label per example required");
  for (int v : y)
    if (v != 1 && v != -1) throw InvalidArgument("labels must be +1 or -1");
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense tableau for  min cᵀx  s.t.  A x = b, x ≥ 0, with a known feasible basis.
class Simplex {
 public:
  Simplex(RowMatrix a, Eigen::VectorXd b, Eigen::VectorXd c, std::vector<Eigen::Index> basis)
      : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), basis_(std::move(basis)) {
    in_basis_.assign(static_cast<std::size_t>(a_.cols()), 0);
    for (auto j : basis_) in_basis_[static_cast<std::size_t>(j)] = 1;
    scale_ = std::max(1.0, c_.cwiseAbs().maxCoeff());
    for (Eigen::Index j = 0; j < a_.cols(); ++j) scale_ = std::max(scale_, a_.col(j).cwiseAbs().sum());
    refactor();
  }

  // Returns false when the pivot limit is hit.
  bool run(long max_pivots) {
    const double rc_tol = 1e-12 * scale_;
    int degenerate = 0;
    bool bland = false;
    int confirmations = 0;
    while (pivots_ < max_pivots) {
      if (pivots_ > 0 && pivots_ % 64 == 0) refactor();
      Eigen::Index enter = -1;
      double best = -rc_tol;
      for (Eigen::Index j = 0; j < a_.cols(); ++j) {
        if (in_basis_[static_cast<std::size_t>(j)] || rc_(j) >= -rc_tol) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (rc_(j) < best) best = rc_(j), enter = j;
      }
      if (enter < 0) {
        // Confirm optimality on a freshly factored basis.
        if (confirmations++ > 3) return true;
        refactor();
        bool improvable = false;
        for (Eigen::Index j = 0; j < a_.cols() && !improvable; ++j)
          improvable = !in_basis_[static_cast<std::size_t>(j)] && rc_(j) < -rc_tol;
        if (!improvable) return true;
        continue;
      }
      Eigen::Index leave = -1;
      double ratio = 0.0;
      for (Eigen::Index i = 0; i < t_.rows(); ++i) {
        const double tie = t_(i, enter);
        if (tie <= 1e-11) continue;
        const double q = std::max(rhs_(i), 0.0) / tie;
        if (leave < 0 || q < ratio || (q == ratio && basis_[static_cast<std::size_t>(i)] <
                                                         basis_[static_cast<std::size_t>(leave)]))
          leave = i, ratio = q;
      }
      if (leave < 0) throw Error("linear program is unbounded");
      if (ratio <= 1e-14) {
        if (++degenerate > 50) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
      pivot(leave, enter);
      ++pivots_;
    }
    return false;
  }

  Eigen::VectorXd solution() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(a_.cols());
    for (std::size_t i = 0; i < basis_.size(); ++i) x(basis_[i]) = std::max(rhs_(static_cast<Eigen::Index>(i)), 0.0);
    return x;
  }
  long pivots() const { return pivots_; }

 private:
  void refactor() {
    const Eigen::Index m = a_.rows();
    Eigen::MatrixXd basis_matrix(m, m);
    Eigen::VectorXd cb(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      basis_matrix.col(i) = a_.col(basis_[static_cast<std::size_t>(i)]);
      cb(i) = c_(basis_[static_cast<std::size_t>(i)]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis_matrix);
    t_ = lu.solve(Eigen::MatrixXd(a_));
    rhs_ = lu.solve(b_);
    Eigen::PartialPivLU<Eigen::MatrixXd> lut(basis_matrix.transpose());
    const Eigen::VectorXd dual = lut.solve(cb);
    rc_ = c_ - a_.transpose() * dual;
    for (auto j : basis_) rc_(j) = 0.0;
  }

  void pivot(Eigen::Index r, Eigen::Index e) {
    const double p = t_(r, e);
    t_.row(r) /= p;
    rhs_(r) /= p;
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, e);
      if (f == 0.0) continue;
      t_.row(i) -= f * t_.row(r);
      rhs_(i) -= f * rhs_(r);
    }
    const double f = rc_(e);
    rc_ -= f * t_.row(r).transpose();
    rc_(e) = 0.0;
    in_basis_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)])] = 0;
    basis_[static_cast<std::size_t>(r)] = e;
    in_basis_[static_cast<std::size_t>(e)] = 1;
  }

  RowMatrix a_;
  Eigen::VectorXd b_, c_;
  std::vector<Eigen::Index> basis_;
  std::vector<char> in_basis_;
  RowMatrix t_;
  Eigen::VectorXd rhs_, rc_;
  double scale_ = 1.0;
  long pivots_ = 0;
};

}  // namespace

double balcan_objective(std::size_t n, std::size_t l, std::span<const double> k, std::span<const int> y,
                        std::span<const double> alpha, double lambda) {
  check_lp_input(n, l, k, y);
  if (alpha.size() != l) throw DimensionMismatch("one weight per landmark required");
  double obj = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < l; ++j) m += alpha[j] * k[i * l + j];
    obj += std::max(0.0, 1.0 - y[i] * m);
  }
  for (double a : alpha) obj += lambda * std::abs(a);
  return obj;
}

double balcan_lambda_threshold(std::size_t n, std::size_t l, std::span<const double> k, std::span<const int> y) {
  check_lp_input(n, l, k, y);
  double best = 0.0;
  for (std::size_t j = 0; j < l; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += y[i] * k[i * l + j];
    best = std::max(best, std::abs(s));
  }
  return best;
}

BalcanSolution balcan_solve(std::size_t n, std::size_t l, std::span<const double> k, std::span<const int> y,
                            double lambda, const BalcanOptions& options) {
  check_lp_input(n, l, k, y);
  if (!(lambda >= 0.0)) throw InvalidArgument("λ must be nonnegative");
  // Rescale so the largest |K| is 1: α = s·α', λ' = λ·s.
  double kmax = 0.0;
  for (double v : k) kmax = std::max(kmax, std::abs(v));
  const double s = kmax > 0.0 ? 1.0 / kmax : 1.0;

  // Columns: ξ (n), p (l), q (l), surplus (n);  ξ_i + A(p − q) − s_i = 1.
  const auto ni = static_cast<Eigen::Index>(n), li = static_cast<Eigen::Index>(l);
  const Eigen::Index cols = 2 * ni + 2 * li;
  RowMatrix a = RowMatrix::Zero(ni, cols);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(cols);
  for (Eigen::Index i = 0; i < ni; ++i) {
    a(i, i) = 1.0;
    a(i, ni + 2 * li + i) = -1.0;
    c(i) = 1.0;
    for (Eigen::Index j = 0; j < li; ++j) {
      const double v = y[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(i * li + j)] * s;
      a(i, ni + j) = v;
      a(i, ni + li + j) = -v;
    }
  }
  for (Eigen::Index j = 0; j < 2 * li; ++j) c(ni + j) = lambda * s;
  std::vector<Eigen::Index> basis(n);
  std::iota(basis.begin(), basis.end(), Eigen::Index{0});

  Simplex lp(std::move(a), Eigen::VectorXd::Ones(ni), std::move(c), std::move(basis));
  const bool ok = lp.run(options.max_pivots);
  const Eigen::VectorXd x = lp.solution();
  BalcanSolution sol;
  sol.alpha.resize(l);
  for (Eigen::Index j = 0; j < li; ++j) sol.alpha[static_cast<std::size_t>(j)] = s * (x(ni + j) - x(ni + li + j));
  sol.objective = balcan_objective(n, l, k, y, sol.alpha, lambda);
  sol.pivots = lp.pivots();
  if (!ok) throw BalcanSolverError("linear program: pivot limit reached", sol);
  return sol;
}

std::size_t SparseLinearModel::sparsity() const {
  return static_cast<std::size_t>(std::count_if(alpha.begin(), alpha.end(), [](double a) { return a != 0.0; }));
}

std::vector<double> similarity_matrix(const SimilarityHandle& sim, std::span<const LabeledStr> items,
                                      std::span<const LabeledStr> landmarks, bool parallel) {
  const std::size_t n = items.size(), l = landmarks.size();
  std::vector<double> k(n * l);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (std::ptrdiff_t q = 0; q < count; ++q) {
    const auto i = static_cast<std::size_t>(q);
    try {
      for (std::size_t j = 0; j < l; ++j) k[i * l + j] = sim(items[i].str, landmarks[j].str);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return k;
}

namespace {

SparseLinearModel fit_from_matrix(std::span<const double> k, std::size_t l, std::span<const int> y,
                                  std::span<const LabeledStr> landmarks, double lambda, const std::string& similarity,
                                  const BalcanOptions& options) {
  const auto sol = balcan_solve(y.size(), l, k, y, lambda, options);
  SparseLinearModel m;
  m.alpha = sol.alpha;
  m.lambda = lambda;
  m.similarity = similarity;
  m.objective = sol.objective;
  for (std::size_t j = 0; j < l; ++j) {
    m.landmarks.push_back(landmarks[j].str);
    m.landmark_indices.push_back(j);
  }
  return m;
}

std::span<const LabeledStr> default_landmarks(std::span<const LabeledStr> train, std::span<const LabeledStr> lm) {
  return lm.empty() ? train : lm;
}

}  // namespace

SparseLinearModel balcan_fit(const SimilarityHandle& sim, std::span<const LabeledStr> train,
                             std::span<const LabeledStr> landmarks, const std::string& positive, double lambda,
                             const BalcanOptions& options) {
  landmarks = default_landmarks(train, landmarks);
  const auto k = similarity_matrix(sim, train, landmarks);
  std::vector<int> y(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) y[i] = train[i].label == positive ? 1 : -1;
  auto m = fit_from_matrix(k, landmarks.size(), y, landmarks, lambda, sim.name, options);
  m.positive = positive;
  return m;
}

LinearPrediction linear_predict(const SparseLinearModel& model, const SimilarityHandle& sim, const Str& query) {
  LinearPrediction p;
  for (std::size_t j = 0; j < model.alpha.size(); ++j)
    if (model.alpha[j] != 0.0) p.margin += model.alpha[j] * sim(query, model.landmarks[j]);
  p.label = p.margin >= 0.0 ? 1 : -1;
  return p;
}

MulticlassModel fit_multiclass(MulticlassStrategy strategy, const SimilarityHandle& sim,
                               std::span<const LabeledStr> train, std::span<const LabeledStr> landmarks, double lambda,
                               const BalcanOptions& options) {
  landmarks = default_landmarks(train, landmarks);
  MulticlassModel mc;
  mc.strategy = strategy;
  mc.classes = label_order(train);
  if (mc.classes.size() < 2) throw InvalidArgument("multiclass fit needs at least two classes");
  const std::size_t l = landmarks.size();
  const auto k = similarity_matrix(sim, train, landmarks);

  struct Task {
    std::string positive, negative;
  };
  std::vector<Task> tasks;
  if (strategy == MulticlassStrategy::OneVsAll) {
    // With two classes the second problem is the first with y negated, whose
    // solution is −α; reuse it so both models agree exactly.
    const std::size_t fits = mc.classes.size() == 2 ? 1 : mc.classes.size();
    for (std::size_t c = 0; c < fits; ++c) tasks.push_back({mc.classes[c], ""});
  } else {
    for (std::size_t a = 0; a < mc.classes.size(); ++a)
      for (std::size_t b = a + 1; b < mc.classes.size(); ++b) tasks.push_back({mc.classes[a], mc.classes[b]});
  }
  mc.models.resize(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  const auto count = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t q = 0; q < count; ++q) {
    const auto t = static_cast<std::size_t>(q);
    try {
      std::vector<double> rows;
      std::vector<int> y;
      for (std::size_t i = 0; i < train.size(); ++i) {
        const bool pos = train[i].label == tasks[t].positive;
        if (!tasks[t].negative.empty() && !pos && train[i].label != tasks[t].negative) continue;
        y.push_back(pos ? 1 : -1);
        rows.insert(rows.end(), k.begin() + static_cast<std::ptrdiff_t>(i * l),
                    k.begin() + static_cast<std::ptrdiff_t>((i + 1) * l));
      }
      auto m = fit_from_matrix(rows, l, y, landmarks, lambda, sim.name, options);
      m.positive = tasks[t].positive;
      m.negative = tasks[t].negative;
      mc.models[t] = std::move(m);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (strategy == MulticlassStrategy::OneVsAll && mc.classes.size() == 2) {
    auto second = mc.models[0];
    for (double& a : second.alpha) a = -a;
    for (double& a : second.alpha)
      if (a == 0.0) a = 0.0;  // drop negative zeros
    second.positive = mc.classes[1];
    mc.models.push_back(std::move(second));
  }
  return mc;
}

std::string predict_multiclass(const MulticlassModel& model, const SimilarityHandle& sim, const Str& query) {
  if (model.models.empty()) throw InvalidArgument("multiclass model has no binary models");
  const auto class_index = [&](const std::string& label) {
    const auto it = std::find(model.classes.begin(), model.classes.end(), label);
    if (it == model.classes.end()) throw InvalidArgument("model refers to unknown class '" + label + "'");
    return static_cast<std::size_t>(it - model.classes.begin());
  };
  if (model.strategy == MulticlassStrategy::OneVsAll) {
    std::size_t best = 0;
    double best_margin = -std::numeric_limits<double>::infinity();
    bool first = true;
    for (const auto& m : model.models) {
      const double margin = linear_predict(m, sim, query).margin;
      const std::size_t c = class_index(m.positive);
      if (first || margin > best_margin || (margin == best_margin && c < best)) best = c, best_margin = margin;
      first = false;
    }
    return model.classes[best];
  }
  std::vector<int> votes(model.classes.size(), 0);
  std::vector<double> total(model.classes.size(), 0.0);
  for (const auto& m : model.models) {
    const auto p = linear_predict(m, sim, query);
    const std::size_t a = class_index(m.positive), b = class_index(m.negative);
    ++votes[p.label > 0 ? a : b];
    total[a] += p.margin;
    total[b] -= p.margin;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c)
    if (votes[c] > votes[best] || (votes[c] == votes[best] && total[c] > total[best])) best = c;
  return model.classes[best];
}

std::string strategy_name(MulticlassStrategy s) { return s == MulticlassStrategy::OneVsAll ? "ova" : "ovo"; }

void save_multiclass(std::ostream& out, const MulticlassModel& model) {
  if (model.models.empty()) throw InvalidArgument("cannot save an empty model");
  for (const auto& c : model.classes)
    if (c.find_first_of(",\n") != std::string::npos) throw InvalidArgument("label '" + c + "' contains a comma");
  const auto& first = model.models.front();
  out << format_metadata({{"strategy", strategy_name(model.strategy)},
                          {"lambda", detail::format_double(first.lambda)},
                          {"similarity", first.similarity}})
      << '\n';
  out << "model,positive,negative,landmark_index,landmark,alpha\n";
  for (std::size_t m = 0; m < model.models.size(); ++m) {
    const auto& lm = model.models[m];
    for (std::size_t j = 0; j < lm.alpha.size(); ++j)
      out << m << ',' << lm.positive << ',' << lm.negative << ',' << lm.landmark_indices[j] << ','
          << lm.landmarks[j].to_string() << ',' << detail::format_double(lm.alpha[j]) << '\n';
  }
  if (!out) throw Error("model write failed");
}

MulticlassModel load_multiclass(std::istream& in, const AlphabetPtr& alphabet) {
  MulticlassModel mc;
  Metadata meta;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (meta.empty()) meta = parse_metadata(t);
      continue;
    }
    if (!header) {
      if (t != "model,positive,negative,landmark_index,landmark,alpha")
        throw ParseError("unexpected model header", line_no);
      header = true;
      continue;
    }
    const auto cells = detail::split(line, ',');
    if (cells.size() != 6) throw ParseError("expected 6 cells", line_no);
    const auto m = static_cast<std::size_t>(detail::parse_long(cells[0], line_no));
    if (m > mc.models.size()) throw ParseError("model ids must be consecutive", line_no);
    if (m == mc.models.size()) {
      mc.models.emplace_back();
      mc.models.back().positive = cells[1];
      mc.models.back().negative = cells[2];
      for (const auto& label : {cells[1], cells[2]})
        if (!label.empty() && std::find(mc.classes.begin(), mc.classes.end(), label) == mc.classes.end())
          mc.classes.push_back(label);
    }
    auto& lm = mc.models[m];
    lm.landmark_indices.push_back(static_cast<std::size_t>(detail::parse_long(cells[3], line_no)));
    lm.landmarks.push_back(parse_str(alphabet, cells[4]));
    lm.alpha.push_back(detail::parse_double(cells[5], line_no));
  }
  if (!header) throw ParseError("missing model header", line_no);
  const auto strategy = metadata_value(meta, "strategy").value_or("ova");
  if (strategy != "ova" && strategy != "ovo") throw ParseError("unknown strategy '" + strategy + "'", 1);
  mc.strategy = strategy == "ova" ? MulticlassStrategy::OneVsAll : MulticlassStrategy::OneVsOne;
  const double lambda = detail::parse_double(metadata_value(meta, "lambda").value_or("0"), 1);
  const auto similarity = metadata_value(meta, "similarity").value_or("");
  for (auto& lm : mc.models) {
    lm.lambda = lambda;
    lm.similarity = similarity;
  }
  return mc;
}

}  // namespace stedit
