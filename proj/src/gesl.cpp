#include "stedit/gesl.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "text_util.hpp"

namespace stedit {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

// Scalar pieces h(a + b·δ) weighted by w, with h one of z², (z)_+², (z)_-².
enum class Piece { Square, Positive, Negative };

struct Term {
  double a, b, w;
  Piece kind;
};

double term_slope(const Term& t, double d) {
  const double z = t.a + t.b * d;
  const double h = t.kind == Piece::Square ? z : t.kind == Piece::Positive ? std::max(z, 0.0) : std::min(z, 0.0);
  return 2.0 * t.w * t.b * h;
}

double slope(double linear, const std::vector<Term>& terms, double d) {
  double s = linear;
  for (const auto& t : terms) s += term_slope(t, d);
  return s;
}

// Minimizes linear·δ + Σ w·h(a + bδ) over [lo, hi]. The derivative is
// piecewise linear and nondecreasing, so the root is found segment by segment.
double minimize_1d(double linear, const std::vector<Term>& terms, double lo, double hi) {
  if (!(lo < hi)) return lo;
  const double dlo = slope(linear, terms, lo);
  if (dlo >= 0.0) return lo;
  const double dhi = slope(linear, terms, hi);
  if (dhi <= 0.0) return hi;
  std::vector<double> breaks;
  for (const auto& t : terms)
    if (t.kind != Piece::Square && t.b != 0.0)
      if (const double bp = -t.a / t.b; bp > lo && bp < hi) breaks.push_back(bp);
  std::sort(breaks.begin(), breaks.end());
  breaks.push_back(hi);
  double left = lo, dl = dlo;
  for (double bp : breaks) {
    const double db = bp == hi ? dhi : slope(linear, terms, bp);
    if (db >= 0.0) {
      if (db == dl) return left;
      return std::clamp(left - dl * (bp - left) / (db - dl), left, bp);
    }
    left = bp;
    dl = db;
  }
  return hi;
}

// Per-pair constants of the hinge argument a + t·B2 + r·⟨C, N⟩.
struct PairTerms {
  double c, t, r;
};

PairTerms pair_terms(const GeslProblem& p, std::size_t k) {
  return p.same[k] ? PairTerms{0.0, -1.0, 1.0} : PairTerms{p.eta, 1.0, -1.0};
}

double inner_product(const GeslProblem& p, std::size_t k, const std::vector<double>& c) {
  double s = 0.0;
  for (const auto& e : p.counts[k]) s += c[e.index] * e.count;
  return s;
}

struct InnerState {
  std::vector<double> u;  // hinge multipliers
  std::vector<double> p;  // −(1/m) Σ u_k r_k N_k
};

void rebuild_p(const GeslProblem& prob, InnerState& s) {
  const double inv_m = 1.0 / static_cast<double>(prob.size());
  std::fill(s.p.begin(), s.p.end(), 0.0);
  for (std::size_t k = 0; k < prob.size(); ++k) {
    if (s.u[k] == 0.0) continue;
    const double r = pair_terms(prob, k).r;
    for (const auto& e : prob.counts[k]) s.p[e.index] -= s.u[k] * r * e.count * inv_m;
  }
}

std::vector<double> costs_from_p(const GeslProblem& prob, const std::vector<double>& p) {
  std::vector<double> c(p.size());
  for (std::size_t e = 0; e < p.size(); ++e) c[e] = std::max(p[e], 0.0) / (2.0 * prob.beta);
  return c;
}

double fixed_b2_objective(const GeslProblem& prob, const std::vector<double>& c, double b2) {
  double loss = 0.0;
  for (std::size_t k = 0; k < prob.size(); ++k) {
    const auto pt = pair_terms(prob, k);
    loss += std::max(pt.c + pt.t * b2 + pt.r * inner_product(prob, k, c), 0.0);
  }
  double sq = 0.0;
  for (double v : c) sq += v * v;
  return loss / static_cast<double>(prob.size()) + prob.beta * sq;
}

double dual_value(const GeslProblem& prob, const InnerState& s, double b2) {
  double lin = 0.0;
  for (std::size_t k = 0; k < prob.size(); ++k) {
    const auto pt = pair_terms(prob, k);
    lin += s.u[k] * (pt.c + pt.t * b2);
  }
  double sq = 0.0;
  for (double v : s.p) sq += std::max(v, 0.0) * std::max(v, 0.0);
  return lin / static_cast<double>(prob.size()) - sq / (4.0 * prob.beta);
}

struct InnerResult {
  double objective = 0.0;
  double gap = 0.0;
  long sweeps = 0;
  bool converged = false;
};

// Dual coordinate ascent for fixed B2; each multiplier is maximized exactly.
bool polish_inner(const GeslProblem& prob, double b2, InnerState& s, const GeslOptions& opt, InnerResult& res);

InnerResult solve_inner(const GeslProblem& prob, double b2, InnerState& s, const GeslOptions& opt) {
  const double inv_m = 1.0 / static_cast<double>(prob.size());
  const double w = 1.0 / (4.0 * prob.beta);
  std::vector<Term> terms;
  InnerResult res;
  for (long sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    for (std::size_t k = 0; k < prob.size(); ++k) {
      const auto pt = pair_terms(prob, k);
      const double a = pt.c + pt.t * b2;
      terms.clear();
      for (const auto& e : prob.counts[k]) terms.push_back({s.p[e.index], -pt.r * e.count * inv_m, w, Piece::Positive});
      const double d = minimize_1d(-a * inv_m, terms, -s.u[k], 1.0 - s.u[k]);
      if (d == 0.0) continue;
      s.u[k] = std::clamp(s.u[k] + d, 0.0, 1.0);
      for (std::size_t q = 0; q < terms.size(); ++q) s.p[prob.counts[k][q].index] += d * terms[q].b;
    }
    if (sweep % 16 == 0) rebuild_p(prob, s);
    res.sweeps = sweep;
    res.objective = fixed_b2_objective(prob, costs_from_p(prob, s.p), b2);
    res.gap = res.objective - dual_value(prob, s, b2);
    if (res.gap <= opt.gap_tol * std::max(1.0, std::abs(res.objective))) {
      res.converged = true;
      break;
    }
    if (sweep % 64 == 0 && polish_inner(prob, b2, s, opt, res)) break;
  }
  return res;
}

CostMatrix to_cost_matrix(std::size_t dim, const std::vector<double>& c) { return CostMatrix(dim, c); }

// min ‖g0 + A·z‖ over 0 ≤ z ≤ hi by the active-set method for bounded
// variables. Returns the attained norm.
double bounded_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& g0, const std::vector<double>& hi,
                             Eigen::VectorXd* solution = nullptr) {
  const Eigen::Index nv = a.cols();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(nv);
  std::vector<bool> free(static_cast<std::size_t>(nv), false);
  const double tol = 1e-15 * std::max(1.0, a.cwiseAbs().maxCoeff() * std::max(1.0, g0.cwiseAbs().maxCoeff()));
  const auto upper = [&](Eigen::Index j) { return hi[static_cast<std::size_t>(j)]; };

  for (Eigen::Index outer = 0; outer < 10 * nv + 50; ++outer) {
    const Eigen::VectorXd q = a.transpose() * (g0 + a * z);
    Eigen::Index pick = -1;
    double worst = tol;
    for (Eigen::Index j = 0; j < nv; ++j) {
      if (free[static_cast<std::size_t>(j)]) continue;
      const bool at_lo = z[j] <= 0.0;
      const double v = at_lo ? -q[j] : q[j];
      if (v > worst) {
        worst = v;
        pick = j;
      }
    }
    if (pick < 0) break;
    free[static_cast<std::size_t>(pick)] = true;

    for (Eigen::Index inner = 0; inner <= nv; ++inner) {
      std::vector<Eigen::Index> f;
      for (Eigen::Index j = 0; j < nv; ++j)
        if (free[static_cast<std::size_t>(j)]) f.push_back(j);
      if (f.empty()) break;
      Eigen::MatrixXd af(a.rows(), static_cast<Eigen::Index>(f.size()));
      Eigen::VectorXd rhs = -g0;
      for (Eigen::Index j = 0; j < nv; ++j)
        if (!free[static_cast<std::size_t>(j)]) rhs -= a.col(j) * z[j];
      for (std::size_t i = 0; i < f.size(); ++i) af.col(static_cast<Eigen::Index>(i)) = a.col(f[i]);
      const Eigen::VectorXd y = af.completeOrthogonalDecomposition().solve(rhs);

      double step = 1.0;
      Eigen::Index blocking = -1;
      for (std::size_t i = 0; i < f.size(); ++i) {
        const double from = z[f[i]], to = y[static_cast<Eigen::Index>(i)];
        double s = 1.0;
        if (to < 0.0) s = from / (from - to);
        else if (to > upper(f[i])) s = (upper(f[i]) - from) / (to - from);
        if (s < step) {
          step = std::max(s, 0.0);
          blocking = static_cast<Eigen::Index>(i);
        }
      }
      for (std::size_t i = 0; i < f.size(); ++i) z[f[i]] += step * (y[static_cast<Eigen::Index>(i)] - z[f[i]]);
      if (blocking < 0) break;
      // Pin every free variable that reached a bound.
      for (std::size_t i = 0; i < f.size(); ++i) {
        const Eigen::Index j = f[i];
        if (static_cast<Eigen::Index>(i) == blocking || z[j] <= 0.0 || z[j] >= upper(j)) {
          z[j] = z[j] <= upper(j) / 2 ? 0.0 : upper(j);
          free[static_cast<std::size_t>(j)] = false;
        }
      }
    }
  }
  if (solution) *solution = z;
  return (g0 + a * z).norm();
}

// min ½zᵀHz + gᵀz over lo ≤ z ≤ hi with H positive semi-definite, by a
// primal active-set method started from z. Zero-curvature directions of the
// free subspace are followed to the nearest bound.
bool box_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
            Eigen::VectorXd& z) {
  const Eigen::Index nv = z.size();
  z = z.cwiseMax(lo).cwiseMin(hi);
  std::vector<bool> fixed(static_cast<std::size_t>(nv));
  for (Eigen::Index j = 0; j < nv; ++j) fixed[static_cast<std::size_t>(j)] = z[j] <= lo[j] || z[j] >= hi[j];
  const double tol = 1e-15 * std::max({1.0, h.cwiseAbs().maxCoeff(), g.cwiseAbs().maxCoeff()});

  for (Eigen::Index iter = 0; iter < 20 * nv + 100; ++iter) {
    const Eigen::VectorXd grad = h * z + g;
    std::vector<Eigen::Index> f;
    for (Eigen::Index j = 0; j < nv; ++j)
      if (!fixed[static_cast<std::size_t>(j)]) f.push_back(j);
    const auto nf = static_cast<Eigen::Index>(f.size());
    Eigen::VectorXd d = Eigen::VectorXd::Zero(nv);
    bool bounded_step = true;
    if (nf > 0) {
      Eigen::MatrixXd hf(nf, nf);
      Eigen::VectorXd gf(nf);
      for (Eigen::Index i = 0; i < nf; ++i) {
        gf[i] = grad[f[static_cast<std::size_t>(i)]];
        for (Eigen::Index k = 0; k < nf; ++k) hf(i, k) = h(f[static_cast<std::size_t>(i)], f[static_cast<std::size_t>(k)]);
      }
      const auto cod = hf.completeOrthogonalDecomposition();
      Eigen::VectorXd df = cod.solve(-gf);
      const Eigen::VectorXd r = -gf - hf * df;
      if (r.norm() > tol) {
        // −gf has a part in the null space of hf: a descent ray of zero curvature.
        df = r;
        bounded_step = false;
      }
      for (Eigen::Index i = 0; i < nf; ++i) d[f[static_cast<std::size_t>(i)]] = df[i];
    }
    if (bounded_step && d.cwiseAbs().maxCoeff() <= tol) {
      // Stationary on the free set; release the worst bound with the wrong sign.
      Eigen::Index pick = -1;
      double worst = tol;
      for (Eigen::Index j = 0; j < nv; ++j) {
        if (!fixed[static_cast<std::size_t>(j)]) continue;
        const double v = z[j] <= lo[j] ? -grad[j] : grad[j];
        if (v > worst) worst = v, pick = j;
      }
      if (pick < 0) return true;
      fixed[static_cast<std::size_t>(pick)] = false;
      continue;
    }
    double step = bounded_step ? 1.0 : std::numeric_limits<double>::infinity();
    Eigen::Index blocking = -1;
    for (Eigen::Index j = 0; j < nv; ++j) {
      if (d[j] == 0.0) continue;
      const double room = d[j] < 0.0 ? (lo[j] - z[j]) / d[j] : (hi[j] - z[j]) / d[j];
      if (room < step) step = std::max(room, 0.0), blocking = j;
    }
    if (!std::isfinite(step)) return false;
    z += step * d;
    if (blocking >= 0) {
      z[blocking] = d[blocking] < 0.0 ? lo[blocking] : hi[blocking];
      fixed[static_cast<std::size_t>(blocking)] = true;
    }
  }
  return false;
}

// Exact solve of the fixed-B2 dual, warm-started from the coordinate-ascent
// iterate: max Σ u_k a_k/m − ‖Mu + ν‖²/(4β) over u ∈ [0,1], ν ≥ 0, where the
// columns of M are −(r_k/m)·N_k. Accepted only if the duality gap certifies it.
bool polish_inner(const GeslProblem& prob, double b2, InnerState& s, const GeslOptions& opt, InnerResult& res) {
  const auto m = static_cast<Eigen::Index>(prob.size()), n = static_cast<Eigen::Index>(s.p.size());
  const double inv_m = 1.0 / static_cast<double>(m);
  Eigen::MatrixXd mm = Eigen::MatrixXd::Zero(n, m);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m + n);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto pt = pair_terms(prob, static_cast<std::size_t>(k));
    g[k] = -(pt.c + pt.t * b2) * inv_m;
    for (const auto& e : prob.counts[static_cast<std::size_t>(k)])
      mm(static_cast<Eigen::Index>(e.index), k) -= pt.r * e.count * inv_m;
  }
  Eigen::MatrixXd full(n, m + n);
  full << mm, Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd h = full.transpose() * full / (2.0 * prob.beta);
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(m + n), hi(m + n);
  hi.head(m).setOnes();
  hi.tail(n).setConstant(std::numeric_limits<double>::infinity());
  Eigen::VectorXd z(m + n);
  for (Eigen::Index k = 0; k < m; ++k) z[k] = s.u[static_cast<std::size_t>(k)];
  for (Eigen::Index e = 0; e < n; ++e) z[m + e] = std::max(-s.p[static_cast<std::size_t>(e)], 0.0);
  if (!box_qp(h, g, lo, hi, z)) return false;

  InnerState trial{std::vector<double>(z.data(), z.data() + m), std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  rebuild_p(prob, trial);
  const double objective = fixed_b2_objective(prob, costs_from_p(prob, trial.p), b2);
  const double gap = objective - dual_value(prob, trial, b2);
  if (gap > opt.gap_tol * std::max(1.0, std::abs(objective))) return false;
  s = std::move(trial);
  res.objective = objective;
  res.gap = gap;
  res.converged = true;
  return true;
}

}  // namespace


double gamma_from_eta(double eta) {
  if (!(eta >= 0.0)) throw InvalidArgument("gamma_from_eta: η must be nonnegative");
  if (eta > 40.0) return 1.0;
  const double m = std::expm1(eta);
  return m / (m + 2.0);
}

double gesl_norm_bound(double eta, double beta) { return std::sqrt(std::max(eta, kLn2) / beta); }

PairSet make_pairs(PairStrategy strategy, std::span<const LabeledStr> sample, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("make_pairs: N must be positive");
  PairSet set;
  set.n_t = sample.size();
  set.n_l = 2 * n;
  set.strategy = strategy;
  set.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    std::vector<std::size_t> same, other;
    for (std::size_t j = 0; j < sample.size(); ++j) {
      if (j == i) continue;
      (sample[j].label == sample[i].label ? same : other).push_back(j);
    }
    if (same.size() < n)
      throw InvalidArgument("make_pairs: class '" + sample[i].label + "' has fewer than " + std::to_string(n) +
                            " partners for item " + std::to_string(i));
    if (other.size() < n)
      throw InvalidArgument("make_pairs: fewer than " + std::to_string(n) + " items outside class '" +
                            sample[i].label + "'");
    if (strategy == PairStrategy::Levenshtein) {
      std::vector<int> d(sample.size(), 0);
      for (std::size_t j = 0; j < sample.size(); ++j)
        if (j != i) d[j] = levenshtein(sample[i].str, sample[j].str);
      std::stable_sort(same.begin(), same.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
      std::stable_sort(other.begin(), other.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
    } else {
      for (auto* pool : {&same, &other})
        for (std::size_t q = 0; q < n; ++q) {
          std::uniform_int_distribution<std::size_t> pick(q, pool->size() - 1);
          std::swap((*pool)[q], (*pool)[pick(rng)]);
        }
    }
    for (std::size_t q = 0; q < n; ++q) set.entries.push_back({i, same[q], true});
    for (std::size_t q = 0; q < n; ++q) set.entries.push_back({i, other[q], false});
  }
  return set;
}

GeslProblem make_gesl_problem(const PairSet& pairs, std::span<const LabeledStr> sample, const GeslOptions& options) {
  if (pairs.entries.empty()) throw InvalidArgument("gesl: empty pair set");
  if (!(options.beta > 0.0)) throw InvalidArgument("gesl: β must be positive");
  if (!(options.eta >= 0.0)) throw InvalidArgument("gesl: η must be nonnegative");
  GeslProblem prob;
  prob.eta = options.eta;
  prob.beta = options.beta;
  const auto m = pairs.entries.size();
  prob.counts.resize(m);
  prob.same.resize(m);
  for (const auto& e : pairs.entries)
    if (e.i >= sample.size() || e.j >= sample.size()) throw InvalidArgument("gesl: pair index out of range");
  const AlphabetPtr& alphabet = sample[pairs.entries.front().i].str.alphabet();
  if (!alphabet) throw InvalidArgument("gesl: sample strings carry no alphabet");
  prob.dim = alphabet->dim();
  const auto dim = prob.dim;
  std::vector<std::exception_ptr> errors(m);
  const auto count = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(dynamic, 16) if (options.parallel)
  for (std::ptrdiff_t q = 0; q < count; ++q) {
    const auto k = static_cast<std::size_t>(q);
    try {
      const auto& e = pairs.entries[k];
      const auto script = levenshtein_script(sample[e.i].str, sample[e.j].str, options.tie);
      std::vector<double> dense(dim * dim, 0.0);
      for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < dim; ++b) {
          const double v = script(a, b);
          if (options.symmetric) {
            dense[a * dim + b] += 0.5 * v;
            dense[b * dim + a] += 0.5 * v;
          } else {
            dense[a * dim + b] += v;
          }
        }
      for (std::size_t idx = 0; idx < dense.size(); ++idx)
        if (dense[idx] != 0.0) prob.counts[k].push_back({idx, dense[idx]});
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
  for (std::size_t k = 0; k < m; ++k) prob.same[k] = pairs.entries[k].same_class;
  return prob;
}

double gesl_objective(const GeslProblem& problem, const CostMatrix& c, double b1, double b2) {
  if (c.dim() != problem.dim) throw DimensionMismatch("gesl_objective: cost matrix has the wrong size");
  const std::vector<double> v(c.values().begin(), c.values().end());
  double loss = 0.0;
  for (std::size_t k = 0; k < problem.size(); ++k) {
    const double e = inner_product(problem, k, v);
    loss += problem.same[k] ? std::max(e - b2, 0.0) : std::max(b1 - e, 0.0);
  }
  return loss / static_cast<double>(problem.size()) + problem.beta * c.frobenius_norm() * c.frobenius_norm();
}

GeslSolution gesl_fit(const GeslProblem& problem, const GeslOptions& options) {
  if (problem.size() == 0) throw InvalidArgument("gesl: empty pair set");
  if (!(problem.beta > 0.0)) throw InvalidArgument("gesl: β must be positive");
  InnerState state{std::vector<double>(problem.size(), 0.0), std::vector<double>(problem.dim * problem.dim, 0.0)};
  const double lo = std::max(0.0, kLn2 - problem.eta), hi = kLn2;

  GeslSolution sol;
  sol.b2_lower = lo;
  sol.b2_upper = hi;
  auto snapshot = [&](double b2, const InnerResult& r) {
    sol.b2 = b2;
    sol.b1 = problem.eta + b2;
    sol.costs = to_cost_matrix(problem.dim, costs_from_p(problem, state.p));
    sol.duality_gap = r.gap;
    sol.dual = state.u;
  };
  auto evaluate = [&](double b2) {
    const InnerResult r = solve_inner(problem, b2, state, options);
    sol.inner_sweeps += r.sweeps;
    if (!r.converged) {
      snapshot(b2, r);
      sol.objective = r.objective;
      throw GeslNonConvergence("gesl: inner solver did not reach the duality-gap tolerance (gap " +
                                   detail::format_double(r.gap) + ")",
                               sol);
    }
    return r.objective;
  };

  // The optimal value is convex in B2; golden-section search on the box.
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double best_b2 = lo, best_f = evaluate(lo);
  if (hi > lo) {
    if (const double fh = evaluate(hi); fh < best_f) best_b2 = hi, best_f = fh;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = evaluate(x1), f2 = evaluate(x2);
    while (b - a > options.b2_tol) {
      ++sol.outer_iterations;
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - phi * (b - a);
        f1 = evaluate(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi * (b - a);
        f2 = evaluate(x2);
      }
    }
    // Inner values are exact only up to the gap tolerance; an interior point
    // must beat the boxed end by more than that to be kept.
    const double slack = options.gap_tol * std::max(1.0, std::abs(best_f));
    for (auto [x, f] : {std::pair{x1, f1}, std::pair{x2, f2}})
      if (f < best_f - slack) best_b2 = x, best_f = f;
  }
  const InnerResult final_run = solve_inner(problem, best_b2, state, options);
  sol.inner_sweeps += final_run.sweeps;
  snapshot(best_b2, final_run);
  sol.objective = gesl_objective(problem, sol.costs, sol.b1, sol.b2);
  if (!final_run.converged) throw GeslNonConvergence("gesl: final inner solve did not converge", sol);
  const double bound = gesl_norm_bound(problem.eta, problem.beta);
  if (sol.costs.frobenius_norm() > bound * (1.0 + 1e-9))
    throw Error("gesl: ‖C‖_F = " + detail::format_double(sol.costs.frobenius_norm()) + " exceeds the bound " +
                detail::format_double(bound));
  return sol;
}

GeslSolution gesl_fit(const PairSet& pairs, std::span<const LabeledStr> sample, const GeslOptions& options) {
  return gesl_fit(make_gesl_problem(pairs, sample, options), options);
}

double gesl_optimality_residual(const GeslProblem& problem, const GeslSolution& sol) {
  const std::size_t m = problem.size(), n = problem.dim * problem.dim;
  const double inv_m = 1.0 / static_cast<double>(m);
  const std::vector<double> c(sol.costs.values().begin(), sol.costs.values().end());
  constexpr double kink_tol = 1e-8, bound_tol = 1e-12;
  const bool b2_free = sol.b2_upper - sol.b2_lower > bound_tol;
  const Eigen::Index rows = static_cast<Eigen::Index>(n + (b2_free ? 1 : 0));

  // Residual g0 + A·z over the multipliers of kink pairs (in [0, 1]) and the
  // normal-cone components of active bounds (in [0, ∞)).
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(rows);
  std::vector<Eigen::VectorXd> cols;
  std::vector<double> hi;
  for (std::size_t e = 0; e < n; ++e) g0[static_cast<Eigen::Index>(e)] = 2.0 * problem.beta * c[e];
  for (std::size_t k = 0; k < m; ++k) {
    const auto pt = pair_terms(problem, k);
    const double z = pt.c + pt.t * sol.b2 + pt.r * inner_product(problem, k, c);
    if (z < -kink_tol) continue;
    Eigen::VectorXd col = Eigen::VectorXd::Zero(rows);
    for (const auto& e : problem.counts[k]) col[static_cast<Eigen::Index>(e.index)] += pt.r * e.count * inv_m;
    if (b2_free) col[rows - 1] += pt.t * inv_m;
    if (z > kink_tol) {
      g0 += col;
    } else {
      cols.push_back(std::move(col));
      hi.push_back(1.0);
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double cost_tol = kink_tol * std::max(1.0, *std::max_element(c.begin(), c.end()));
  for (std::size_t e = 0; e < n; ++e)
    if (c[e] <= cost_tol) {
      cols.push_back(-Eigen::VectorXd::Unit(rows, static_cast<Eigen::Index>(e)));
      hi.push_back(inf);
    }
  if (b2_free) {
    if (sol.b2 - sol.b2_lower <= bound_tol) {
      cols.push_back(-Eigen::VectorXd::Unit(rows, rows - 1));
      hi.push_back(inf);
    } else if (sol.b2_upper - sol.b2 <= bound_tol) {
      cols.push_back(Eigen::VectorXd::Unit(rows, rows - 1));
      hi.push_back(inf);
    }
  }
  const auto nv = static_cast<Eigen::Index>(cols.size());
  if (nv == 0) return g0.norm();
  Eigen::MatrixXd a(rows, nv);
  for (Eigen::Index j = 0; j < nv; ++j) a.col(j) = cols[static_cast<std::size_t>(j)];
  return bounded_least_squares(a, g0, hi);
}

}  // namespace stedit
