#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the dynamic programs under test.

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "stedit/automata.hpp"
#include "stedit/gesl.hpp"
#include "stedit/sample.hpp"
#include "stedit/transducer.hpp"

namespace oracle {

using stedit::Str;
using stedit::Symbol;

// ---------------------------------------------------------------------------
// Edit scripts

enum class OpKind { Insert, Delete, Substitute };

struct Op {
  OpKind kind;
  std::size_t i;  // input position consumed (Delete, Substitute)
  std::size_t j;  // output position produced (Insert, Substitute)
};

/// Calls fn for every sequence of edit operations turning a length-m input
/// into a length-n output (all interleavings).
void for_each_script(std::size_t m, std::size_t n, const std::function<void(const std::vector<Op>&)>& fn);

struct ScriptPosterior {
  double prob = 0.0;           // p_e(x'|x)
  std::vector<double> delta;   // expected operation counts, (in, out) row-major
};

/// Sums every script's probability and accumulates posterior-weighted counts.
/// delta($|$) is 1 for the pair.
ScriptPosterior enumerate_scripts(const stedit::MemorylessTransducer& t, const Str& x, const Str& xp);

/// M-step written from the normalization formulas, without the row fallback.
std::vector<double> m_step(const std::vector<double>& delta, std::size_t dim);

// ---------------------------------------------------------------------------
// Output strings

/// p_e(s|x) for one s by the prefix recursion in the linear domain.
double string_prob(const stedit::MemorylessTransducer& t, const Str& x, const Str& s);

/// Distribution of the output length: entry k is P(|s| = k | x), k ≤ kmax.
std::vector<double> output_length_distribution(const stedit::MemorylessTransducer& t, const Str& x,
                                               std::size_t kmax);

struct KernelSum {
  double sum = 0.0;         // Σ_{|s| ≤ L} p(s|x)p(s|x')
  double tail_bound = 0.0;  // bound on the omitted part
  std::uint64_t strings = 0;
};

/// Depth-first enumeration of every output string up to length L.
KernelSum kernel_by_enumeration(const stedit::MemorylessTransducer& t, const Str& x, const Str& xp,
                                std::size_t max_len);

/// Every string over the alphabet with length ≤ max_len, shortest first.
std::vector<Str> all_strings(const stedit::AlphabetPtr& alphabet, std::size_t max_len);

/// Sum of weights over all accepting paths labelled s, by DFS.
double path_mass(const stedit::ConditionalAutomaton& a, const Str& s);
double path_mass(const stedit::IntersectionAutomaton& a, const Str& s);

// ---------------------------------------------------------------------------
// Convex programs

/// min ½xᵀQx + cᵀx  s.t.  Ax = b, Gx ≤ h.
struct Qp {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

struct QpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Dense primal-dual interior point method with Mehrotra correction.
QpResult solve_qp(const Qp& qp, double tol = 1e-11, int max_iter = 300);

/// GESL as a QP over (C, B1, B2, ξ) with explicit hinge slacks.
QpResult gesl_qp(const stedit::GeslProblem& problem);

/// Balcan's rule as an LP over (ξ, α⁺, α⁻).
QpResult balcan_lp(std::size_t n, std::size_t l, const std::vector<double>& k, const std::vector<int>& y,
                   double lambda);

// ---------------------------------------------------------------------------
// Misc

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::vector<double> jacobi_eigenvalues(std::size_t n, const std::vector<double>& a);

stedit::AlphabetPtr letters(std::size_t size);

/// Random normalized transducer with c($|$) drawn from [term_lo, term_hi].
stedit::MemorylessTransducer random_transducer(std::mt19937_64& rng, const stedit::AlphabetPtr& alphabet,
                                               double term_lo = 0.7, double term_hi = 0.95);

Str random_str(std::mt19937_64& rng, const stedit::AlphabetPtr& alphabet, std::size_t min_len, std::size_t max_len);

/// Deterministic copy transducer: c(a|a) = 1 for every a, c($|$) = 1.
stedit::MemorylessTransducer copy_transducer(const stedit::AlphabetPtr& alphabet);

// ---------------------------------------------------------------------------
// Synthetic classification task

/// Two classes over {a,b,c,d}. Each class has a prototype; the two prototypes
/// differ by swapping a few positions between the groups {a,b} and {c,d}.
/// Samples flip symbols to their partner (a<->b, c<->d) with probability
/// `flip` and carry occasional insertions and deletions.
struct SyntheticTask {
  stedit::AlphabetPtr alphabet;
  std::vector<stedit::LabeledStr> train;
  std::vector<stedit::LabeledStr> test;
};

SyntheticTask partner_noise_task(std::uint64_t seed, std::size_t n_train, std::size_t n_test, std::size_t length = 10,
                                 double flip = 0.3);

/// Up to `max_pairs` ordered same-class pairs (i != j), drawn without
/// replacement.
std::vector<stedit::StrPair> same_class_pairs(std::span<const stedit::LabeledStr> items, std::size_t max_pairs,
                                              std::uint64_t seed);

}  // namespace oracle
