#pragma once

// Conditional automaton A|x (output language of a transducer driven by x),
// ε-elimination, intersection of two such automata and per-string mass.

#include <iosfwd>
#include <vector>

#include "stedit/transducer.hpp"

namespace stedit {

struct Arc {
  std::size_t from = 0;
  std::size_t to = 0;
  Symbol label = kGap;  ///< kGap marks an ε arc
  double weight = 0.0;
};

/// States 0..|x| (prefix length consumed). Initial weight 1 at state 0.
/// Weights are stored densely as [from][to][label] with label 0 = ε.
class ConditionalAutomaton {
 public:
  ConditionalAutomaton() = default;
  ConditionalAutomaton(AlphabetPtr alphabet, std::size_t n_states);

  std::size_t n_states() const noexcept { return n_; }
  std::size_t dim() const noexcept { return dim_; }
  const AlphabetPtr& alphabet() const noexcept { return alphabet_; }

  double weight(std::size_t from, std::size_t to, Symbol label) const { return w_[idx(from, to, label)]; }
  double& weight(std::size_t from, std::size_t to, Symbol label) { return w_[idx(from, to, label)]; }
  /// Weights of all labels on from→to, indexed by symbol (ε first).
  const double* labels(std::size_t from, std::size_t to) const { return &w_[idx(from, to, kGap)]; }
  double final_weight(std::size_t s) const { return rho_[s]; }
  double& final_weight(std::size_t s) { return rho_[s]; }
  const std::vector<double>& final_weights() const noexcept { return rho_; }

  bool epsilon_free() const;
  /// Nonzero arcs in (from, to, label) order.
  std::vector<Arc> arcs() const;

 private:
  std::size_t idx(std::size_t from, std::size_t to, Symbol label) const {
    return (from * n_ + to) * dim_ + static_cast<std::size_t>(label);
  }

  AlphabetPtr alphabet_;
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> w_;
  std::vector<double> rho_;
};

/// A|x before ε-elimination: insertion self-loops c(b|$), substitution arcs
/// i→i+1 with c(b|x_{i+1}), one ε arc i→i+1 with c($|x_{i+1}), and
/// ρ(|x|) = c($|$).
ConditionalAutomaton build_conditional_automaton(const MemorylessTransducer& t, const Str& x);

/// Removes ε arcs by forward closure; every output string keeps its mass.
ConditionalAutomaton epsilon_eliminate(const ConditionalAutomaton& a);

/// Summed weight of all accepting paths labelled s (ε arcs allowed).
double string_mass(const ConditionalAutomaton& a, const Str& s);

/// Product automaton over states (i, j), ordered lexicographically, so every
/// transition matrix is upper triangular.
class IntersectionAutomaton {
 public:
  IntersectionAutomaton() = default;
  IntersectionAutomaton(AlphabetPtr alphabet, std::size_t rows, std::size_t cols);

  std::size_t n_states() const noexcept { return rows_ * cols_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t state(std::size_t i, std::size_t j) const noexcept { return i * cols_ + j; }
  const AlphabetPtr& alphabet() const noexcept { return alphabet_; }

  const std::vector<double>& initial() const noexcept { return tau_; }
  const std::vector<double>& final_weights() const noexcept { return rho_; }
  std::vector<double>& final_weights() noexcept { return rho_; }

  /// Row-major n×n matrix M_b for symbol b ∈ 1..|Σ|.
  const std::vector<double>& transitions(Symbol b) const { return m_[static_cast<std::size_t>(b) - 1]; }
  std::vector<double>& transitions(Symbol b) { return m_[static_cast<std::size_t>(b) - 1]; }

  /// M = Σ_b M_b.
  std::vector<double> transition_sum() const;

 private:
  AlphabetPtr alphabet_;
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> tau_;
  std::vector<double> rho_;
  std::vector<std::vector<double>> m_;
};

/// Synchronous product of two ε-free conditional automata.
IntersectionAutomaton intersect(const ConditionalAutomaton& a, const ConditionalAutomaton& b);

/// Only M = Σ_b M_b and ρ of the product, without the per-symbol matrices.
struct SummedIntersection {
  std::size_t rows = 0, cols = 0;
  std::vector<double> m;    ///< row-major n×n, upper triangular
  std::vector<double> rho;  ///< τ is the unit vector at state (0,0)
  std::size_t n_states() const noexcept { return rows * cols; }
};
SummedIntersection intersect_summed(const ConditionalAutomaton& a, const ConditionalAutomaton& b);

/// τᵀ M_{s1} ··· M_{st} ρ.
double string_mass(const IntersectionAutomaton& a, const Str& s);

/// Text arc list: "tau", "arc <from> <to> <symbol> <weight>" and "rho" lines.
void write_arc_list(std::ostream& out, const ConditionalAutomaton& a);
void write_arc_list(std::ostream& out, const IntersectionAutomaton& a);

}  // namespace stedit
