#include "stedit/automata.hpp"

#include <ostream>

#include "text_util.hpp"

namespace stedit {

ConditionalAutomaton::ConditionalAutomaton(AlphabetPtr alphabet, std::size_t n_states)
    : alphabet_(std::move(alphabet)),
      n_(n_states),
      dim_(alphabet_->dim()),
      w_(n_ * n_ * dim_, 0.0),
      rho_(n_, 0.0) {}

bool ConditionalAutomaton::epsilon_free() const {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      if (weight(i, j, kGap) != 0.0) return false;
  return true;
}

std::vector<Arc> ConditionalAutomaton::arcs() const {
  std::vector<Arc> out;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t b = 0; b < dim_; ++b)
        if (const double w = weight(i, j, static_cast<Symbol>(b)); w != 0.0)
          out.push_back({i, j, static_cast<Symbol>(b), w});
  return out;
}

ConditionalAutomaton build_conditional_automaton(const MemorylessTransducer& t, const Str& x) {
  require_alphabet(*t.alphabet(), x);
  const std::size_t n = x.size() + 1;
  ConditionalAutomaton a(t.alphabet(), n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 1; b < a.dim(); ++b) a.weight(i, i, static_cast<Symbol>(b)) = t(kGap, static_cast<Symbol>(b));
    if (i + 1 < n) {
      const Symbol xi = x[i];
      for (std::size_t b = 1; b < a.dim(); ++b) a.weight(i, i + 1, static_cast<Symbol>(b)) = t(xi, static_cast<Symbol>(b));
      a.weight(i, i + 1, kGap) = t(xi, kGap);
    }
  }
  a.final_weight(n - 1) = t.termination();
  return a;
}

ConditionalAutomaton epsilon_eliminate(const ConditionalAutomaton& a) {
  const std::size_t n = a.n_states();
  // closure(i, u): product of ε weights on i→i+1→...→u
  std::vector<double> closure(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    closure[i * n + i] = 1.0;
    for (std::size_t u = i + 1; u < n; ++u) closure[i * n + u] = closure[i * n + u - 1] * a.weight(u - 1, u, kGap);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (a.weight(i, j, kGap) != 0.0 && j != i + 1)
        throw InvalidArgument("epsilon_eliminate expects ε arcs only between consecutive states");

  ConditionalAutomaton out(a.alphabet(), n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t u = i; u < n; ++u) {
      const double e = closure[i * n + u];
      if (e == 0.0) continue;
      for (std::size_t v = u; v < n; ++v)
        for (std::size_t b = 1; b < a.dim(); ++b)
          if (const double w = a.weight(u, v, static_cast<Symbol>(b)); w != 0.0)
            out.weight(i, v, static_cast<Symbol>(b)) += e * w;
      out.final_weight(i) += e * a.final_weight(u);
    }
  }
  return out;
}

namespace {

// Forward ε-closure of a state distribution (ε arcs only go i→i+1).
void close_epsilon(const ConditionalAutomaton& a, std::vector<double>& v) {
  for (std::size_t i = 0; i + 1 < v.size(); ++i) v[i + 1] += v[i] * a.weight(i, i + 1, kGap);
}

}  // namespace

double string_mass(const ConditionalAutomaton& a, const Str& s) {
  require_alphabet(*a.alphabet(), s);
  const std::size_t n = a.n_states();
  std::vector<double> v(n, 0.0), next(n);
  v[0] = 1.0;
  close_epsilon(a, v);
  for (Symbol b : s.syms()) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (v[i] != 0.0)
        for (std::size_t j = i; j < n; ++j) next[j] += v[i] * a.weight(i, j, b);
    v.swap(next);
    close_epsilon(a, v);
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) mass += v[i] * a.final_weight(i);
  return mass;
}

IntersectionAutomaton::IntersectionAutomaton(AlphabetPtr alphabet, std::size_t rows, std::size_t cols)
    : alphabet_(std::move(alphabet)),
      rows_(rows),
      cols_(cols),
      tau_(rows * cols, 0.0),
      rho_(rows * cols, 0.0),
      m_(alphabet_->size(), std::vector<double>(rows * cols * rows * cols, 0.0)) {
  tau_[0] = 1.0;
}

std::vector<double> IntersectionAutomaton::transition_sum() const {
  std::vector<double> sum(n_states() * n_states(), 0.0);
  for (const auto& mb : m_)
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += mb[k];
  return sum;
}

namespace {

void check_product_inputs(const ConditionalAutomaton& a, const ConditionalAutomaton& b) {
  if (!(*a.alphabet() == *b.alphabet())) throw AlphabetMismatch("intersect: automata use different alphabets");
  if (!a.epsilon_free() || !b.epsilon_free()) throw InvalidArgument("intersect expects ε-free automata");
}

}  // namespace

IntersectionAutomaton intersect(const ConditionalAutomaton& a, const ConditionalAutomaton& b) {
  check_product_inputs(a, b);
  const std::size_t ra = a.n_states(), cb = b.n_states();
  IntersectionAutomaton out(a.alphabet(), ra, cb);
  const std::size_t n = out.n_states();
  for (std::size_t sym = 1; sym < a.dim(); ++sym) {
    auto& m = out.transitions(static_cast<Symbol>(sym));
    for (std::size_t i = 0; i < ra; ++i)
      for (std::size_t ip = i; ip < ra; ++ip) {
        const double wa = a.weight(i, ip, static_cast<Symbol>(sym));
        if (wa == 0.0) continue;
        for (std::size_t j = 0; j < cb; ++j)
          for (std::size_t jp = j; jp < cb; ++jp)
            m[out.state(i, j) * n + out.state(ip, jp)] = wa * b.weight(j, jp, static_cast<Symbol>(sym));
      }
  }
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < cb; ++j) out.final_weights()[out.state(i, j)] = a.final_weight(i) * b.final_weight(j);
  for (std::size_t sym = 1; sym < a.dim(); ++sym) {
    const auto& m = out.transitions(static_cast<Symbol>(sym));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < r; ++c)
        if (m[r * n + c] != 0.0) throw Error("intersection transition matrix is not upper triangular");
  }
  return out;
}

SummedIntersection intersect_summed(const ConditionalAutomaton& a, const ConditionalAutomaton& b) {
  check_product_inputs(a, b);
  SummedIntersection out;
  out.rows = a.n_states();
  out.cols = b.n_states();
  const std::size_t n = out.n_states(), d = a.dim(), ra = out.rows, cb = out.cols;
  out.m.assign(n * n, 0.0);
  out.rho.assign(n, 0.0);
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t ip = i; ip < ra; ++ip) {
      const double* wa = a.labels(i, ip);
      for (std::size_t j = 0; j < cb; ++j) {
        double* row = &out.m[(i * cb + j) * n + ip * cb];
        for (std::size_t jp = j; jp < cb; ++jp) {
          const double* wb = b.labels(j, jp);
          double s = 0.0;
          for (std::size_t sym = 1; sym < d; ++sym) s += wa[sym] * wb[sym];
          row[jp] = s;
        }
      }
    }
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < cb; ++j) out.rho[i * cb + j] = a.final_weight(i) * b.final_weight(j);
  return out;
}

double string_mass(const IntersectionAutomaton& a, const Str& s) {
  require_alphabet(*a.alphabet(), s);
  const std::size_t n = a.n_states();
  std::vector<double> v = a.initial(), next(n);
  for (Symbol b : s.syms()) {
    const auto& m = a.transitions(b);
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r)
      if (v[r] != 0.0)
        for (std::size_t c = r; c < n; ++c) next[c] += v[r] * m[r * n + c];
    v.swap(next);
  }
  double mass = 0.0;
  for (std::size_t r = 0; r < n; ++r) mass += v[r] * a.final_weights()[r];
  return mass;
}

void write_arc_list(std::ostream& out, const ConditionalAutomaton& a) {
  const Alphabet& al = *a.alphabet();
  out << "# conditional-automaton states=" << a.n_states() << '\n';
  out << "tau 0 1\n";
  for (const auto& arc : a.arcs())
    out << "arc " << arc.from << ' ' << arc.to << ' ' << al.token(arc.label) << ' '
        << detail::format_double(arc.weight) << '\n';
  for (std::size_t s = 0; s < a.n_states(); ++s)
    if (a.final_weight(s) != 0.0) out << "rho " << s << ' ' << detail::format_double(a.final_weight(s)) << '\n';
}

void write_arc_list(std::ostream& out, const IntersectionAutomaton& a) {
  const Alphabet& al = *a.alphabet();
  const std::size_t n = a.n_states();
  out << "# intersection-automaton states=" << n << " rows=" << a.rows() << " cols=" << a.cols() << '\n';
  out << "tau 0 1\n";
  for (std::size_t b = 1; b <= al.size(); ++b) {
    const auto& m = a.transitions(static_cast<Symbol>(b));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = r; c < n; ++c)
        if (m[r * n + c] != 0.0)
          out << "arc " << r << ' ' << c << ' ' << al.token(static_cast<Symbol>(b)) << ' '
              << detail::format_double(m[r * n + c]) << '\n';
  }
  for (std::size_t s = 0; s < n; ++s)
    if (a.final_weights()[s] != 0.0) out << "rho " << s << ' ' << detail::format_double(a.final_weights()[s]) << '\n';
}

}  // namespace stedit
