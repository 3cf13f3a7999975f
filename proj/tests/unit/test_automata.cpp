#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "stedit/automata.hpp"
#include "test_util.hpp"

using namespace stedit;
using testutil::chars;

namespace {

struct ParsedArcs {
  std::map<std::size_t, double> tau, rho;
  std::vector<std::tuple<std::size_t, std::size_t, std::string, double>> arcs;
};

ParsedArcs parse_arc_list(const std::string& text) {
  ParsedArcs p;
  std::istringstream in(text);
  std::string kind;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ls >> kind;
    if (kind == "arc") {
      std::size_t f, t;
      std::string sym;
      double w;
      ls >> f >> t >> sym >> w;
      p.arcs.emplace_back(f, t, sym, w);
    } else {
      std::size_t s;
      double w;
      ls >> s >> w;
      (kind == "tau" ? p.tau : p.rho)[s] = w;
    }
  }
  return p;
}

// Mass of s under a parsed arc list; labels "$" are ε moves.
double parsed_mass(const ParsedArcs& p, const Str& s) {
  const Alphabet& al = *s.alphabet();
  double total = 0.0;
  std::function<void(std::size_t, std::size_t, double)> dfs = [&](std::size_t q, std::size_t pos, double w) {
    if (pos == s.size())
      if (auto it = p.rho.find(q); it != p.rho.end()) total += w * it->second;
    for (const auto& [f, t, sym, v] : p.arcs) {
      if (f != q) continue;
      if (sym == "$") {
        if (t != q) dfs(t, pos, w * v);
      } else if (pos < s.size() && sym == al.token(s[pos])) {
        dfs(t, pos + 1, w * v);
      }
    }
  };
  for (const auto& [q, w] : p.tau) dfs(q, 0, w);
  return total;
}

}  // namespace

TEST_CASE("state counts of conditional automata") {
  std::mt19937_64 rng(1);
  auto al = oracle::letters(2);
  const auto t = oracle::random_transducer(rng, al);
  CHECK(build_conditional_automaton(t, chars(al, "a")).n_states() == 2);
  CHECK(build_conditional_automaton(t, chars(al, "ab")).n_states() == 3);

  const auto e = build_conditional_automaton(t, chars(al, ""));
  CHECK(e.n_states() == 1);
  CHECK(e.final_weight(0) == t.termination());
  for (const auto& arc : e.arcs()) {
    CHECK(arc.from == 0);
    CHECK(arc.to == 0);
    CHECK(arc.label != kGap);
    CHECK(arc.weight == t(kGap, arc.label));
  }
  CHECK(e.epsilon_free());
}

TEST_CASE("conditional automaton arcs follow the transducer") {
  std::mt19937_64 rng(2);
  auto al = oracle::letters(3);
  const auto t = oracle::random_transducer(rng, al);
  const auto x = chars(al, "cab");
  const auto a = build_conditional_automaton(t, x);
  CHECK_FALSE(a.epsilon_free());
  for (std::size_t i = 0; i <= x.size(); ++i) {
    for (Symbol b = 1; b <= 3; ++b) CHECK(a.weight(i, i, b) == t(kGap, b));
    CHECK(a.final_weight(i) == (i == x.size() ? t.termination() : 0.0));
    if (i < x.size()) {
      CHECK(a.weight(i, i + 1, kGap) == t(x[i], kGap));
      for (Symbol b = 1; b <= 3; ++b) CHECK(a.weight(i, i + 1, b) == t(x[i], b));
    }
  }
  for (const auto& arc : a.arcs()) {
    CHECK(arc.to >= arc.from);
    CHECK(arc.to <= arc.from + 1);
    CHECK(arc.weight > 0.0);
  }
}

TEST_CASE("epsilon elimination closed forms") {
  std::mt19937_64 rng(3);
  auto al = oracle::letters(2);
  const auto t = oracle::random_transducer(rng, al);
  const auto empty = build_conditional_automaton(t, chars(al, ""));
  const auto empty_free = epsilon_eliminate(empty);
  CHECK(empty_free.final_weight(0) == empty.final_weight(0));
  CHECK(empty_free.arcs().size() == empty.arcs().size());

  const auto one = epsilon_eliminate(build_conditional_automaton(t, chars(al, "a")));
  CHECK(one.epsilon_free());
  CHECK(one.final_weight(0) == doctest::Approx(t(1, kGap) * t.termination()).epsilon(1e-15));
  CHECK(one.final_weight(1) == t.termination());

  // General formula on a longer input.
  const auto x = chars(al, "abba");
  const auto e = epsilon_eliminate(build_conditional_automaton(t, x));
  auto dels = [&](std::size_t from, std::size_t to) {
    double p = 1.0;
    for (std::size_t k = from + 1; k <= to; ++k) p *= t(x[k - 1], kGap);
    return p;
  };
  for (std::size_t i = 0; i <= x.size(); ++i) {
    CHECK(e.final_weight(i) == doctest::Approx(dels(i, x.size()) * t.termination()).epsilon(1e-13));
    for (std::size_t j = i; j <= x.size(); ++j)
      for (Symbol b = 1; b <= 2; ++b) {
        double expect = dels(i, j) * t(kGap, b);
        if (j > i) expect += dels(i, j - 1) * t(x[j - 1], b);
        CHECK(e.weight(i, j, b) == doctest::Approx(expect).epsilon(1e-13));
      }
  }
}

TEST_CASE("epsilon elimination preserves every string's mass") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 12; ++rep) {
    auto al = oracle::letters(1 + rep % 2);
    const auto t = oracle::random_transducer(rng, al, 0.3, 0.9);
    const auto x = oracle::random_str(rng, al, 0, 4);
    const auto raw = build_conditional_automaton(t, x);
    const auto clean = epsilon_eliminate(raw);
    for (const auto& s : oracle::all_strings(al, 8)) {
      const double before = oracle::path_mass(raw, s);
      CHECK(std::abs(oracle::path_mass(clean, s) - before) <= 1e-12);
      CHECK(std::abs(string_mass(clean, s) - before) <= 1e-12);
      CHECK(std::abs(string_mass(raw, s) - before) <= 1e-12);
      CHECK(before == doctest::Approx(oracle::string_prob(t, x, s)).epsilon(1e-10));
    }
  }
}

TEST_CASE("worked intersection dimensions") {
  std::mt19937_64 rng(5);
  auto al = oracle::letters(2);
  const auto t = oracle::random_transducer(rng, al);
  auto reduced = [&](const char* s) { return epsilon_eliminate(build_conditional_automaton(t, chars(al, s))); };
  const auto p = intersect(reduced("a"), reduced("ab"));
  CHECK(p.n_states() == 6);
  CHECK(p.rows() == 2);
  CHECK(p.cols() == 3);

  const auto e = intersect(reduced(""), reduced(""));
  CHECK(e.n_states() == 1);
  CHECK(e.final_weights()[0] == doctest::Approx(t.termination() * t.termination()).epsilon(1e-15));
  for (Symbol b = 1; b <= 2; ++b) CHECK(e.transitions(b)[0] == doctest::Approx(t(kGap, b) * t(kGap, b)));
  CHECK(string_mass(e, Str(al, {})) == doctest::Approx(t.termination() * t.termination()));
}

TEST_CASE("intersection invariants") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 30; ++rep) {
    auto al = oracle::letters(1 + rep % 3);
    const auto t = oracle::random_transducer(rng, al, 0.5, 0.95);
    const auto x = oracle::random_str(rng, al, 0, 4), y = oracle::random_str(rng, al, 0, 4);
    const auto a = intersect(epsilon_eliminate(build_conditional_automaton(t, x)),
                             epsilon_eliminate(build_conditional_automaton(t, y)));
    const std::size_t n = a.n_states();
    CHECK(n == (x.size() + 1) * (y.size() + 1));
    CHECK(a.initial()[0] == 1.0);
    for (Symbol b = 1; b <= static_cast<Symbol>(al->size()); ++b)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < r; ++c) CHECK(a.transitions(b)[r * n + c] == 0.0);
    const auto m = a.transition_sum();
    for (std::size_t r = 0; r < n; ++r) {
      double row = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        CHECK(m[r * n + c] >= 0.0);
        row += m[r * n + c];
      }
      CHECK(row < 1.0);
    }
    const auto summed = intersect_summed(epsilon_eliminate(build_conditional_automaton(t, x)),
                                         epsilon_eliminate(build_conditional_automaton(t, y)));
    REQUIRE(summed.m.size() == m.size());
    for (std::size_t k = 0; k < m.size(); ++k) CHECK(summed.m[k] == doctest::Approx(m[k]).epsilon(1e-14));
    for (std::size_t k = 0; k < n; ++k) CHECK(summed.rho[k] == doctest::Approx(a.final_weights()[k]).epsilon(1e-14));
  }
}

TEST_CASE("product mass equals the product of conditional probabilities") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 15; ++rep) {
    auto al = oracle::letters(1 + rep % 3);
    const auto t = oracle::random_transducer(rng, al, 0.3, 0.9);
    const auto x = oracle::random_str(rng, al, 0, 3), y = oracle::random_str(rng, al, 0, 3);
    const auto a = intersect(epsilon_eliminate(build_conditional_automaton(t, x)),
                             epsilon_eliminate(build_conditional_automaton(t, y)));
    for (const auto& s : oracle::all_strings(al, 4)) {
      const double expect = oracle::string_prob(t, x, s) * oracle::string_prob(t, y, s);
      CHECK(std::abs(string_mass(a, s) - expect) <= 1e-10);
      if (s.size() <= 3) CHECK(std::abs(oracle::path_mass(a, s) - string_mass(a, s)) <= 1e-14);
    }
    double tr = 0.0;
    for (std::size_t k = 0; k < a.n_states(); ++k) tr += a.initial()[k] * a.final_weights()[k];
    CHECK(string_mass(a, Str(al, {})) == doctest::Approx(tr).epsilon(1e-15));
  }
}

TEST_CASE("copy transducer intersection") {
  auto al = oracle::letters(2);
  const auto t = oracle::copy_transducer(al);
  const auto x = chars(al, "aba");
  const auto f = epsilon_eliminate(build_conditional_automaton(t, x));
  const auto a = intersect(f, f);
  for (const auto& s : oracle::all_strings(al, 4)) CHECK(string_mass(a, s) == (s == x ? 1.0 : 0.0));
}

TEST_CASE("intersection preconditions") {
  auto al2 = oracle::letters(2);
  auto al3 = oracle::letters(3);
  const auto t2 = uniform_init(al2);
  const auto t3 = uniform_init(al3);
  const auto a = epsilon_eliminate(build_conditional_automaton(t2, chars(al2, "a")));
  const auto b = epsilon_eliminate(build_conditional_automaton(t3, chars(al3, "a")));
  CHECK_THROWS_AS(intersect(a, b), AlphabetMismatch);
  CHECK_THROWS_AS(intersect(a, build_conditional_automaton(t2, chars(al2, "a"))), InvalidArgument);
  CHECK_THROWS_AS(build_conditional_automaton(t2, chars(al3, "c")), AlphabetMismatch);
}

TEST_CASE("arc list export reproduces string masses") {
  std::mt19937_64 rng(8);
  auto al = oracle::letters(2);
  const auto t = oracle::random_transducer(rng, al);
  const auto x = chars(al, "ab"), y = chars(al, "b");
  const auto raw = build_conditional_automaton(t, x);
  std::ostringstream o1, o2;
  write_arc_list(o1, raw);
  const auto a = intersect(epsilon_eliminate(raw), epsilon_eliminate(build_conditional_automaton(t, y)));
  write_arc_list(o2, a);
  const auto p1 = parse_arc_list(o1.str());
  const auto p2 = parse_arc_list(o2.str());
  for (const auto& s : oracle::all_strings(al, 4)) {
    CHECK(parsed_mass(p1, s) == doctest::Approx(string_mass(raw, s)).epsilon(1e-13));
    CHECK(parsed_mass(p2, s) == doctest::Approx(string_mass(a, s)).epsilon(1e-13));
  }
}
