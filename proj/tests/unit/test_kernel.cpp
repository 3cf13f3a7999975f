#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "stedit/kernel.hpp"
#include "test_util.hpp"

using namespace stedit;
using testutil::chars;

namespace {

std::vector<Str> random_strings(std::mt19937_64& rng, const AlphabetPtr& al, std::size_t n, std::size_t lo,
                                std::size_t hi) {
  std::vector<Str> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(oracle::random_str(rng, al, lo, hi));
  return xs;
}

SummedIntersection product(const MemorylessTransducer& t, const Str& x, const Str& y) {
  return intersect_summed(epsilon_eliminate(build_conditional_automaton(t, x)),
                          epsilon_eliminate(build_conditional_automaton(t, y)));
}

}  // namespace

TEST_CASE("copy transducer kernel") {
  auto al = oracle::letters(3);
  const auto t = oracle::copy_transducer(al);
  CHECK(kernel_exact(t, chars(al, "abc"), chars(al, "abc")) == 1.0);
  CHECK(kernel_exact(t, chars(al, "abc"), chars(al, "acb")) == 0.0);
  CHECK(kernel_exact(t, chars(al, ""), chars(al, "")) == 1.0);
}

TEST_CASE("kernel is symmetric") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    auto al = oracle::letters(1 + rep % 4);
    const auto t = oracle::random_transducer(rng, al, 0.3, 0.95);
    const auto x = oracle::random_str(rng, al, 0, 6), y = oracle::random_str(rng, al, 0, 6);
    const double a = kernel_exact(t, x, y), b = kernel_exact(t, y, x);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(a, b));
    CHECK(a > 0.0);
  }
}

TEST_CASE("kernel matches string enumeration on small cases") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    auto al = oracle::letters(1 + rep % 2);
    const auto t = oracle::random_transducer(rng, al, 0.8, 0.95);
    const auto x = oracle::random_str(rng, al, 0, 3), y = oracle::random_str(rng, al, 0, 3);
    const auto ref = oracle::kernel_by_enumeration(t, x, y, 12);
    const double k = kernel_exact(t, x, y);
    CHECK(k >= ref.sum - 1e-15);
    CHECK(k - ref.sum <= ref.tail_bound + 1e-12 * k);
  }
}

TEST_CASE("back-substitution residual") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    auto al = oracle::letters(1 + rep % 3);
    const auto t = oracle::random_transducer(rng, al, 0.1, 0.95);
    const auto a = product(t, oracle::random_str(rng, al, 0, 7), oracle::random_str(rng, al, 0, 7));
    const auto v = solve_geometric(a);
    const std::size_t n = a.n_states();
    double worst = 0.0, rho_max = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double s = v[r];
      for (std::size_t c = 0; c < n; ++c) s -= a.m[r * n + c] * v[c];
      worst = std::max(worst, std::abs(s - a.rho[r]));
      rho_max = std::max(rho_max, std::abs(a.rho[r]));
    }
    CHECK(worst <= 1e-12 * rho_max);
  }
}

TEST_CASE("degenerate model is reported") {
  auto al = oracle::letters(1);
  MemorylessTransducer t(al);
  t(kGap, 1) = 1.0;  // never stops
  t(1, 1) = 0.0;
  const auto x = chars(al, "a");
  CHECK_THROWS_AS(kernel_exact(t, x, x), ModelDegeneracy);
  const std::vector<Str> xs{x, x};
  try {
    gram(t, xs);
    FAIL("expected KernelPairError");
  } catch (const KernelPairError& e) {
    CHECK(e.i() == 0);
    CHECK(e.j() == 0);
  }
}

TEST_CASE("landmark approximation") {
  std::mt19937_64 rng(4);
  auto al = oracle::letters(2);
  const auto t = oracle::random_transducer(rng, al, 0.8, 0.95);
  const auto x = chars(al, "ab"), y = chars(al, "bab");
  CHECK_THROWS_AS(kernel_approx(t, x, y, {}), InvalidArgument);

  const auto all = oracle::all_strings(al, 12);
  const double exact = kernel_exact(t, x, y);
  double prev = 0.0;
  for (std::size_t cut : {1ul, 10ul, 100ul, 1000ul, all.size()}) {
    const double k = kernel_approx(t, x, y, std::span(all.data(), cut));
    CHECK(k >= prev);
    CHECK(k <= exact * (1 + 1e-12));
    prev = k;
  }
  const auto ref = oracle::kernel_by_enumeration(t, x, y, 12);
  CHECK(exact - prev <= ref.tail_bound + 1e-12 * exact);
  CHECK(prev == doctest::Approx(ref.sum).epsilon(1e-12));

  const auto copy = oracle::copy_transducer(al);
  const std::vector<Str> star{x};
  CHECK(kernel_approx(copy, x, x, star) == kernel_exact(copy, x, x));
}

TEST_CASE("gram basics") {
  std::mt19937_64 rng(5);
  auto al = oracle::letters(3);
  const auto t = oracle::random_transducer(rng, al);
  const std::vector<Str> one{chars(al, "abc")};
  const auto g1 = gram(t, one);
  CHECK(g1.n == 1);
  CHECK(g1(0, 0) > 0.0);

  const auto xs = random_strings(rng, al, 12, 0, 6);
  GramOptions opt;
  opt.normalize = true;
  const auto g = gram(t, xs, opt);
  CHECK(g.normalized);
  for (std::size_t i = 0; i < g.n; ++i) {
    CHECK(g(i, i) == 1.0);
    for (std::size_t j = 0; j < g.n; ++j) {
      CHECK(g(i, j) == g(j, i));
      CHECK(g(i, j) <= 1.0 + 1e-12);
    }
  }
  CHECK_THROWS_AS(gram(t, xs, GramOptions{GramMode::Approximate, {}, false}), InvalidArgument);
}

TEST_CASE("parallel gram equals the serial reference") {
  std::mt19937_64 rng(6);
  auto al = oracle::letters(3);
  const auto t = oracle::random_transducer(rng, al);
  const auto xs = random_strings(rng, al, 25, 0, 8);
  CHECK(gram(t, xs).values == gram_serial(t, xs).values);
  GramOptions approx{GramMode::Approximate, oracle::all_strings(al, 3), false};
  const auto a = gram(t, xs, approx), b = gram_serial(t, xs, approx);
  CHECK(a.values == b.values);
  CHECK(a.landmark_count == approx.landmarks.size());
  CHECK(mode_name(a) == "approximate:" + std::to_string(approx.landmarks.size()));
}

TEST_CASE("exact gram is positive semi-definite") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 5; ++rep) {
    auto al = oracle::letters(2 + rep % 3);
    const auto t = oracle::random_transducer(rng, al);
    const auto xs = random_strings(rng, al, 20, 0, 8);
    for (bool norm : {false, true}) {
      GramOptions opt;
      opt.normalize = norm;
      const auto g = gram(t, xs, opt);
      const auto rep_psd = check_psd(g);
      const auto ev = oracle::jacobi_eigenvalues(g.n, g.values);
      CHECK(rep_psd.ok);
      CHECK(ev.front() >= -1e-8 * rep_psd.trace);
      CHECK(rep_psd.lambda_min == doctest::Approx(ev.front()).epsilon(1e-6).scale(rep_psd.trace));
    }
  }
}

TEST_CASE("check_psd on fixed matrices") {
  const std::vector<double> id{1, 0, 0, 1};
  const auto a = check_psd(2, id);
  CHECK(a.ok);
  CHECK(a.lambda_min == doctest::Approx(1.0));
  const std::vector<double> indefinite{1, 0, 0, -1};
  const auto b = check_psd(2, indefinite);
  CHECK_FALSE(b.ok);
  CHECK(b.lambda_min == doctest::Approx(-1.0));
  const std::vector<double> asym{1, 0.5, 0, 1};
  CHECK_THROWS_AS(check_psd(2, asym), InvalidArgument);
  CHECK_THROWS_AS(check_psd(3, id), DimensionMismatch);
}

TEST_CASE("precomputed-kernel export") {
  GramMatrix g;
  g.n = 1;
  g.values = {2.0};
  std::ostringstream out;
  const std::vector<std::string> labels{"+1"};
  export_gram(out, g, labels, GramFormat::PrecomputedKernel);
  CHECK(out.str() == "+1 0:1 1:2.0\n");
  const std::vector<std::string> wrong{"a", "b"};
  CHECK_THROWS_AS(export_gram(out, g, wrong, GramFormat::PrecomputedKernel), DimensionMismatch);
}

TEST_CASE("export round trips") {
  std::mt19937_64 rng(8);
  auto al = oracle::letters(2);
  const auto t = oracle::random_transducer(rng, al);
  const auto xs = random_strings(rng, al, 3, 1, 5);
  const auto g = gram(t, xs);
  const std::vector<std::string> labels{"x", "y", "x"};

  std::stringstream csv;
  export_gram(csv, g, labels, GramFormat::Csv);
  const auto back = read_gram_csv(csv);
  CHECK(back.n == 3);
  CHECK(back.values == g.values);
  CHECK(back.mode == GramMode::Exact);

  std::stringstream pre;
  export_gram(pre, g, labels, GramFormat::PrecomputedKernel);
  const std::string text = pre.str();
  // Independent parse of the text format.
  std::istringstream lines(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    std::string label, tok;
    ls >> label;
    CHECK(label == labels[row]);
    ls >> tok;
    CHECK(tok == "0:" + std::to_string(row + 1));
    for (std::size_t j = 0; j < 3; ++j) {
      ls >> tok;
      const auto colon = tok.find(':');
      CHECK(std::stoul(tok.substr(0, colon)) == j + 1);
      CHECK(std::strtod(tok.c_str() + colon + 1, nullptr) == g(row, j));
    }
    ++row;
  }
  CHECK(row == 3);

  std::stringstream again(text);
  std::vector<std::string> got;
  const auto back2 = read_gram_precomputed(again, &got);
  CHECK(back2.values == g.values);
  CHECK(got == labels);
}

TEST_CASE("runtime grows quadratically in each string length") {
  std::mt19937_64 rng(9);
  auto al = oracle::letters(4);
  const auto t = oracle::random_transducer(rng, al);
  const auto y = oracle::random_str(rng, al, 12, 12);
  std::vector<double> lx, lt;
  for (std::size_t len : {16ul, 24ul, 32ul, 48ul, 64ul}) {
    const auto x = oracle::random_str(rng, al, len, len);
    double best = 1e300;
    for (int rep = 0; rep < 9; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      volatile double k = kernel_exact(t, x, y);
      (void)k;
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    lx.push_back(std::log(static_cast<double>(len + 1)));
    lt.push_back(std::log(best));
  }
  // Least-squares slope of log time against log length.
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += lt[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * lt[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  MESSAGE("log-log slope " << slope);
  CHECK(slope >= 1.7);
  CHECK(slope <= 2.3);
}
