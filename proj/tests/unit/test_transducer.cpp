#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "stedit/transducer.hpp"
#include "test_util.hpp"

using namespace stedit;
using testutil::chars;

namespace {

std::vector<StrPair> random_pairs(std::mt19937_64& rng, const AlphabetPtr& al, std::size_t n, std::size_t max_len) {
  std::vector<StrPair> pairs;
  for (std::size_t i = 0; i < n; ++i)
    pairs.push_back({oracle::random_str(rng, al, 0, max_len), oracle::random_str(rng, al, 0, max_len)});
  return pairs;
}

}  // namespace

TEST_CASE("uniform init on a one-letter alphabet") {
  auto al = oracle::letters(1);
  const auto t = uniform_init(al);
  CHECK(t(kGap, kGap) == 0.5);
  CHECK(t(kGap, 1) == 0.5);
  CHECK(t(1, 1) == 0.25);
  CHECK(t(1, kGap) == 0.25);
  CHECK(validate(t).ok);
  CHECK(normalization_residual(t) <= 1e-15);
  CHECK_THROWS_AS(uniform_init(std::make_shared<const Alphabet>()), InvalidArgument);
}

TEST_CASE("validate reports the violated constraint") {
  auto al = oracle::letters(2);
  auto t = uniform_init(al);
  CHECK(validate(t).ok);

  auto no_stop = t;
  no_stop(kGap, kGap) = 0.0;
  no_stop(kGap, 1) += t(kGap, kGap);
  const auto r1 = validate(no_stop);
  CHECK_FALSE(r1.ok);
  CHECK(r1.violations.front().find("positivity") != std::string::npos);

  const double tol = 1e-9;
  auto bumped = t;
  bumped(2, 1) += 2 * tol;
  const auto r2 = validate(bumped, tol);
  CHECK_FALSE(r2.ok);
  REQUIRE(r2.violations.size() == 1);
  CHECK(r2.violations.front().find("b") != std::string::npos);
  CHECK(r2.max_residual == doctest::Approx(2 * tol));

  auto neg = t;
  neg(1, 2) = -0.1;
  CHECK_FALSE(validate(neg).ok);
}

TEST_CASE("empty input and output") {
  std::mt19937_64 rng(1);
  auto al = oracle::letters(2);
  const auto t = oracle::random_transducer(rng, al);
  const Str e(al, {});
  CHECK(cond_prob(t, e, e) == doctest::Approx(t.termination()).epsilon(1e-15));
  CHECK(std::exp(backward(t, e, e).log_prob) == doctest::Approx(t.termination()).epsilon(1e-15));
}

TEST_CASE("copy transducer has a single surviving path") {
  auto al = oracle::letters(3);
  const auto t = oracle::copy_transducer(al);
  const auto x = chars(al, "abca");
  CHECK(cond_prob(t, x, x) == 1.0);
  CHECK(cond_prob(t, x, chars(al, "abc")) == 0.0);
  CHECK(edit_dissimilarity(t, x, x) == 0.0);
  CHECK(edit_dissimilarity(t, x, chars(al, "abcb")) == std::numeric_limits<double>::infinity());
}

TEST_CASE("dissimilarity of a known probability") {
  auto al = oracle::letters(1);
  MemorylessTransducer t(al);
  const double p = std::exp(-5.0);
  t(kGap, kGap) = p;
  t(kGap, 1) = 1.0 - p;
  t(1, 1) = p;
  const Str e(al, {});
  CHECK(edit_dissimilarity(t, e, e) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("forward matches edit-script enumeration") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    auto al = oracle::letters(1 + rep % 3);
    const auto t = oracle::random_transducer(rng, al, 0.3, 0.9);
    const auto x = oracle::random_str(rng, al, 0, 3), y = oracle::random_str(rng, al, 0, 3);
    const auto ref = oracle::enumerate_scripts(t, x, y);
    CHECK(cond_prob(t, x, y) == doctest::Approx(ref.prob).epsilon(1e-9));
  }
}

TEST_CASE("forward and backward agree") {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 300; ++rep) {
    auto al = oracle::letters(1 + rep % 4);
    const auto t = oracle::random_transducer(rng, al, 0.05, 0.95);
    const auto x = oracle::random_str(rng, al, 0, 8), y = oracle::random_str(rng, al, 0, 8);
    const auto f = forward(t, x, y), b = backward(t, x, y);
    CHECK(std::abs(f.log_prob - b.log_prob) <= 1e-12);
    CHECK(f.rows == x.size() + 1);
    CHECK(f.cols == y.size() + 1);
    // Mass of the paths through any one cell cannot exceed the total.
    for (std::size_t i = 0; i < f.rows; ++i)
      for (std::size_t j = 0; j < f.cols; ++j)
        CHECK(f.at(i, j) + b.at(i, j) + std::log(t.termination()) <= f.log_prob + 1e-12);
  }
}

TEST_CASE("output mass approaches one monotonically in the length bound") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 6; ++rep) {
    auto al = oracle::letters(1 + rep % 2);
    const auto t = oracle::random_transducer(rng, al, 0.8, 0.95);
    const auto x = oracle::random_str(rng, al, 0, 3);
    const auto strings = oracle::all_strings(al, 16);
    std::vector<double> by_len(17, 0.0);
    for (const auto& s : strings) by_len[s.size()] += cond_prob(t, x, s);
    double cumulative = 0.0, prev = 0.0;
    for (std::size_t len = 0; len <= 16; ++len) {
      cumulative += by_len[len];
      CHECK(cumulative >= prev);
      CHECK(cumulative <= 1.0 + 1e-12);
      prev = cumulative;
    }
    const auto lengths = oracle::output_length_distribution(t, x, 16);
    double tail = 1.0;
    for (double v : lengths) tail -= v;
    REQUIRE(tail < 1e-6);
    CHECK(cumulative == doctest::Approx(1.0 - tail).epsilon(1e-10));
  }
}

TEST_CASE("E-step matches the script posterior oracle") {
  auto al = oracle::letters(2);
  const auto t = uniform_init(al);
  const std::vector<StrPair> pairs{{chars(al, "ab"), chars(al, "abb")}, {chars(al, "ba"), chars(al, "a")}};
  const auto counts = expected_counts_serial(t, pairs);
  std::vector<double> delta(9, 0.0);
  double ll = 0.0;
  for (const auto& p : pairs) {
    const auto ref = oracle::enumerate_scripts(t, p.input, p.output);
    for (std::size_t k = 0; k < 9; ++k) delta[k] += ref.delta[k];
    ll += std::log(ref.prob);
  }
  for (std::size_t k = 0; k < 9; ++k) CHECK(std::abs(counts.delta[k] - delta[k]) <= 1e-9);
  CHECK(counts.mean_loglik == doctest::Approx(ll / 2).epsilon(1e-12));

  const auto next = maximize(counts, t, 0.0);
  const auto ref_c = oracle::m_step(delta, 3);
  for (std::size_t k = 0; k < 9; ++k) CHECK(std::abs(next.values()[k] - ref_c[k]) <= 1e-9);
}

TEST_CASE("E-step oracle on random models") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 40; ++rep) {
    auto al = oracle::letters(1 + rep % 3);
    const auto t = oracle::random_transducer(rng, al, 0.2, 0.9);
    const StrPair p{oracle::random_str(rng, al, 0, 3), oracle::random_str(rng, al, 0, 3)};
    const auto counts = expected_counts_serial(t, std::span(&p, 1));
    const auto ref = oracle::enumerate_scripts(t, p.input, p.output);
    for (std::size_t k = 0; k < counts.delta.size(); ++k) CHECK(std::abs(counts.delta[k] - ref.delta[k]) <= 1e-9);
  }
}

TEST_CASE("parallel E-step is bit-identical to the serial one") {
  std::mt19937_64 rng(17);
  auto al = oracle::letters(3);
  const auto t = oracle::random_transducer(rng, al);
  const auto pairs = random_pairs(rng, al, 301, 7);
  const auto a = expected_counts_serial(t, pairs);
  const auto b = expected_counts(t, pairs);
  CHECK(a.delta == b.delta);
  CHECK(a.mean_loglik == b.mean_loglik);
}

TEST_CASE("M-step keeps both constraints and the shape of unused rows") {
  std::mt19937_64 rng(19);
  auto al = oracle::letters(3);
  const auto prev = oracle::random_transducer(rng, al);
  // Pairs never mention 'c'.
  const std::vector<StrPair> pairs{{chars(al, "ab"), chars(al, "ba")}, {chars(al, "a"), chars(al, "")}};
  const auto next = maximize(expected_counts_serial(prev, pairs), prev, 0.0);
  CHECK(normalization_residual(next) <= 1e-12);
  CHECK(validate(next).ok);
  const double scale = next(3, 1) / prev(3, 1);
  for (Symbol b = 0; b < 4; ++b) CHECK(next(3, b) == doctest::Approx(prev(3, b) * scale).epsilon(1e-12));
}

TEST_CASE("EM on an identity pair increases p(x|x) every iteration") {
  auto al = oracle::letters(2);
  const auto x = chars(al, "abba");
  const std::vector<StrPair> pairs{{x, x}};
  auto model = uniform_init(al);
  double prev = cond_prob(model, x, x);
  // Stops near the smoothed fixed point just below 1.
  for (int it = 0; it < 30 && prev < 1.0 - 1e-6; ++it) {
    model = maximize(expected_counts_serial(model, pairs), model, 1e-9);
    const double p = cond_prob(model, x, x);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("empty pair is a fixed point") {
  auto al = oracle::letters(2);
  MemorylessTransducer init(al);
  init(kGap, kGap) = 1.0;
  init(1, 1) = 0.5;
  init(1, kGap) = 0.5;
  init(2, 2) = 0.7;
  init(2, 1) = 0.2;
  init(2, kGap) = 0.1;
  const Str e(al, {});
  const std::vector<StrPair> pairs{{e, e}};
  const auto counts = expected_counts_serial(init, pairs);
  for (std::size_t k = 1; k < counts.delta.size(); ++k) CHECK(counts.delta[k] == 0.0);
  CHECK(counts.delta[0] == 1.0);

  EmOptions opt;
  opt.smoothing = 0.0;
  const auto fit = em_fit(pairs, init, opt);
  CHECK(fit.report.iterations == 1);
  CHECK(fit.report.converged);
  for (std::size_t k = 0; k < 9; ++k) CHECK(fit.model.values()[k] == doctest::Approx(init.values()[k]).epsilon(1e-15));
}

TEST_CASE("EM log-likelihood never decreases") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 4; ++rep) {
    auto al = oracle::letters(2 + rep % 2);
    const auto pairs = random_pairs(rng, al, 30, 6);
    EmOptions opt;
    opt.max_iter = 60;
    opt.tol = -std::numeric_limits<double>::infinity();
    const auto fit = em_fit(pairs, uniform_init(al), opt);
    CHECK(fit.report.iterations == 60);
    REQUIRE(fit.report.loglik_trace.size() == 61);
    for (std::size_t k = 1; k < fit.report.loglik_trace.size(); ++k)
      CHECK(fit.report.loglik_trace[k] >= fit.report.loglik_trace[k - 1] - 1e-10);
    for (double r : fit.report.residual_trace) CHECK(r <= 1e-12);
    CHECK(validate(fit.model).ok);
  }
}

TEST_CASE("EM serial and parallel runs are identical") {
  std::mt19937_64 rng(29);
  auto al = oracle::letters(3);
  const auto pairs = random_pairs(rng, al, 100, 6);
  EmOptions opt;
  opt.max_iter = 10;
  opt.parallel = false;
  const auto a = em_fit(pairs, uniform_init(al), opt);
  opt.parallel = true;
  const auto b = em_fit(pairs, uniform_init(al), opt);
  CHECK(std::vector<double>(a.model.values().begin(), a.model.values().end()) ==
        std::vector<double>(b.model.values().begin(), b.model.values().end()));
  CHECK(a.report.loglik_trace == b.report.loglik_trace);
}

TEST_CASE("degenerate pair is reported by index") {
  auto al = oracle::letters(2);
  const auto t = oracle::copy_transducer(al);
  const std::vector<StrPair> pairs{{chars(al, "a"), chars(al, "a")}, {chars(al, "a"), chars(al, "b")}};
  try {
    expected_counts(t, pairs);
    FAIL("expected DegeneratePair");
  } catch (const DegeneratePair& e) {
    CHECK(e.pair_index() == 1);
  }
  CHECK_THROWS_AS(em_fit(std::vector<StrPair>{}, uniform_init(al)), InvalidArgument);
}

TEST_CASE("alphabet mismatch is rejected") {
  const auto t = uniform_init(oracle::letters(2));
  auto other = oracle::letters(3);
  CHECK_THROWS_AS(cond_prob(t, chars(other, "c"), chars(other, "a")), AlphabetMismatch);
}

TEST_CASE("transducer CSV round trip") {
  std::mt19937_64 rng(31);
  auto al = oracle::letters(3);
  const auto t = oracle::random_transducer(rng, al);
  std::stringstream ss;
  save_transducer(ss, t, {{"smoothing", "1e-09"}});
  const std::string text = ss.str();
  CHECK(text.rfind("# alphabet=a,b,c smoothing=1e-09\n,$,a,b,c\n$,", 0) == 0);
  const auto loaded = load_transducer(ss);
  CHECK(loaded.model.alphabet()->symbols() == al->symbols());
  for (std::size_t k = 0; k < 16; ++k) CHECK(loaded.model.values()[k] == t.values()[k]);

  std::stringstream bad(",$,a\n$,0.5,0.5\nb,0.25,0.25\n");
  CHECK_THROWS_AS(load_transducer(bad), ParseError);
}

TEST_CASE("EM report CSV") {
  EmReport r;
  r.loglik_trace = {-2.5, -1.25};
  std::stringstream ss;
  save_em_report(ss, r);
  CHECK(ss.str() == "iteration,mean_loglik\n0,-2.5\n1,-1.25\n");
}
