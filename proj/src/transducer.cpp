#include "stedit/transducer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "text_util.hpp"

namespace stedit {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(double a, double b, double c) {
  const double m = std::max({a, b, c});
  if (m == kNegInf) return kNegInf;
  return m + std::log(std::exp(a - m) + std::exp(b - m) + std::exp(c - m));
}

std::vector<double> log_table(const MemorylessTransducer& t) {
  std::vector<double> out(t.values().size());
  std::transform(t.values().begin(), t.values().end(), out.begin(),
                 [](double v) { return v > 0.0 ? std::log(v) : kNegInf; });
  return out;
}

void check_inputs(const MemorylessTransducer& t, const Str& x, const Str& xp) {
  if (!t.alphabet()) throw InvalidArgument("transducer has no alphabet");
  require_alphabet(*t.alphabet(), x);
  require_alphabet(*t.alphabet(), xp);
}

// Forward table from a precomputed log table `lc` (row-major, dim wide).
DpTable forward_impl(const std::vector<double>& lc, std::size_t dim, const Str& x, const Str& xp) {
  DpTable a;
  a.rows = x.size() + 1;
  a.cols = xp.size() + 1;
  a.log_values.assign(a.rows * a.cols, kNegInf);
  auto lcv = [&](Symbol in, Symbol out) { return lc[static_cast<std::size_t>(in) * dim + out]; };
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      if (i == 0 && j == 0) {
        a.log_values[0] = 0.0;
        continue;
      }
      const double sub = (i && j) ? a.log_values[(i - 1) * a.cols + j - 1] + lcv(x[i - 1], xp[j - 1]) : kNegInf;
      const double del = i ? a.log_values[(i - 1) * a.cols + j] + lcv(x[i - 1], kGap) : kNegInf;
      const double ins = j ? a.log_values[i * a.cols + j - 1] + lcv(kGap, xp[j - 1]) : kNegInf;
      a.log_values[i * a.cols + j] = log_sum_exp(sub, del, ins);
    }
  }
  a.log_prob = lc[0] + a.log_values.back();
  return a;
}

DpTable backward_impl(const std::vector<double>& lc, std::size_t dim, const Str& x, const Str& xp) {
  DpTable b;
  b.rows = x.size() + 1;
  b.cols = xp.size() + 1;
  b.log_values.assign(b.rows * b.cols, kNegInf);
  const std::size_t n = x.size(), m = xp.size();
  auto lcv = [&](Symbol in, Symbol out) { return lc[static_cast<std::size_t>(in) * dim + out]; };
  for (std::size_t ii = b.rows; ii-- > 0;) {
    for (std::size_t jj = b.cols; jj-- > 0;) {
      if (ii == n && jj == m) {
        b.log_values[ii * b.cols + jj] = 0.0;
        continue;
      }
      const double sub = (ii < n && jj < m) ? b.log_values[(ii + 1) * b.cols + jj + 1] + lcv(x[ii], xp[jj]) : kNegInf;
      const double del = ii < n ? b.log_values[(ii + 1) * b.cols + jj] + lcv(x[ii], kGap) : kNegInf;
      const double ins = jj < m ? b.log_values[ii * b.cols + jj + 1] + lcv(kGap, xp[jj]) : kNegInf;
      b.log_values[ii * b.cols + jj] = log_sum_exp(sub, del, ins);
    }
  }
  b.log_prob = lc[0] + b.log_values[0];
  return b;
}

// Adds the posterior operation counts of one pair into `delta`; returns log p_e.
double accumulate_pair(const std::vector<double>& lc, std::size_t dim, const StrPair& pair,
                       std::size_t pair_index, std::vector<double>& delta) {
  const Str& x = pair.input;
  const Str& xp = pair.output;
  const DpTable a = forward_impl(lc, dim, x, xp);
  const DpTable b = backward_impl(lc, dim, x, xp);
  if (a.log_prob == kNegInf)
    throw DegeneratePair("pair " + std::to_string(pair_index) + " ('" + x.to_string() + "' -> '" +
                             xp.to_string() + "') has zero probability under the current model",
                         pair_index);
  const double norm = lc[0] - a.log_prob;
  const std::size_t n = x.size(), m = xp.size();
  auto cell = [dim](Symbol in, Symbol out) { return static_cast<std::size_t>(in) * dim + out; };
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      const double beta = b.at(i, j);
      if (beta == kNegInf) continue;
      if (i && j) {
        const std::size_t k = cell(x[i - 1], xp[j - 1]);
        delta[k] += std::exp(a.at(i - 1, j - 1) + lc[k] + beta + norm);
      }
      if (j) {
        const std::size_t k = cell(kGap, xp[j - 1]);
        delta[k] += std::exp(a.at(i, j - 1) + lc[k] + beta + norm);
      }
      if (i) {
        const std::size_t k = cell(x[i - 1], kGap);
        delta[k] += std::exp(a.at(i - 1, j) + lc[k] + beta + norm);
      }
    }
  }
  delta[0] += 1.0;
  return a.log_prob;
}

constexpr std::size_t kChunk = 32;

struct ChunkSum {
  std::vector<double> delta;
  double loglik = 0.0;
};

ChunkSum accumulate_chunk(const std::vector<double>& lc, std::size_t dim, std::span<const StrPair> pairs,
                          std::size_t begin) {
  ChunkSum s;
  s.delta.assign(dim * dim, 0.0);
  const std::size_t end = std::min(pairs.size(), begin + kChunk);
  for (std::size_t p = begin; p < end; ++p) s.loglik += accumulate_pair(lc, dim, pairs[p], p, s.delta);
  return s;
}

ExpectedCounts reduce_chunks(std::vector<ChunkSum>& chunks, std::size_t dim, std::size_t n_pairs) {
  ExpectedCounts out;
  out.dim = dim;
  out.delta.assign(dim * dim, 0.0);
  double ll = 0.0;
  for (const auto& c : chunks) {
    for (std::size_t k = 0; k < out.delta.size(); ++k) out.delta[k] += c.delta[k];
    ll += c.loglik;
  }
  out.mean_loglik = n_pairs ? ll / static_cast<double>(n_pairs) : 0.0;
  return out;
}

void check_pairs(const MemorylessTransducer& t, std::span<const StrPair> pairs) {
  for (const auto& p : pairs) check_inputs(t, p.input, p.output);
}

}  // namespace

MemorylessTransducer::MemorylessTransducer(AlphabetPtr alphabet)
    : alphabet_(std::move(alphabet)), dim_(alphabet_ ? alphabet_->dim() : 0), c_(dim_ * dim_, 0.0) {}

MemorylessTransducer::MemorylessTransducer(AlphabetPtr alphabet, std::vector<double> row_major)
    : alphabet_(std::move(alphabet)), dim_(alphabet_ ? alphabet_->dim() : 0), c_(std::move(row_major)) {
  if (c_.size() != dim_ * dim_) throw DimensionMismatch("transducer table needs (|Σ|+1)^2 entries");
}

double normalization_residual(const MemorylessTransducer& t) {
  const std::size_t d = t.dim();
  double ins = 0.0;
  for (std::size_t b = 1; b < d; ++b) ins += t(kGap, static_cast<Symbol>(b));
  double worst = std::abs(ins + t(kGap, kGap) - 1.0);
  for (std::size_t a = 1; a < d; ++a) {
    double row = ins;
    for (std::size_t b = 0; b < d; ++b) row += t(static_cast<Symbol>(a), static_cast<Symbol>(b));
    worst = std::max(worst, std::abs(row - 1.0));
  }
  return worst;
}

ValidationReport validate(const MemorylessTransducer& t, double tol) {
  ValidationReport r;
  auto fail = [&](std::string msg) {
    r.ok = false;
    r.violations.push_back(std::move(msg));
  };
  const std::size_t d = t.dim();
  if (d == 0) {
    fail("empty transducer");
    return r;
  }
  const Alphabet& al = *t.alphabet();
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      const double v = t(static_cast<Symbol>(a), static_cast<Symbol>(b));
      if (!(v >= 0.0) || !std::isfinite(v))
        fail("nonnegativity: c(" + al.token(static_cast<Symbol>(b)) + "|" + al.token(static_cast<Symbol>(a)) +
             ") = " + detail::format_double(v));
    }
  if (!(t.termination() > 0.0)) fail("positivity: c($|$) = " + detail::format_double(t.termination()) + " must be > 0");

  double ins = 0.0;
  for (std::size_t b = 1; b < d; ++b) ins += t(kGap, static_cast<Symbol>(b));
  const double res_term = ins + t.termination() - 1.0;
  r.max_residual = std::abs(res_term);
  if (std::abs(res_term) > tol)
    fail("termination constraint: sum_b c(b|$) + c($|$) - 1 = " + detail::format_double(res_term));
  for (std::size_t a = 1; a < d; ++a) {
    double row = ins;
    for (std::size_t b = 0; b < d; ++b) row += t(static_cast<Symbol>(a), static_cast<Symbol>(b));
    const double res = row - 1.0;
    r.max_residual = std::max(r.max_residual, std::abs(res));
    if (std::abs(res) > tol)
      fail("input constraint for '" + al.token(static_cast<Symbol>(a)) +
           "': sum_b c(b|$) + sum_b c(b|a) + c($|a) - 1 = " + detail::format_double(res));
  }
  return r;
}

MemorylessTransducer uniform_init(AlphabetPtr alphabet) {
  if (!alphabet || alphabet->empty()) throw InvalidArgument("uniform_init needs a nonempty alphabet");
  MemorylessTransducer t(alphabet);
  const std::size_t d = alphabet->dim();
  const double share = 1.0 / static_cast<double>(d);
  for (std::size_t b = 0; b < d; ++b) t(kGap, static_cast<Symbol>(b)) = share;
  // after insertions, each input row has `share` left for d outcomes
  for (std::size_t a = 1; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) t(static_cast<Symbol>(a), static_cast<Symbol>(b)) = share * share;
  return t;
}

DpTable forward(const MemorylessTransducer& t, const Str& x, const Str& xp) {
  check_inputs(t, x, xp);
  return forward_impl(log_table(t), t.dim(), x, xp);
}

DpTable backward(const MemorylessTransducer& t, const Str& x, const Str& xp) {
  check_inputs(t, x, xp);
  return backward_impl(log_table(t), t.dim(), x, xp);
}

double log_cond_prob(const MemorylessTransducer& t, const Str& x, const Str& xp) {
  return forward(t, x, xp).log_prob;
}

double cond_prob(const MemorylessTransducer& t, const Str& x, const Str& xp) {
  return std::exp(log_cond_prob(t, x, xp));
}

double edit_dissimilarity(const MemorylessTransducer& t, const Str& x, const Str& xp) {
  const double lp = log_cond_prob(t, x, xp);
  if (lp == kNegInf) return std::numeric_limits<double>::infinity();
  return lp >= 0.0 ? 0.0 : -lp;
}

ExpectedCounts expected_counts_serial(const MemorylessTransducer& t, std::span<const StrPair> pairs) {
  check_pairs(t, pairs);
  const auto lc = log_table(t);
  const std::size_t n_chunks = (pairs.size() + kChunk - 1) / kChunk;
  std::vector<ChunkSum> chunks(n_chunks);
  for (std::size_t c = 0; c < n_chunks; ++c) chunks[c] = accumulate_chunk(lc, t.dim(), pairs, c * kChunk);
  return reduce_chunks(chunks, t.dim(), pairs.size());
}

ExpectedCounts expected_counts(const MemorylessTransducer& t, std::span<const StrPair> pairs) {
  check_pairs(t, pairs);
  const auto lc = log_table(t);
  const auto n_chunks = static_cast<long>((pairs.size() + kChunk - 1) / kChunk);
  std::vector<ChunkSum> chunks(static_cast<std::size_t>(n_chunks));
  // exceptions must not escape the parallel region; rethrow the first by index
  std::vector<std::exception_ptr> errors(chunks.size());
#pragma omp parallel for schedule(dynamic)
  for (long c = 0; c < n_chunks; ++c) {
    try {
      chunks[static_cast<std::size_t>(c)] = accumulate_chunk(lc, t.dim(), pairs, static_cast<std::size_t>(c) * kChunk);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return reduce_chunks(chunks, t.dim(), pairs.size());
}

MemorylessTransducer maximize(const ExpectedCounts& counts, const MemorylessTransducer& previous,
                              double smoothing) {
  const std::size_t d = counts.dim;
  if (previous.dim() != d) throw DimensionMismatch("previous model and counts differ in dimension");
  std::vector<double> delta = counts.delta;
  for (auto& v : delta) v += smoothing;
  auto dl = [&](std::size_t a, std::size_t b) { return delta[a * d + b]; };

  double total = 0.0;
  for (double v : delta) total += v;
  double n_ins = 0.0;
  for (std::size_t b = 1; b < d; ++b) n_ins += dl(0, b);
  if (!(total > 0.0)) throw InvalidArgument("M-step with no expected counts");

  MemorylessTransducer t(previous.alphabet());
  const double keep = (total - n_ins) / total;
  t(kGap, kGap) = keep;
  for (std::size_t b = 1; b < d; ++b) t(kGap, static_cast<Symbol>(b)) = dl(0, b) / total;
  for (std::size_t a = 1; a < d; ++a) {
    double n_a = 0.0;
    for (std::size_t b = 0; b < d; ++b) n_a += dl(a, b);
    const auto sa = static_cast<Symbol>(a);
    if (n_a > 0.0) {
      for (std::size_t b = 0; b < d; ++b) t(sa, static_cast<Symbol>(b)) = dl(a, b) / n_a * keep;
      continue;
    }
    double prev_row = 0.0;
    for (std::size_t b = 0; b < d; ++b) prev_row += previous(sa, static_cast<Symbol>(b));
    for (std::size_t b = 0; b < d; ++b)
      t(sa, static_cast<Symbol>(b)) =
          (prev_row > 0.0 ? previous(sa, static_cast<Symbol>(b)) / prev_row : 1.0 / static_cast<double>(d)) * keep;
  }
  return t;
}

EmResult em_fit(std::span<const StrPair> pairs, const MemorylessTransducer& init, const EmOptions& options) {
  if (pairs.empty()) throw InvalidArgument("em_fit needs at least one pair");
  if (auto v = validate(init); !v.ok) throw InvalidArgument("initial transducer is invalid: " + v.violations.front());
  auto estep = [&](const MemorylessTransducer& t) {
    return options.parallel ? expected_counts(t, pairs) : expected_counts_serial(t, pairs);
  };

  EmResult result{init, {}};
  ExpectedCounts counts = estep(result.model);
  result.report.loglik_trace.push_back(counts.mean_loglik);
  for (int it = 1; it <= options.max_iter; ++it) {
    result.model = maximize(counts, result.model, options.smoothing);
    result.report.residual_trace.push_back(normalization_residual(result.model));
    result.report.iterations = it;
    const double prev = counts.mean_loglik;
    counts = estep(result.model);
    result.report.loglik_trace.push_back(counts.mean_loglik);
    if (counts.mean_loglik - prev < options.tol) {
      result.report.converged = true;
      break;
    }
  }
  return result;
}

void save_transducer(std::ostream& out, const MemorylessTransducer& t, const Metadata& meta) {
  const Alphabet& al = *t.alphabet();
  Metadata full;
  std::string order;
  for (std::size_t i = 0; i < al.size(); ++i) order += (i ? "," : "") + al.symbols()[i];
  full.emplace_back("alphabet", order);
  for (const auto& kv : meta)
    if (kv.first != "alphabet") full.push_back(kv);
  out << format_metadata(full) << '\n';
  for (std::size_t b = 0; b < t.dim(); ++b) out << ',' << al.token(static_cast<Symbol>(b));
  out << '\n';
  for (std::size_t a = 0; a < t.dim(); ++a) {
    out << al.token(static_cast<Symbol>(a));
    for (std::size_t b = 0; b < t.dim(); ++b)
      out << ',' << detail::format_double(t(static_cast<Symbol>(a), static_cast<Symbol>(b)));
    out << '\n';
  }
}

LoadedTransducer load_transducer(std::istream& in) {
  LoadedTransducer r;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  std::vector<std::string> row_labels;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (header.empty()) r.meta = parse_metadata(t);
      continue;
    }
    auto cells = detail::split(t, ',');
    for (auto& c : cells) c = std::string(detail::trim(c));
    if (header.empty()) {
      if (cells.size() < 2 || !cells[0].empty() || cells[1] != kGapToken)
        throw ParseError("transducer header must be ',$,<symbols...>'", lineno);
      header.assign(cells.begin() + 1, cells.end());
      continue;
    }
    if (cells.size() != header.size() + 1) throw ParseError("row width differs from header", lineno);
    if (cells[0] != header[row_labels.size()])
      throw ParseError("row label '" + cells[0] + "' out of order", lineno);
    row_labels.push_back(cells[0]);
    for (std::size_t k = 1; k < cells.size(); ++k) values.push_back(detail::parse_double(cells[k], lineno));
  }
  if (header.empty() || row_labels.size() != header.size())
    throw ParseError("transducer file is incomplete", lineno);
  auto alphabet = std::make_shared<Alphabet>(std::vector<std::string>(header.begin() + 1, header.end()));
  if (auto order = metadata_value(r.meta, "alphabet")) {
    std::vector<std::string> listed = order->empty() ? std::vector<std::string>{} : detail::split(*order, ',');
    if (listed != alphabet->symbols()) throw ParseError("metadata alphabet disagrees with the header", 1);
  }
  r.model = MemorylessTransducer(std::move(alphabet), std::move(values));
  return r;
}

void save_em_report(std::ostream& out, const EmReport& report) {
  out << "iteration,mean_loglik\n";
  for (std::size_t i = 0; i < report.loglik_trace.size(); ++i)
    out << i << ',' << detail::format_double(report.loglik_trace[i]) << '\n';
}

}  // namespace stedit
