#include "stedit/kernel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <utility>

#include "text_util.hpp"

namespace stedit {

std::vector<double> solve_geometric(const SummedIntersection& a) {
  const std::size_t n = a.n_states();
  std::vector<double> v(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    const double* row = &a.m[r * n];
    const double pivot = 1.0 - row[r];
    if (!(pivot > 0.0))
      throw ModelDegeneracy("nonpositive pivot 1 - M(" + std::to_string(r) + "," + std::to_string(r) +
                            ") = " + detail::format_double(pivot) + "; transducer is not normalized");
    double s = a.rho[r];
    for (std::size_t c = r + 1; c < n; ++c) s += row[c] * v[c];
    v[r] = s / pivot;
  }
  return v;
}

double kernel_exact(const MemorylessTransducer& t, const Str& x, const Str& xp) {
  const auto ax = epsilon_eliminate(build_conditional_automaton(t, x));
  const auto axp = epsilon_eliminate(build_conditional_automaton(t, xp));
  return solve_geometric(intersect_summed(ax, axp))[0];
}

double kernel_approx(const MemorylessTransducer& t, const Str& x, const Str& xp, std::span<const Str> landmarks) {
  if (landmarks.empty()) throw InvalidArgument("kernel_approx needs at least one landmark");
  double sum = 0.0;
  for (const auto& s : landmarks) sum += cond_prob(t, x, s) * cond_prob(t, xp, s);
  return sum;
}

namespace {

GramMatrix empty_gram(std::span<const Str> xs, const GramOptions& options) {
  if (options.mode == GramMode::Approximate && options.landmarks.empty())
    throw InvalidArgument("approximate Gram matrix needs landmarks");
  if (options.mode == GramMode::Baseline) throw InvalidArgument("use gram_baseline for baseline similarities");
  GramMatrix g;
  g.n = xs.size();
  g.values.assign(g.n * g.n, 0.0);
  g.strings.assign(xs.begin(), xs.end());
  g.mode = options.mode;
  g.landmark_count = options.mode == GramMode::Approximate ? options.landmarks.size() : 0;
  return g;
}

double kernel_value(const MemorylessTransducer& t, const Str& x, const Str& y, const GramOptions& options) {
  return options.mode == GramMode::Exact ? kernel_exact(t, x, y) : kernel_approx(t, x, y, options.landmarks);
}

std::vector<std::pair<std::size_t, std::size_t>> upper_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) pairs.emplace_back(i, j);
  return pairs;
}

[[noreturn]] void rethrow_for_pair(const std::exception& e, std::size_t i, std::size_t j) {
  throw KernelPairError("kernel evaluation failed for pair (" + std::to_string(i) + ", " + std::to_string(j) +
                            "): " + e.what(),
                        i, j);
}

template <class F>
void fill_upper(GramMatrix& g, bool parallel, const F& eval) {
  const auto pairs = upper_pairs(g.n);
  const auto count = static_cast<std::ptrdiff_t>(pairs.size());
  std::vector<std::exception_ptr> errors(pairs.size());
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    const auto [i, j] = pairs[static_cast<std::size_t>(k)];
    try {
      g(i, j) = eval(i, j);
    } catch (...) {
      errors[static_cast<std::size_t>(k)] = std::current_exception();
    }
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const std::exception& e) {
      rethrow_for_pair(e, pairs[k].first, pairs[k].second);
    }
  }
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
}

GramMatrix build_gram(const MemorylessTransducer& t, std::span<const Str> xs, const GramOptions& options,
                      bool parallel) {
  GramMatrix g = empty_gram(xs, options);
  fill_upper(g, parallel, [&](std::size_t i, std::size_t j) { return kernel_value(t, xs[i], xs[j], options); });
  if (options.normalize) normalize_gram(g);
  return g;
}

}  // namespace

GramMatrix gram_serial(const MemorylessTransducer& t, std::span<const Str> xs, const GramOptions& options) {
  return build_gram(t, xs, options, false);
}

GramMatrix gram(const MemorylessTransducer& t, std::span<const Str> xs, const GramOptions& options) {
  return build_gram(t, xs, options, true);
}

GramMatrix gram_baseline(std::span<const Str> xs, const std::string& name,
                         const std::function<double(const Str&, const Str&)>& similarity, bool normalize,
                         bool parallel) {
  GramMatrix g;
  g.n = xs.size();
  g.values.assign(g.n * g.n, 0.0);
  g.strings.assign(xs.begin(), xs.end());
  g.mode = GramMode::Baseline;
  g.baseline = name;
  fill_upper(g, parallel, [&](std::size_t i, std::size_t j) { return similarity(xs[i], xs[j]); });
  if (normalize) normalize_gram(g);
  return g;
}

void normalize_gram(GramMatrix& g) {
  std::vector<double> scale(g.n);
  for (std::size_t i = 0; i < g.n; ++i) scale[i] = g(i, i) > 0.0 ? 1.0 / std::sqrt(g(i, i)) : 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    g(i, i) = scale[i] > 0.0 ? 1.0 : 0.0;
    for (std::size_t j = i + 1; j < g.n; ++j) g(j, i) = g(i, j) = g(i, j) * scale[i] * scale[j];
  }
  g.normalized = true;
}

PsdReport check_psd(std::size_t n, std::span<const double> values, double tol) {
  if (values.size() != n * n) throw DimensionMismatch("check_psd: expected " + std::to_string(n * n) + " values");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * n + j];
      scale = std::max(scale, std::abs(values[i * n + j]));
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(values[i * n + j] - values[j * n + i]) > 1e-12 * std::max(1.0, scale))
        throw InvalidArgument("check_psd: matrix is not symmetric at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
  PsdReport report;
  if (n == 0) {
    report.ok = true;
    return report;
  }
  report.trace = m.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("check_psd: eigenvalue computation failed");
  report.lambda_min = solver.eigenvalues().minCoeff();
  report.ok = report.lambda_min >= -tol * std::abs(report.trace);
  return report;
}

PsdReport check_psd(const GramMatrix& g, double tol) { return check_psd(g.n, g.values, tol); }

std::string mode_name(const GramMatrix& g) {
  switch (g.mode) {
    case GramMode::Exact:
      return "exact";
    case GramMode::Approximate:
      return "approximate:" + std::to_string(g.landmark_count);
    case GramMode::Baseline:
      return "baseline:" + g.baseline;
  }
  return "exact";
}

namespace {

std::string format_kernel_value(double v) {
  std::string s = detail::format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void parse_mode(GramMatrix& g, const std::string& mode) {
  if (mode == "exact") {
    g.mode = GramMode::Exact;
  } else if (mode.rfind("approximate:", 0) == 0) {
    g.mode = GramMode::Approximate;
    g.landmark_count = static_cast<std::size_t>(detail::parse_long(mode.substr(12)));
  } else if (mode.rfind("baseline:", 0) == 0) {
    g.mode = GramMode::Baseline;
    g.baseline = mode.substr(9);
  } else {
    throw ParseError("unknown Gram mode '" + mode + "'", 1);
  }
}

}  // namespace

void export_gram(std::ostream& out, const GramMatrix& g, std::span<const std::string> labels, GramFormat format) {
  if (format == GramFormat::PrecomputedKernel) {
    if (labels.size() != g.n)
      throw DimensionMismatch("export_gram: " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(g.n) + " rows");
    for (std::size_t i = 0; i < g.n; ++i) {
      out << labels[i] << " 0:" << i + 1;
      for (std::size_t j = 0; j < g.n; ++j) out << ' ' << j + 1 << ':' << format_kernel_value(g(i, j));
      out << '\n';
    }
  } else {
    if (!labels.empty() && labels.size() != g.n)
      throw DimensionMismatch("export_gram: " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(g.n) + " rows");
    out << format_metadata({{"mode", mode_name(g)}, {"normalized", g.normalized ? "1" : "0"},
                            {"n", std::to_string(g.n)}})
        << '\n';
    out << "id";
    for (std::size_t j = 0; j < g.n; ++j) out << ',' << j;
    out << '\n';
    for (std::size_t i = 0; i < g.n; ++i) {
      out << i;
      for (std::size_t j = 0; j < g.n; ++j) out << ',' << detail::format_double(g(i, j));
      out << '\n';
    }
  }
  if (!out) throw Error("export_gram: write failed");
}

void export_gram(const std::filesystem::path& path, const GramMatrix& g, std::span<const std::string> labels,
                 GramFormat format) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  export_gram(out, g, labels, format);
}

GramMatrix read_gram_csv(std::istream& in) {
  GramMatrix g;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto meta = parse_metadata(t);
      if (auto mode = metadata_value(meta, "mode")) parse_mode(g, *mode);
      if (auto norm = metadata_value(meta, "normalized")) g.normalized = *norm == "1";
      continue;
    }
    const auto cells = detail::split(t, ',');
    if (!header) {
      if (cells.empty() || detail::trim(cells[0]) != "id") throw ParseError("expected Gram CSV header", line_no);
      g.n = cells.size() - 1;
      g.values.reserve(g.n * g.n);
      header = true;
      continue;
    }
    if (cells.size() != g.n + 1)
      throw ParseError("expected " + std::to_string(g.n + 1) + " cells, got " + std::to_string(cells.size()),
                       line_no);
    for (std::size_t j = 1; j < cells.size(); ++j) g.values.push_back(detail::parse_double(cells[j], line_no));
  }
  if (!header) throw ParseError("missing Gram CSV header", line_no);
  if (g.values.size() != g.n * g.n) throw ParseError("Gram CSV has the wrong number of rows", line_no);
  return g;
}

GramMatrix read_gram_precomputed(std::istream& in, std::vector<std::string>* labels) {
  GramMatrix g;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    std::vector<std::string> fields;
    for (const auto& f : detail::split(t, ' '))
      if (!f.empty()) fields.push_back(f);
    if (fields.size() < 2 || fields[1].rfind("0:", 0) != 0)
      throw ParseError("expected '<label> 0:<row> ...'", line_no);
    if (labels) labels->push_back(fields[0]);
    if (detail::parse_long(std::string_view(fields[1]).substr(2), line_no) != static_cast<long>(rows.size() + 1))
      throw ParseError("row index out of order", line_no);
    std::vector<double> row;
    for (std::size_t k = 2; k < fields.size(); ++k) {
      const auto colon = fields[k].find(':');
      if (colon == std::string::npos) throw ParseError("expected '<col>:<value>'", line_no);
      if (detail::parse_long(std::string_view(fields[k]).substr(0, colon), line_no) != static_cast<long>(k - 1))
        throw ParseError("column index out of order", line_no);
      row.push_back(detail::parse_double(std::string_view(fields[k]).substr(colon + 1), line_no));
    }
    rows.push_back(std::move(row));
  }
  g.n = rows.size();
  for (const auto& row : rows) {
    if (row.size() != g.n) throw ParseError("precomputed kernel is not square", line_no);
    g.values.insert(g.values.end(), row.begin(), row.end());
  }
  return g;
}

}  // namespace stedit
