#include "stedit/strings.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "text_util.hpp"

namespace stedit {

namespace {

bool valid_token(std::string_view t) {
  if (t.empty() || t == kGapToken) return false;
  return std::none_of(t.begin(), t.end(), [](char ch) {
    return ch == ',' || std::isspace(static_cast<unsigned char>(ch));
  });
}

}  // namespace

Alphabet::Alphabet(std::vector<std::string> symbols) {
  for (auto& s : symbols) {
    if (!valid_token(s)) throw InvalidArgument("invalid alphabet symbol '" + s + "'");
    if (find(s)) throw InvalidArgument("duplicate alphabet symbol '" + s + "'");
    symbols_.push_back(std::move(s));
  }
}

const std::string& Alphabet::token(Symbol s) const {
  static const std::string gap(kGapToken);
  if (s == kGap) return gap;
  if (s < 0 || static_cast<std::size_t>(s) > symbols_.size())
    throw UnknownSymbol("symbol index " + std::to_string(s) + " out of range");
  return symbols_[static_cast<std::size_t>(s) - 1];
}

std::optional<Symbol> Alphabet::find(std::string_view token) const {
  for (std::size_t i = 0; i < symbols_.size(); ++i)
    if (symbols_[i] == token) return static_cast<Symbol>(i + 1);
  return std::nullopt;
}

Symbol Alphabet::index(std::string_view token) const {
  if (auto s = find(token)) return *s;
  throw UnknownSymbol("symbol '" + std::string(token) + "' is not in the alphabet");
}

Symbol Alphabet::add(std::string_view token) {
  if (auto s = find(token)) return *s;
  if (!valid_token(token)) throw InvalidArgument("invalid alphabet symbol '" + std::string(token) + "'");
  symbols_.emplace_back(token);
  return static_cast<Symbol>(symbols_.size());
}

std::vector<std::string> tokenize(std::string_view text, Encoding encoding) {
  std::vector<std::string> out;
  if (encoding == Encoding::Chars) {
    for (char ch : text)
      if (!std::isspace(static_cast<unsigned char>(ch))) out.emplace_back(1, ch);
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Str::Str(AlphabetPtr alphabet, std::vector<Symbol> syms)
    : alphabet_(std::move(alphabet)), syms_(std::move(syms)) {
  const auto n = alphabet_ ? static_cast<Symbol>(alphabet_->size()) : 0;
  for (Symbol s : syms_)
    if (s < 1 || s > n) throw UnknownSymbol("symbol index " + std::to_string(s) + " outside alphabet");
}

std::string Str::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < syms_.size(); ++i) {
    if (i) out += ' ';
    out += alphabet_->token(syms_[i]);
  }
  return out;
}

Str parse_str(const AlphabetPtr& alphabet, std::string_view text, Encoding encoding) {
  std::vector<Symbol> syms;
  for (const auto& t : tokenize(text, encoding)) syms.push_back(alphabet->index(t));
  return Str(alphabet, std::move(syms));
}

void require_same_alphabet(const Str& a, const Str& b) {
  const auto& pa = a.alphabet();
  const auto& pb = b.alphabet();
  if (pa == pb) return;
  if ((!pa && a.empty()) || (!pb && b.empty())) return;
  if (!pa || !pb || !(*pa == *pb)) throw AlphabetMismatch("strings use different alphabets");
}

void require_alphabet(const Alphabet& expected, const Str& s) {
  const auto& p = s.alphabet();
  if (!p) {
    if (s.empty()) return;
    throw AlphabetMismatch("string has no alphabet");
  }
  if (p.get() != &expected && !(*p == expected))
    throw AlphabetMismatch("string alphabet differs from the model alphabet");
}

CostMatrix::CostMatrix(std::size_t dim, double fill) : dim_(dim), v_(dim * dim, fill) {}

CostMatrix::CostMatrix(std::size_t dim, std::vector<double> row_major)
    : dim_(dim), v_(std::move(row_major)) {
  if (v_.size() != dim * dim) throw DimensionMismatch("cost matrix needs dim*dim entries");
}

CostMatrix CostMatrix::unit(std::size_t dim) {
  CostMatrix c(dim, 1.0);
  for (std::size_t i = 0; i < dim; ++i) c(i, i) = 0.0;
  return c;
}

double CostMatrix::frobenius_norm() const {
  return std::sqrt(std::inner_product(v_.begin(), v_.end(), v_.begin(), 0.0));
}

long EditOpCounts::total() const { return std::accumulate(v_.begin(), v_.end(), 0L); }

namespace {

// Unit-cost DP table, (|x|+1)×(|y|+1) row-major.
std::vector<int> levenshtein_table(const Str& x, const Str& y) {
  const std::size_t n = x.size(), m = y.size(), w = m + 1;
  std::vector<int> d((n + 1) * w);
  for (std::size_t j = 0; j <= m; ++j) d[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    d[i * w] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = d[(i - 1) * w + j - 1] + (x[i - 1] != y[j - 1]);
      d[i * w + j] = std::min({sub, d[(i - 1) * w + j] + 1, d[i * w + j - 1] + 1});
    }
  }
  return d;
}

}  // namespace

int levenshtein(const Str& x, const Str& y) {
  require_same_alphabet(x, y);
  // two-row version of levenshtein_table
  const std::size_t m = y.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j)
      cur[j] = std::min({prev[j - 1] + (x[i - 1] != y[j - 1]), prev[j] + 1, cur[j - 1] + 1});
    std::swap(prev, cur);
  }
  return prev[m];
}

EditOpCounts levenshtein_script(const Str& x, const Str& y, ScriptTieBreak tie) {
  require_same_alphabet(x, y);
  const AlphabetPtr& a = x.alphabet() ? x.alphabet() : y.alphabet();
  EditOpCounts counts(a ? a->dim() : 1);
  const auto d = levenshtein_table(x, y);
  const std::size_t w = y.size() + 1;
  std::size_t i = x.size(), j = y.size();
  while (i > 0 || j > 0) {
    const int here = d[i * w + j];
    const bool can_sub = i > 0 && j > 0 && here == d[(i - 1) * w + j - 1] + (x[i - 1] != y[j - 1]);
    const bool can_del = i > 0 && here == d[(i - 1) * w + j] + 1;
    const bool can_ins = j > 0 && here == d[i * w + j - 1] + 1;
    if (can_sub) {
      ++counts(x[i - 1], y[j - 1]);
      --i, --j;
    } else if (tie == ScriptTieBreak::SubstituteDeleteInsert ? can_del : !can_ins) {
      ++counts(x[i - 1], kGap);
      --i;
    } else {
      ++counts(kGap, y[j - 1]);
      --j;
    }
  }
  return counts;
}

double edit_distance(const CostMatrix& c, const Str& x, const Str& y) {
  require_same_alphabet(x, y);
  if (const auto& a = x.alphabet() ? x.alphabet() : y.alphabet(); a && a->dim() != c.dim())
    throw DimensionMismatch("cost matrix dimension does not match the alphabet");
  const std::size_t m = y.size();
  std::vector<double> prev(m + 1), cur(m + 1);
  prev[0] = 0.0;
  for (std::size_t j = 1; j <= m; ++j) prev[j] = prev[j - 1] + c(kGap, y[j - 1]);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = prev[0] + c(x[i - 1], kGap);
    for (std::size_t j = 1; j <= m; ++j)
      cur[j] = std::min({prev[j - 1] + c(x[i - 1], y[j - 1]), prev[j] + c(x[i - 1], kGap),
                         cur[j - 1] + c(kGap, y[j - 1])});
    std::swap(prev, cur);
  }
  return prev[m];
}

double edit_function(const CostMatrix& c, const EditOpCounts& counts) {
  if (c.dim() != counts.dim()) throw DimensionMismatch("cost matrix and counts differ in dimension");
  const auto cv = c.values();
  const auto nv = counts.values();
  double e = 0.0;
  for (std::size_t k = 0; k < cv.size(); ++k)
    if (nv[k]) e += cv[k] * nv[k];
  return e;
}

double edit_similarity(const CostMatrix& c, const EditOpCounts& counts) {
  return 2.0 * std::exp(-edit_function(c, counts)) - 1.0;
}

double edit_similarity(const CostMatrix& c, const Str& x, const Str& y) {
  return edit_similarity(c, levenshtein_script(x, y));
}

std::string format_metadata(const Metadata& meta) {
  std::string out = "#";
  for (const auto& [k, v] : meta) out += " " + k + "=" + v;
  return out;
}

Metadata parse_metadata(std::string_view line) {
  line = detail::trim(line);
  if (!line.empty() && line.front() == '#') line.remove_prefix(1);
  Metadata meta;
  for (const auto& tok : tokenize(line, Encoding::Tokens)) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      meta.emplace_back(tok, "");
    else
      meta.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
  }
  return meta;
}

std::optional<std::string> metadata_value(const Metadata& meta, std::string_view key) {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  return std::nullopt;
}

void save_cost_matrix(std::ostream& out, const CostMatrix& c, const Alphabet& alphabet,
                      const Metadata& meta) {
  if (c.dim() != alphabet.dim()) throw DimensionMismatch("cost matrix dimension does not match the alphabet");
  if (!meta.empty()) out << format_metadata(meta) << '\n';
  for (std::size_t j = 0; j < c.dim(); ++j) out << (j ? "," : "") << alphabet.token(static_cast<Symbol>(j));
  out << '\n';
  for (std::size_t i = 0; i < c.dim(); ++i) {
    for (std::size_t j = 0; j < c.dim(); ++j) out << (j ? "," : "") << detail::format_double(c(i, j));
    out << '\n';
  }
}

LoadedCostMatrix load_cost_matrix(std::istream& in) {
  LoadedCostMatrix result;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (header.empty() && result.meta.empty()) result.meta = parse_metadata(t);
      continue;
    }
    auto cells = detail::split(t, ',');
    if (header.empty()) {
      for (auto& cell : cells) cell = std::string(detail::trim(cell));
      if (cells.front() != kGapToken) throw ParseError("cost matrix header must start with '$'", lineno);
      header = std::move(cells);
      continue;
    }
    if (cells.size() != header.size()) throw ParseError("row width differs from header", lineno);
    for (const auto& cell : cells) values.push_back(detail::parse_double(cell, lineno));
  }
  if (header.empty()) throw ParseError("empty cost matrix file", lineno);
  const std::size_t dim = header.size();
  if (values.size() != dim * dim) throw ParseError("expected " + std::to_string(dim) + " rows", lineno);
  result.alphabet = std::make_shared<Alphabet>(std::vector<std::string>(header.begin() + 1, header.end()));
  result.costs = CostMatrix(dim, std::move(values));
  for (double v : result.costs.values())
    if (!(v >= 0.0)) throw ParseError("cost entries must be nonnegative", 0);
  return result;
}

}  // namespace stedit
