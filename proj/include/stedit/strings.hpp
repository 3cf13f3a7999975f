#pragma once

// Alphabets, symbol strings, Levenshtein distance with a deterministic edit
// script, general cost-matrix edit distance and the linear edit function e_C
// with its exponential similarity K_C.

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stedit/error.hpp"

namespace stedit {

/// Index of a symbol inside an alphabet; 0 is always the gap symbol "$".
using Symbol = int;
inline constexpr Symbol kGap = 0;
inline constexpr std::string_view kGapToken = "$";

/// Ordered set of distinct text tokens. Symbol i (1-based) is the i-th token;
/// index 0 is reserved for the gap.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(std::vector<std::string> symbols);

  /// |Σ|, gap excluded.
  std::size_t size() const noexcept { return symbols_.size(); }
  /// |Σ| + 1, the side length of cost and probability tables.
  std::size_t dim() const noexcept { return symbols_.size() + 1; }
  bool empty() const noexcept { return symbols_.empty(); }

  const std::string& token(Symbol s) const;
  std::optional<Symbol> find(std::string_view token) const;
  /// Throws UnknownSymbol when absent.
  Symbol index(std::string_view token) const;
  /// Appends the token if new; returns its index either way.
  Symbol add(std::string_view token);

  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  bool operator==(const Alphabet& other) const { return symbols_ == other.symbols_; }

 private:
  std::vector<std::string> symbols_;
};

using AlphabetPtr = std::shared_ptr<const Alphabet>;

/// How a line of text is split into tokens.
enum class Encoding {
  Tokens,  ///< whitespace-separated tokens
  Chars,   ///< every non-whitespace character is one token
};

std::vector<std::string> tokenize(std::string_view text, Encoding encoding);

/// A string over an alphabet, stored as 1-based symbol indices.
class Str {
 public:
  Str() = default;
  Str(AlphabetPtr alphabet, std::vector<Symbol> syms);

  std::size_t size() const noexcept { return syms_.size(); }
  bool empty() const noexcept { return syms_.empty(); }
  /// 0-based access: (*this)[0] is the first symbol.
  Symbol operator[](std::size_t i) const { return syms_[i]; }
  std::span<const Symbol> syms() const noexcept { return syms_; }
  const AlphabetPtr& alphabet() const noexcept { return alphabet_; }

  /// Tokens joined by single spaces.
  std::string to_string() const;

  bool operator==(const Str& other) const { return syms_ == other.syms_; }

 private:
  AlphabetPtr alphabet_;
  std::vector<Symbol> syms_;
};

/// Encodes text over an existing alphabet; unknown tokens throw UnknownSymbol.
Str parse_str(const AlphabetPtr& alphabet, std::string_view text,
              Encoding encoding = Encoding::Tokens);

/// Throws AlphabetMismatch unless both strings can be compared. An empty
/// string without an alphabet is compatible with everything.
void require_same_alphabet(const Str& a, const Str& b);
void require_alphabet(const Alphabet& expected, const Str& s);

/// Square (|Σ|+1)×(|Σ|+1) matrix of nonnegative edit costs. Row/column 0 is
/// the gap: C(a,0) deletes a, C(0,b) inserts b, C(a,b) substitutes.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(std::size_t dim, double fill = 0.0);
  CostMatrix(std::size_t dim, std::vector<double> row_major);

  /// 0 on the diagonal, 1 elsewhere.
  static CostMatrix unit(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  double& operator()(std::size_t i, std::size_t j) { return v_[i * dim_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * dim_ + j]; }
  std::span<const double> values() const noexcept { return v_; }
  std::span<double> values() noexcept { return v_; }

  double frobenius_norm() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> v_;
};

/// Number of times each edit operation i→j appears in a script; same layout as
/// CostMatrix. Identity substitutions (a→a) are counted.
class EditOpCounts {
 public:
  EditOpCounts() = default;
  explicit EditOpCounts(std::size_t dim) : dim_(dim), v_(dim * dim, 0) {}

  std::size_t dim() const noexcept { return dim_; }
  int& operator()(std::size_t i, std::size_t j) { return v_[i * dim_ + j]; }
  int operator()(std::size_t i, std::size_t j) const { return v_[i * dim_ + j]; }
  std::span<const int> values() const noexcept { return v_; }

  /// Total number of operations in the script, identities included.
  long total() const;

  bool operator==(const EditOpCounts& other) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<int> v_;
};

/// Order in which the backtrace prefers moves when several are optimal.
enum class ScriptTieBreak {
  SubstituteDeleteInsert,  ///< default
  SubstituteInsertDelete,
};

int levenshtein(const Str& x, const Str& y);

/// Operation counts of one optimal unit-cost script from x to y, chosen by
/// backtracing from (|x|,|y|) with the given move preference at every cell.
EditOpCounts levenshtein_script(const Str& x, const Str& y,
                                ScriptTieBreak tie = ScriptTieBreak::SubstituteDeleteInsert);

/// Cheapest script cost under C (standard O(|x||y|) recurrence).
double edit_distance(const CostMatrix& c, const Str& x, const Str& y);

/// e_C = Σ C(i,j)·#(i,j): the price of a fixed script under C.
double edit_function(const CostMatrix& c, const EditOpCounts& counts);

/// K_C = 2·exp(-e_C) - 1 over the Levenshtein script of (x, y).
double edit_similarity(const CostMatrix& c, const Str& x, const Str& y);
double edit_similarity(const CostMatrix& c, const EditOpCounts& counts);

/// Ordered key=value pairs written on a "# " line in the CSV formats.
using Metadata = std::vector<std::pair<std::string, std::string>>;

std::string format_metadata(const Metadata& meta);
Metadata parse_metadata(std::string_view line);
std::optional<std::string> metadata_value(const Metadata& meta, std::string_view key);

/// CSV cost matrix: optional "# ..." metadata line, a header row of symbols
/// with "$" first, then |Σ|+1 numeric rows in header order.
void save_cost_matrix(std::ostream& out, const CostMatrix& c, const Alphabet& alphabet,
                      const Metadata& meta = {});

struct LoadedCostMatrix {
  CostMatrix costs;
  AlphabetPtr alphabet;
  Metadata meta;
};
LoadedCostMatrix load_cost_matrix(std::istream& in);

}  // namespace stedit
