#include "stedit/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "text_util.hpp"

namespace stedit {

Dataset load_dataset(std::istream& in, Encoding encoding, AlphabetPtr fixed) {
  struct Row {
    std::string label;
    std::vector<std::string> tokens;
    std::size_t line;
  };
  std::vector<Row> rows;
  auto building = fixed ? nullptr : std::make_shared<Alphabet>();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected 'label<TAB>string'", line_no);
    const auto label = detail::trim(std::string_view(line).substr(0, tab));
    if (label.empty()) throw ParseError("empty label", line_no);
    Row row{std::string(label), tokenize(std::string_view(line).substr(tab + 1), encoding), line_no};
    for (const auto& tok : row.tokens) {
      if (fixed) {
        if (!fixed->find(tok)) throw ParseError("unknown symbol '" + tok + "'", line_no);
      } else {
        try {
          building->add(tok);
        } catch (const Error& e) {
          throw ParseError(e.what(), line_no);
        }
      }
    }
    rows.push_back(std::move(row));
  }
  Dataset ds;
  ds.encoding = encoding;
  ds.alphabet = fixed ? fixed : AlphabetPtr(building);
  for (const auto& row : rows) {
    std::vector<Symbol> syms;
    for (const auto& tok : row.tokens) syms.push_back(ds.alphabet->index(tok));
    ds.items.push_back({Str(ds.alphabet, std::move(syms)), row.label});
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, Encoding encoding, AlphabetPtr fixed) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  auto ds = load_dataset(in, encoding, std::move(fixed));
  ds.source = path.string();
  return ds;
}

void save_dataset(std::ostream& out, std::span<const LabeledStr> items) {
  for (const auto& it : items) {
    if (it.label.empty() || it.label.find_first_of("\t\n") != std::string::npos || it.label.front() == '#')
      throw InvalidArgument("label '" + it.label + "' cannot be written to TSV");
    out << it.label << '\t' << it.str.to_string() << '\n';
  }
  if (!out) throw Error("dataset write failed");
}

void save_dataset(const std::filesystem::path& path, std::span<const LabeledStr> items) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  save_dataset(out, items);
}

Bitmap read_pbm(std::istream& in) {
  // Tokens are magic, width, height, then single pixel digits; '#' starts a
  // comment that runs to the end of the line.
  std::size_t line = 1;
  auto skip = [&] {
    for (int ch = in.peek(); ch != EOF; ch = in.peek()) {
      if (ch == '#') {
        while (ch != EOF && ch != '\n') ch = in.get();
        if (ch == '\n') ++line;
      } else if (std::isspace(ch)) {
        if (in.get() == '\n') ++line;
      } else {
        break;
      }
    }
  };
  auto read_word = [&] {
    skip();
    std::string w;
    for (int ch = in.peek(); ch != EOF && !std::isspace(ch) && ch != '#'; ch = in.peek()) w += static_cast<char>(in.get());
    return w;
  };
  if (read_word() != "P1") throw ParseError("only plain PBM (P1) bitmaps are supported", line);
  const long w = detail::parse_long(read_word(), line);
  const long h = detail::parse_long(read_word(), line);
  if (w <= 0 || h <= 0) throw ParseError("bitmap dimensions must be positive", line);
  Bitmap bm;
  bm.width = static_cast<std::size_t>(w);
  bm.height = static_cast<std::size_t>(h);
  bm.pixels.reserve(bm.width * bm.height);
  while (bm.pixels.size() < bm.width * bm.height) {
    skip();
    const int ch = in.get();
    if (ch == EOF) throw ParseError("bitmap ends after " + std::to_string(bm.pixels.size()) + " pixels", line);
    if (ch != '0' && ch != '1') throw ParseError(std::string("unexpected pixel character '") + static_cast<char>(ch) + "'", line);
    bm.pixels.push_back(static_cast<std::uint8_t>(ch - '0'));
  }
  return bm;
}

Bitmap read_pbm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_pbm(in);
}

namespace {

// Freeman direction vectors; y grows downwards.
constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};

int direction_of(int dx, int dy) {
  for (int d = 0; d < 8; ++d)
    if (kDx[d] == dx && kDy[d] == dy) return d;
  throw Error("not a neighbor offset");
}

}  // namespace

std::string freeman_chain(const Bitmap& bm) {
  long sx = -1, sy = -1;
  for (std::size_t y = 0; y < bm.height && sx < 0; ++y)
    for (std::size_t x = 0; x < bm.width; ++x)
      if (bm.at(static_cast<long>(x), static_cast<long>(y))) {
        sx = static_cast<long>(x);
        sy = static_cast<long>(y);
        break;
      }
  if (sx < 0) throw InvalidArgument("bitmap has no foreground pixel");

  std::string code;
  long x = sx, y = sy;
  int back = 4;  // the pixel west of the start is background
  int first = -1;
  // A closed 8-connected boundary visits each pixel at most 4 times.
  const std::size_t limit = 4 * bm.width * bm.height + 8;
  for (;;) {
    int move = -1;
    for (int k = 0; k < 8; ++k) {
      const int d = ((back - k) % 8 + 8) % 8;  // clockwise = decreasing code
      if (bm.at(x + kDx[d], y + kDy[d])) {
        move = d;
        break;
      }
    }
    if (move < 0) return code;  // isolated pixel
    if (first < 0) {
      first = move;
    } else if (x == sx && y == sy && move == first) {
      return code;
    }
    code += static_cast<char>('0' + move);
    if (code.size() > limit) throw Error("contour tracing did not terminate");
    // The last background cell examined becomes the next backtrack.
    const int prev = (move + 1) % 8;
    const int nx = static_cast<int>(kDx[prev] - kDx[move]), ny = static_cast<int>(kDy[prev] - kDy[move]);
    x += kDx[move];
    y += kDy[move];
    back = direction_of(nx, ny);
  }
}

AlphabetPtr freeman_alphabet() {
  static const AlphabetPtr alphabet =
      std::make_shared<const Alphabet>(std::vector<std::string>{"0", "1", "2", "3", "4", "5", "6", "7"});
  return alphabet;
}

Str freeman_encode(const Bitmap& bitmap, const AlphabetPtr& alphabet) {
  return parse_str(alphabet, freeman_chain(bitmap), Encoding::Chars);
}

namespace {

void check_fractions(const SplitFractions& f) {
  for (double v : {f.train, f.validation, f.test})
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("split fractions must lie in [0, 1]");
  if (f.train + f.validation + f.test > 1.0 + 1e-12) throw InvalidArgument("split fractions sum to more than 1");
}

std::size_t portion(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

// Cuts an already shuffled index list into the three parts.
void cut(std::span<const std::size_t> order, const SplitFractions& f, std::span<const LabeledStr> items, Split& out) {
  const std::size_t n = order.size();
  const std::size_t a = std::min(n, portion(f.train, n));
  const std::size_t b = std::min(n - a, portion(f.validation, n));
  const std::size_t c = std::min(n - a - b, portion(f.test, n));
  for (std::size_t i = 0; i < a; ++i) out.train.push_back(items[order[i]]);
  for (std::size_t i = a; i < a + b; ++i) out.validation.push_back(items[order[i]]);
  for (std::size_t i = a + b; i < a + b + c; ++i) out.test.push_back(items[order[i]]);
}

}  // namespace

Split split_dataset(std::span<const LabeledStr> items, const SplitFractions& fractions, std::uint64_t seed,
                    SplitMode mode) {
  check_fractions(fractions);
  std::mt19937_64 rng(seed);
  Split out;
  const std::size_t n = items.size();
  if (mode == SplitMode::Bootstrap) {
    if (n == 0) return out;
    const std::size_t draws = portion(fractions.train, n);
    std::vector<char> used(n, 0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < draws; ++i) {
      const std::size_t j = pick(rng);
      used[j] = 1;
      out.train.push_back(items[j]);
    }
    for (std::size_t j = 0; j < n; ++j)
      if (!used[j]) out.test.push_back(items[j]);
    return out;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  if (mode == SplitMode::Shuffle) {
    cut(order, fractions, items, out);
    return out;
  }
  for (const auto& label : label_order(items)) {
    std::vector<std::size_t> cls;
    for (std::size_t i : order)
      if (items[i].label == label) cls.push_back(i);
    cut(cls, fractions, items, out);
  }
  return out;
}

}  // namespace stedit
