#pragma once

// Labeled string datasets, PBM bitmaps with Freeman chain coding, and
// seeded train/validation/test splits.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stedit/sample.hpp"

namespace stedit {

struct Dataset {
  std::vector<LabeledStr> items;
  AlphabetPtr alphabet;
  std::string source;
  Encoding encoding = Encoding::Tokens;

  std::size_t size() const noexcept { return items.size(); }
};

/// TSV "label<TAB>string", '#' comments and blank lines skipped. With a fixed
/// alphabet, unknown symbols are parse errors; otherwise the alphabet is
/// built in first-appearance order.
Dataset load_dataset(std::istream& in, Encoding encoding = Encoding::Tokens, AlphabetPtr fixed = nullptr);
Dataset load_dataset(const std::filesystem::path& path, Encoding encoding = Encoding::Tokens,
                     AlphabetPtr fixed = nullptr);

/// Strings are written as space-separated tokens.
void save_dataset(std::ostream& out, std::span<const LabeledStr> items);
void save_dataset(const std::filesystem::path& path, std::span<const LabeledStr> items);

struct Bitmap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  ///< row-major, 1 = foreground

  bool at(long x, long y) const {
    return x >= 0 && y >= 0 && static_cast<std::size_t>(x) < width && static_cast<std::size_t>(y) < height &&
           pixels[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] != 0;
  }
};

/// Plain PBM (P1).
Bitmap read_pbm(std::istream& in);
Bitmap read_pbm(const std::filesystem::path& path);

/// Outer contour as Freeman digits: 0 = East, counting counterclockwise.
/// Moore boundary following, 8-connected, clockwise, from the first
/// foreground pixel in raster order; stops back at the start pixel when the
/// next move repeats the first one. A single pixel gives "".
std::string freeman_chain(const Bitmap& bitmap);

/// Alphabet "0".."7".
AlphabetPtr freeman_alphabet();
Str freeman_encode(const Bitmap& bitmap, const AlphabetPtr& alphabet = freeman_alphabet());

enum class SplitMode { Shuffle, Stratified, Bootstrap };

struct SplitFractions {
  double train = 1.0;
  double validation = 0.0;
  double test = 0.0;
};

struct Split {
  std::vector<LabeledStr> train, validation, test;
};

/// Seeded shuffle then contiguous cut. Stratified cuts every class
/// separately. Bootstrap draws round(train·n) items with replacement and puts
/// the out-of-bag items in test.
Split split_dataset(std::span<const LabeledStr> items, const SplitFractions& fractions, std::uint64_t seed,
                    SplitMode mode = SplitMode::Shuffle);

}  // namespace stedit
