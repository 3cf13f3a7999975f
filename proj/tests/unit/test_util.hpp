#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "stedit/strings.hpp"

namespace testutil {

inline stedit::Str chars(const stedit::AlphabetPtr& alphabet, const std::string& text) {
  return stedit::parse_str(alphabet, text, stedit::Encoding::Chars);
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("stedit_" + tag + "_" + std::to_string(rng() % 1000000007));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
