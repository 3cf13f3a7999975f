#pragma once

// Labeled strings shared by the classifiers, pairing and dataset code.

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "stedit/strings.hpp"

namespace stedit {

struct LabeledStr {
  Str str;
  std::string label;

  bool operator==(const LabeledStr&) const = default;
};

/// Distinct labels in first-appearance order; this is the "label order" used
/// by every tie-break.
inline std::vector<std::string> label_order(std::span<const LabeledStr> items) {
  std::vector<std::string> order;
  for (const auto& it : items)
    if (std::find(order.begin(), order.end(), it.label) == order.end()) order.push_back(it.label);
  return order;
}

}  // namespace stedit
