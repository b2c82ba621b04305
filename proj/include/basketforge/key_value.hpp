#pragma once

#include <compare>
#include <string>

namespace basketforge {

/// Engine-level record. Both halves are opaque text; typed encoding is the
/// caller's business.
struct KeyValue {
  std::string key;
  std::string value;

  auto operator<=>(const KeyValue&) const = default;
  bool operator==(const KeyValue&) const = default;
};

}  // namespace basketforge
