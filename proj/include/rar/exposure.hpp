#pragma once

#include <cstdint>
#include <unordered_set>

#include "rar/common.hpp"

namespace rar {

// Exact membership log of (user, item) exposure pairs.
struct ExposureLog {
  std::unordered_set<uint64_t> pairs;

  static uint64_t key(int64_t user, int64_t item) {
    if (user < 0 || item < 0 || user > 0xffffffffLL || item > 0xffffffffLL) {
      throw ValidationError("exposure ids must fit in 32 bits");
    }
    return (static_cast<uint64_t>(user) << 32) | static_cast<uint64_t>(item);
  }

  void add(int64_t user, int64_t item) { pairs.insert(key(user, item)); }

  bool exposed(int64_t user, int64_t item) const { return pairs.count(key(user, item)) > 0; }

  size_t size() const { return pairs.size(); }
};

}  // namespace rar
