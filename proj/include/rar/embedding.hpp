#pragma once

#include <cstdint>
#include <span>

#include "rar/common.hpp"
#include "rar/rng.hpp"

namespace rar {

enum class EntityKind { kUser, kItem };

// Dense id -> vector store. Ids are dense integers in [0, count); external
// string ids are mapped at ingestion time.
struct EmbeddingTable {
  EntityKind kind = EntityKind::kUser;
  int64_t count = 0;
  int dim = 0;
  Vec values;  // count x dim, row-major
  bool trainable = true;
  uint64_t version = 0;  // bumped on mutation; fingerprint caches key on it

  std::span<const double> row(int64_t id) const {
    if (id < 0 || id >= count) {
      throw ValidationError("embedding id out of range: " + std::to_string(id));
    }
    return {values.data() + static_cast<size_t>(id) * dim, static_cast<size_t>(dim)};
  }

  std::span<double> mutable_row(int64_t id) {
    if (id < 0 || id >= count) {
      throw ValidationError("embedding id out of range: " + std::to_string(id));
    }
    return {values.data() + static_cast<size_t>(id) * dim, static_cast<size_t>(dim)};
  }

  void bump_version() { ++version; }
};

inline EmbeddingTable init_embedding(EntityKind kind, int64_t count, int dim, double scale,
                                     Rng& rng) {
  if (count <= 0 || dim <= 0) throw ValidationError("embedding count and dim must be positive");
  if (scale <= 0.0) throw ValidationError("embedding init scale must be positive");
  EmbeddingTable t;
  t.kind = kind;
  t.count = count;
  t.dim = dim;
  t.values.resize(static_cast<size_t>(count) * dim);
  for (double& v : t.values) v = rng.uniform(-scale, scale);
  return t;
}

}  // namespace rar
