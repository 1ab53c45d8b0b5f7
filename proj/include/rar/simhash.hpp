#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rar/common.hpp"
#include "rar/config.hpp"
#include "rar/embedding.hpp"
#include "rar/rng.hpp"

namespace rar {

// Packing word for bit signatures. Training configs require m_bits to be a
// multiple of this; the functions below accept any positive width and keep
// unused tail bits zero.
inline constexpr int kFingerprintWordBits = 64;

// Random-hyperplane projections, fixed at construction. Immutable afterwards
// so fingerprints stay comparable.
struct ProjectionMatrix {
  int in_dim = 0;
  int m_bits = 0;
  Mat p;  // in_dim x m_bits

  static ProjectionMatrix create(int in_dim, int m_bits, Rng& rng);
};

struct Fingerprint {
  int m_bits = 0;
  std::vector<uint64_t> words;

  bool bit(int m) const { return (words[m / 64] >> (m % 64)) & 1u; }
};

// Contiguous signature storage, one fixed-width row per entry.
struct FingerprintPool {
  int m_bits = 0;
  size_t count = 0;
  std::vector<uint64_t> words;

  int words_per_sig() const { return (m_bits + 63) / 64; }
  std::span<const uint64_t> sig(size_t i) const {
    const size_t w = static_cast<size_t>(words_per_sig());
    return {words.data() + i * w, w};
  }
  void push(const Fingerprint& f);
};

// bit m = 1 iff the projection onto hyperplane m is strictly positive.
// standard: sign of the summed projection; literal: sum of per-coordinate
// signs, thresholded the same way. The input is L2-normalized internally
// (both variants are invariant to positive rescaling, so this only protects
// the projection sums from magnitude blow-up).
Fingerprint fingerprint(std::span<const double> e, const ProjectionMatrix& p,
                        HashVariant variant);

FingerprintPool fingerprint_rows(const Mat& rows, const ProjectionMatrix& p,
                                 HashVariant variant);
FingerprintPool fingerprint_table(const EmbeddingTable& t, const ProjectionMatrix& p,
                                  HashVariant variant);

int hamming(const Fingerprint& a, const Fingerprint& b);
int hamming(std::span<const uint64_t> a, std::span<const uint64_t> b);

// Indices of the k pool entries nearest to the query by hamming distance,
// ascending; ties broken by ascending index.
std::vector<int> hamming_topk(const Fingerprint& query, const FingerprintPool& pool, int k);
std::vector<int> hamming_topk(const Fingerprint& query, const FingerprintPool& pool,
                              std::span<const int32_t> subset, int k);

// Indices of the k rows with the largest inner product against the query,
// descending; ties broken by ascending index.
std::vector<int> exact_topk(std::span<const double> query, const Mat& pool, int k);
std::vector<int> exact_topk(std::span<const double> query, const EmbeddingTable& pool,
                            std::span<const int32_t> subset, int k);

// Raw little-endian words preceded by a 16-byte header
// (magic "RARFP1\0\0", u32 count, u32 m_bits).
void save_fingerprint_pool(const FingerprintPool& pool, const std::string& path);
FingerprintPool load_fingerprint_pool(const std::string& path);

// Rebuilds the pool whenever the table version moves.
struct FingerprintCache {
  uint64_t table_version = ~uint64_t(0);
  FingerprintPool pool;

  const FingerprintPool& get(const EmbeddingTable& t, const ProjectionMatrix& p,
                             HashVariant variant) {
    if (table_version != t.version || pool.count != static_cast<size_t>(t.count)) {
      pool = fingerprint_table(t, p, variant);
      table_version = t.version;
    }
    return pool;
  }
};

}  // namespace rar
