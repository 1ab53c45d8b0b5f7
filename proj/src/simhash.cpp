#include "rar/simhash.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace rar {

ProjectionMatrix ProjectionMatrix::create(int in_dim, int m_bits, Rng& rng) {
  if (in_dim <= 0 || m_bits <= 0) {
    throw ValidationError("projection matrix dimensions must be positive");
  }
  ProjectionMatrix pm;
  pm.in_dim = in_dim;
  pm.m_bits = m_bits;
  pm.p = Mat(in_dim, m_bits);
  for (double& v : pm.p.a) v = rng.normal();
  return pm;
}

void FingerprintPool::push(const Fingerprint& f) {
  if (count == 0 && m_bits == 0) m_bits = f.m_bits;
  if (f.m_bits != m_bits) throw ValidationError("fingerprint width mismatch in pool");
  words.insert(words.end(), f.words.begin(), f.words.end());
  ++count;
}

namespace {

void set_bit(std::vector<uint64_t>& words, int m) { words[m / 64] |= uint64_t(1) << (m % 64); }

}  // namespace

Fingerprint fingerprint(std::span<const double> e, const ProjectionMatrix& p,
                        HashVariant variant) {
  if (static_cast<int>(e.size()) != p.in_dim) {
    throw ValidationError("fingerprint input width " + std::to_string(e.size()) +
                          " != projection in_dim " + std::to_string(p.in_dim));
  }
  if (!all_finite(e)) throw NumericError("fingerprint input must be finite");

  Vec x(e.begin(), e.end());
  double norm = std::sqrt(dot(x, x));
  if (norm > 0.0) {
    for (double& v : x) v /= norm;
  }

  Fingerprint f;
  f.m_bits = p.m_bits;
  f.words.assign(static_cast<size_t>((p.m_bits + 63) / 64), 0);

  if (variant == HashVariant::kStandard) {
    Vec proj(static_cast<size_t>(p.m_bits), 0.0);
    for (int n = 0; n < p.in_dim; ++n) {
      const double xn = x[static_cast<size_t>(n)];
      if (xn == 0.0) continue;
      const double* prow = p.p.a.data() + static_cast<size_t>(n) * p.m_bits;
      for (int m = 0; m < p.m_bits; ++m) proj[static_cast<size_t>(m)] += xn * prow[m];
    }
    for (int m = 0; m < p.m_bits; ++m) {
      if (proj[static_cast<size_t>(m)] > 0.0) set_bit(f.words, m);
    }
  } else {
    // sum of per-coordinate signs, thresholded at strictly positive
    for (int m = 0; m < p.m_bits; ++m) {
      int s = 0;
      for (int n = 0; n < p.in_dim; ++n) {
        const double t = x[static_cast<size_t>(n)] * p.p(n, m);
        if (t > 0.0) ++s;
        else if (t < 0.0) --s;
      }
      if (s > 0) set_bit(f.words, m);
    }
  }
  return f;
}

FingerprintPool fingerprint_rows(const Mat& rows, const ProjectionMatrix& p,
                                 HashVariant variant) {
  FingerprintPool pool;
  pool.m_bits = p.m_bits;
  pool.words.reserve(static_cast<size_t>(rows.rows) * pool.words_per_sig());
  for (int i = 0; i < rows.rows; ++i) pool.push(fingerprint(rows.row(i), p, variant));
  return pool;
}

FingerprintPool fingerprint_table(const EmbeddingTable& t, const ProjectionMatrix& p,
                                  HashVariant variant) {
  FingerprintPool pool;
  pool.m_bits = p.m_bits;
  pool.words.reserve(static_cast<size_t>(t.count) * pool.words_per_sig());
  for (int64_t i = 0; i < t.count; ++i) pool.push(fingerprint(t.row(i), p, variant));
  return pool;
}

int hamming(std::span<const uint64_t> a, std::span<const uint64_t> b) {
  int d = 0;
  for (size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
  return d;
}

int hamming(const Fingerprint& a, const Fingerprint& b) {
  if (a.m_bits != b.m_bits) throw ValidationError("hamming: fingerprint width mismatch");
  return hamming(std::span<const uint64_t>(a.words), std::span<const uint64_t>(b.words));
}

namespace {

// Bounded selection: keeps the k best (key, index) pairs under `worse`,
// then emits them sorted best-first. O(n log k).
template <typename Key, typename Worse>
std::vector<int> bounded_topk(size_t n, int k, Key&& key_of, Worse&& worse) {
  std::vector<std::pair<decltype(key_of(size_t(0))), int>> heap;
  heap.reserve(static_cast<size_t>(k));
  auto cmp = [&](const auto& a, const auto& b) { return worse(b, a); };  // max-heap on worst
  for (size_t i = 0; i < n; ++i) {
    auto cand = std::make_pair(key_of(i), static_cast<int>(i));
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end(), cmp);
    } else if (worse(heap.front(), cand)) {
      std::pop_heap(heap.begin(), heap.end(), cmp);
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end(), cmp);
    }
  }
  std::sort(heap.begin(), heap.end(), [&](const auto& a, const auto& b) { return worse(b, a); });
  std::vector<int> out;
  out.reserve(heap.size());
  for (const auto& [key, idx] : heap) out.push_back(idx);
  return out;
}

struct HammingWorse {
  // a worse than b: larger distance, then larger index
  bool operator()(const std::pair<int, int>& a, const std::pair<int, int>& b) const {
    if (a.first != b.first) return a.first > b.first;
    return a.second > b.second;
  }
};

struct ScoreWorse {
  // a worse than b: smaller score, then larger index
  bool operator()(const std::pair<double, int>& a, const std::pair<double, int>& b) const {
    if (a.first != b.first) return a.first < b.first;
    return a.second > b.second;
  }
};

void check_topk_args(size_t pool_size, int k) {
  if (pool_size == 0) throw ValidationError("top-k over an empty pool");
  if (k <= 0 || static_cast<size_t>(k) > pool_size) {
    throw ValidationError("top-k k=" + std::to_string(k) + " out of range for pool of " +
                          std::to_string(pool_size));
  }
}

}  // namespace

std::vector<int> hamming_topk(const Fingerprint& query, const FingerprintPool& pool, int k) {
  check_topk_args(pool.count, k);
  if (query.m_bits != pool.m_bits) throw ValidationError("hamming_topk: width mismatch");
  const std::span<const uint64_t> q(query.words);
  return bounded_topk(
      pool.count, k, [&](size_t i) { return hamming(q, pool.sig(i)); }, HammingWorse{});
}

std::vector<int> hamming_topk(const Fingerprint& query, const FingerprintPool& pool,
                              std::span<const int32_t> subset, int k) {
  check_topk_args(subset.size(), k);
  if (query.m_bits != pool.m_bits) throw ValidationError("hamming_topk: width mismatch");
  const std::span<const uint64_t> q(query.words);
  return bounded_topk(
      subset.size(), k,
      [&](size_t i) { return hamming(q, pool.sig(static_cast<size_t>(subset[i]))); },
      HammingWorse{});
}

std::vector<int> exact_topk(std::span<const double> query, const Mat& pool, int k) {
  check_topk_args(static_cast<size_t>(pool.rows), k);
  if (static_cast<int>(query.size()) != pool.cols) {
    throw ValidationError("exact_topk: query width mismatch");
  }
  return bounded_topk(
      static_cast<size_t>(pool.rows), k,
      [&](size_t i) { return dot(query, pool.row(static_cast<int>(i))); }, ScoreWorse{});
}

std::vector<int> exact_topk(std::span<const double> query, const EmbeddingTable& pool,
                            std::span<const int32_t> subset, int k) {
  check_topk_args(subset.size(), k);
  if (static_cast<int>(query.size()) != pool.dim) {
    throw ValidationError("exact_topk: query width mismatch");
  }
  return bounded_topk(
      subset.size(), k, [&](size_t i) { return dot(query, pool.row(subset[i])); }, ScoreWorse{});
}

namespace {

constexpr char kPoolMagic[8] = {'R', 'A', 'R', 'F', 'P', '1', '\0', '\0'};

void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_fingerprint_pool(const FingerprintPool& pool, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open for writing: " + path);
  os.write(kPoolMagic, 8);
  put_u32(os, static_cast<uint32_t>(pool.count));
  put_u32(os, static_cast<uint32_t>(pool.m_bits));
  for (uint64_t w : pool.words) put_u64(os, w);
  if (!os) throw ValidationError("write failed: " + path);
}

FingerprintPool load_fingerprint_pool(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kPoolMagic, 8) != 0) {
    throw ValidationError("bad fingerprint pool magic in " + path);
  }
  FingerprintPool pool;
  pool.count = get_u32(is);
  pool.m_bits = static_cast<int>(get_u32(is));
  if (pool.m_bits <= 0) throw ValidationError("bad fingerprint width in " + path);
  const size_t n_words = pool.count * static_cast<size_t>(pool.words_per_sig());
  pool.words.resize(n_words);
  for (size_t i = 0; i < n_words; ++i) pool.words[i] = get_u64(is);
  if (!is) throw ValidationError("truncated fingerprint pool: " + path);
  return pool;
}

}  // namespace rar
