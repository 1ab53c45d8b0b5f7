#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rar {

struct BenchRow {
  std::string backend;
  size_t l = 0;
  size_t r = 0;
  int k_l = 0;
  int k_r = 0;
  int m_bits = 0;
  int batch = 0;
  double median_ms = 0.0;  // per step (one batch of selections over both pools)
  double min_ms = 0.0;
  double max_ms = 0.0;
  double queries_per_s = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  // verdicts are absent for degenerate grids (fewer than two pool sizes)
  std::optional<double> hamming_loglog_slope;
  std::optional<bool> slope_ok;           // slope <= 1.2
  std::optional<bool> hamming_not_slower; // hamming median <= exact median at max pool
};

struct BenchOptions {
  std::vector<size_t> pool_sizes = {10000, 20000, 40000, 80000, 160000};
  int dim = 64;
  int k = 10;
  int m_bits = 64;
  int batch = 64;     // selections per timed step, per side
  int trials = 30;    // median over these; a few warmup steps are discarded
  int threads = 1;
  uint64_t seed = 7;
};

BenchReport bench_selection(const BenchOptions& opts);

std::string format_report(const BenchReport& report);
std::string format_report_tsv(const BenchReport& report);

}  // namespace rar
