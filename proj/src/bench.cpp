#include "rar/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "rar/common.hpp"
#include "rar/rng.hpp"
#include "rar/simhash.hpp"

namespace rar {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// One timed step: `batch` queries against the user-side pool and `batch`
// against the item-side pool (here both pools share storage of size n).
template <typename RunQuery>
double time_step(int batch, int threads, RunQuery&& run_query) {
  const auto t0 = Clock::now();
  if (threads <= 1) {
    for (int q = 0; q < 2 * batch; ++q) run_query(q);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (int q = t; q < 2 * batch; q += threads) run_query(q);
      });
    }
    for (auto& th : pool) th.join();
  }
  return ms_since(t0);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// least-squares slope of log(t) vs log(n)
double loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, t] : pts) {
    const double x = std::log(n);
    const double y = std::log(t);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(pts.size());
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

BenchReport bench_selection(const BenchOptions& opts) {
  if (opts.pool_sizes.empty()) throw ValidationError("bench: empty pool-size grid");
  if (opts.trials < 1) throw ValidationError("bench: trials must be positive");

  BenchReport report;
  std::vector<std::pair<double, double>> hamming_pts;
  double exact_at_max = 0.0;
  double hamming_at_max = 0.0;
  const size_t max_pool = *std::max_element(opts.pool_sizes.begin(), opts.pool_sizes.end());

  Rng root(opts.seed);
  ProjectionMatrix proj = ProjectionMatrix::create(opts.dim, opts.m_bits, root);

  for (size_t n : opts.pool_sizes) {
    if (n == 0 || static_cast<size_t>(opts.k) > n) {
      throw ValidationError("bench: pool size must be positive and >= k");
    }
    Rng r_pool = root.split(n);
    Mat pool(static_cast<int>(n), opts.dim);
    for (double& v : pool.a) v = r_pool.normal();

    const int n_queries = 2 * opts.batch;
    Mat queries(n_queries, opts.dim);
    for (double& v : queries.a) v = r_pool.normal();

    // fingerprints are built once per pool version, outside the timed region
    const FingerprintPool sigs = fingerprint_rows(pool, proj, HashVariant::kStandard);
    std::vector<Fingerprint> query_sigs;
    query_sigs.reserve(static_cast<size_t>(n_queries));
    for (int q = 0; q < n_queries; ++q) {
      query_sigs.push_back(fingerprint(queries.row(q), proj, HashVariant::kStandard));
    }

    // keep results observable so the work cannot be optimized away
    std::vector<int> results(static_cast<size_t>(n_queries), 0);

    auto run_backend = [&](const std::string& backend) {
      std::vector<double> times;
      const int warmup = 3;
      for (int trial = 0; trial < opts.trials + warmup; ++trial) {
        double ms;
        if (backend == "exact") {
          ms = time_step(opts.batch, opts.threads, [&](int q) {
            results[static_cast<size_t>(q)] = exact_topk(queries.row(q), pool, opts.k)[0];
          });
        } else {
          ms = time_step(opts.batch, opts.threads, [&](int q) {
            results[static_cast<size_t>(q)] =
                hamming_topk(query_sigs[static_cast<size_t>(q)], sigs, opts.k)[0];
          });
        }
        if (trial >= warmup) times.push_back(ms);
        volatile int sink = results[0];
        (void)sink;
      }
      BenchRow row;
      row.backend = backend;
      row.l = row.r = n;
      row.k_l = row.k_r = opts.k;
      row.m_bits = opts.m_bits;
      row.batch = opts.batch;
      row.median_ms = median(times);
      row.min_ms = *std::min_element(times.begin(), times.end());
      row.max_ms = *std::max_element(times.begin(), times.end());
      row.queries_per_s = 1000.0 * (2.0 * opts.batch) / row.median_ms;
      report.rows.push_back(row);
      return row.median_ms;
    };

    const double exact_ms = run_backend("exact");
    const double hamming_ms = run_backend("hamming");
    hamming_pts.emplace_back(static_cast<double>(n), hamming_ms);
    if (n == max_pool) {
      exact_at_max = exact_ms;
      hamming_at_max = hamming_ms;
    }
  }

  if (opts.pool_sizes.size() >= 2) {
    const double slope = loglog_slope(hamming_pts);
    report.hamming_loglog_slope = slope;
    report.slope_ok = slope <= 1.2;
    report.hamming_not_slower = hamming_at_max <= exact_at_max;
  }
  return report;
}

std::string format_report(const BenchReport& report) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-8s %9s %9s %4s %4s %7s %6s %12s %12s %12s %12s\n",
                "backend", "l", "r", "k_l", "k_r", "m_bits", "B", "median_ms", "min_ms",
                "max_ms", "queries/s");
  os << buf;
  for (const BenchRow& r : report.rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %9zu %9zu %4d %4d %7d %6d %12.4f %12.4f %12.4f %12.1f\n",
                  r.backend.c_str(), r.l, r.r, r.k_l, r.k_r, r.m_bits, r.batch, r.median_ms,
                  r.min_ms, r.max_ms, r.queries_per_s);
    os << buf;
  }
  if (report.hamming_loglog_slope) {
    std::snprintf(buf, sizeof(buf), "hamming log-log slope: %.3f (%s, threshold 1.2)\n",
                  *report.hamming_loglog_slope, *report.slope_ok ? "ok" : "FAIL");
    os << buf;
    os << "hamming <= exact at largest pool: " << (*report.hamming_not_slower ? "ok" : "FAIL")
       << '\n';
  }
  return os.str();
}

std::string format_report_tsv(const BenchReport& report) {
  std::ostringstream os;
  os << "backend\tl\tr\tk_l\tk_r\tm_bits\tB\tmedian_ms\tmin_ms\tmax_ms\tqueries_per_s\n";
  for (const BenchRow& r : report.rows) {
    os << r.backend << '\t' << r.l << '\t' << r.r << '\t' << r.k_l << '\t' << r.k_r << '\t'
       << r.m_bits << '\t' << r.batch << '\t' << r.median_ms << '\t' << r.min_ms << '\t'
       << r.max_ms << '\t' << r.queries_per_s << '\n';
  }
  return os.str();
}

}  // namespace rar
