#include "rar/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace rar {

std::optional<double> auc(std::span<const EvalPoint> batch) {
  const size_t n = batch.size();
  size_t n_pos = 0;
  for (const auto& p : batch) n_pos += p.label ? 1 : 0;
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return batch[a].score < batch[b].score; });

  // midranks over tied scores; rank sum of positives gives the U statistic
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && batch[order[j + 1]].score == batch[order[i]].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (size_t t = i; t <= j; ++t) {
      if (batch[order[t]].label) pos_rank_sum += midrank;
    }
    i = j + 1;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::optional<double> gauc(std::span<const EvalPoint> batch) {
  std::vector<int> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (batch[a].user != batch[b].user) return batch[a].user < batch[b].user;
    return a < b;
  });

  double weighted_sum = 0.0;
  double weight_total = 0.0;
  size_t i = 0;
  EvalBatch group;
  while (i < order.size()) {
    group.clear();
    const int64_t user = batch[order[i]].user;
    while (i < order.size() && batch[order[i]].user == user) {
      group.push_back(batch[order[i]]);
      ++i;
    }
    if (auto a = auc(group)) {
      weighted_sum += *a * static_cast<double>(group.size());
      weight_total += static_cast<double>(group.size());
    }
  }
  if (weight_total == 0.0) return std::nullopt;
  return weighted_sum / weight_total;
}

}  // namespace rar
