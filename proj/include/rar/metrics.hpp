#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace rar {

struct EvalPoint {
  int64_t user = 0;
  double score = 0.0;
  int label = 0;  // 0/1
};

using EvalBatch = std::vector<EvalPoint>;

// Probability that a random positive outranks a random negative, ties 0.5.
// nullopt when the batch is single-class.
std::optional<double> auc(std::span<const EvalPoint> batch);

// Per-user AUC weighted by the user's example count; users whose labels are
// single-class are excluded from numerator and denominator. nullopt when no
// user group qualifies.
std::optional<double> gauc(std::span<const EvalPoint> batch);

}  // namespace rar
