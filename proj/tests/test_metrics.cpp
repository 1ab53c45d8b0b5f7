#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rar/metrics.hpp"
#include "rar/rng.hpp"

using namespace rar;

namespace {

EvalBatch make_batch(const std::vector<double>& scores, const std::vector<int>& labels,
                     const std::vector<int64_t>& users = {}) {
  EvalBatch b;
  for (size_t i = 0; i < scores.size(); ++i) {
    b.push_back({users.empty() ? 0 : users[i], scores[i], labels[i]});
  }
  return b;
}

}  // namespace

TEST_CASE("auc: perfect, inverted, tied") {
  CHECK(*auc(make_batch({0.9, 0.1}, {1, 0})) == 1.0);
  CHECK(*auc(make_batch({0.2, 0.8}, {1, 0})) == 0.0);
  // vs first negative: tie 0.5; vs second: loss -> (0.5 + 0) / 2
  CHECK(*auc(make_batch({0.5, 0.5, 0.7}, {1, 0, 0})) == 0.25);
}

TEST_CASE("auc: single-class is signaled as undefined") {
  CHECK_FALSE(auc(make_batch({0.5, 0.7}, {1, 1})).has_value());
  CHECK_FALSE(auc(make_batch({0.5, 0.7}, {0, 0})).has_value());
}

TEST_CASE("auc: rank implementation equals the all-pairs oracle with ties") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(199));
    std::vector<double> scores(static_cast<size_t>(n));
    std::vector<int> labels(static_cast<size_t>(n));
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < n; ++i) {
      // coarse grid forces frequent ties
      scores[static_cast<size_t>(i)] = static_cast<double>(rng.uniform_int(12)) / 11.0;
      labels[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(2));
      has_pos = has_pos || labels[static_cast<size_t>(i)] == 1;
      has_neg = has_neg || labels[static_cast<size_t>(i)] == 0;
    }
    if (!has_pos || !has_neg) continue;
    const double fast = *auc(make_batch(scores, labels));
    const double slow = testing::allpairs_auc(scores, labels);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
  }
}

TEST_CASE("auc: invariant under strictly increasing transforms") {
  Rng rng(18);
  std::vector<double> scores(60);
  std::vector<int> labels(60);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform(-2.0, 2.0);
    labels[i] = static_cast<int>(rng.uniform_int(2));
  }
  labels[0] = 1;
  labels[1] = 0;
  const double base = *auc(make_batch(scores, labels));
  std::vector<double> warped(scores);
  for (double& s : warped) s = std::exp(3.0 * s + 1.0);
  CHECK(*auc(make_batch(warped, labels)) == base);
}

TEST_CASE("auc: label flip complements when scores are distinct") {
  Rng rng(19);
  std::vector<double> scores(50);
  std::vector<int> labels(50);
  for (size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform() + static_cast<double>(i) * 1e-9;  // distinct
    labels[i] = static_cast<int>(rng.uniform_int(2));
  }
  labels[0] = 1;
  labels[1] = 0;
  std::vector<int> flipped(labels);
  for (int& y : flipped) y = 1 - y;
  CHECK(*auc(make_batch(scores, labels)) ==
        doctest::Approx(1.0 - *auc(make_batch(scores, flipped))).epsilon(1e-12));
}

TEST_CASE("gauc: degenerate single user equals auc") {
  const EvalBatch b = make_batch({0.9, 0.4, 0.6}, {1, 0, 0}, {5, 5, 5});
  CHECK(*gauc(b) == *auc(b));
}

TEST_CASE("gauc: weighted by example counts") {
  // user 1: four examples, AUC 1.0; user 2: two tied examples, AUC 0.5
  const EvalBatch b = make_batch({0.9, 0.8, 0.2, 0.1, 0.5, 0.5}, {1, 1, 0, 0, 1, 0},
                                 {1, 1, 1, 1, 2, 2});
  CHECK(*gauc(b) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("gauc: single-class users are excluded, all-excluded is undefined") {
  // user 2 is single-class and must not dilute user 1
  const EvalBatch mixed = make_batch({0.9, 0.1, 0.7, 0.8}, {1, 0, 1, 1}, {1, 1, 2, 2});
  CHECK(*gauc(mixed) == 1.0);

  const EvalBatch all_single = make_batch({0.9, 0.1, 0.7}, {1, 1, 0}, {1, 1, 2});
  CHECK_FALSE(gauc(all_single).has_value());
}
