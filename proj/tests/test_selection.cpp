#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "rar/selection.hpp"

using namespace rar;

namespace {

struct Fixture {
  Config cfg;
  EmbeddingTable users;
  EmbeddingTable items;
  ProjectionMatrix proj;
  FingerprintCache user_fps;
  FingerprintCache item_fps;

  Fixture(int n_users, int n_items, int d1, int m_bits, uint64_t seed, bool unit_norm = false) {
    cfg.d1 = d1;
    cfg.m_bits = m_bits;
    Rng rng(seed);
    users = init_embedding(EntityKind::kUser, n_users, d1, 1.0, rng);
    items = init_embedding(EntityKind::kItem, n_items, d1, 1.0, rng);
    if (unit_norm) {
      normalize(users);
      normalize(items);
    }
    proj = ProjectionMatrix::create(d1, m_bits, rng);
  }

  static void normalize(EmbeddingTable& t) {
    for (int64_t i = 0; i < t.count; ++i) {
      auto row = t.mutable_row(i);
      const double n = std::sqrt(dot(row, row));
      for (double& v : row) v /= n;
    }
  }

  SelectionContext ctx() { return {&proj, &user_fps, &item_fps}; }

  std::vector<int32_t> all_users() const {
    std::vector<int32_t> v(static_cast<size_t>(users.count));
    std::iota(v.begin(), v.end(), 0);
    return v;
  }
  std::vector<int32_t> all_items() const {
    std::vector<int32_t> v(static_cast<size_t>(items.count));
    std::iota(v.begin(), v.end(), 0);
    return v;
  }
};

}  // namespace

TEST_CASE("select: a pool of one is a forced choice under every backend") {
  Fixture f(4, 4, 8, 64, 21);
  f.cfg.k_l = 1;
  f.cfg.k_r = 1;
  const std::vector<int32_t> la = {2};
  const std::vector<int32_t> rc = {3};
  for (Backend backend : {Backend::kExact, Backend::kSimhash}) {
    auto ctx = f.ctx();
    const CandidateBundle b = select(f.users.row(0), f.items.row(1), la, rc, f.users, f.items,
                                     backend, f.cfg, &ctx);
    CHECK(b.selected_user_ids == std::vector<int32_t>{2});
    CHECK(b.selected_item_ids == std::vector<int32_t>{3});
    for (int t = 0; t < 8; ++t) CHECK(b.e_l_sel(0, t) == f.users.row(2)[static_cast<size_t>(t)]);
  }
}

TEST_CASE("select: the target item ranks first in its own unit-norm recall pool") {
  Fixture f(10, 30, 8, 64, 22, /*unit_norm=*/true);
  f.cfg.k_l = 2;
  f.cfg.k_r = 5;
  std::vector<int32_t> la = {0, 1, 2, 3};
  std::vector<int32_t> rc = f.all_items();
  const int32_t target = 17;
  const CandidateBundle b =
      select(f.users.row(0), f.items.row(target), la, rc, f.users, f.items, Backend::kExact, f.cfg);
  CHECK(b.selected_item_ids[0] == target);
}

TEST_CASE("select: exact backend equals the argsort oracle") {
  Fixture f(200, 50, 8, 64, 23);
  f.cfg.k_l = 8;
  f.cfg.k_r = 4;
  const auto la = f.all_users();
  const std::vector<int32_t> rc = {4, 9, 14, 19, 24, 29};
  const CandidateBundle b =
      select(f.users.row(7), f.items.row(3), la, rc, f.users, f.items, Backend::kExact, f.cfg);

  std::vector<double> scores(la.size());
  for (size_t j = 0; j < la.size(); ++j) scores[j] = dot(f.users.row(7), f.users.row(la[j]));
  const auto expect = testing::naive_topk_desc(scores, 8);
  for (int j = 0; j < 8; ++j) {
    CHECK(b.selected_user_ids[static_cast<size_t>(j)] == la[static_cast<size_t>(expect[static_cast<size_t>(j)])]);
  }
  CHECK(b.scores_users.size() == la.size());
  CHECK(b.scores_items.size() == rc.size());
}

TEST_CASE("select: pure function of its inputs") {
  Fixture f(50, 50, 8, 64, 24);
  f.cfg.k_l = 4;
  f.cfg.k_r = 4;
  const auto la = f.all_users();
  const auto rc = f.all_items();
  for (Backend backend : {Backend::kExact, Backend::kSimhash}) {
    auto ctx = f.ctx();
    const CandidateBundle a =
        select(f.users.row(1), f.items.row(2), la, rc, f.users, f.items, backend, f.cfg, &ctx);
    const CandidateBundle b =
        select(f.users.row(1), f.items.row(2), la, rc, f.users, f.items, backend, f.cfg, &ctx);
    CHECK(a.selected_user_ids == b.selected_user_ids);
    CHECK(a.selected_item_ids == b.selected_item_ids);
    CHECK(a.e_l_sel.a == b.e_l_sel.a);
    CHECK(a.scores_users == b.scores_users);
  }
}

TEST_CASE("select: user channel never reads item embeddings") {
  Fixture f(50, 50, 8, 64, 25);
  f.cfg.k_l = 5;
  f.cfg.k_r = 5;
  const auto la = f.all_users();
  const auto rc = f.all_items();
  const CandidateBundle before =
      select(f.users.row(1), f.items.row(2), la, rc, f.users, f.items, Backend::kExact, f.cfg);

  const Vec target_item(f.items.row(2).begin(), f.items.row(2).end());
  for (int64_t i = 0; i < f.items.count; ++i) {
    if (i == 2) continue;
    for (double& v : f.items.mutable_row(i)) v = -v * 3.0;
  }
  const CandidateBundle after =
      select(f.users.row(1), target_item, la, rc, f.users, f.items, Backend::kExact, f.cfg);
  CHECK(before.selected_user_ids == after.selected_user_ids);
  CHECK(before.scores_users == after.scores_users);
}

TEST_CASE("select: ablation=select truncates the pools") {
  Fixture f(30, 30, 8, 64, 26);
  f.cfg.k_l = 3;
  f.cfg.k_r = 2;
  f.cfg.ablation = Ablation::kSelect;
  const std::vector<int32_t> la = {9, 5, 7, 1, 2};
  const std::vector<int32_t> rc = {11, 3, 8};
  const CandidateBundle b =
      select(f.users.row(0), f.items.row(0), la, rc, f.users, f.items, Backend::kExact, f.cfg);
  CHECK(b.selected_user_ids == std::vector<int32_t>{9, 5, 7});
  CHECK(b.selected_item_ids == std::vector<int32_t>{11, 3});
}

TEST_CASE("select: empty pool and oversized k are rejected") {
  Fixture f(10, 10, 8, 64, 27);
  f.cfg.k_l = 2;
  f.cfg.k_r = 2;
  const std::vector<int32_t> la = {1, 2};
  const std::vector<int32_t> rc = {1, 2};
  CHECK_THROWS_AS(select(f.users.row(0), f.items.row(0), {}, rc, f.users, f.items,
                         Backend::kExact, f.cfg),
                  ValidationError);
  f.cfg.k_r = 3;
  CHECK_THROWS_AS(select(f.users.row(0), f.items.row(0), la, rc, f.users, f.items,
                         Backend::kExact, f.cfg),
                  ValidationError);
}

TEST_CASE("selection_recall_at_k: bounds and mismatch") {
  Fixture f(20, 20, 8, 64, 28);
  f.cfg.k_l = 4;
  f.cfg.k_r = 4;
  const auto la = f.all_users();
  const auto rc = f.all_items();
  const CandidateBundle a =
      select(f.users.row(0), f.items.row(0), la, rc, f.users, f.items, Backend::kExact, f.cfg);
  const SelectionRecall self = selection_recall_at_k(a, a);
  CHECK(self.users == 1.0);
  CHECK(self.items == 1.0);

  CandidateBundle disjoint = a;
  for (auto& id : disjoint.selected_user_ids) id += 100;
  for (auto& id : disjoint.selected_item_ids) id += 100;
  const SelectionRecall none = selection_recall_at_k(a, disjoint);
  CHECK(none.users == 0.0);
  CHECK(none.items == 0.0);

  CandidateBundle smaller = a;
  smaller.selected_user_ids.pop_back();
  CHECK_THROWS_AS(selection_recall_at_k(a, smaller), ValidationError);
}

TEST_CASE("selection_recall_at_k: wider fingerprints recover more of the exact set") {
  const int n = 1000;
  const int k = 10;
  double mean16 = 0.0, mean256 = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    for (int m_bits : {16, 256}) {
      Fixture f(n, n, 32, m_bits, 3000 + static_cast<uint64_t>(trial), /*unit_norm=*/true);
      f.cfg.k_l = k;
      f.cfg.k_r = k;
      const auto la = f.all_users();
      const auto rc = f.all_items();
      auto ctx = f.ctx();
      const CandidateBundle approx = select(f.users.row(0), f.items.row(0), la, rc, f.users,
                                            f.items, Backend::kSimhash, f.cfg, &ctx);
      const CandidateBundle exact = select(f.users.row(0), f.items.row(0), la, rc, f.users,
                                           f.items, Backend::kExact, f.cfg);
      const SelectionRecall rec = selection_recall_at_k(approx, exact);
      (m_bits == 16 ? mean16 : mean256) += 0.5 * (rec.users + rec.items);
    }
  }
  mean16 /= 20.0;
  mean256 /= 20.0;
  MESSAGE("mean selection recall@10: m_bits=16 -> ", mean16, ", m_bits=256 -> ", mean256);
  CHECK(mean256 >= mean16);
}
