#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include "rar/data.hpp"
#include "rar/rng.hpp"

using namespace rar;

namespace {

namespace fs = std::filesystem;

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.n_users = 80;
  s.n_items = 150;
  s.latent_dim = 6;
  s.exposure_depth = 8;
  s.r = 20;
  s.l = 12;
  s.seed = 5;
  return s;
}

std::string temp_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("rar_data_" + tag);
  fs::remove_all(dir);
  return dir.string();
}

bool same_dataset(const Dataset& a, const Dataset& b) {
  if (a.n_users != b.n_users || a.n_items != b.n_items) return false;
  if (a.interactions.size() != b.interactions.size()) return false;
  for (size_t i = 0; i < a.interactions.size(); ++i) {
    const auto& x = a.interactions[i];
    const auto& y = b.interactions[i];
    if (x.user != y.user || x.item != y.item || x.click != y.click || x.split != y.split) {
      return false;
    }
  }
  return a.recall_sets == b.recall_sets && a.lookalike_sets == b.lookalike_sets &&
         a.exposure_log.pairs == b.exposure_log.pairs;
}

}  // namespace

TEST_CASE("generate: noiseless recall sets are the true top-r") {
  SyntheticSpec spec = small_spec();
  spec.noise = 0.0;
  Mat u_lat, v_lat;
  const Dataset ds = generate(spec, &u_lat, &v_lat);

  for (int32_t u = 0; u < spec.n_users; ++u) {
    std::vector<double> scores(static_cast<size_t>(spec.n_items));
    for (int32_t i = 0; i < spec.n_items; ++i) {
      scores[static_cast<size_t>(i)] = dot(u_lat.row(u), v_lat.row(i));
    }
    const auto expect = testing::naive_topk_desc(scores, spec.r);
    for (int j = 0; j < spec.r; ++j) {
      CHECK(ds.recall_sets[static_cast<size_t>(u)][static_cast<size_t>(j)] ==
            expect[static_cast<size_t>(j)]);
    }
  }
}

TEST_CASE("generate: exposure depth == r saturates the recall sets") {
  SyntheticSpec spec = small_spec();
  spec.exposure_depth = spec.r;
  const Dataset ds = generate(spec);
  CHECK(ds.exposure_log.size() ==
        static_cast<size_t>(spec.n_users) * static_cast<size_t>(spec.r));
  for (int32_t u = 0; u < spec.n_users; ++u) {
    for (int32_t i : ds.recall_sets[static_cast<size_t>(u)]) CHECK(ds.exposure_log.exposed(u, i));
  }
}

TEST_CASE("generate: strongly negative bias suppresses clicks") {
  SyntheticSpec spec;
  spec.n_users = 2000;
  spec.n_items = 1000;
  spec.latent_dim = 6;
  spec.click_bias = -10.0;
  spec.exposure_depth = 50;
  spec.r = 60;
  spec.l = 5;
  spec.seed = 6;
  const Dataset ds = generate(spec);
  REQUIRE(ds.interactions.size() == 100000);
  size_t clicks = 0;
  for (const Interaction& it : ds.interactions) clicks += it.click;
  CHECK(static_cast<double>(clicks) / static_cast<double>(ds.interactions.size()) < 0.01);
}

TEST_CASE("generate: clicks exist only on exposed pairs; pools are duplicate-free") {
  const Dataset ds = generate(small_spec());
  for (const Interaction& it : ds.interactions) {
    CHECK(ds.exposure_log.exposed(it.user, it.item));
  }
  for (const auto& sets : {ds.recall_sets, ds.lookalike_sets}) {
    for (const auto& s : sets) {
      std::set<int32_t> uniq(s.begin(), s.end());
      CHECK(uniq.size() == s.size());
    }
  }
  // all three splits appear
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    CHECK(!ds.split_indices(s).empty());
  }
}

TEST_CASE("generate: recall sets are informative about latent preference") {
  SyntheticSpec spec = small_spec();
  spec.n_users = 200;
  Mat u_lat, v_lat;
  const Dataset ds = generate(spec, &u_lat, &v_lat);
  Rng rng(17);

  int informative = 0;
  for (int32_t u = 0; u < spec.n_users; ++u) {
    double recall_mean = 0.0;
    for (int32_t i : ds.recall_sets[static_cast<size_t>(u)]) {
      recall_mean += dot(u_lat.row(u), v_lat.row(i));
    }
    recall_mean /= static_cast<double>(spec.r);
    double random_mean = 0.0;
    for (int j = 0; j < spec.r; ++j) {
      random_mean += dot(u_lat.row(u), v_lat.row(rng.uniform_int(spec.n_items)));
    }
    random_mean /= static_cast<double>(spec.r);
    informative += recall_mean > random_mean ? 1 : 0;
  }
  CHECK(informative >= static_cast<int>(0.95 * spec.n_users));
}

TEST_CASE("generate: noise pools replace the sets but keep the log") {
  SyntheticSpec spec = small_spec();
  const Dataset informative = generate(spec);
  spec.noise_pools = true;
  const Dataset noisy = generate(spec);

  CHECK(noisy.exposure_log.pairs == informative.exposure_log.pairs);
  CHECK(noisy.recall_sets != informative.recall_sets);
  for (const auto& s : noisy.recall_sets) {
    CHECK(s.size() == static_cast<size_t>(spec.r));
    for (int32_t i : s) {
      CHECK(i >= 0);
      CHECK(i < spec.n_items);
    }
  }
}

TEST_CASE("generate: deterministic per seed") {
  const SyntheticSpec spec = small_spec();
  CHECK(same_dataset(generate(spec), generate(spec)));
  SyntheticSpec other = spec;
  other.seed += 1;
  CHECK_FALSE(same_dataset(generate(spec), generate(other)));
}

TEST_CASE("generate: infeasible specs are rejected") {
  SyntheticSpec spec = small_spec();
  spec.r = spec.n_items + 1;
  CHECK_THROWS_AS(generate(spec), ValidationError);
  spec = small_spec();
  spec.exposure_depth = spec.r + 1;
  CHECK_THROWS_AS(generate(spec), ValidationError);
}

TEST_CASE("save/load: round-trip identity") {
  const std::string dir = temp_dir("roundtrip");
  const Dataset ds = generate(small_spec());
  save_dataset(ds, dir);
  const Dataset back = load_dataset(dir);
  CHECK(same_dataset(ds, back));
  fs::remove_all(dir);
}

TEST_CASE("load: malformed rows are reported with their line number") {
  const std::string dir = temp_dir("malformed");
  const Dataset ds = generate(small_spec());
  save_dataset(ds, dir);

  {
    std::ofstream os(dir + "/interactions.csv", std::ios::binary | std::ios::trunc);
    os << "user_id,item_id,click,split\n0,1,1,train\n0,2,2,train\n";
  }
  CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("interactions.csv:3"),
                       ValidationError);
  {
    std::ofstream os(dir + "/interactions.csv", std::ios::binary | std::ios::trunc);
    os << "user_id,item_id,click,split\n0,999999,1,train\n";
  }
  CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("unknown item id"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("load: hand-written fixture parses to the exact triplets") {
  const std::string dir = temp_dir("fixture");
  fs::create_directories(dir);
  std::ofstream(dir + "/meta.txt") << "n_users=3\nn_items=4\n";
  std::ofstream(dir + "/interactions.csv")
      << "user_id,item_id,click,split\n0,1,1,train\n1,2,0,val\n2,3,1,test\n";
  std::ofstream(dir + "/recall.txt") << "0,1|2\n1,2|3\n2,0|1\n";
  std::ofstream(dir + "/lookalike.txt") << "0,0|1\n1,1|2\n2,2|0\n";
  std::ofstream(dir + "/exposure.txt") << "0,1\n1,2\n2,3\n";

  const Dataset ds = load_dataset(dir);
  REQUIRE(ds.interactions.size() == 3);
  CHECK(ds.interactions[0].user == 0);
  CHECK(ds.interactions[0].item == 1);
  CHECK(ds.interactions[0].click == 1);
  CHECK(ds.interactions[0].split == Split::kTrain);
  CHECK(ds.interactions[1].split == Split::kVal);
  CHECK(ds.interactions[2].split == Split::kTest);
  CHECK(ds.recall_sets[1] == std::vector<int32_t>{2, 3});
  CHECK(ds.lookalike_sets[2] == std::vector<int32_t>{2, 0});
  CHECK(ds.exposure_log.exposed(1, 2));
  CHECK_FALSE(ds.exposure_log.exposed(2, 1));
  fs::remove_all(dir);
}

TEST_CASE("build_sets_twotower: recovers block structure") {
  // users 0-9 click only items 0-9, users 10-19 click only items 10-19
  Dataset ds;
  ds.n_users = 20;
  ds.n_items = 20;
  for (int32_t u = 0; u < 20; ++u) {
    const bool first_block = u < 10;
    for (int32_t i = 0; i < 20; ++i) {
      Interaction it;
      it.user = u;
      it.item = i;
      it.click = (first_block == (i < 10)) ? 1 : 0;
      it.split = Split::kTrain;
      ds.interactions.push_back(it);
      if (it.click) ds.exposure_log.add(u, i);
    }
  }

  build_sets_twotower(ds, /*dim=*/4, /*epochs=*/120, /*lr=*/0.2, /*r=*/5, /*l=*/4, /*seed=*/3);
  REQUIRE(ds.has_sets());
  for (int32_t u = 0; u < 20; ++u) {
    const bool first_block = u < 10;
    for (int32_t i : ds.recall_sets[static_cast<size_t>(u)]) {
      CHECK(first_block == (i < 10));
    }
  }
}

TEST_CASE("build_sets_twotower: l=1 and determinism") {
  Dataset ds = generate(small_spec());
  build_sets_twotower(ds, 4, 5, 0.1, 6, 1, 9);
  for (int32_t u = 0; u < ds.n_users; ++u) {
    CHECK(ds.lookalike_sets[static_cast<size_t>(u)].size() == 1);
    const int32_t w = ds.lookalike_sets[static_cast<size_t>(u)][0];
    CHECK(w >= 0);
    CHECK(w < ds.n_users);
  }

  Dataset again = generate(small_spec());
  build_sets_twotower(again, 4, 5, 0.1, 6, 1, 9);
  CHECK(again.recall_sets == ds.recall_sets);
  CHECK(again.lookalike_sets == ds.lookalike_sets);

  Dataset degenerate;
  degenerate.n_users = 1;
  degenerate.n_items = 5;
  CHECK_THROWS_AS(build_sets_twotower(degenerate, 4, 5, 0.1, 2, 1, 9), ValidationError);
}
