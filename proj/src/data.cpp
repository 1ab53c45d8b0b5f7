#include "rar/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "rar/embedding.hpp"
#include "rar/rng.hpp"

namespace rar {

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split: '" + s + "'");
}

void SyntheticSpec::validate() const {
  if (n_users <= 0 || n_items <= 0) throw ValidationError("n_users and n_items must be positive");
  if (latent_dim <= 0) throw ValidationError("latent_dim must be positive");
  if (r <= 0 || r > n_items) throw ValidationError("require 0 < r <= n_items");
  if (l <= 0 || l > n_users) throw ValidationError("require 0 < l <= n_users");
  if (exposure_depth <= 0 || exposure_depth > r) {
    throw ValidationError("require 0 < exposure_depth <= r");
  }
  if (noise < 0.0) throw ValidationError("noise must be non-negative");
  if (user_clusters <= 0 || item_clusters <= 0) {
    throw ValidationError("cluster counts must be positive");
  }
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac >= 1.0) {
    throw ValidationError("require train_frac > 0, val_frac >= 0, train_frac + val_frac < 1");
  }
}

std::vector<size_t> Dataset::split_indices(Split s) const {
  std::vector<size_t> idx;
  for (size_t i = 0; i < interactions.size(); ++i) {
    if (interactions[i].split == s) idx.push_back(i);
  }
  return idx;
}

namespace {

// top-k positions by descending score, ties by ascending index
std::vector<int32_t> ranked_topk(const Vec& scores, int k) {
  std::vector<int32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int32_t a, int32_t b) {
    if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)]) {
      return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
    }
    return a < b;
  });
  order.resize(static_cast<size_t>(k));
  return order;
}

std::vector<int32_t> distinct_uniform(int32_t n, int k, Rng& rng) {
  // Floyd's sampling, then shuffled for an arbitrary ranked order
  std::vector<int32_t> out;
  std::unordered_set<int32_t> seen;
  for (int32_t j = n - k; j < n; ++j) {
    const int32_t t = static_cast<int32_t>(rng.uniform_int(j + 1));
    if (seen.insert(t).second) {
      out.push_back(t);
    } else {
      seen.insert(j);
      out.push_back(j);
    }
  }
  rng.shuffle(out);
  return out;
}

}  // namespace

Dataset generate(const SyntheticSpec& spec, Mat* user_latents, Mat* item_latents) {
  spec.validate();

  Rng root(spec.seed);
  Rng r_latent = root.split(11);
  Rng r_noise = root.split(12);
  Rng r_click = root.split(13);
  Rng r_split = root.split(14);
  Rng r_pools = root.split(15);

  // Clustered latent world: each cluster has a unit direction and a shared
  // activity (users) or quality (items) multiplier in [0.5, 2]. Scores are
  // plain inner products, so cohort structure and norm heterogeneity both
  // live in the latent distribution.
  const int dim = spec.latent_dim;
  auto sample_clustered = [&](Mat& out, int n_clusters, double base_scale,
                              double within_spread) {
    Mat centers(n_clusters, dim);
    Vec mult(static_cast<size_t>(n_clusters));
    for (int k = 0; k < n_clusters; ++k) {
      auto c = centers.row(k);
      double n2 = 0.0;
      for (double& v : c) {
        v = r_latent.normal();
        n2 += v * v;
      }
      const double inv = 1.0 / std::sqrt(n2);
      for (double& v : c) v *= inv;
      mult[static_cast<size_t>(k)] = std::exp(r_latent.uniform(std::log(0.5), std::log(2.0)));
    }
    for (int i = 0; i < out.rows; ++i) {
      const int k = static_cast<int>(r_latent.uniform_int(n_clusters));
      auto row = out.row(i);
      double n2 = 0.0;
      for (int t = 0; t < dim; ++t) {
        row[static_cast<size_t>(t)] = centers(k, t) + within_spread * r_latent.normal();
        n2 += row[static_cast<size_t>(t)] * row[static_cast<size_t>(t)];
      }
      const double s = base_scale * mult[static_cast<size_t>(k)] / std::sqrt(n2);
      for (double& v : row) v *= s;
    }
  };

  Mat u_lat(spec.n_users, dim);
  Mat v_lat(spec.n_items, dim);
  const double base_scale = std::sqrt(1.5);
  sample_clustered(u_lat, spec.user_clusters, base_scale, 0.35);
  sample_clustered(v_lat, spec.item_clusters, base_scale, 0.35);

  Dataset ds;
  ds.n_users = spec.n_users;
  ds.n_items = spec.n_items;
  ds.recall_sets.resize(static_cast<size_t>(spec.n_users));
  ds.lookalike_sets.resize(static_cast<size_t>(spec.n_users));

  // Retrieval scores: one noisy score per (user, item). The exposure log is
  // the head of the same ranking the recall set is cut from, so exposed
  // items are always a prefix of the recall list.
  Vec scores(static_cast<size_t>(spec.n_items));
  for (int32_t u = 0; u < spec.n_users; ++u) {
    const auto u_row = u_lat.row(u);
    for (int32_t i = 0; i < spec.n_items; ++i) {
      double s = dot(u_row, v_lat.row(i));
      if (spec.noise > 0.0) s += spec.noise * r_noise.normal();
      scores[static_cast<size_t>(i)] = s;
    }
    ds.recall_sets[static_cast<size_t>(u)] = ranked_topk(scores, spec.r);

    for (int d = 0; d < spec.exposure_depth; ++d) {
      const int32_t item = ds.recall_sets[static_cast<size_t>(u)][static_cast<size_t>(d)];
      ds.exposure_log.add(u, item);
      Interaction it;
      it.user = u;
      it.item = item;
      const double p = sigmoid(dot(u_row, v_lat.row(item)) + spec.click_bias);
      it.click = r_click.uniform() < p ? 1 : 0;
      ds.interactions.push_back(it);
    }
  }

  // look-alike sets by true latent cosine (self included, it ranks first)
  Mat u_unit = u_lat;
  for (int32_t u = 0; u < spec.n_users; ++u) {
    auto row = u_unit.row(u);
    const double n = std::sqrt(dot(row, row));
    if (n > 0.0) {
      for (double& v : row) v /= n;
    }
  }
  Vec cos_scores(static_cast<size_t>(spec.n_users));
  for (int32_t u = 0; u < spec.n_users; ++u) {
    for (int32_t w = 0; w < spec.n_users; ++w) {
      cos_scores[static_cast<size_t>(w)] = dot(u_unit.row(u), u_unit.row(w));
    }
    ds.lookalike_sets[static_cast<size_t>(u)] = ranked_topk(cos_scores, spec.l);
  }

  if (spec.noise_pools) {
    for (int32_t u = 0; u < spec.n_users; ++u) {
      ds.recall_sets[static_cast<size_t>(u)] = distinct_uniform(spec.n_items, spec.r, r_pools);
      ds.lookalike_sets[static_cast<size_t>(u)] = distinct_uniform(spec.n_users, spec.l, r_pools);
    }
  }

  for (Interaction& it : ds.interactions) {
    const double x = r_split.uniform();
    it.split = x < spec.train_frac          ? Split::kTrain
               : x < spec.train_frac + spec.val_frac ? Split::kVal
                                                     : Split::kTest;
  }

  if (user_latents) *user_latents = std::move(u_lat);
  if (item_latents) *item_latents = std::move(v_lat);
  return ds;
}

void build_sets_twotower(Dataset& ds, int dim, int epochs, double lr, int r, int l,
                         uint64_t seed) {
  if (ds.n_users < 2 || ds.n_items < 2) {
    throw ValidationError("two-tower set construction needs at least 2 users and 2 items");
  }
  if (r > ds.n_items || l > ds.n_users) {
    throw ValidationError("set sizes exceed the id space");
  }
  std::vector<size_t> train_idx = ds.split_indices(Split::kTrain);
  if (train_idx.empty()) throw ValidationError("two-tower set construction needs train data");

  Rng root(seed);
  Rng r_init = root.split(21);
  Rng r_shuffle = root.split(22);
  EmbeddingTable ut = init_embedding(EntityKind::kUser, ds.n_users, dim, 0.1, r_init);
  EmbeddingTable vt = init_embedding(EntityKind::kItem, ds.n_items, dim, 0.1, r_init);

  // plain SGD on sigmoid(u.v) with click labels
  for (int e = 0; e < epochs; ++e) {
    r_shuffle.shuffle(train_idx);
    for (size_t idx : train_idx) {
      const Interaction& it = ds.interactions[idx];
      auto u = ut.mutable_row(it.user);
      auto v = vt.mutable_row(it.item);
      const double p = sigmoid(dot(u, v));
      const double g = p - static_cast<double>(it.click);
      for (int t = 0; t < dim; ++t) {
        const double du = g * v[static_cast<size_t>(t)];
        const double dv = g * u[static_cast<size_t>(t)];
        u[static_cast<size_t>(t)] -= lr * du;
        v[static_cast<size_t>(t)] -= lr * dv;
      }
    }
  }

  ds.recall_sets.assign(static_cast<size_t>(ds.n_users), {});
  ds.lookalike_sets.assign(static_cast<size_t>(ds.n_users), {});

  Vec scores(static_cast<size_t>(ds.n_items));
  for (int32_t u = 0; u < ds.n_users; ++u) {
    for (int32_t i = 0; i < ds.n_items; ++i) {
      scores[static_cast<size_t>(i)] = dot(ut.row(u), vt.row(i));
    }
    ds.recall_sets[static_cast<size_t>(u)] = ranked_topk(scores, r);
  }

  Mat unit(ds.n_users, dim);
  for (int32_t u = 0; u < ds.n_users; ++u) {
    auto src = ut.row(u);
    auto dst = unit.row(u);
    std::copy(src.begin(), src.end(), dst.begin());
    const double n = std::sqrt(dot(dst, dst));
    if (n > 0.0) {
      for (double& v : dst) v /= n;
    }
  }
  Vec cos_scores(static_cast<size_t>(ds.n_users));
  for (int32_t u = 0; u < ds.n_users; ++u) {
    for (int32_t w = 0; w < ds.n_users; ++w) {
      cos_scores[static_cast<size_t>(w)] = dot(unit.row(u), unit.row(w));
    }
    ds.lookalike_sets[static_cast<size_t>(u)] = ranked_topk(cos_scores, l);
  }
}

namespace {

namespace fs = std::filesystem;

void write_set_file(const std::string& path,
                    const std::vector<std::vector<int32_t>>& sets) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open for writing: " + path);
  for (size_t u = 0; u < sets.size(); ++u) {
    os << u << ',';
    for (size_t j = 0; j < sets[u].size(); ++j) {
      if (j) os << '|';
      os << sets[u][j];
    }
    os << '\n';
  }
  if (!os) throw ValidationError("write failed: " + path);
}

[[noreturn]] void parse_fail(const std::string& path, int lineno, const std::string& msg) {
  throw ValidationError(path + ":" + std::to_string(lineno) + ": " + msg);
}

int64_t parse_id(const std::string& tok, const std::string& path, int lineno) {
  if (tok.empty()) parse_fail(path, lineno, "empty id");
  for (char c : tok) {
    if (c < '0' || c > '9') parse_fail(path, lineno, "id must be a non-negative integer: '" + tok + "'");
  }
  try {
    return std::stoll(tok);
  } catch (const std::exception&) {
    parse_fail(path, lineno, "id out of range: '" + tok + "'");
  }
}

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::vector<int32_t>> read_set_file(const std::string& path, int32_t n_owners,
                                                int32_t n_members) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open: " + path);
  std::vector<std::vector<int32_t>> sets(static_cast<size_t>(n_owners));
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split_on(line, ',');
    if (cols.size() != 2) parse_fail(path, lineno, "expected owner_id,list");
    const int64_t owner = parse_id(cols[0], path, lineno);
    if (owner >= n_owners) parse_fail(path, lineno, "unknown owner id " + cols[0]);
    std::vector<int32_t> members;
    std::unordered_set<int32_t> seen;
    for (const std::string& tok : split_on(cols[1], '|')) {
      const int64_t id = parse_id(tok, path, lineno);
      if (id >= n_members) parse_fail(path, lineno, "unknown member id " + tok);
      if (!seen.insert(static_cast<int32_t>(id)).second) {
        parse_fail(path, lineno, "duplicate member id " + tok);
      }
      members.push_back(static_cast<int32_t>(id));
    }
    sets[static_cast<size_t>(owner)] = std::move(members);
  }
  return sets;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);

  {
    std::ofstream os(dir + "/meta.txt", std::ios::binary);
    if (!os) throw ValidationError("cannot open for writing: " + dir + "/meta.txt");
    os << "n_users=" << ds.n_users << "\nn_items=" << ds.n_items << '\n';
  }
  {
    std::ofstream os(dir + "/interactions.csv", std::ios::binary);
    if (!os) throw ValidationError("cannot open for writing: " + dir + "/interactions.csv");
    os << "user_id,item_id,click,split\n";
    for (const Interaction& it : ds.interactions) {
      os << it.user << ',' << it.item << ',' << static_cast<int>(it.click) << ','
         << to_string(it.split) << '\n';
    }
    if (!os) throw ValidationError("write failed: " + dir + "/interactions.csv");
  }
  if (!ds.recall_sets.empty()) write_set_file(dir + "/recall.txt", ds.recall_sets);
  if (!ds.lookalike_sets.empty()) write_set_file(dir + "/lookalike.txt", ds.lookalike_sets);
  {
    std::ofstream os(dir + "/exposure.txt", std::ios::binary);
    if (!os) throw ValidationError("cannot open for writing: " + dir + "/exposure.txt");
    std::vector<uint64_t> keys(ds.exposure_log.pairs.begin(), ds.exposure_log.pairs.end());
    std::sort(keys.begin(), keys.end());
    for (uint64_t k : keys) {
      os << (k >> 32) << ',' << (k & 0xffffffffULL) << '\n';
    }
    if (!os) throw ValidationError("write failed: " + dir + "/exposure.txt");
  }
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  {
    const std::string path = dir + "/meta.txt";
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto kv = split_on(line, '=');
      if (kv.size() != 2) parse_fail(path, lineno, "expected key=value");
      if (kv[0] == "n_users") ds.n_users = static_cast<int32_t>(parse_id(kv[1], path, lineno));
      else if (kv[0] == "n_items") ds.n_items = static_cast<int32_t>(parse_id(kv[1], path, lineno));
      else parse_fail(path, lineno, "unknown meta key '" + kv[0] + "'");
    }
    if (ds.n_users <= 0 || ds.n_items <= 0) {
      throw ValidationError(path + ": missing or non-positive n_users/n_items");
    }
  }
  {
    const std::string path = dir + "/interactions.csv";
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open: " + path);
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (!header_seen) {
        if (line != "user_id,item_id,click,split") {
          parse_fail(path, lineno, "bad header, expected user_id,item_id,click,split");
        }
        header_seen = true;
        continue;
      }
      const auto cols = split_on(line, ',');
      if (cols.size() != 4) parse_fail(path, lineno, "expected 4 columns");
      Interaction it;
      const int64_t u = parse_id(cols[0], path, lineno);
      const int64_t i = parse_id(cols[1], path, lineno);
      if (u >= ds.n_users) parse_fail(path, lineno, "unknown user id " + cols[0]);
      if (i >= ds.n_items) parse_fail(path, lineno, "unknown item id " + cols[1]);
      it.user = static_cast<int32_t>(u);
      it.item = static_cast<int32_t>(i);
      if (cols[2] == "0") it.click = 0;
      else if (cols[2] == "1") it.click = 1;
      else parse_fail(path, lineno, "click label must be 0 or 1, got '" + cols[2] + "'");
      try {
        it.split = parse_split(cols[3]);
      } catch (const ValidationError&) {
        parse_fail(path, lineno, "split must be train/val/test, got '" + cols[3] + "'");
      }
      ds.interactions.push_back(it);
    }
    if (!header_seen) throw ValidationError(path + ": empty file");
  }
  if (fs::exists(dir + "/recall.txt")) {
    ds.recall_sets = read_set_file(dir + "/recall.txt", ds.n_users, ds.n_items);
  }
  if (fs::exists(dir + "/lookalike.txt")) {
    ds.lookalike_sets = read_set_file(dir + "/lookalike.txt", ds.n_users, ds.n_users);
  }
  {
    const std::string path = dir + "/exposure.txt";
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto cols = split_on(line, ',');
      if (cols.size() != 2) parse_fail(path, lineno, "expected user_id,item_id");
      const int64_t u = parse_id(cols[0], path, lineno);
      const int64_t i = parse_id(cols[1], path, lineno);
      if (u >= ds.n_users) parse_fail(path, lineno, "unknown user id " + cols[0]);
      if (i >= ds.n_items) parse_fail(path, lineno, "unknown item id " + cols[1]);
      ds.exposure_log.add(u, i);
    }
  }
  return ds;
}

}  // namespace rar
