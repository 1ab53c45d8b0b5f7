#include "rar/model.hpp"

#include <cstring>
#include <fstream>

namespace rar {

CtrHead CtrHead::create(HeadKind kind, int in_dim, Rng& rng) {
  CtrHead h;
  h.kind = kind;
  const std::vector<int> hidden =
      kind == HeadKind::kLogistic ? std::vector<int>{} : std::vector<int>{64, 32};
  h.net = MlpTower::create(in_dim, hidden, 1, rng);
  return h;
}

double head_predict(const CtrHead& head, std::span<const double> x, HeadCache* cache) {
  if (static_cast<int>(x.size()) != head.net.in_dim()) {
    throw ValidationError("head input width " + std::to_string(x.size()) + " != expected " +
                          std::to_string(head.net.in_dim()));
  }
  Mat in(1, static_cast<int>(x.size()));
  std::copy(x.begin(), x.end(), in.a.begin());
  TowerCache local;
  TowerCache* tc = cache ? &cache->tc : &local;
  const Mat out = tower_forward(head.net, in, tc);
  const double logit = out(0, 0);
  if (cache) {
    cache->input.assign(x.begin(), x.end());
    cache->logit = logit;
  }
  return sigmoid(logit);
}

double joint_loss(double p_click, double y_click, const Mat* m, const Mat* y_exposure,
                  double alpha, bool aux_enabled) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in [0,1]");
  const double l_clk = bce(p_click, y_click);
  if (!aux_enabled || m == nullptr || y_exposure == nullptr || y_exposure->rows == 0) {
    return l_clk;
  }
  return alpha * l_clk + (1.0 - alpha) * exposure_loss(*m, *y_exposure);
}

RarModel RarModel::create(const Config& cfg, int64_t n_users, int64_t n_items) {
  cfg.validate();
  RarModel m;
  m.cfg = cfg;
  Rng root(cfg.seed);
  Rng r_users = root.split(1);
  Rng r_items = root.split(2);
  Rng r_tower_u = root.split(3);
  Rng r_tower_i = root.split(4);
  Rng r_head = root.split(5);
  Rng r_proj = root.split(6);

  m.users = init_embedding(EntityKind::kUser, n_users, cfg.d1, cfg.init_scale, r_users);
  m.items = init_embedding(EntityKind::kItem, n_items, cfg.d1, cfg.init_scale, r_items);
  m.co.user_tower = MlpTower::create(cfg.d1, cfg.hidden_widths(), cfg.d1, r_tower_u);
  m.co.item_tower = MlpTower::create(cfg.d1, cfg.hidden_widths(), cfg.d1, r_tower_i);
  m.co.shared = cfg.share_towers;
  m.head = CtrHead::create(cfg.head, cfg.head_input_dim(), r_head);
  m.proj = ProjectionMatrix::create(cfg.fingerprint_dim(), cfg.m_bits, r_proj);
  return m;
}

ExampleCache forward_example(const RarModel& model, int64_t user, int64_t item,
                             std::span<const int32_t> lookalike_pool,
                             std::span<const int32_t> recall_pool, const ExposureLog* log,
                             const CandidateBundle* frozen) {
  const Config& cfg = model.cfg;
  ExampleCache cache;
  cache.user = user;
  cache.item = item;
  cache.has_rar = cfg.use_rar;

  const auto e_u = model.users.row(user);
  const auto e_i = model.items.row(item);

  Vec head_input(e_u.begin(), e_u.end());
  head_input.insert(head_input.end(), e_i.begin(), e_i.end());

  if (cfg.use_rar) {
    if (frozen != nullptr) {
      cache.bundle = *frozen;
      // re-gather so perturbations of the tables reach the loss
      for (size_t j = 0; j < cache.bundle.selected_user_ids.size(); ++j) {
        auto src = model.users.row(cache.bundle.selected_user_ids[j]);
        std::copy(src.begin(), src.end(), cache.bundle.e_l_sel.row(static_cast<int>(j)).begin());
      }
      for (size_t j = 0; j < cache.bundle.selected_item_ids.size(); ++j) {
        auto src = model.items.row(cache.bundle.selected_item_ids[j]);
        std::copy(src.begin(), src.end(), cache.bundle.e_r_sel.row(static_cast<int>(j)).begin());
      }
    } else {
      SelectionContext sim{&model.proj, &model.user_fps, &model.item_fps};
      if (cfg.ablation == Ablation::kUser) {
        // look-alike channel carries the target user only
        const int32_t self[1] = {static_cast<int32_t>(user)};
        Config narrowed = cfg;
        narrowed.k_l = 1;
        narrowed.l = 1;
        cache.bundle = select(e_u, e_i, std::span<const int32_t>(self, 1), recall_pool,
                              model.users, model.items, cfg.backend, narrowed, &sim);
      } else {
        cache.bundle = select(e_u, e_i, lookalike_pool, recall_pool, model.users, model.items,
                              cfg.backend, cfg, &sim);
      }
    }

    const bool uniform =
        cfg.ablation == Ablation::kAuxWght || cfg.ablation == Ablation::kWght;
    cache.co = co_forward(cache.bundle.e_l_sel, cache.bundle.e_r_sel, model.co, uniform);

    if (log != nullptr && cfg.ablation != Ablation::kAuxWght) {
      cache.y_exposure = build_exposure_labels(cache.bundle.selected_user_ids,
                                               cache.bundle.selected_item_ids, *log,
                                               cfg.exposure_labels);
    }

    head_input.insert(head_input.end(), cache.co.v_enr.begin(), cache.co.v_enr.end());
  }

  cache.p_click = head_predict(model.head, head_input, &cache.head);
  return cache;
}

double example_loss(const ExampleCache& cache, double y_click, const Config& cfg) {
  return joint_loss(cache.p_click, y_click, cache.has_rar ? &cache.co.m : nullptr,
                    cache.has_aux() ? &cache.y_exposure : nullptr, cfg.alpha, cache.has_aux());
}

ModelGrads ModelGrads::like(const RarModel& model) {
  ModelGrads g;
  g.users = Mat(static_cast<int>(model.users.count), model.users.dim);
  g.items = Mat(static_cast<int>(model.items.count), model.items.dim);
  g.tower_u = MlpGrads::like(model.co.user_tower);
  g.tower_i = MlpGrads::like(model.co.item_tower);
  g.head = MlpGrads::like(model.head.net);
  return g;
}

void ModelGrads::zero() {
  users.zero();
  items.zero();
  tower_u.zero();
  tower_i.zero();
  head.zero();
}

void ModelGrads::scale(double s) {
  for (double& v : users.a) v *= s;
  for (double& v : items.a) v *= s;
  for (MlpGrads* g : {&tower_u, &tower_i, &head}) {
    for (Mat& m : g->w) {
      for (double& v : m.a) v *= s;
    }
    for (Vec& b : g->b) {
      for (double& v : b) v *= s;
    }
  }
}

void backward_example(const RarModel& model, const ExampleCache& cache, double y_click,
                      ModelGrads& grads) {
  const Config& cfg = model.cfg;
  const int d1 = cfg.d1;
  const bool aux = cache.has_aux();
  const double clk_scale = aux ? cfg.alpha : 1.0;
  const double ep_scale = aux ? 1.0 - cfg.alpha : 0.0;

  // click path: d(L)/d(logit) = clk_scale * (p - y)
  Mat d_logit(1, 1);
  d_logit(0, 0) = clk_scale * (cache.p_click - y_click);
  Mat d_input;
  tower_backward(model.head.net, cache.head.tc, d_logit, grads.head, &d_input);

  auto gu = grads.users.row(static_cast<int>(cache.user));
  auto gi = grads.items.row(static_cast<int>(cache.item));
  for (int t = 0; t < d1; ++t) {
    gu[static_cast<size_t>(t)] += d_input(0, t);
    gi[static_cast<size_t>(t)] += d_input(0, d1 + t);
  }

  if (!cache.has_rar) return;

  const std::span<const double> grad_v_c(d_input.a.data() + 2 * d1, static_cast<size_t>(d1));
  const std::span<const double> grad_v_d(d_input.a.data() + 3 * d1, static_cast<size_t>(d1));

  CoGrads co_grads;
  co_grads.user_tower = MlpGrads::like(model.co.user_tower);
  co_grads.item_tower = MlpGrads::like(model.co.item_tower);
  co_backward(cache.co, model.co, cache.bundle.e_l_sel, cache.bundle.e_r_sel, grad_v_c,
              grad_v_d, aux ? &cache.y_exposure : nullptr, ep_scale, co_grads);

  auto add_mlp = [](const MlpGrads& src, MlpGrads& dst) {
    for (size_t l = 0; l < src.w.size(); ++l) {
      for (size_t i = 0; i < src.w[l].a.size(); ++i) dst.w[l].a[i] += src.w[l].a[i];
      for (size_t i = 0; i < src.b[l].size(); ++i) dst.b[l][i] += src.b[l][i];
    }
  };
  add_mlp(co_grads.user_tower, grads.tower_u);
  if (!model.co.shared) add_mlp(co_grads.item_tower, grads.tower_i);

  for (size_t j = 0; j < cache.bundle.selected_user_ids.size(); ++j) {
    axpy(1.0, co_grads.e_l_sel.row(static_cast<int>(j)),
         grads.users.row(cache.bundle.selected_user_ids[j]));
  }
  for (size_t j = 0; j < cache.bundle.selected_item_ids.size(); ++j) {
    axpy(1.0, co_grads.e_r_sel.row(static_cast<int>(j)),
         grads.items.row(cache.bundle.selected_item_ids[j]));
  }
}

namespace {

constexpr char kCkptMagic[8] = {'R', 'A', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kCkptVersion = 1;

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

void put_doubles(std::ostream& os, const Vec& v) {
  put_u64(os, v.size());
  for (double d : v) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(os, bits);
  }
}

Vec get_doubles(std::istream& is) {
  const uint64_t n = get_u64(is);
  Vec v(n);
  for (uint64_t i = 0; i < n; ++i) {
    const uint64_t bits = get_u64(is);
    double d;
    std::memcpy(&d, &bits, 8);
    v[i] = d;
  }
  return v;
}

void put_mlp(std::ostream& os, const MlpTower& t) {
  put_u32(os, static_cast<uint32_t>(t.w.size()));
  for (size_t l = 0; l < t.w.size(); ++l) {
    put_u32(os, static_cast<uint32_t>(t.w[l].rows));
    put_u32(os, static_cast<uint32_t>(t.w[l].cols));
    put_doubles(os, t.w[l].a);
    put_doubles(os, t.b[l]);
  }
}

MlpTower get_mlp(std::istream& is) {
  MlpTower t;
  const uint32_t layers = get_u32(is);
  for (uint32_t l = 0; l < layers; ++l) {
    const uint32_t rows = get_u32(is);
    const uint32_t cols = get_u32(is);
    Mat w(static_cast<int>(rows), static_cast<int>(cols));
    w.a = get_doubles(is);
    if (w.a.size() != static_cast<size_t>(rows) * cols) {
      throw ValidationError("checkpoint layer size mismatch");
    }
    t.w.push_back(std::move(w));
    t.b.push_back(get_doubles(is));
  }
  return t;
}

}  // namespace

void save_checkpoint(const RarModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open checkpoint for writing: " + path);
  os.write(kCkptMagic, 8);
  put_u32(os, kCkptVersion);
  const std::string cfg_text = model.cfg.to_kv();
  put_u32(os, static_cast<uint32_t>(cfg_text.size()));
  os.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  put_u64(os, static_cast<uint64_t>(model.users.count));
  put_u64(os, static_cast<uint64_t>(model.items.count));
  put_doubles(os, model.users.values);
  put_doubles(os, model.items.values);
  put_mlp(os, model.co.user_tower);
  put_mlp(os, model.co.item_tower);
  put_mlp(os, model.head.net);
  put_doubles(os, model.proj.p.a);
  if (!os) throw ValidationError("checkpoint write failed: " + path);
}

RarModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCkptMagic, 8) != 0) {
    throw ValidationError("bad checkpoint magic in " + path);
  }
  const uint32_t version = get_u32(is);
  if (version != kCkptVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  const uint32_t cfg_len = get_u32(is);
  std::string cfg_text(cfg_len, '\0');
  is.read(cfg_text.data(), cfg_len);
  if (!is) throw ValidationError("truncated checkpoint: " + path);

  RarModel m;
  m.cfg = Config::from_kv_text(cfg_text, path);
  const int64_t n_users = static_cast<int64_t>(get_u64(is));
  const int64_t n_items = static_cast<int64_t>(get_u64(is));

  m.users.kind = EntityKind::kUser;
  m.users.count = n_users;
  m.users.dim = m.cfg.d1;
  m.users.values = get_doubles(is);
  m.items.kind = EntityKind::kItem;
  m.items.count = n_items;
  m.items.dim = m.cfg.d1;
  m.items.values = get_doubles(is);
  if (m.users.values.size() != static_cast<size_t>(n_users) * m.cfg.d1 ||
      m.items.values.size() != static_cast<size_t>(n_items) * m.cfg.d1) {
    throw ValidationError("checkpoint table size mismatch: " + path);
  }
  m.co.user_tower = get_mlp(is);
  m.co.item_tower = get_mlp(is);
  m.co.shared = m.cfg.share_towers;
  m.head.kind = m.cfg.head;
  m.head.net = get_mlp(is);
  m.proj.in_dim = m.cfg.fingerprint_dim();
  m.proj.m_bits = m.cfg.m_bits;
  m.proj.p = Mat(m.proj.in_dim, m.proj.m_bits);
  m.proj.p.a = get_doubles(is);
  if (!is) throw ValidationError("truncated checkpoint: " + path);
  if (m.proj.p.a.size() != static_cast<size_t>(m.proj.in_dim) * m.proj.m_bits) {
    throw ValidationError("checkpoint projection size mismatch: " + path);
  }
  return m;
}

}  // namespace rar
