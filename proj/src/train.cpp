#include "rar/train.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "rar/rng.hpp"

namespace rar {

std::vector<TensorRef> model_tensors(RarModel& model) {
  std::vector<TensorRef> t;
  t.push_back({"users", model.users.values.data(), model.users.values.size()});
  t.push_back({"items", model.items.values.data(), model.items.values.size()});
  auto add_mlp = [&](const std::string& prefix, MlpTower& net) {
    for (size_t l = 0; l < net.w.size(); ++l) {
      t.push_back({prefix + ".w" + std::to_string(l), net.w[l].a.data(), net.w[l].a.size()});
      t.push_back({prefix + ".b" + std::to_string(l), net.b[l].data(), net.b[l].size()});
    }
  };
  add_mlp("tower_u", model.co.user_tower);
  if (!model.co.shared) add_mlp("tower_i", model.co.item_tower);
  add_mlp("head", model.head.net);
  return t;
}

std::vector<TensorRef> grad_tensors(ModelGrads& grads, const RarModel& model) {
  std::vector<TensorRef> t;
  t.push_back({"users", grads.users.a.data(), grads.users.a.size()});
  t.push_back({"items", grads.items.a.data(), grads.items.a.size()});
  auto add_mlp = [&](const std::string& prefix, MlpGrads& g) {
    for (size_t l = 0; l < g.w.size(); ++l) {
      t.push_back({prefix + ".w" + std::to_string(l), g.w[l].a.data(), g.w[l].a.size()});
      t.push_back({prefix + ".b" + std::to_string(l), g.b[l].data(), g.b[l].size()});
    }
  };
  add_mlp("tower_u", grads.tower_u);
  if (!model.co.shared) add_mlp("tower_i", grads.tower_i);
  add_mlp("head", grads.head);
  return t;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, const std::vector<TensorRef>& params)
    : kind_(kind), lr_(lr) {
  if (kind_ == OptimizerKind::kAdam) {
    for (const TensorRef& p : params) {
      m_.emplace_back(p.n, 0.0);
      v_.emplace_back(p.n, 0.0);
    }
  }
}

void Optimizer::step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads) {
  if (params.size() != grads.size()) throw ValidationError("optimizer: tensor count mismatch");
  ++t_;
  if (kind_ == OptimizerKind::kSgd) {
    for (size_t i = 0; i < params.size(); ++i) {
      double* p = params[i].data;
      const double* g = grads[i].data;
      for (size_t j = 0; j < params[i].n; ++j) p[j] -= lr_ * g[j];
    }
    return;
  }

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].n != m_[i].size()) throw ValidationError("optimizer: tensor shape drift");
    double* p = params[i].data;
    const double* g = grads[i].data;
    Vec& m = m_[i];
    Vec& v = v_[i];
    for (size_t j = 0; j < params[i].n; ++j) {
      m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
      v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      p[j] -= lr_ * mh / (std::sqrt(vh) + kEps);
    }
  }
}

EvalBatch predict_split(const RarModel& model, const Dataset& ds, Split split) {
  EvalBatch batch;
  const bool needs_sets = model.cfg.use_rar;
  if (needs_sets && !ds.has_sets()) {
    throw ValidationError("dataset has no recall/look-alike sets; build or load them first");
  }
  for (const Interaction& it : ds.interactions) {
    if (it.split != split) continue;
    std::span<const int32_t> la, rc;
    if (needs_sets) {
      la = ds.lookalike_sets[static_cast<size_t>(it.user)];
      rc = ds.recall_sets[static_cast<size_t>(it.user)];
    }
    const ExampleCache cache = forward_example(model, it.user, it.item, la, rc, nullptr);
    batch.push_back({it.user, cache.p_click, it.click});
  }
  return batch;
}

namespace {

double nan_or(const std::optional<double>& v) {
  return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

void write_metrics_line(std::ostream& os, const EpochMetrics& em) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d, %.17g, %.17g, %.17g\n", em.epoch, em.train_loss,
                em.val_auc, em.val_gauc);
  os << buf;
}

}  // namespace

TrainResult train(RarModel& model, const Dataset& ds, std::ostream* metrics_out) {
  const Config& cfg = model.cfg;
  cfg.validate();
  if (ds.interactions.empty()) throw ValidationError("train: empty dataset");
  if (cfg.use_rar && !ds.has_sets()) {
    throw ValidationError("train: dataset has no recall/look-alike sets");
  }

  std::vector<size_t> train_idx = ds.split_indices(Split::kTrain);
  if (train_idx.empty()) throw ValidationError("train: no train-split interactions");

  Rng root(cfg.seed);
  Rng r_shuffle = root.split(101);

  std::vector<TensorRef> params = model_tensors(model);
  ModelGrads grads = ModelGrads::like(model);
  std::vector<TensorRef> grad_refs = grad_tensors(grads, model);
  Optimizer opt(cfg.optimizer, cfg.lr, params);

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    r_shuffle.shuffle(train_idx);
    double loss_sum = 0.0;
    size_t seen = 0;

    for (size_t start = 0; start < train_idx.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(train_idx.size(), start + static_cast<size_t>(cfg.batch_size));
      grads.zero();
      double batch_loss = 0.0;
      // fixed accumulation order keeps runs bit-reproducible
      for (size_t b = start; b < end; ++b) {
        const Interaction& it = ds.interactions[train_idx[b]];
        std::span<const int32_t> la, rc;
        if (cfg.use_rar) {
          la = ds.lookalike_sets[static_cast<size_t>(it.user)];
          rc = ds.recall_sets[static_cast<size_t>(it.user)];
        }
        const ExampleCache cache =
            forward_example(model, it.user, it.item, la, rc, &ds.exposure_log);
        batch_loss += example_loss(cache, it.click, cfg);
        backward_example(model, cache, it.click, grads);
      }
      const size_t count = end - start;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / static_cast<size_t>(cfg.batch_size)));
      }
      grads.scale(1.0 / static_cast<double>(count));
      opt.step(params, grad_refs);
      model.users.bump_version();
      model.items.bump_version();
      loss_sum += batch_loss;
      seen += count;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = loss_sum / static_cast<double>(seen);
    const EvalBatch val = predict_split(model, ds, Split::kVal);
    em.val_auc = nan_or(auc(val));
    em.val_gauc = nan_or(gauc(val));
    if (metrics_out) write_metrics_line(*metrics_out, em);
    result.log.push_back(em);
  }
  return result;
}

namespace {

// |a - n| relative to the larger magnitude, floored so that near-zero pairs
// compare absolutely
double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({1e-4, std::abs(a), std::abs(n)});
}

}  // namespace

GradcheckReport gradcheck(const RarModel& model, int64_t user, int64_t item,
                          std::span<const int32_t> lookalike_pool,
                          std::span<const int32_t> recall_pool, const ExposureLog* log,
                          double y_click, double tolerance, uint64_t sample_seed,
                          int min_coords) {
  // freeze selection: top-k index jumps are not part of the differentiated map
  const ExampleCache base =
      forward_example(model, user, item, lookalike_pool, recall_pool, log);
  const CandidateBundle* frozen = base.has_rar ? &base.bundle : nullptr;

  RarModel work = model;  // perturbed copy
  ModelGrads grads = ModelGrads::like(work);
  {
    const ExampleCache cache =
        forward_example(work, user, item, lookalike_pool, recall_pool, log, frozen);
    backward_example(work, cache, y_click, grads);
  }

  auto loss_at = [&]() {
    const ExampleCache cache =
        forward_example(work, user, item, lookalike_pool, recall_pool, log, frozen);
    return example_loss(cache, y_click, work.cfg);
  };

  std::vector<TensorRef> params = model_tensors(work);
  std::vector<TensorRef> grad_refs = grad_tensors(grads, work);
  Rng rng(sample_seed);
  constexpr double kStep = 1e-5;

  GradcheckReport report;
  report.tolerance = tolerance;
  for (size_t ti = 0; ti < params.size(); ++ti) {
    const TensorRef& p = params[ti];
    const TensorRef& g = grad_refs[ti];

    // sample coordinates, preferring ones that carry analytic gradient
    std::vector<size_t> coords;
    std::vector<size_t> nonzero;
    for (size_t j = 0; j < g.n; ++j) {
      if (g.data[j] != 0.0) nonzero.push_back(j);
    }
    const size_t want = std::min(static_cast<size_t>(min_coords), p.n);
    rng.shuffle(nonzero);
    for (size_t j = 0; j < nonzero.size() && coords.size() < want; ++j) {
      coords.push_back(nonzero[j]);
    }
    while (coords.size() < want) {
      coords.push_back(static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(p.n))));
    }

    GradcheckEntry entry;
    entry.tensor = p.name;
    for (size_t j : coords) {
      const double saved = p.data[j];
      p.data[j] = saved + kStep;
      const double up = loss_at();
      p.data[j] = saved - kStep;
      const double down = loss_at();
      p.data[j] = saved;
      const double numeric = (up - down) / (2.0 * kStep);
      entry.max_rel = std::max(entry.max_rel, rel_err(g.data[j], numeric));
      ++entry.checked;
    }
    report.max_rel = std::max(report.max_rel, entry.max_rel);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel < tolerance;
  return report;
}

}  // namespace rar
