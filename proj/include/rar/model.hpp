#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rar/cointeract.hpp"
#include "rar/common.hpp"
#include "rar/config.hpp"
#include "rar/embedding.hpp"
#include "rar/exposure.hpp"
#include "rar/selection.hpp"
#include "rar/simhash.hpp"

namespace rar {

// Base CTR head: a terminal-sigmoid net over the concatenated features.
// logistic = single affine layer; mlp = two ReLU hidden layers [64, 32].
struct CtrHead {
  HeadKind kind = HeadKind::kLogistic;
  MlpTower net;

  static CtrHead create(HeadKind kind, int in_dim, Rng& rng);
};

struct HeadCache {
  Vec input;
  TowerCache tc;
  double logit = 0.0;
};

double head_predict(const CtrHead& head, std::span<const double> x, HeadCache* cache);

// alpha * L_clk + (1 - alpha) * L_ep. Without an auxiliary term (raw model,
// ablation aux_wght, or no exposure labels) the loss is L_clk alone.
double joint_loss(double p_click, double y_click, const Mat* m, const Mat* y_exposure,
                  double alpha, bool aux_enabled);

struct RarModel {
  Config cfg;
  EmbeddingTable users;
  EmbeddingTable items;
  CoInteractionParams co;
  CtrHead head;
  ProjectionMatrix proj;
  mutable FingerprintCache user_fps;
  mutable FingerprintCache item_fps;

  static RarModel create(const Config& cfg, int64_t n_users, int64_t n_items);
};

struct ExampleCache {
  int64_t user = 0;
  int64_t item = 0;
  bool has_rar = false;
  CandidateBundle bundle;
  CoInteractionState co;
  Mat y_exposure;  // empty when the auxiliary term is off
  HeadCache head;
  double p_click = 0.0;

  bool has_aux() const { return has_rar && y_exposure.rows > 0; }
};

// Runs selection -> co-interaction -> head for one example, honoring the
// configured ablation. `frozen` pins the selected ids (embeddings are
// re-gathered from the current tables), which keeps the composite loss
// differentiable for finite-difference checks.
ExampleCache forward_example(const RarModel& model, int64_t user, int64_t item,
                             std::span<const int32_t> lookalike_pool,
                             std::span<const int32_t> recall_pool, const ExposureLog* log,
                             const CandidateBundle* frozen = nullptr);

double example_loss(const ExampleCache& cache, double y_click, const Config& cfg);

struct ModelGrads {
  Mat users;
  Mat items;
  MlpGrads tower_u;
  MlpGrads tower_i;
  MlpGrads head;

  static ModelGrads like(const RarModel& model);
  void zero();
  void scale(double s);
};

// Joint-loss gradients for one example, accumulated into `grads`.
void backward_example(const RarModel& model, const ExampleCache& cache, double y_click,
                      ModelGrads& grads);

void save_checkpoint(const RarModel& model, const std::string& path);
RarModel load_checkpoint(const std::string& path);

}  // namespace rar
