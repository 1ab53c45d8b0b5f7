#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rar/common.hpp"
#include "rar/config.hpp"
#include "rar/exposure.hpp"
#include "rar/rng.hpp"

namespace rar {

// Affine chain with ReLU on hidden layers and a linear output layer.
struct MlpTower {
  std::vector<Mat> w;  // w[l]: out_width x in_width
  std::vector<Vec> b;

  int in_dim() const { return w.empty() ? 0 : w.front().cols; }
  int out_dim() const { return w.empty() ? 0 : b.back().size(); }

  static MlpTower create(int in, const std::vector<int>& hidden, int out, Rng& rng);
};

struct MlpGrads {
  std::vector<Mat> w;
  std::vector<Vec> b;

  static MlpGrads like(const MlpTower& t);
  void zero();
};

struct TowerCache {
  Mat input;             // rows x in_dim
  std::vector<Mat> pre;  // pre-activations per layer, rows x width
};

// Row-wise forward over a batch of input rows.
Mat tower_forward(const MlpTower& t, const Mat& x, TowerCache* cache);

// Accumulates parameter gradients into `grads`; writes input gradients
// (assigned, not accumulated) into `grad_in` when non-null.
void tower_backward(const MlpTower& t, const TowerCache& cache, const Mat& grad_out,
                    MlpGrads& grads, Mat* grad_in);

// One tower per side; the item tower is ignored when `shared` is set and the
// user tower serves both.
struct CoInteractionParams {
  MlpTower user_tower;
  MlpTower item_tower;
  bool shared = false;

  const MlpTower& item_side() const { return shared ? user_tower : item_tower; }
};

struct CoInteractionState {
  Mat m;      // k_l x k_r sigmoid matching matrix
  Vec w_u;    // k_l, row means of m (or uniform 1/k_l)
  Vec w_i;    // k_r, column means of m (or uniform 1/k_r)
  Vec v_c;    // d1, weighted sum of selected user embeddings
  Vec v_d;    // d1, weighted sum of selected item embeddings
  Vec v_enr;  // concat(v_c, v_d)
  bool uniform_weights = false;

  // caches for backward
  Mat hu, hi;
  TowerCache cache_u, cache_i;
};

// uniform_weights replaces the matrix-derived weighting vectors with
// 1/k_l and 1/k_r (plain mean pooling); the matching matrix is still
// produced for the auxiliary loss.
CoInteractionState co_forward(const Mat& e_l_sel, const Mat& e_r_sel,
                              const CoInteractionParams& params, bool uniform_weights);

// entrywise: label[j][m] = 1 iff (user j, item m) is in the log.
// aggregate: label[j][m] = 0 iff item m was exposed to none of the selected
// users (columns are constant).
Mat build_exposure_labels(std::span<const int32_t> selected_user_ids,
                          std::span<const int32_t> selected_item_ids, const ExposureLog& log,
                          ExposureLabelMode mode);

// Mean binary cross-entropy over all k_l*k_r entries.
double exposure_loss(const Mat& m, const Mat& labels);

struct CoGrads {
  MlpGrads user_tower;
  MlpGrads item_tower;
  Mat e_l_sel;  // gradient w.r.t. the selected user embeddings (assigned)
  Mat e_r_sel;
};

// Gradients of the joint loss through every path into the module:
//   grad_v_c / grad_v_d   -- upstream from the enriched representation,
//   ep_labels + ep_scale  -- the auxiliary term ep_scale * mean-BCE(m, labels)
//                            (pass ep_scale 0 or null labels when absent).
// Tower parameter gradients accumulate; input gradients are assigned.
void co_backward(const CoInteractionState& state, const CoInteractionParams& params,
                 const Mat& e_l_sel, const Mat& e_r_sel, std::span<const double> grad_v_c,
                 std::span<const double> grad_v_d, const Mat* ep_labels, double ep_scale,
                 CoGrads& out);

}  // namespace rar
