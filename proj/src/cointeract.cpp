#include "rar/cointeract.hpp"

#include <cmath>

namespace rar {

MlpTower MlpTower::create(int in, const std::vector<int>& hidden, int out, Rng& rng) {
  if (in <= 0 || out <= 0) throw ValidationError("tower widths must be positive");
  for (int h : hidden) {
    if (h <= 0) throw ValidationError("tower widths must be positive");
  }
  std::vector<int> widths;
  widths.push_back(in);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);

  MlpTower t;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    Mat w(fan_out, fan_in);
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w.a) v = rng.uniform(-s, s);
    t.w.push_back(std::move(w));
    t.b.emplace_back(static_cast<size_t>(fan_out), 0.0);
  }
  return t;
}

MlpGrads MlpGrads::like(const MlpTower& t) {
  MlpGrads g;
  for (const Mat& w : t.w) g.w.emplace_back(w.rows, w.cols);
  for (const Vec& b : t.b) g.b.emplace_back(b.size(), 0.0);
  return g;
}

void MlpGrads::zero() {
  for (Mat& m : w) m.zero();
  for (Vec& v : b) std::fill(v.begin(), v.end(), 0.0);
}

Mat tower_forward(const MlpTower& t, const Mat& x, TowerCache* cache) {
  if (x.cols != t.in_dim()) throw ValidationError("tower input width mismatch");
  if (!all_finite(x.a)) throw NumericError("tower input must be finite");
  if (cache) {
    cache->input = x;
    cache->pre.clear();
  }

  Mat act = x;
  const size_t n_layers = t.w.size();
  for (size_t l = 0; l < n_layers; ++l) {
    const Mat& w = t.w[l];
    const Vec& b = t.b[l];
    Mat pre(act.rows, w.rows);
    for (int i = 0; i < act.rows; ++i) {
      auto in_row = act.row(i);
      for (int o = 0; o < w.rows; ++o) {
        pre(i, o) = b[static_cast<size_t>(o)] + dot(w.row(o), in_row);
      }
    }
    if (cache) cache->pre.push_back(pre);
    if (l + 1 < n_layers) {
      for (double& v : pre.a) v = v > 0.0 ? v : 0.0;  // ReLU on hidden layers
    }
    act = std::move(pre);
  }
  return act;
}

void tower_backward(const MlpTower& t, const TowerCache& cache, const Mat& grad_out,
                    MlpGrads& grads, Mat* grad_in) {
  const int n_layers = static_cast<int>(t.w.size());
  Mat delta = grad_out;  // gradient w.r.t. the current layer's pre-activation

  for (int l = n_layers - 1; l >= 0; --l) {
    // input activation of layer l
    const Mat* below_pre = l > 0 ? &cache.pre[static_cast<size_t>(l - 1)] : nullptr;
    const Mat& w = t.w[static_cast<size_t>(l)];
    Mat& gw = grads.w[static_cast<size_t>(l)];
    Vec& gb = grads.b[static_cast<size_t>(l)];

    for (int i = 0; i < delta.rows; ++i) {
      for (int o = 0; o < w.rows; ++o) {
        const double d = delta(i, o);
        if (d == 0.0) continue;
        gb[static_cast<size_t>(o)] += d;
        auto gw_row = gw.row(o);
        if (below_pre) {
          auto pre_row = below_pre->row(i);
          for (int c = 0; c < w.cols; ++c) {
            const double a = pre_row[static_cast<size_t>(c)];
            gw_row[static_cast<size_t>(c)] += d * (a > 0.0 ? a : 0.0);
          }
        } else {
          axpy(d, cache.input.row(i), gw_row);
        }
      }
    }

    const bool need_below = l > 0 || grad_in != nullptr;
    if (!need_below) break;

    Mat next(delta.rows, w.cols);
    for (int i = 0; i < delta.rows; ++i) {
      auto out_row = next.row(i);
      for (int o = 0; o < w.rows; ++o) {
        const double d = delta(i, o);
        if (d == 0.0) continue;
        axpy(d, w.row(o), out_row);
      }
      if (below_pre) {
        auto pre_row = below_pre->row(i);
        for (int c = 0; c < w.cols; ++c) {
          if (pre_row[static_cast<size_t>(c)] <= 0.0) out_row[static_cast<size_t>(c)] = 0.0;
        }
      }
    }
    delta = std::move(next);
  }
  if (grad_in) *grad_in = std::move(delta);
}

CoInteractionState co_forward(const Mat& e_l_sel, const Mat& e_r_sel,
                              const CoInteractionParams& params, bool uniform_weights) {
  if (e_l_sel.rows < 1 || e_r_sel.rows < 1) {
    throw ValidationError("co_forward: need at least one selected row per side");
  }
  if (e_l_sel.cols != e_r_sel.cols) throw ValidationError("co_forward: embedding width mismatch");

  const int k_l = e_l_sel.rows;
  const int k_r = e_r_sel.rows;
  const int d1 = e_l_sel.cols;

  CoInteractionState st;
  st.uniform_weights = uniform_weights;
  st.hu = tower_forward(params.user_tower, e_l_sel, &st.cache_u);
  st.hi = tower_forward(params.item_side(), e_r_sel, &st.cache_i);
  if (st.hu.cols != st.hi.cols) {
    throw ValidationError("co_forward: tower output widths differ");
  }

  st.m = Mat(k_l, k_r);
  for (int j = 0; j < k_l; ++j) {
    for (int mth = 0; mth < k_r; ++mth) {
      st.m(j, mth) = sigmoid(dot(st.hu.row(j), st.hi.row(mth)));
    }
  }

  st.w_u.assign(static_cast<size_t>(k_l), 0.0);
  st.w_i.assign(static_cast<size_t>(k_r), 0.0);
  if (uniform_weights) {
    std::fill(st.w_u.begin(), st.w_u.end(), 1.0 / k_l);
    std::fill(st.w_i.begin(), st.w_i.end(), 1.0 / k_r);
  } else {
    for (int j = 0; j < k_l; ++j) {
      double s = 0.0;
      for (int mth = 0; mth < k_r; ++mth) s += st.m(j, mth);
      st.w_u[static_cast<size_t>(j)] = s / k_r;
    }
    for (int mth = 0; mth < k_r; ++mth) {
      double s = 0.0;
      for (int j = 0; j < k_l; ++j) s += st.m(j, mth);
      st.w_i[static_cast<size_t>(mth)] = s / k_l;
    }
  }

  // weighted sums over the original selected embeddings, not the tower outputs
  st.v_c.assign(static_cast<size_t>(d1), 0.0);
  st.v_d.assign(static_cast<size_t>(d1), 0.0);
  for (int j = 0; j < k_l; ++j) axpy(st.w_u[static_cast<size_t>(j)], e_l_sel.row(j), st.v_c);
  for (int mth = 0; mth < k_r; ++mth) axpy(st.w_i[static_cast<size_t>(mth)], e_r_sel.row(mth), st.v_d);

  st.v_enr = st.v_c;
  st.v_enr.insert(st.v_enr.end(), st.v_d.begin(), st.v_d.end());
  return st;
}

Mat build_exposure_labels(std::span<const int32_t> selected_user_ids,
                          std::span<const int32_t> selected_item_ids, const ExposureLog& log,
                          ExposureLabelMode mode) {
  const int k_l = static_cast<int>(selected_user_ids.size());
  const int k_r = static_cast<int>(selected_item_ids.size());
  Mat y(k_l, k_r);
  if (mode == ExposureLabelMode::kEntrywise) {
    for (int j = 0; j < k_l; ++j) {
      for (int m = 0; m < k_r; ++m) {
        y(j, m) = log.exposed(selected_user_ids[static_cast<size_t>(j)],
                              selected_item_ids[static_cast<size_t>(m)])
                      ? 1.0
                      : 0.0;
      }
    }
  } else {
    // column-constant: 1 unless the item was exposed to no selected user
    for (int m = 0; m < k_r; ++m) {
      bool any = false;
      for (int j = 0; j < k_l && !any; ++j) {
        any = log.exposed(selected_user_ids[static_cast<size_t>(j)],
                          selected_item_ids[static_cast<size_t>(m)]);
      }
      for (int j = 0; j < k_l; ++j) y(j, m) = any ? 1.0 : 0.0;
    }
  }
  return y;
}

double exposure_loss(const Mat& m, const Mat& labels) {
  if (m.rows != labels.rows || m.cols != labels.cols) {
    throw ValidationError("exposure_loss: shape mismatch");
  }
  double s = 0.0;
  for (size_t i = 0; i < m.a.size(); ++i) s += bce(m.a[i], labels.a[i]);
  return s / static_cast<double>(m.a.size());
}

void co_backward(const CoInteractionState& state, const CoInteractionParams& params,
                 const Mat& e_l_sel, const Mat& e_r_sel, std::span<const double> grad_v_c,
                 std::span<const double> grad_v_d, const Mat* ep_labels, double ep_scale,
                 CoGrads& out) {
  const int k_l = e_l_sel.rows;
  const int k_r = e_r_sel.rows;

  out.e_l_sel = Mat(k_l, e_l_sel.cols);
  out.e_r_sel = Mat(k_r, e_r_sel.cols);

  // direct path: v_c = sum_j w_u[j] * e_l_sel[j], and the weighting vectors
  Vec d_wu(static_cast<size_t>(k_l), 0.0);
  Vec d_wi(static_cast<size_t>(k_r), 0.0);
  for (int j = 0; j < k_l; ++j) {
    d_wu[static_cast<size_t>(j)] = dot(grad_v_c, e_l_sel.row(j));
    axpy(state.w_u[static_cast<size_t>(j)], grad_v_c, out.e_l_sel.row(j));
  }
  for (int m = 0; m < k_r; ++m) {
    d_wi[static_cast<size_t>(m)] = dot(grad_v_d, e_r_sel.row(m));
    axpy(state.w_i[static_cast<size_t>(m)], grad_v_d, out.e_r_sel.row(m));
  }

  // gradient w.r.t. the matching-matrix logits, both paths
  Mat d_logits(k_l, k_r);
  const double inv_cells = 1.0 / (static_cast<double>(k_l) * static_cast<double>(k_r));
  bool any_logit_grad = false;
  for (int j = 0; j < k_l; ++j) {
    for (int m = 0; m < k_r; ++m) {
      double dm = 0.0;
      if (!state.uniform_weights) {
        dm = d_wu[static_cast<size_t>(j)] / k_r + d_wi[static_cast<size_t>(m)] / k_l;
      }
      const double p = state.m(j, m);
      double g = dm * p * (1.0 - p);
      if (ep_labels != nullptr && ep_scale != 0.0) {
        g += ep_scale * (p - (*ep_labels)(j, m)) * inv_cells;
      }
      d_logits(j, m) = g;
      any_logit_grad = any_logit_grad || g != 0.0;
    }
  }

  if (any_logit_grad) {
    // logits = hu . hi^T
    Mat d_hu(k_l, state.hu.cols);
    Mat d_hi(k_r, state.hi.cols);
    for (int j = 0; j < k_l; ++j) {
      for (int m = 0; m < k_r; ++m) {
        const double g = d_logits(j, m);
        if (g == 0.0) continue;
        axpy(g, state.hi.row(m), d_hu.row(j));
        axpy(g, state.hu.row(j), d_hi.row(m));
      }
    }

    Mat d_in_u, d_in_i;
    tower_backward(params.user_tower, state.cache_u, d_hu, out.user_tower, &d_in_u);
    MlpGrads& item_grads = params.shared ? out.user_tower : out.item_tower;
    tower_backward(params.item_side(), state.cache_i, d_hi, item_grads, &d_in_i);

    for (size_t i = 0; i < out.e_l_sel.a.size(); ++i) out.e_l_sel.a[i] += d_in_u.a[i];
    for (size_t i = 0; i < out.e_r_sel.a.size(); ++i) out.e_r_sel.a[i] += d_in_i.a[i];
  }
}

}  // namespace rar
