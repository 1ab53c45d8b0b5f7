#include "rar/selection.hpp"

#include <algorithm>

namespace rar {

namespace {

Mat gather_rows(const EmbeddingTable& table, std::span<const int32_t> ids) {
  Mat out(static_cast<int>(ids.size()), table.dim);
  for (size_t j = 0; j < ids.size(); ++j) {
    auto src = table.row(ids[j]);
    std::copy(src.begin(), src.end(), out.row(static_cast<int>(j)).begin());
  }
  return out;
}

// One channel: score the pool against the target embedding and pick top-k.
void select_channel(std::span<const double> target_emb, std::span<const int32_t> pool,
                    const EmbeddingTable& table, int k, Backend backend,
                    const Config& cfg, const ProjectionMatrix* proj, FingerprintCache* fps,
                    std::vector<int32_t>& selected_ids, Vec& scores) {
  if (pool.empty()) throw ValidationError("select: empty pool");
  if (k <= 0 || static_cast<size_t>(k) > pool.size()) {
    throw ValidationError("select: k=" + std::to_string(k) + " out of range for pool of " +
                          std::to_string(pool.size()));
  }

  scores.assign(pool.size(), 0.0);
  std::vector<int> picked;

  if (cfg.ablation == Ablation::kSelect) {
    // selection module removed: truncate the pool
    picked.resize(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) picked[static_cast<size_t>(j)] = j;
  } else if (backend == Backend::kExact) {
    for (size_t j = 0; j < pool.size(); ++j) scores[j] = dot(target_emb, table.row(pool[j]));
    picked = exact_topk(target_emb, table, pool, k);
  } else {
    if (proj == nullptr || fps == nullptr) {
      throw ValidationError("select: simhash backend requires a SelectionContext");
    }
    const FingerprintPool& sigs = fps->get(table, *proj, cfg.hash_variant);
    const Fingerprint q = fingerprint(target_emb, *proj, cfg.hash_variant);
    for (size_t j = 0; j < pool.size(); ++j) {
      scores[j] = -static_cast<double>(
          hamming(std::span<const uint64_t>(q.words), sigs.sig(static_cast<size_t>(pool[j]))));
    }
    picked = hamming_topk(q, sigs, pool, k);
  }

  selected_ids.resize(static_cast<size_t>(k));
  for (int j = 0; j < k; ++j) {
    selected_ids[static_cast<size_t>(j)] = pool[static_cast<size_t>(picked[static_cast<size_t>(j)])];
  }
}

}  // namespace

CandidateBundle select(std::span<const double> target_user_emb,
                       std::span<const double> target_item_emb,
                       std::span<const int32_t> lookalike_pool,
                       std::span<const int32_t> recall_pool,
                       const EmbeddingTable& users, const EmbeddingTable& items,
                       Backend backend, const Config& cfg, SelectionContext* sim) {
  CandidateBundle b;
  b.lookalike_ids.assign(lookalike_pool.begin(), lookalike_pool.end());
  b.recall_ids.assign(recall_pool.begin(), recall_pool.end());

  const ProjectionMatrix* proj = sim ? sim->proj : nullptr;
  select_channel(target_user_emb, lookalike_pool, users, cfg.k_l, backend, cfg, proj,
                 sim ? sim->user_fps : nullptr, b.selected_user_ids, b.scores_users);
  select_channel(target_item_emb, recall_pool, items, cfg.k_r, backend, cfg, proj,
                 sim ? sim->item_fps : nullptr, b.selected_item_ids, b.scores_items);

  b.e_l_sel = gather_rows(users, b.selected_user_ids);
  b.e_r_sel = gather_rows(items, b.selected_item_ids);
  return b;
}

SelectionRecall selection_recall_at_k(const CandidateBundle& a, const CandidateBundle& b) {
  if (a.selected_user_ids.size() != b.selected_user_ids.size() ||
      a.selected_item_ids.size() != b.selected_item_ids.size()) {
    throw ValidationError("selection_recall_at_k: mismatched k");
  }
  auto overlap = [](const std::vector<int32_t>& x, const std::vector<int32_t>& y) {
    std::vector<int32_t> xs(x), ys(y);
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    std::vector<int32_t> both;
    std::set_intersection(xs.begin(), xs.end(), ys.begin(), ys.end(), std::back_inserter(both));
    return static_cast<double>(both.size()) / static_cast<double>(x.size());
  };
  return {overlap(a.selected_user_ids, b.selected_user_ids),
          overlap(a.selected_item_ids, b.selected_item_ids)};
}

}  // namespace rar
