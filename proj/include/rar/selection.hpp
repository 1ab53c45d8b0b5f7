#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rar/common.hpp"
#include "rar/config.hpp"
#include "rar/embedding.hpp"
#include "rar/simhash.hpp"

namespace rar {

// Pools plus the selected subsets for one (target user, target item) pair.
// The u2u and i2i channels are scored independently: look-alike users against
// the target user embedding, recall items against the target item embedding.
struct CandidateBundle {
  std::vector<int32_t> lookalike_ids;
  std::vector<int32_t> recall_ids;
  std::vector<int32_t> selected_user_ids;  // k_l
  std::vector<int32_t> selected_item_ids;  // k_r
  Mat e_l_sel;  // k_l x d1, row j = embedding of selected_user_ids[j]
  Mat e_r_sel;  // k_r x d1
  Vec scores_users;  // length l; inner products, or negated hamming distances
  Vec scores_items;  // length r
};

// Fingerprint machinery for backend=simhash; caches are rebuilt lazily when
// the backing table version moves.
struct SelectionContext {
  const ProjectionMatrix* proj = nullptr;
  FingerprintCache* user_fps = nullptr;
  FingerprintCache* item_fps = nullptr;
};

CandidateBundle select(std::span<const double> target_user_emb,
                       std::span<const double> target_item_emb,
                       std::span<const int32_t> lookalike_pool,
                       std::span<const int32_t> recall_pool,
                       const EmbeddingTable& users, const EmbeddingTable& items,
                       Backend backend, const Config& cfg,
                       SelectionContext* sim = nullptr);

struct SelectionRecall {
  double users = 0.0;
  double items = 0.0;
};

// Fraction of ids shared with the reference selection, per side.
SelectionRecall selection_recall_at_k(const CandidateBundle& a, const CandidateBundle& b);

}  // namespace rar
