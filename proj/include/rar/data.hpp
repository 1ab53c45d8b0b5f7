#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rar/common.hpp"
#include "rar/exposure.hpp"

namespace rar {

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct Interaction {
  int32_t user = 0;
  int32_t item = 0;
  int8_t click = 0;
  Split split = Split::kTrain;
};

struct SyntheticSpec {
  int32_t n_users = 2000;
  int32_t n_items = 5000;
  int latent_dim = 8;
  double click_bias = -1.0;
  int exposure_depth = 15;
  int r = 40;  // recall pool size per user
  int l = 40;  // look-alike pool size per user
  double noise = 0.5;
  bool noise_pools = false;  // replace both set families with uniform ids
  // latent geometry: users and items fall into cohorts with shared direction
  // and a shared activity/quality norm, so neighborhoods carry real signal
  int user_clusters = 80;
  int item_clusters = 150;
  double train_frac = 0.7;
  double val_frac = 0.1;
  uint64_t seed = 1;

  void validate() const;
};

struct Dataset {
  int32_t n_users = 0;
  int32_t n_items = 0;
  std::vector<Interaction> interactions;
  std::vector<std::vector<int32_t>> recall_sets;     // per user, ranked
  std::vector<std::vector<int32_t>> lookalike_sets;  // per user, ranked
  ExposureLog exposure_log;

  bool has_sets() const {
    return !recall_sets.empty() && !lookalike_sets.empty();
  }
  std::vector<size_t> split_indices(Split s) const;
};

// Latent-factor world with an upstream retrieval stage: items are exposed by
// a noise-perturbed score, clicks are observed only on exposed pairs, and the
// recall / look-alike sets come from the same world. The ground-truth latent
// vectors are exposed for verification harnesses.
Dataset generate(const SyntheticSpec& spec, Mat* user_latents = nullptr,
                 Mat* item_latents = nullptr);

// Trains a small two-tower factorization on the train split and derives
// recall sets (inner product) and look-alike sets (user cosine) from it.
void build_sets_twotower(Dataset& ds, int dim, int epochs, double lr, int r, int l,
                         uint64_t seed);

// Directory layout: meta.txt, interactions.csv, recall.txt, lookalike.txt,
// exposure.txt. Text-delimited, UTF-8, LF.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace rar
