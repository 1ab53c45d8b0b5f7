#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rar {

enum class Ablation { kFull, kUser, kSelect, kAuxWght, kWght };
enum class HashVariant { kStandard, kLiteral };
enum class Backend { kExact, kSimhash };
enum class HeadKind { kLogistic, kMlp };
enum class OptimizerKind { kSgd, kAdam };
enum class ExposureLabelMode { kEntrywise, kAggregate };

std::string to_string(Ablation v);
std::string to_string(HashVariant v);
std::string to_string(Backend v);
std::string to_string(HeadKind v);
std::string to_string(OptimizerKind v);
std::string to_string(ExposureLabelMode v);

Ablation parse_ablation(const std::string& s);
HashVariant parse_hash_variant(const std::string& s);
Backend parse_backend(const std::string& s);
HeadKind parse_head(const std::string& s);
OptimizerKind parse_optimizer(const std::string& s);
ExposureLabelMode parse_exposure_labels(const std::string& s);

struct Config {
  int d1 = 16;
  int d2 = 0;  // 0 -> same as d1
  int m_bits = 64;
  int k_l = 8;
  int k_r = 8;
  int l = 40;
  int r = 40;
  double alpha = 0.5;
  std::vector<int> mlp_hidden;  // empty -> one hidden layer of width d1
  double lr = 1e-3;
  int epochs = 5;
  int batch_size = 256;
  uint64_t seed = 42;
  Ablation ablation = Ablation::kFull;
  HashVariant hash_variant = HashVariant::kStandard;
  Backend backend = Backend::kExact;
  HeadKind head = HeadKind::kLogistic;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  ExposureLabelMode exposure_labels = ExposureLabelMode::kEntrywise;
  bool use_rar = true;
  bool share_towers = false;
  double init_scale = 0.1;

  int fingerprint_dim() const { return d2 > 0 ? d2 : d1; }
  std::vector<int> hidden_widths() const {
    return mlp_hidden.empty() ? std::vector<int>{d1} : mlp_hidden;
  }
  int head_input_dim() const { return use_rar ? 4 * d1 : 2 * d1; }

  // Throws ValidationError. Strict training-config checks; the simhash
  // library itself accepts any positive m_bits.
  void validate() const;

  // key=value lines, one per field, fixed order.
  std::string to_kv() const;
  void apply_kv(const std::string& key, const std::string& value);

  static Config from_kv_text(const std::string& text, const std::string& origin = "<config>");
  static Config from_kv_file(const std::string& path);
};

}  // namespace rar
