#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rar/data.hpp"
#include "rar/metrics.hpp"
#include "rar/model.hpp"

namespace rar {

struct TensorRef {
  std::string name;
  double* data = nullptr;
  size_t n = 0;
};

// Fixed registration order; grads_tensors mirrors it name-for-name.
std::vector<TensorRef> model_tensors(RarModel& model);
std::vector<TensorRef> grad_tensors(ModelGrads& grads, const RarModel& model);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, const std::vector<TensorRef>& params);

  void step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads);

  int64_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_;
  int64_t t_ = 0;
  std::vector<Vec> m_;
  std::vector<Vec> v_;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;   // NaN when undefined
  double val_gauc = 0.0;  // NaN when undefined
};

struct TrainResult {
  std::vector<EpochMetrics> log;
};

// Scores every interaction in the split with the current model.
EvalBatch predict_split(const RarModel& model, const Dataset& ds, Split split);

// Shuffled mini-batch training on the train split; one optimizer step per
// batch, metrics on the val split after each epoch. Appends one
// "epoch, train_loss, val_auc, val_gauc" line per epoch to metrics_out when
// given. Throws NumericError if a batch loss goes non-finite.
TrainResult train(RarModel& model, const Dataset& ds, std::ostream* metrics_out = nullptr);

struct GradcheckEntry {
  std::string tensor;
  int checked = 0;
  double max_rel = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  double max_rel = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Central finite differences (step 1e-5) against the analytic gradients for
// one example, sampling at least `min_coords` coordinates per tensor. The
// candidate selection is frozen so the compared function is smooth.
GradcheckReport gradcheck(const RarModel& model, int64_t user, int64_t item,
                          std::span<const int32_t> lookalike_pool,
                          std::span<const int32_t> recall_pool, const ExposureLog* log,
                          double y_click, double tolerance, uint64_t sample_seed,
                          int min_coords = 50);

}  // namespace rar
