#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpf/model.hpp"

namespace vpf::training {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double lr = 1e-3;  // desk-scale default; the paper regime (2e-5) is selectable
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global-norm clip; 0 disables (paper settings)
  uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs; 0 = only best/final

  void validate() const;
};

// Standard Adam with bias correction. Aborts with a NumericalError naming the
// parameter when a non-finite gradient shows up.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps);

  void step(const std::vector<ad::Tensor*>& params,
            const std::vector<std::string>& names);
  int64_t steps_taken() const { return t_; }
  double lr;

 private:
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Clips all grads to a global L2 norm; returns the pre-clip norm.
double clip_gradients(const std::vector<ad::Tensor*>& params, double max_norm);

struct FitResult {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
  int best_epoch = -1;  // epoch with lowest val loss (0-based)

  std::string loss_csv() const;  // epoch,train_loss,val_loss
};

// Mean loss over samples without parameter updates.
double mean_loss(model::ForecastModel& m, const std::vector<model::SceneSample>& samples);

// Deterministic training loop: seeded shuffles, sequential gradient
// accumulation in sample order, Adam updates per batch. When ckpt_prefix is
// non-empty the best-validation checkpoint is kept at the prefix itself and
// cadence checkpoints at prefix_epochN. With no validation set the final
// model is saved.
FitResult fit(model::ForecastModel& m, const std::vector<model::SceneSample>& train,
              const std::vector<model::SceneSample>& val, const TrainConfig& cfg,
              const std::string& ckpt_prefix = "");

}  // namespace vpf::training
