#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vpf/core_types.hpp"
#include "vpf/model.hpp"

namespace vpf::metrics {

// Pose arrays are [frames][joints] absolute positions in meters; results in
// millimeters. The joint metric averages over all frames up to the horizon
// (single-frame evaluation is available through the flag on evaluate_report).

double jpe_mm(const std::vector<std::vector<Vec3>>& pred,
              const std::vector<std::vector<Vec3>>& truth, int horizon_frames);

// root-centered (root = joint 0): removes global translation per frame
double ape_mm(const std::vector<std::vector<Vec3>>& pred,
              const std::vector<std::vector<Vec3>>& truth, int horizon_frames);

// root position error at the last predicted frame
double fde_mm(const std::vector<std::vector<Vec3>>& pred,
              const std::vector<std::vector<Vec3>>& truth);

struct EvalOptions {
  std::vector<double> horizons_s = {0.2, 0.6, 1.0};
  // average over frames 1..h (default) vs evaluate at frame h only
  bool average_up_to_horizon = true;
};

struct ReportCell {
  int n_ped = 0;
  int n_veh = 0;
  std::string metric;  // MPJPE | APE | FDE
  double horizon_s = 0.0;
  std::optional<double> baseline_mm;
  std::optional<double> ours_mm;
};

struct Report {
  std::vector<ReportCell> cells;

  std::string to_csv() const;   // n_ped,n_veh,metric,horizon_s,baseline_mm,ours_mm
  std::string to_text() const;  // aligned table
  // mean of one metric at one horizon across categories (empty cells skipped)
  std::optional<double> mean_ours(const std::string& metric, double horizon_s) const;
  std::optional<double> mean_baseline(const std::string& metric, double horizon_s) const;
};

// A predictor maps a sample to absolute predicted poses; model checkpoints
// and test oracles plug in through the same interface.
using Predictor = std::function<model::PosePrediction(const model::SceneSample&)>;

Predictor model_predictor(model::ForecastModel& m);
// returns the ground truth (perfect oracle) / repeats the last observed pose
Predictor oracle_predictor(const model::ModelConfig& cfg);
Predictor freeze_predictor(const model::ModelConfig& cfg);

// Per-(category, horizon) mean JPE/APE/FDE over the evaluation records.
// JPE/APE average up to the horizon frame (or evaluate at it, per options);
// FDE is the root error at the horizon frame. Categories with no records are
// simply absent from the report (marked empty, not zero).
Report evaluate_report(const Predictor& ours, const Predictor* baseline,
                       const std::vector<model::SceneSample>& samples,
                       double frame_rate_hz, int n_pred, const EvalOptions& opts);

}  // namespace vpf::metrics
