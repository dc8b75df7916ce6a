#include "vpf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

namespace vpf::metrics {

namespace {

void check_pair(const std::vector<std::vector<Vec3>>& pred,
                const std::vector<std::vector<Vec3>>& truth, int horizon) {
  if (pred.size() != truth.size() || pred.empty())
    throw ValidationError("metric: frame count mismatch");
  if (horizon < 1 || horizon > int(pred.size()))
    throw ValidationError("metric: horizon out of range");
  for (size_t t = 0; t < pred.size(); ++t)
    if (pred[t].size() != truth[t].size() || pred[t].empty())
      throw ValidationError("metric: joint count mismatch");
}

}  // namespace

double jpe_mm(const std::vector<std::vector<Vec3>>& pred,
              const std::vector<std::vector<Vec3>>& truth, int horizon_frames) {
  check_pair(pred, truth, horizon_frames);
  double acc = 0.0;
  int64_t count = 0;
  for (int t = 0; t < horizon_frames; ++t)
    for (size_t j = 0; j < pred[t].size(); ++j) {
      acc += distance(pred[t][j], truth[t][j]);
      ++count;
    }
  return 1000.0 * acc / double(count);
}

double ape_mm(const std::vector<std::vector<Vec3>>& pred,
              const std::vector<std::vector<Vec3>>& truth, int horizon_frames) {
  check_pair(pred, truth, horizon_frames);
  double acc = 0.0;
  int64_t count = 0;
  for (int t = 0; t < horizon_frames; ++t) {
    const Vec3 rp = pred[t][0];
    const Vec3 rt = truth[t][0];
    for (size_t j = 0; j < pred[t].size(); ++j) {
      acc += distance(pred[t][j] - rp, truth[t][j] - rt);
      ++count;
    }
  }
  return 1000.0 * acc / double(count);
}

double fde_mm(const std::vector<std::vector<Vec3>>& pred,
              const std::vector<std::vector<Vec3>>& truth) {
  check_pair(pred, truth, int(pred.size()));
  const size_t last = pred.size() - 1;
  return 1000.0 * distance(pred[last][0], truth[last][0]);
}

Predictor model_predictor(model::ForecastModel& m) {
  return [&m](const model::SceneSample& s) { return m.predict(s); };
}

namespace {

// truth poses reconstructed from the sample's displacement targets
model::PosePrediction truth_poses(const model::SceneSample& s, int n_pred) {
  const int J = int(s.last_pose.empty() ? 0 : s.last_pose[0].size());
  model::PosePrediction out(s.n_ped);
  for (int p = 0; p < s.n_ped; ++p) {
    out[p].resize(n_pred);
    std::vector<Vec3> cur = s.last_pose[p];
    for (int t = 0; t < n_pred; ++t) {
      for (int j = 0; j < J; ++j) {
        const size_t off = ((size_t(p) * n_pred + t) * J + j) * 3;
        cur[j] += Vec3{s.truth_disp.values()[off], s.truth_disp.values()[off + 1],
                       s.truth_disp.values()[off + 2]};
      }
      out[p][t] = cur;
    }
  }
  return out;
}

}  // namespace

Predictor oracle_predictor(const model::ModelConfig& cfg) {
  const int n = cfg.n_pred;
  return [n](const model::SceneSample& s) { return truth_poses(s, n); };
}

Predictor freeze_predictor(const model::ModelConfig& cfg) {
  const int n = cfg.n_pred;
  return [n](const model::SceneSample& s) {
    model::PosePrediction out(s.n_ped);
    for (int p = 0; p < s.n_ped; ++p) out[p].assign(n, s.last_pose[p]);
    return out;
  };
}

Report evaluate_report(const Predictor& ours, const Predictor* baseline,
                       const std::vector<model::SceneSample>& samples,
                       double frame_rate_hz, int n_pred, const EvalOptions& opts) {
  // horizons mapped to frames, clamped out when they exceed the prediction
  std::vector<std::pair<double, int>> horizons;
  for (double h : opts.horizons_s) {
    const int f = int(std::lround(h * frame_rate_hz));
    if (f >= 1 && f <= n_pred) horizons.push_back({h, f});
  }
  if (horizons.empty()) throw ValidationError("evaluate_report: no usable horizons");

  struct Acc {
    double jpe = 0, ape = 0, fde = 0;
    int64_t n = 0;
  };
  // (n_ped, n_veh, horizon index, which model) -> accumulator
  std::map<std::tuple<int, int, int, int>, Acc> acc;

  const int n_models = baseline ? 2 : 1;
  std::vector<std::vector<model::PosePrediction>> preds(
      n_models, std::vector<model::PosePrediction>(samples.size()));
  parallel_for(int64_t(samples.size()), [&](int64_t i) {
    preds[0][i] = ours(samples[i]);
    if (baseline) preds[1][i] = (*baseline)(samples[i]);
  });

  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto truth = truth_poses(s, n_pred);
    for (int m = 0; m < n_models; ++m) {
      const auto& pred = preds[m][i];
      for (size_t hi = 0; hi < horizons.size(); ++hi) {
        const int hf = horizons[hi].second;
        Acc& a = acc[{s.n_ped, s.n_veh, int(hi), m}];
        for (int p = 0; p < s.n_ped; ++p) {
          if (opts.average_up_to_horizon) {
            a.jpe += jpe_mm(pred[p], truth[p], hf);
            a.ape += ape_mm(pred[p], truth[p], hf);
          } else {
            std::vector<std::vector<Vec3>> p1{pred[p][hf - 1]}, t1{truth[p][hf - 1]};
            a.jpe += jpe_mm(p1, t1, 1);
            a.ape += ape_mm(p1, t1, 1);
          }
          a.fde += 1000.0 * distance(pred[p][hf - 1][0], truth[p][hf - 1][0]);
          ++a.n;
        }
      }
    }
  }

  // assemble cells in deterministic category order
  std::set<std::pair<int, int>> categories;
  for (const auto& s : samples) categories.insert({s.n_ped, s.n_veh});

  Report report;
  for (const auto& cat : categories) {
    for (const char* metric : {"MPJPE", "APE", "FDE"}) {
      for (size_t hi = 0; hi < horizons.size(); ++hi) {
        ReportCell cell;
        cell.n_ped = cat.first;
        cell.n_veh = cat.second;
        cell.metric = metric;
        cell.horizon_s = horizons[hi].first;
        for (int m = 0; m < n_models; ++m) {
          auto it = acc.find({cat.first, cat.second, int(hi), m});
          if (it == acc.end() || it->second.n == 0) continue;
          const Acc& a = it->second;
          double v = 0;
          if (cell.metric == "MPJPE") v = a.jpe / double(a.n);
          else if (cell.metric == "APE") v = a.ape / double(a.n);
          else v = a.fde / double(a.n);
          if (m == 0) cell.ours_mm = v;
          else cell.baseline_mm = v;
        }
        report.cells.push_back(cell);
      }
    }
  }
  return report;
}

namespace {

std::string fmt_mm(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", *v);
  return buf;
}

}  // namespace

std::string Report::to_csv() const {
  std::ostringstream out;
  out << "n_ped,n_veh,metric,horizon_s,baseline_mm,ours_mm\n";
  for (const auto& c : cells) {
    char h[16];
    std::snprintf(h, sizeof(h), "%.1f", c.horizon_s);
    out << c.n_ped << ',' << c.n_veh << ',' << c.metric << ',' << h << ','
        << fmt_mm(c.baseline_mm) << ',' << fmt_mm(c.ours_mm) << '\n';
  }
  return out.str();
}

std::string Report::to_text() const {
  std::ostringstream out;
  out << " ped veh metric  horizon  baseline_mm      ours_mm\n";
  for (const auto& c : cells) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%4d %3d %-7s %6.1fs %12s %12s\n", c.n_ped,
                  c.n_veh, c.metric.c_str(), c.horizon_s,
                  fmt_mm(c.baseline_mm).c_str(), fmt_mm(c.ours_mm).c_str());
    out << buf;
  }
  return out.str();
}

namespace {

std::optional<double> report_mean(const std::vector<ReportCell>& cells,
                                  const std::string& metric, double horizon_s,
                                  bool ours) {
  double acc = 0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.metric != metric || std::abs(c.horizon_s - horizon_s) > 1e-9) continue;
    const auto& v = ours ? c.ours_mm : c.baseline_mm;
    if (v) {
      acc += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return acc / n;
}

}  // namespace

std::optional<double> Report::mean_ours(const std::string& metric, double horizon_s) const {
  return report_mean(cells, metric, horizon_s, true);
}

std::optional<double> Report::mean_baseline(const std::string& metric,
                                            double horizon_s) const {
  return report_mean(cells, metric, horizon_s, false);
}

}  // namespace vpf::metrics
