#include "vpf/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "vpf/gradcheck_suite.hpp"
#include "vpf/kernels.hpp"
#include "vpf/metrics.hpp"
#include "vpf/model.hpp"
#include "vpf/scene_io.hpp"
#include "vpf/scene_pipeline.hpp"
#include "vpf/svg.hpp"
#include "vpf/synthgen.hpp"
#include "vpf/training.hpp"

namespace vpf::cli {

namespace fs = std::filesystem;

namespace {

// ---- synth ----

struct SynthOpts {
  uint64_t seed = 0;
  int scenes = 100;
  int n_ped = 2;
  int n_veh = 2;
  int duration = 16;
  int future = 5;
  double fps = 5.0;
  double noise = 0.01;
  std::string behavior = "cross=0.25,yield=0.25,walk_along=0.25,stand=0.25";
  std::string out = ".";
};

synth::BehaviorMix parse_mix(const std::string& spec) {
  synth::BehaviorMix mix{0, 0, 0, 0};
  if (spec.find('=') == std::string::npos) {
    // single behavior name
    synth::behavior_from_name(spec);
    if (spec == "cross") mix.cross = 1;
    if (spec == "yield") mix.yield = 1;
    if (spec == "walk_along") mix.walk_along = 1;
    if (spec == "stand") mix.stand = 1;
    return mix;
  }
  std::istringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("--behavior: expected name=fraction");
    const std::string name = item.substr(0, eq);
    const double frac = std::stod(item.substr(eq + 1));
    if (name == "cross") mix.cross = frac;
    else if (name == "yield") mix.yield = frac;
    else if (name == "walk_along") mix.walk_along = frac;
    else if (name == "stand") mix.stand = frac;
    else throw ValidationError("--behavior: unknown behavior " + name);
  }
  mix.validate();
  return mix;
}

int run_synth(const SynthOpts& o) {
  std::vector<synth::ScenarioSpec> specs(o.scenes);
  const synth::BehaviorMix mix = parse_mix(o.behavior);
  for (int i = 0; i < o.scenes; ++i) {
    synth::ScenarioSpec& s = specs[i];
    s.seed = o.seed;
    s.n_pedestrians = o.n_ped;
    s.n_vehicles = o.n_veh;
    s.duration_frames = o.duration;
    s.future_frames = o.future;
    s.frame_rate_hz = o.fps;
    s.noise_std = o.noise;
    s.mix = mix;
  }
  const auto manifest = synth::gen_dataset(specs, o.out);
  std::map<std::string, int> by_behavior;
  for (const auto& e : manifest) ++by_behavior[e.behavior];
  std::printf("wrote %zu scenes to %s/scenes.jsonl\n", manifest.size(), o.out.c_str());
  for (const auto& [b, n] : by_behavior) std::printf("  %-10s %d\n", b.c_str(), n);
  return 0;
}

// ---- segment / stats ----

struct SegmentOpts {
  std::string scenes_path;
  int window = 75;
  int stride = 25;
  double th = 15.0;
  double rmax = 18.0;
  std::string ped_counts = "1,2,3";
  std::string veh_counts = "1,2,3,4";
  double train_fraction = 0.8;
  std::string out = ".";
};

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

int run_segment(const SegmentOpts& o) {
  SegmentFilterConfig cfg;
  cfg.window_frames = o.window;
  cfg.stride_frames = o.stride;
  cfg.vehicle_distance_threshold_m = o.th;
  cfg.max_pairwise_distance_m = o.rmax;
  cfg.pedestrian_counts = parse_int_list(o.ped_counts);
  cfg.vehicle_counts = parse_int_list(o.veh_counts);
  cfg.train_fraction = o.train_fraction;

  const auto scenes = io::read_scenes_jsonl(o.scenes_path);
  const auto records = segment_scenes(scenes, cfg);
  fs::create_directories(o.out);
  io::write_segments_jsonl((fs::path(o.out) / "segments.jsonl").string(), records);
  const auto stats = dataset_stats(records);
  io::write_text_atomic((fs::path(o.out) / "stats.csv").string(), stats.to_csv());
  std::printf("%zu scenes -> %zu segments\n", scenes.size(), records.size());
  std::fputs(stats.to_text().c_str(), stdout);
  return 0;
}

int run_stats(const std::string& segments_path, const std::string& out) {
  const auto records = io::read_segments_jsonl(segments_path);
  const auto stats = dataset_stats(records);
  std::fputs(stats.to_text().c_str(), stdout);
  if (!out.empty()) io::write_text_atomic(out, stats.to_csv());
  return 0;
}

// ---- shared model/data plumbing ----

struct ModelOpts {
  int dim = 32;
  int heads = 2;
  int enc_blocks = 2;
  int pvi_blocks = 1;
  int dec_blocks = 2;
  int dct_keep = 4;
  int t_obs = 10;
  int n_pred = 5;
  int corner_groups = 12;
  int trpe_bins = 16;
  double dropout = 0.2;
  int ffn_mult = 4;
  int max_agents = 8;
  std::string vehicles = "on";
};

model::ModelConfig to_model_config(const ModelOpts& o, uint64_t seed) {
  model::ModelConfig cfg;
  cfg.feature_dim = o.dim;
  cfg.heads = o.heads;
  cfg.encoder_blocks = o.enc_blocks;
  cfg.pvi_blocks = o.pvi_blocks;
  cfg.decoder_blocks = o.dec_blocks;
  cfg.dct_keep = o.dct_keep;
  cfg.t_obs = o.t_obs;
  cfg.n_pred = o.n_pred;
  cfg.corner_scheme = o.corner_groups;
  cfg.trpe_bins = o.trpe_bins;
  cfg.dropout = o.dropout;
  cfg.ffn_mult = o.ffn_mult;
  cfg.max_agents = o.max_agents;
  if (o.vehicles != "on" && o.vehicles != "off")
    throw ValidationError("--vehicles must be 'on' or 'off'");
  cfg.use_vehicles = o.vehicles == "on";
  cfg.init_seed = seed ^ 0x9e3779b97f4a7c15ULL;
  cfg.validate();
  return cfg;
}

std::map<int64_t, size_t> scene_index(const std::vector<Scene>& scenes) {
  std::map<int64_t, size_t> idx;
  for (size_t i = 0; i < scenes.size(); ++i) idx[scenes[i].scene_id] = i;
  return idx;
}

std::vector<model::SceneSample> build_samples(const std::vector<Scene>& scenes,
                                              const std::vector<SegmentRecord>& records,
                                              const model::ModelConfig& cfg,
                                              const std::string& split) {
  const auto idx = scene_index(scenes);
  std::vector<const SegmentRecord*> selected;
  for (const auto& r : records) {
    if (split == "all" || r.split == split) selected.push_back(&r);
  }
  std::vector<model::SceneSample> samples(selected.size());
  parallel_for(int64_t(selected.size()), [&](int64_t i) {
    const auto it = idx.find(selected[i]->scene_id);
    if (it == idx.end())
      throw ValidationError("segment references unknown scene " +
                            std::to_string(selected[i]->scene_id));
    samples[i] = model::make_sample(scenes[it->second], *selected[i], cfg);
  });
  return samples;
}

// ---- train ----

struct TrainOpts {
  std::string scenes_path, segments_path;
  ModelOpts model;
  int epochs = 20;
  double lr = 1e-3;
  int batch = 32;
  double clip = 5.0;
  uint64_t seed = 0;
  int checkpoint_every = 0;
  std::string split = "train";
  std::string ckpt = "model";
  std::string out;  // loss csv path
};

int run_train(const TrainOpts& o) {
  const auto scenes = io::read_scenes_jsonl(o.scenes_path);
  const auto records = io::read_segments_jsonl(o.segments_path);
  const model::ModelConfig cfg = to_model_config(o.model, o.seed);

  const auto train_samples = build_samples(scenes, records, cfg, o.split);
  const auto val_samples =
      o.split == "train" ? build_samples(scenes, records, cfg, "val")
                         : std::vector<model::SceneSample>{};
  if (train_samples.empty()) throw ValidationError("train: no training samples selected");

  training::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.lr = o.lr;
  tc.clip_norm = o.clip;
  tc.seed = o.seed;
  tc.checkpoint_every = o.checkpoint_every;

  model::ForecastModel m(cfg);
  if (!fs::path(o.ckpt).parent_path().empty())
    fs::create_directories(fs::path(o.ckpt).parent_path());
  const auto result = training::fit(m, train_samples, val_samples, tc, o.ckpt);

  const std::string loss_path = o.out.empty() ? o.ckpt + "_loss.csv" : o.out;
  io::write_text_atomic(loss_path, result.loss_csv());
  std::printf("trained %d epochs on %zu samples (%zu val); final train loss %.6f\n",
              o.epochs, train_samples.size(), val_samples.size(),
              result.train_loss.back());
  if (!result.val_loss.empty())
    std::printf("best val loss %.6f at epoch %d; checkpoint %s.json/.bin\n",
                result.val_loss[result.best_epoch], result.best_epoch, o.ckpt.c_str());
  return 0;
}

// ---- eval ----

struct EvalOpts {
  std::string scenes_path, segments_path;
  std::string ours, baseline;
  std::string out;
  std::string split = "val";
  std::string horizons = "0.2,0.6,1.0";
  bool single_frame = false;
};

int run_eval(const EvalOpts& o) {
  const auto scenes = io::read_scenes_jsonl(o.scenes_path);
  const auto records = io::read_segments_jsonl(o.segments_path);

  model::ForecastModel ours = model::ForecastModel::load(o.ours);
  std::optional<model::ForecastModel> baseline;
  if (!o.baseline.empty()) baseline.emplace(model::ForecastModel::load(o.baseline));

  // samples carry vehicle tokens; each model consumes them per its own config
  model::ModelConfig sample_cfg = ours.config();
  if (baseline) {
    const auto& bc = baseline->config();
    const auto& oc = ours.config();
    if (bc.t_obs != oc.t_obs || bc.n_pred != oc.n_pred || bc.dct_keep != oc.dct_keep ||
        bc.partition.groups != oc.partition.groups)
      throw ValidationError("eval: ours/baseline checkpoints have incompatible windows");
    if (bc.use_vehicles && oc.use_vehicles && bc.corner_scheme != oc.corner_scheme)
      throw ValidationError(
          "eval: checkpoints use different corner groupings; evaluate them separately");
    if (bc.use_vehicles && !oc.use_vehicles) sample_cfg.corner_scheme = bc.corner_scheme;
    sample_cfg.use_vehicles = oc.use_vehicles || bc.use_vehicles;
  }
  const auto samples = build_samples(scenes, records, sample_cfg, o.split);
  if (samples.empty()) throw ValidationError("eval: no samples in split '" + o.split + "'");

  metrics::EvalOptions opts;
  opts.horizons_s.clear();
  {
    std::istringstream ss(o.horizons);
    std::string item;
    while (std::getline(ss, item, ',')) opts.horizons_s.push_back(std::stod(item));
  }
  opts.average_up_to_horizon = !o.single_frame;

  metrics::Predictor ours_pred = metrics::model_predictor(ours);
  metrics::Predictor base_pred;
  if (baseline) base_pred = metrics::model_predictor(*baseline);
  const auto report = metrics::evaluate_report(ours_pred, baseline ? &base_pred : nullptr,
                                               samples, samples[0].frame_rate_hz,
                                               ours.config().n_pred, opts);
  std::fputs(report.to_text().c_str(), stdout);
  if (!o.out.empty()) io::write_text_atomic(o.out, report.to_csv());
  return 0;
}

// ---- predict ----

struct PredictOpts {
  std::string scenes_path, segments_path, ckpt;
  std::string out = "predictions.jsonl";
  std::string split = "all";
};

int run_predict(const PredictOpts& o) {
  const auto scenes = io::read_scenes_jsonl(o.scenes_path);
  const auto records = io::read_segments_jsonl(o.segments_path);
  model::ForecastModel m = model::ForecastModel::load(o.ckpt);
  const auto samples = build_samples(scenes, records, m.config(), o.split);

  std::ostringstream out;
  for (const auto& s : samples) {
    const auto pred = m.predict(s);
    nlohmann::json j;
    j["scene_id"] = s.scene_id;
    j["frame_start"] = s.frame_start;
    j["pedestrian_ids"] = s.pedestrian_ids;
    nlohmann::json poses = nlohmann::json::array();
    for (const auto& ped : pred) {
      nlohmann::json frames = nlohmann::json::array();
      for (const auto& frame : ped) {
        nlohmann::json joints = nlohmann::json::array();
        for (const auto& p : frame) joints.push_back({p.x, p.y, p.z});
        frames.push_back(std::move(joints));
      }
      poses.push_back(std::move(frames));
    }
    j["pred"] = std::move(poses);
    out << j.dump() << '\n';
  }
  io::write_text_atomic(o.out, out.str());
  std::printf("wrote %zu predictions to %s\n", samples.size(), o.out.c_str());
  return 0;
}

// ---- gradcheck ----

int run_gradcheck(int seeds, double step, double tol) {
  bool all_pass = true;
  std::printf("backend: %s\n", kernels::backend_name());
  for (const auto& line : gradcheck::primitive_checks(seeds, step, tol)) {
    std::printf("%-18s %8lld elements  max_rel_err %.3e  %s\n", line.name.c_str(),
                (long long)line.checked, line.max_rel_err, line.pass ? "PASS" : "FAIL");
    all_pass = all_pass && line.pass;
  }
  for (int s = 0; s < seeds; ++s) {
    const auto line = gradcheck::full_model_check(uint64_t(s), step, tol);
    std::printf("%-28s %8lld elements  max_rel_err %.3e  %s\n", line.name.c_str(),
                (long long)line.checked, line.max_rel_err, line.pass ? "PASS" : "FAIL");
    all_pass = all_pass && line.pass;
  }
  return all_pass ? 0 : 1;
}

// ---- plot ----

struct PlotOpts {
  std::string scenes_path, segments_path;
  std::string ckpt, baseline;
  std::string out = "plots";
  int limit = 8;
  std::string split = "all";
};

int run_plot(const PlotOpts& o) {
  const auto scenes = io::read_scenes_jsonl(o.scenes_path);
  const auto records = io::read_segments_jsonl(o.segments_path);
  const auto idx = scene_index(scenes);

  std::optional<model::ForecastModel> ours, baseline;
  if (!o.ckpt.empty()) ours.emplace(model::ForecastModel::load(o.ckpt));
  if (!o.baseline.empty()) baseline.emplace(model::ForecastModel::load(o.baseline));

  fs::create_directories(o.out);
  int written = 0;
  for (const auto& r : records) {
    if (written >= o.limit) break;
    if (o.split != "all" && r.split != o.split) continue;
    const auto it = idx.find(r.scene_id);
    if (it == idx.end()) continue;
    const Scene& scene = scenes[it->second];

    svg::PlotInputs in;
    in.scene = &scene;
    in.record = &r;
    in.t_obs = ours ? ours->config().t_obs : (r.frame_end - r.frame_start) * 2 / 3;
    if (ours) {
      auto s = model::make_sample(scene, r, ours->config());
      in.ours = ours->predict(s);
      if (baseline) {
        auto sb = model::make_sample(scene, r, baseline->config());
        in.baseline = baseline->predict(sb);
      }
    }
    char name[128];
    std::snprintf(name, sizeof(name), "scene%lld_f%d.svg", (long long)r.scene_id,
                  r.frame_start);
    io::write_text_atomic((fs::path(o.out) / name).string(), svg::render_segment_svg(in));
    ++written;
  }
  std::printf("wrote %d SVG plots to %s\n", written, o.out.c_str());
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"vehicle-conditioned 3D pedestrian pose forecasting pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "ini config file; flags take precedence");

  SynthOpts synth_opts;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene corpus");
  synth_cmd->add_option("--seed", synth_opts.seed, "master seed");
  synth_cmd->add_option("--scenes", synth_opts.scenes, "number of scenes");
  synth_cmd->add_option("--n-ped", synth_opts.n_ped, "pedestrians per scene (1-3)");
  synth_cmd->add_option("--n-veh", synth_opts.n_veh, "vehicles per scene (0-4)");
  synth_cmd->add_option("--duration", synth_opts.duration, "frames per scene");
  synth_cmd->add_option("--future", synth_opts.future, "frames after the decision point");
  synth_cmd->add_option("--fps", synth_opts.fps, "frame rate (Hz)");
  synth_cmd->add_option("--noise", synth_opts.noise, "joint noise std (m)");
  synth_cmd->add_option("--behavior", synth_opts.behavior,
                        "behavior name or name=frac list");
  synth_cmd->add_option("--out", synth_opts.out, "output directory");

  SegmentOpts seg_opts;
  auto* seg_cmd = app.add_subcommand("segment", "segment scenes into training windows");
  seg_cmd->add_option("scenes", seg_opts.scenes_path, "scene corpus (jsonl)")->required();
  seg_cmd->add_option("--window", seg_opts.window, "window length (frames)");
  seg_cmd->add_option("--stride", seg_opts.stride, "window stride (frames)");
  seg_cmd->add_option("--th", seg_opts.th, "vehicle selection threshold (m)");
  seg_cmd->add_option("--rmax", seg_opts.rmax, "max pairwise pedestrian distance (m)");
  seg_cmd->add_option("--ped-counts", seg_opts.ped_counts, "group sizes, e.g. 1,2,3");
  seg_cmd->add_option("--veh-counts", seg_opts.veh_counts, "vehicle counts kept");
  seg_cmd->add_option("--train-fraction", seg_opts.train_fraction, "train split fraction");
  seg_cmd->add_option("--out", seg_opts.out, "output directory");

  std::string stats_path, stats_out;
  auto* stats_cmd = app.add_subcommand("stats", "category counts for a segment manifest");
  stats_cmd->add_option("segments", stats_path, "segment manifest (jsonl)")->required();
  stats_cmd->add_option("--out", stats_out, "also write CSV here");

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a forecaster");
  train_cmd->add_option("scenes", train_opts.scenes_path, "scene corpus")->required();
  train_cmd->add_option("segments", train_opts.segments_path, "segment manifest")->required();
  train_cmd->add_option("--epochs", train_opts.epochs);
  train_cmd->add_option("--lr", train_opts.lr);
  train_cmd->add_option("--batch", train_opts.batch);
  train_cmd->add_option("--clip", train_opts.clip, "gradient clip norm (0 = off)");
  train_cmd->add_option("--seed", train_opts.seed);
  train_cmd->add_option("--split", train_opts.split, "train | all");
  train_cmd->add_option("--ckpt", train_opts.ckpt, "checkpoint prefix");
  train_cmd->add_option("--out", train_opts.out, "loss curve CSV path");
  train_cmd->add_option("--checkpoint-every", train_opts.checkpoint_every, "epoch cadence");
  auto add_model_flags = [](CLI::App* cmd, ModelOpts& m) {
    cmd->add_option("--dim", m.dim, "feature dimension D");
    cmd->add_option("--heads", m.heads);
    cmd->add_option("--enc-blocks", m.enc_blocks);
    cmd->add_option("--pvi-blocks", m.pvi_blocks);
    cmd->add_option("--dec-blocks", m.dec_blocks);
    cmd->add_option("--dct-keep", m.dct_keep, "DCT coefficients kept (L)");
    cmd->add_option("--t-obs", m.t_obs, "observed displacement frames");
    cmd->add_option("--n-pred", m.n_pred, "predicted displacement frames");
    cmd->add_option("--corner-groups", m.corner_groups, "vehicle corner groups")
        ->check(CLI::IsMember({1, 2, 4, 6, 8, 12}));
    cmd->add_option("--trpe-bins", m.trpe_bins);
    cmd->add_option("--dropout", m.dropout);
    cmd->add_option("--ffn-mult", m.ffn_mult);
    cmd->add_option("--max-agents", m.max_agents);
    cmd->add_option("--vehicles", m.vehicles, "on | off (off = pedestrian-only baseline)")
        ->check(CLI::IsMember({"on", "off"}));
  };
  add_model_flags(train_cmd, train_opts.model);

  EvalOpts eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints (Table-style report)");
  eval_cmd->add_option("scenes", eval_opts.scenes_path, "scene corpus")->required();
  eval_cmd->add_option("segments", eval_opts.segments_path, "segment manifest")->required();
  eval_cmd->add_option("--ours", eval_opts.ours, "checkpoint prefix")->required();
  eval_cmd->add_option("--baseline", eval_opts.baseline, "baseline checkpoint prefix");
  eval_cmd->add_option("--out", eval_opts.out, "report CSV path");
  eval_cmd->add_option("--split", eval_opts.split, "val | train | all");
  eval_cmd->add_option("--horizons", eval_opts.horizons, "horizons in seconds");
  eval_cmd->add_flag("--single-frame", eval_opts.single_frame,
                     "evaluate at the horizon frame instead of averaging up to it");

  PredictOpts pred_opts;
  auto* pred_cmd = app.add_subcommand("predict", "write predicted poses for segments");
  pred_cmd->add_option("scenes", pred_opts.scenes_path, "scene corpus")->required();
  pred_cmd->add_option("segments", pred_opts.segments_path, "segment manifest")->required();
  pred_cmd->add_option("--ckpt", pred_opts.ckpt, "checkpoint prefix")->required();
  pred_cmd->add_option("--out", pred_opts.out, "output jsonl");
  pred_cmd->add_option("--split", pred_opts.split, "val | train | all");

  int gc_seeds = 20;
  double gc_step = 1e-4, gc_tol = 1e-4;
  auto* gc_cmd = app.add_subcommand("gradcheck",
                                    "finite-difference checks for all primitives and the model");
  gc_cmd->add_option("--seeds", gc_seeds, "random instances per check");
  gc_cmd->add_option("--step", gc_step, "FD step");
  gc_cmd->add_option("--tol", gc_tol, "max relative error");

  PlotOpts plot_opts;
  auto* plot_cmd = app.add_subcommand("plot", "top-down SVG trajectory plots");
  plot_cmd->add_option("scenes", plot_opts.scenes_path, "scene corpus")->required();
  plot_cmd->add_option("segments", plot_opts.segments_path, "segment manifest")->required();
  plot_cmd->add_option("--ckpt", plot_opts.ckpt, "checkpoint prefix");
  plot_cmd->add_option("--baseline", plot_opts.baseline, "baseline checkpoint prefix");
  plot_cmd->add_option("--out", plot_opts.out, "output directory");
  plot_cmd->add_option("--limit", plot_opts.limit, "max segments to plot");
  plot_cmd->add_option("--split", plot_opts.split, "val | train | all");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (synth_cmd->parsed()) return run_synth(synth_opts);
    if (seg_cmd->parsed()) return run_segment(seg_opts);
    if (stats_cmd->parsed()) return run_stats(stats_path, stats_out);
    if (train_cmd->parsed()) return run_train(train_opts);
    if (eval_cmd->parsed()) return run_eval(eval_opts);
    if (pred_cmd->parsed()) return run_predict(pred_opts);
    if (gc_cmd->parsed()) return run_gradcheck(gc_seeds, gc_step, gc_tol);
    if (plot_cmd->parsed()) return run_plot(plot_opts);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace vpf::cli
