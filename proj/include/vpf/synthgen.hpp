#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpf/core_types.hpp"

namespace vpf::synth {

enum class Behavior { cross, yield, walk_along, stand };

const char* behavior_name(Behavior b);
Behavior behavior_from_name(const std::string& name);

struct BehaviorMix {
  double cross = 0.25;
  double yield = 0.25;
  double walk_along = 0.25;
  double stand = 0.25;

  void validate() const;  // fractions sum to 1
};

// Fully seeded scenario description; the seed determines every coordinate.
struct ScenarioSpec {
  uint64_t seed = 0;
  int n_pedestrians = 1;  // 1..3
  int n_vehicles = 1;     // 0..4
  int duration_frames = 16;
  int future_frames = 5;  // frames after the behavioral decision point
  BehaviorMix mix;
  double noise_std = 0.01;
  double frame_rate_hz = 5.0;

  void validate() const;
  int decision_frame() const { return duration_frames - future_frames - 1; }
};

// What the generator actually did for one scene; the oracle for dataset
// statistics and for the yield-branch rule.
struct SceneManifestEntry {
  int64_t scene_id = 0;
  uint64_t seed = 0;
  std::string behavior;
  int n_pedestrians = 0;
  int n_vehicles = 0;
  // yield scenes only
  std::string yield_branch;  // "halt" | "cross" | ""
  double arrival_time_s = 0.0;
  double time_gap_threshold_s = 0.0;

  nlohmann::json to_json() const;
  static SceneManifestEntry from_json(const nlohmann::json& j);
};

// Gait parameters shared by the scene builder and tests.
struct GaitParams {
  double pelvis_height = 0.92;
  double stride_length = 0.70;       // meters per full gait cycle
  double max_swing = 0.30;           // ankle swing amplitude at full speed
  double full_speed = 1.40;          // speed reaching max swing
  double shoulder_half_width = 0.20;
  double hip_half_width = 0.10;
};

// Skeleton built over an explicit per-frame root ground path. Limb swing
// amplitude and gait phase advance scale with the local speed, so a halted
// pedestrian stands still with zero swing.
PoseSequence gait_from_root_path(uint64_t seed, const std::vector<Vec3>& root_path,
                                 double frame_rate_hz, double noise_std,
                                 int64_t agent_id, const GaitParams& gp = {});

// Root follows the piecewise-linear waypoint path at constant speed over the
// whole duration (frames-1 intervals).
PoseSequence gen_pedestrian_gait(uint64_t seed, const std::vector<Vec3>& waypoints,
                                 int frames, double frame_rate_hz,
                                 double noise_std, int64_t agent_id,
                                 const GaitParams& gp = {});

// Vehicle box sized 4.5 x 1.9 x 1.6 m following a constant-speed straight or
// slowly turning trajectory. Positions are ground-plane box centers.
VehicleTrack gen_vehicle_track(int64_t vehicle_id, Vec3 start_center, double heading_rad,
                               double speed_mps, double yaw_rate_rps, int frames,
                               double frame_rate_hz);

// The time-gap rule governing yield scenes: the pedestrian halts at the curb
// iff the decider vehicle arrives at the crossing corridor within
// `time_gap_threshold_s` of the decision instant.
constexpr double kYieldTimeGapS = 1.2;

struct GeneratedScene {
  Scene scene;
  SceneManifestEntry manifest;
};

GeneratedScene gen_interaction_scene(const ScenarioSpec& spec, int64_t scene_id);

// Writes scenes.jsonl + manifest.jsonl (atomic). Returns the manifest.
std::vector<SceneManifestEntry> gen_dataset(const std::vector<ScenarioSpec>& specs,
                                            const std::string& out_dir);

std::vector<SceneManifestEntry> read_manifest_jsonl(const std::string& path);

}  // namespace vpf::synth
