#include "vpf/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "vpf/scene_io.hpp"

namespace vpf::synth {

const char* behavior_name(Behavior b) {
  switch (b) {
    case Behavior::cross: return "cross";
    case Behavior::yield: return "yield";
    case Behavior::walk_along: return "walk_along";
    case Behavior::stand: return "stand";
  }
  return "?";
}

Behavior behavior_from_name(const std::string& name) {
  if (name == "cross") return Behavior::cross;
  if (name == "yield") return Behavior::yield;
  if (name == "walk_along") return Behavior::walk_along;
  if (name == "stand") return Behavior::stand;
  throw ValidationError("unknown behavior: " + name);
}

void BehaviorMix::validate() const {
  if (cross < 0 || yield < 0 || walk_along < 0 || stand < 0)
    throw ValidationError("behavior mix: fractions must be non-negative");
  const double s = cross + yield + walk_along + stand;
  if (std::abs(s - 1.0) > 1e-9)
    throw ValidationError("behavior mix: fractions must sum to 1");
}

void ScenarioSpec::validate() const {
  if (n_pedestrians < 1 || n_pedestrians > 3)
    throw ValidationError("ScenarioSpec: n_pedestrians must be 1..3");
  if (n_vehicles < 0 || n_vehicles > 4)
    throw ValidationError("ScenarioSpec: n_vehicles must be 0..4");
  if (future_frames < 1) throw ValidationError("ScenarioSpec: future_frames must be >= 1");
  if (duration_frames < future_frames + 2)
    throw ValidationError("ScenarioSpec: duration too short for future_frames");
  if (!(frame_rate_hz > 0)) throw ValidationError("ScenarioSpec: frame rate must be positive");
  if (noise_std < 0) throw ValidationError("ScenarioSpec: noise_std must be >= 0");
  mix.validate();
}

nlohmann::json SceneManifestEntry::to_json() const {
  nlohmann::json j;
  j["scene_id"] = scene_id;
  j["seed"] = seed;
  j["behavior"] = behavior;
  j["n_pedestrians"] = n_pedestrians;
  j["n_vehicles"] = n_vehicles;
  j["yield_branch"] = yield_branch;
  j["arrival_time_s"] = arrival_time_s;
  j["time_gap_threshold_s"] = time_gap_threshold_s;
  return j;
}

SceneManifestEntry SceneManifestEntry::from_json(const nlohmann::json& j) {
  SceneManifestEntry e;
  e.scene_id = j.at("scene_id").get<int64_t>();
  e.seed = j.at("seed").get<uint64_t>();
  e.behavior = j.at("behavior").get<std::string>();
  e.n_pedestrians = j.at("n_pedestrians").get<int>();
  e.n_vehicles = j.at("n_vehicles").get<int>();
  e.yield_branch = j.value("yield_branch", "");
  e.arrival_time_s = j.value("arrival_time_s", 0.0);
  e.time_gap_threshold_s = j.value("time_gap_threshold_s", 0.0);
  return e;
}

PoseSequence gait_from_root_path(uint64_t seed, const std::vector<Vec3>& root_path,
                                 double frame_rate_hz, double noise_std,
                                 int64_t agent_id, const GaitParams& gp) {
  if (root_path.size() < 2)
    throw ValidationError("gait_from_root_path: need >= 2 frames");
  const int frames = int(root_path.size());
  const double dt = 1.0 / frame_rate_hz;
  Rng rng(seed);
  const double phase0 = rng.uniform(0.0, 2.0 * M_PI);

  PoseSequence seq;
  seq.agent_id = agent_id;
  seq.frame_rate_hz = frame_rate_hz;
  seq.frames.resize(frames);

  Vec3 heading{1, 0, 0};
  double phase = phase0;
  for (int i = 0; i < frames; ++i) {
    const Vec3 step = (i + 1 < frames) ? root_path[i + 1] - root_path[i]
                                       : root_path[i] - root_path[i - 1];
    const double step_len = std::hypot(step.x, step.y);
    const double speed = step_len / dt;
    if (step_len > 1e-9) heading = Vec3{step.x / step_len, step.y / step_len, 0};
    const Vec3 f = heading;
    const Vec3 l{-heading.y, heading.x, 0};
    const Vec3 u{0, 0, 1};

    const double amp = gp.max_swing * std::min(1.0, speed / gp.full_speed);
    const double arm_amp = 0.6 * amp;
    const double sw = std::sin(phase);        // left leg / right arm
    const double sw_op = std::sin(phase + M_PI);  // right leg / left arm
    const double bob = 0.03 * (amp / gp.max_swing) * std::sin(2.0 * phase);

    const Vec3 pelvis = root_path[i] + u * (gp.pelvis_height + bob);
    auto& J = seq.frames[i];
    J.resize(15);
    J[0] = pelvis;                                   // root
    J[1] = pelvis + u * 0.50;                        // neck
    J[2] = pelvis + u * 0.68;                        // head
    J[3] = pelvis + u * 0.45 + l * gp.shoulder_half_width;   // l shoulder
    J[4] = J[3] - u * 0.28 + f * (0.5 * arm_amp * sw_op);    // l elbow
    J[5] = J[3] - u * 0.55 + f * (arm_amp * sw_op);          // l wrist
    J[6] = pelvis + u * 0.45 - l * gp.shoulder_half_width;   // r shoulder
    J[7] = J[6] - u * 0.28 + f * (0.5 * arm_amp * sw);       // r elbow
    J[8] = J[6] - u * 0.55 + f * (arm_amp * sw);             // r wrist
    J[9] = pelvis + l * gp.hip_half_width - u * 0.08;        // l hip
    J[10] = J[9] - u * 0.40 + f * (0.5 * amp * sw);          // l knee
    J[11] = J[9] - u * 0.84 + f * (amp * sw);                // l ankle
    J[12] = pelvis - l * gp.hip_half_width - u * 0.08;       // r hip
    J[13] = J[12] - u * 0.40 + f * (0.5 * amp * sw_op);      // r knee
    J[14] = J[12] - u * 0.84 + f * (amp * sw_op);            // r ankle

    if (noise_std > 0) {
      for (auto& p : J) {
        p.x += noise_std * rng.gaussian();
        p.y += noise_std * rng.gaussian();
        p.z += noise_std * rng.gaussian();
      }
    }
    phase += 2.0 * M_PI * step_len / gp.stride_length;
  }
  return seq;
}

PoseSequence gen_pedestrian_gait(uint64_t seed, const std::vector<Vec3>& waypoints,
                                 int frames, double frame_rate_hz,
                                 double noise_std, int64_t agent_id,
                                 const GaitParams& gp) {
  if (waypoints.size() < 2)
    throw ValidationError("gen_pedestrian_gait: need >= 2 waypoints");
  if (frames < 2) throw ValidationError("gen_pedestrian_gait: need >= 2 frames");

  std::vector<double> cum{0.0};
  for (size_t i = 1; i < waypoints.size(); ++i)
    cum.push_back(cum.back() + (waypoints[i] - waypoints[i - 1]).norm());
  const double total = cum.back();

  std::vector<Vec3> path(frames);
  for (int i = 0; i < frames; ++i) {
    const double s = total * double(i) / double(frames - 1);
    size_t seg = 1;
    while (seg + 1 < cum.size() && cum[seg] < s) ++seg;
    const double seg_len = cum[seg] - cum[seg - 1];
    const double a = seg_len > 0 ? (s - cum[seg - 1]) / seg_len : 0.0;
    path[i] = waypoints[seg - 1] + (waypoints[seg] - waypoints[seg - 1]) * a;
    path[i].z = 0.0;
  }
  return gait_from_root_path(seed, path, frame_rate_hz, noise_std, agent_id, gp);
}

VehicleTrack gen_vehicle_track(int64_t vehicle_id, Vec3 start_center, double heading_rad,
                               double speed_mps, double yaw_rate_rps, int frames,
                               double frame_rate_hz) {
  if (frames < 2) throw ValidationError("gen_vehicle_track: need >= 2 frames");
  const double dt = 1.0 / frame_rate_hz;
  const double half_l = 4.5 / 2.0, half_w = 1.9 / 2.0, height = 1.6;
  // order: FLB RLB RRB FRB, then the top ring (see VehicleTrack convention)
  const Vec3 local[8] = {
      {+half_l, +half_w, 0}, {-half_l, +half_w, 0}, {-half_l, -half_w, 0},
      {+half_l, -half_w, 0}, {+half_l, +half_w, height}, {-half_l, +half_w, height},
      {-half_l, -half_w, height}, {+half_l, -half_w, height}};

  VehicleTrack track;
  track.vehicle_id = vehicle_id;
  track.frame_rate_hz = frame_rate_hz;
  track.frames.resize(frames);
  for (int i = 0; i < frames; ++i) {
    const double t = i * dt;
    double theta = heading_rad;
    Vec3 c = start_center;
    if (std::abs(yaw_rate_rps) < 1e-12) {
      c.x += speed_mps * t * std::cos(heading_rad);
      c.y += speed_mps * t * std::sin(heading_rad);
    } else {
      const double r = speed_mps / yaw_rate_rps;
      theta = heading_rad + yaw_rate_rps * t;
      c.x += r * (std::sin(theta) - std::sin(heading_rad));
      c.y += -r * (std::cos(theta) - std::cos(heading_rad));
    }
    const double ct = std::cos(theta), st = std::sin(theta);
    auto& corners = track.frames[i];
    corners.resize(8);
    for (int k = 0; k < 8; ++k) {
      corners[k] = Vec3{c.x + ct * local[k].x - st * local[k].y,
                        c.y + st * local[k].x + ct * local[k].y, local[k].z};
    }
  }
  return track;
}

namespace {

constexpr double kLane1Y = 1.75;   // eastbound (+x)
constexpr double kLane2Y = 5.25;   // westbound (-x)

std::vector<Vec3> yield_root_path(double x, double approach_speed, int frames,
                                  int decision_frame, double dt, bool halt) {
  // constant-speed approach reaching the curb (y = 0) exactly at the
  // decision frame; afterwards either a dead stop or an unchanged crossing
  std::vector<Vec3> path(frames);
  const double t_d = decision_frame * dt;
  for (int i = 0; i < frames; ++i) {
    const double t = i * dt;
    double y = approach_speed * (t - t_d);
    if (halt && i > decision_frame) y = 0.0;
    path[i] = Vec3{x, y, 0};
  }
  return path;
}

}  // namespace

GeneratedScene gen_interaction_scene(const ScenarioSpec& spec, int64_t scene_id) {
  spec.validate();
  Rng rng(spec.seed ^ splitmix64(uint64_t(scene_id) + 0x51ed2701ULL));
  const int frames = spec.duration_frames;
  const double dt = 1.0 / spec.frame_rate_hz;
  const int decision = spec.decision_frame();
  const double t_d = decision * dt;

  Behavior behavior;
  {
    const double u = rng.uniform();
    if (u < spec.mix.cross)
      behavior = Behavior::cross;
    else if (u < spec.mix.cross + spec.mix.yield)
      behavior = Behavior::yield;
    else if (u < spec.mix.cross + spec.mix.yield + spec.mix.walk_along)
      behavior = Behavior::walk_along;
    else
      behavior = Behavior::stand;
  }
  // yielding needs a vehicle to yield to
  if (behavior == Behavior::yield && spec.n_vehicles == 0) behavior = Behavior::cross;

  GeneratedScene out;
  Scene& scene = out.scene;
  scene.scene_id = scene_id;
  scene.frame_rate_hz = spec.frame_rate_hz;

  // group placement: pedestrians walk side by side
  const double group_x = rng.uniform(-2.0, 2.0);
  const double speed = rng.uniform(1.05, 1.4);
  std::vector<double> xs(spec.n_pedestrians);
  for (int i = 0; i < spec.n_pedestrians; ++i)
    xs[i] = group_x + (i - 0.5 * (spec.n_pedestrians - 1)) * rng.uniform(0.9, 1.4);

  // yield decision: does the approaching vehicle arrive within the time gap?
  bool halt = false;
  double arrival = 0.0;
  double decider_speed = 0.0;
  if (behavior == Behavior::yield) {
    arrival = rng.uniform(0.4, 2.0);
    // keep the decider close enough to stay inside the selection threshold
    const double v_max = std::min(6.0, 13.0 / (arrival + 1.0));
    decider_speed = rng.uniform(3.0, v_max);
    halt = arrival < kYieldTimeGapS;
  }

  for (int i = 0; i < spec.n_pedestrians; ++i) {
    const uint64_t gait_seed = rng.next_u64();
    std::vector<Vec3> path;
    switch (behavior) {
      case Behavior::stand: {
        const Vec3 p{xs[i], rng.uniform(-3.5, -1.0), 0};
        path.assign(frames, p);
        break;
      }
      case Behavior::walk_along: {
        const double dir = rng.uniform() < 0.5 ? 1.0 : -1.0;
        const double y = rng.uniform(-3.5, -1.0);
        const double x0 = xs[i] - dir * speed * 0.5 * (frames - 1) * dt;
        path.resize(frames);
        for (int f = 0; f < frames; ++f)
          path[f] = Vec3{x0 + dir * speed * f * dt, y, 0};
        break;
      }
      case Behavior::cross:
        path = yield_root_path(xs[i], speed, frames, decision, dt, false);
        break;
      case Behavior::yield:
        path = yield_root_path(xs[i], speed, frames, decision, dt, halt);
        break;
    }
    scene.pedestrians.push_back(gait_from_root_path(gait_seed, path, spec.frame_rate_hz,
                                                    spec.noise_std, i));
  }

  int veh_id = 100;
  if (behavior == Behavior::yield && spec.n_vehicles >= 1) {
    // the decider: eastbound in the near lane, center crossing the group's x
    // `arrival` seconds after the decision instant
    const double x_at_decision = group_x - decider_speed * arrival;
    const double x0 = x_at_decision - decider_speed * t_d;
    scene.vehicles.push_back(gen_vehicle_track(veh_id++, Vec3{x0, kLane1Y, 0}, 0.0,
                                               decider_speed, 0.0, frames,
                                               spec.frame_rate_hz));
  }
  while (int(scene.vehicles.size()) < spec.n_vehicles) {
    // context traffic: passes near the group during the window
    const bool eastbound = scene.vehicles.empty() ? false : rng.uniform() < 0.35;
    const double lane_y = eastbound ? kLane1Y : kLane2Y;
    const double heading = eastbound ? 0.0 : M_PI;
    const double v = rng.uniform(3.0, 8.0);
    const double x_mid = group_x + rng.uniform(-6.0, 6.0);
    const double t_mid = 0.5 * (frames - 1) * dt;
    const double x0 = x_mid - std::cos(heading) * v * t_mid;
    const double yaw_rate = rng.uniform() < 0.7 ? 0.0 : rng.uniform(-0.08, 0.08);
    scene.vehicles.push_back(gen_vehicle_track(veh_id++, Vec3{x0, lane_y, 0}, heading,
                                               v, yaw_rate, frames, spec.frame_rate_hz));
  }

  scene.validate();

  out.manifest.scene_id = scene_id;
  out.manifest.seed = spec.seed;
  out.manifest.behavior = behavior_name(behavior);
  out.manifest.n_pedestrians = spec.n_pedestrians;
  out.manifest.n_vehicles = spec.n_vehicles;
  if (behavior == Behavior::yield) {
    out.manifest.yield_branch = halt ? "halt" : "cross";
    out.manifest.arrival_time_s = arrival;
    out.manifest.time_gap_threshold_s = kYieldTimeGapS;
  }
  return out;
}

std::vector<SceneManifestEntry> gen_dataset(const std::vector<ScenarioSpec>& specs,
                                            const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  std::vector<GeneratedScene> generated(specs.size());
  parallel_for(int64_t(specs.size()), [&](int64_t i) {
    generated[i] = gen_interaction_scene(specs[i], i);
  });

  std::ostringstream scenes_out, manifest_out;
  std::vector<SceneManifestEntry> manifest;
  manifest.reserve(specs.size());
  for (auto& g : generated) {
    scenes_out << io::scene_to_json(g.scene).dump() << '\n';
    manifest_out << g.manifest.to_json().dump() << '\n';
    manifest.push_back(g.manifest);
  }
  io::write_text_atomic((fs::path(out_dir) / "scenes.jsonl").string(), scenes_out.str());
  io::write_text_atomic((fs::path(out_dir) / "manifest.jsonl").string(), manifest_out.str());
  return manifest;
}

std::vector<SceneManifestEntry> read_manifest_jsonl(const std::string& path) {
  std::istringstream in(io::read_text_file(path));
  std::vector<SceneManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    entries.push_back(SceneManifestEntry::from_json(nlohmann::json::parse(line)));
  }
  return entries;
}

}  // namespace vpf::synth
