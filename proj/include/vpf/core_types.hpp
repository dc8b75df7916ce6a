#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpf/common.hpp"

namespace vpf {

// Per-pedestrian time series of J joint positions, meters, shared world frame.
struct PoseSequence {
  int64_t agent_id = 0;
  std::vector<std::vector<Vec3>> frames;  // (T+1) x J
  double frame_rate_hz = 25.0;

  int frame_count() const { return int(frames.size()); }
  int joint_count() const { return frames.empty() ? 0 : int(frames[0].size()); }
  void validate() const;
};

// Per-vehicle time series of 3D bounding-box corners, meters.
//
// Corner ordering convention (fixed so edge/face groupings are well defined):
// bottom face counter-clockwise viewed from above, starting front-left-bottom
// (0 FLB, 1 RLB, 2 RRB, 3 FRB), then the top face in the same order
// (4 FLT, 5 RLT, 6 RRT, 7 FRT). "Front" is the +x direction of the box frame.
struct VehicleTrack {
  int64_t vehicle_id = 0;
  std::vector<std::vector<Vec3>> frames;  // (T+1) x 8
  double frame_rate_hz = 25.0;

  int frame_count() const { return int(frames.size()); }
  void validate() const;

  // centroid of the 8 corners; the vehicle reference point for distances
  Vec3 center(int frame) const;
};

// Frame-to-frame deltas plus the first absolute frame, so the transform
// inverts exactly.
struct DisplacementSequence {
  int64_t agent_id = 0;
  std::vector<std::vector<Vec3>> displacements;  // T x points
  std::vector<Vec3> origin;                      // absolute frame 1

  int step_count() const { return int(displacements.size()); }
  int point_count() const { return int(origin.size()); }
};

// Aligned multi-agent window; the unit of training and evaluation.
struct Scene {
  int64_t scene_id = 0;
  double frame_rate_hz = 25.0;
  std::vector<PoseSequence> pedestrians;
  std::vector<VehicleTrack> vehicles;

  int frame_count() const {
    return pedestrians.empty() ? 0 : pedestrians[0].frame_count();
  }
  void validate() const;
};

// Disjoint joint-index groups covering the skeleton (trunk + limbs).
struct BodyPartition {
  int joint_count = 0;
  std::vector<std::vector<int>> groups;

  void validate() const;
  int group_count() const { return int(groups.size()); }
  int max_group_size() const;

  // 15-joint default: root(0) neck(1) head(2), then 3-joint arms and legs;
  // 5 groups = trunk + 4 limbs.
  static BodyPartition default15();
};

// Corner-index groups for one of the supported schemes:
//   1  all corners            2  front / back faces
//   4  vertical edges         6  box faces
//   8  single corners         12 box edges
struct CornerGrouping {
  int scheme = 12;
  std::vector<std::vector<int>> groups;

  static CornerGrouping make(int scheme);
  static const std::vector<int>& supported_schemes();
  int group_count() const { return int(groups.size()); }
  int max_group_size() const;
};

DisplacementSequence to_displacements(const PoseSequence& seq);
DisplacementSequence to_displacements(const VehicleTrack& track);

PoseSequence pose_from_displacements(const DisplacementSequence& d, double frame_rate_hz);
VehicleTrack track_from_displacements(const DisplacementSequence& d, double frame_rate_hz);

// Groups a (steps x points x 3) feature grid into per-group token streams.
// Stream g is row-major (steps x 3*group_size) with the group's points
// concatenated in partition order. The grid may hold displacements or DCT
// coefficients; only the point grouping matters here.
std::vector<std::vector<double>> group_token_streams(
    const std::vector<std::vector<Vec3>>& grid,
    const std::vector<std::vector<int>>& groups);

// TBPM tokenization: one stream per body group over the sequence's
// frame-to-frame displacements.
std::vector<std::vector<double>> partition_tokens(const PoseSequence& seq,
                                                  const BodyPartition& partition);

// Vehicle analogue over corner groups.
std::vector<std::vector<double>> corner_group_tokens(const VehicleTrack& track,
                                                     const CornerGrouping& grouping);

}  // namespace vpf
