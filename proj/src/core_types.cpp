#include "vpf/core_types.hpp"

#include <algorithm>
#include <set>

namespace vpf {

namespace {

void check_grid(const std::vector<std::vector<Vec3>>& frames, int points,
                const char* what) {
  for (const auto& f : frames) {
    if (int(f.size()) != points)
      throw ValidationError(std::string(what) + ": ragged frame point count");
    for (const auto& p : f)
      if (!p.finite())
        throw ValidationError(std::string(what) + ": non-finite coordinate");
  }
}

}  // namespace

void PoseSequence::validate() const {
  if (frame_count() < 2) throw ValidationError("PoseSequence: needs >= 2 frames");
  if (joint_count() < 2) throw ValidationError("PoseSequence: needs >= 2 joints");
  if (!(frame_rate_hz > 0)) throw ValidationError("PoseSequence: frame rate must be positive");
  check_grid(frames, joint_count(), "PoseSequence");
}

void VehicleTrack::validate() const {
  if (frame_count() < 2) throw ValidationError("VehicleTrack: needs >= 2 frames");
  if (!(frame_rate_hz > 0)) throw ValidationError("VehicleTrack: frame rate must be positive");
  check_grid(frames, 8, "VehicleTrack");
  // edges implied by the corner convention must have positive length
  static const int edges[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                   {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
  for (const auto& f : frames) {
    for (const auto& e : edges) {
      if (!((f[e[0]] - f[e[1]]).norm() > 0.0))
        throw ValidationError("VehicleTrack: degenerate box edge");
    }
  }
}

Vec3 VehicleTrack::center(int frame) const {
  Vec3 c;
  for (const auto& p : frames[frame]) c += p;
  return c * (1.0 / 8.0);
}

void Scene::validate() const {
  if (pedestrians.empty()) throw ValidationError("Scene: needs >= 1 pedestrian");
  const int frames = pedestrians[0].frame_count();
  for (const auto& p : pedestrians) {
    p.validate();
    if (p.frame_count() != frames)
      throw ValidationError("Scene: pedestrian sequences not temporally aligned");
    if (p.frame_rate_hz != frame_rate_hz)
      throw ValidationError("Scene: pedestrian frame rate mismatch");
  }
  for (const auto& v : vehicles) {
    v.validate();
    if (v.frame_count() != frames)
      throw ValidationError("Scene: vehicle tracks not temporally aligned");
    if (v.frame_rate_hz != frame_rate_hz)
      throw ValidationError("Scene: vehicle frame rate mismatch");
  }
}

void BodyPartition::validate() const {
  if (joint_count < 2) throw ValidationError("BodyPartition: joint_count must be >= 2");
  if (groups.empty()) throw ValidationError("BodyPartition: needs >= 1 group");
  std::set<int> seen;
  for (const auto& g : groups) {
    if (g.empty()) throw ValidationError("BodyPartition: empty group");
    for (int j : g) {
      if (j < 0 || j >= joint_count)
        throw ValidationError("BodyPartition: joint index out of range");
      if (!seen.insert(j).second)
        throw ValidationError("BodyPartition: groups must be disjoint");
    }
  }
  if (int(seen.size()) != joint_count)
    throw ValidationError("BodyPartition: groups must cover all joints");
}

int BodyPartition::max_group_size() const {
  int m = 0;
  for (const auto& g : groups) m = std::max(m, int(g.size()));
  return m;
}

BodyPartition BodyPartition::default15() {
  BodyPartition p;
  p.joint_count = 15;
  p.groups = {
      {0, 1, 2},     // trunk: root, neck, head
      {3, 4, 5},     // left arm: shoulder, elbow, wrist
      {6, 7, 8},     // right arm
      {9, 10, 11},   // left leg: hip, knee, ankle
      {12, 13, 14},  // right leg
  };
  return p;
}

const std::vector<int>& CornerGrouping::supported_schemes() {
  static const std::vector<int> s = {1, 2, 4, 6, 8, 12};
  return s;
}

CornerGrouping CornerGrouping::make(int scheme) {
  CornerGrouping g;
  g.scheme = scheme;
  switch (scheme) {
    case 1:
      g.groups = {{0, 1, 2, 3, 4, 5, 6, 7}};
      break;
    case 2:  // front face, back face
      g.groups = {{0, 3, 7, 4}, {1, 2, 6, 5}};
      break;
    case 4:  // vertical edges
      g.groups = {{0, 4}, {1, 5}, {2, 6}, {3, 7}};
      break;
    case 6:  // faces: bottom, top, front, back, left, right
      g.groups = {{0, 1, 2, 3}, {4, 5, 6, 7}, {0, 3, 7, 4},
                  {1, 2, 6, 5}, {0, 1, 5, 4}, {2, 3, 7, 6}};
      break;
    case 8:
      g.groups = {{0}, {1}, {2}, {3}, {4}, {5}, {6}, {7}};
      break;
    case 12:  // edges: bottom ring, top ring, verticals
      g.groups = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                  {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
      break;
    default:
      throw ValidationError("CornerGrouping: scheme must be one of {1,2,4,6,8,12}");
  }
  return g;
}

int CornerGrouping::max_group_size() const {
  int m = 0;
  for (const auto& g : groups) m = std::max(m, int(g.size()));
  return m;
}

namespace {

DisplacementSequence diff_frames(int64_t id,
                                 const std::vector<std::vector<Vec3>>& frames) {
  if (frames.size() < 2)
    throw ValidationError("to_displacements: input needs >= 2 frames");
  DisplacementSequence d;
  d.agent_id = id;
  d.origin = frames[0];
  d.displacements.resize(frames.size() - 1);
  for (size_t t = 0; t + 1 < frames.size(); ++t) {
    auto& row = d.displacements[t];
    row.resize(frames[t].size());
    for (size_t j = 0; j < row.size(); ++j) row[j] = frames[t + 1][j] - frames[t][j];
  }
  return d;
}

std::vector<std::vector<Vec3>> cumsum_frames(const DisplacementSequence& d) {
  if (d.origin.empty())
    throw ValidationError("from_displacements: origin frame missing");
  std::vector<std::vector<Vec3>> frames(d.displacements.size() + 1);
  frames[0] = d.origin;
  for (size_t t = 0; t < d.displacements.size(); ++t) {
    if (d.displacements[t].size() != d.origin.size())
      throw ValidationError("from_displacements: displacement/origin shape mismatch");
    frames[t + 1].resize(d.origin.size());
    for (size_t j = 0; j < d.origin.size(); ++j)
      frames[t + 1][j] = frames[t][j] + d.displacements[t][j];
  }
  return frames;
}

}  // namespace

DisplacementSequence to_displacements(const PoseSequence& seq) {
  return diff_frames(seq.agent_id, seq.frames);
}

DisplacementSequence to_displacements(const VehicleTrack& track) {
  return diff_frames(track.vehicle_id, track.frames);
}

PoseSequence pose_from_displacements(const DisplacementSequence& d, double frame_rate_hz) {
  PoseSequence s;
  s.agent_id = d.agent_id;
  s.frame_rate_hz = frame_rate_hz;
  s.frames = cumsum_frames(d);
  return s;
}

VehicleTrack track_from_displacements(const DisplacementSequence& d, double frame_rate_hz) {
  VehicleTrack t;
  t.vehicle_id = d.agent_id;
  t.frame_rate_hz = frame_rate_hz;
  t.frames = cumsum_frames(d);
  return t;
}

std::vector<std::vector<double>> group_token_streams(
    const std::vector<std::vector<Vec3>>& grid,
    const std::vector<std::vector<int>>& groups) {
  std::vector<std::vector<double>> streams(groups.size());
  const int steps = int(grid.size());
  for (size_t g = 0; g < groups.size(); ++g) {
    const auto& idx = groups[g];
    auto& stream = streams[g];
    stream.resize(size_t(steps) * idx.size() * 3);
    size_t w = 0;
    for (int t = 0; t < steps; ++t) {
      for (int p : idx) {
        if (p < 0 || p >= int(grid[t].size()))
          throw ValidationError("group_token_streams: point index out of range");
        stream[w++] = grid[t][p].x;
        stream[w++] = grid[t][p].y;
        stream[w++] = grid[t][p].z;
      }
    }
  }
  return streams;
}

std::vector<std::vector<double>> partition_tokens(const PoseSequence& seq,
                                                  const BodyPartition& partition) {
  partition.validate();
  if (partition.joint_count != seq.joint_count())
    throw ValidationError("partition_tokens: partition joint count does not match sequence");
  return group_token_streams(to_displacements(seq).displacements, partition.groups);
}

std::vector<std::vector<double>> corner_group_tokens(const VehicleTrack& track,
                                                     const CornerGrouping& grouping) {
  if (grouping.groups.empty())
    throw ValidationError("corner_group_tokens: invalid grouping");
  return group_token_streams(to_displacements(track).displacements, grouping.groups);
}

}  // namespace vpf
