#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vpf/core_types.hpp"

namespace vpf {

struct SegmentFilterConfig {
  int window_frames = 75;  // 50 observed + 25 future at 25 Hz
  int stride_frames = 25;
  double max_pairwise_distance_m = 18.0;  // R_max
  double vehicle_distance_threshold_m = 15.0;
  std::vector<int> pedestrian_counts = {1, 2, 3};
  std::vector<int> vehicle_counts = {1, 2, 3, 4};
  double train_fraction = 0.8;

  void validate() const;
};

struct SegmentRecord {
  int64_t scene_id = 0;
  int frame_start = 0;
  int frame_end = 0;  // exclusive
  std::vector<int64_t> pedestrian_ids;
  std::vector<int64_t> vehicle_ids;
  double min_max_distance = 0.0;  // R
  int n_ped = 0;
  int n_veh = 0;
  std::string split;  // "train" | "val"
};

// Candidate pedestrian groups of the given size: each pedestrian together
// with its (group_size - 1) nearest neighbors by mean root position over the
// window, found through the k-d index; duplicate id sets deduplicated.
// Groups are returned as sorted id vectors in deterministic order.
std::vector<std::vector<int64_t>> group_nearby_pedestrians(const Scene& scene,
                                                           int frame_start,
                                                           int frame_count,
                                                           int group_size);

// R = min over timestamps of the max pairwise root distance; 0 for a single
// pedestrian so one-person windows always pass the retention filter.
double min_max_pairwise_distance(const std::vector<const PoseSequence*>& group,
                                 int frame_start, int frame_count);

// Vehicles whose average distance (box centroid to nearest group pedestrian
// root, per frame) stays within threshold_m. Sorted by ascending id.
std::vector<int64_t> select_vehicles(const Scene& scene,
                                     const std::vector<int64_t>& pedestrian_ids,
                                     int frame_start, int frame_count,
                                     double threshold_m);

// Sliding-window segmentation of one scene: grouping, the R filter, vehicle
// selection (truncated to the nearest max(vehicle_counts) vehicles), and
// categorization. Split labels are not assigned here; see assign_splits.
std::vector<SegmentRecord> segment_scene(const Scene& scene,
                                         const SegmentFilterConfig& cfg);

std::vector<SegmentRecord> segment_scenes(const std::vector<Scene>& scenes,
                                          const SegmentFilterConfig& cfg);

// Deterministic 80/20-style split, stratified per (n_ped, n_veh) category:
// records ranked by splitmix64(scene_id) (then scene_id, frame_start, ids),
// first round(train_fraction * cell) become "train".
void assign_splits(std::vector<SegmentRecord>& records, double train_fraction);

struct StatsTable {
  // (n_ped, n_veh) -> (train count, val count)
  std::map<std::pair<int, int>, std::pair<int64_t, int64_t>> cells;

  std::string to_csv() const;   // header: n_ped,n_veh,train_count,val_count
  std::string to_text() const;  // aligned table for the terminal
};

StatsTable dataset_stats(const std::vector<SegmentRecord>& records);

}  // namespace vpf
