#include "vpf/scene_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "vpf/kdtree.hpp"

namespace vpf {

void SegmentFilterConfig::validate() const {
  if (window_frames < 2) throw ValidationError("segment config: window must be >= 2 frames");
  if (stride_frames < 1) throw ValidationError("segment config: stride must be >= 1");
  if (!(max_pairwise_distance_m > 0) || !(vehicle_distance_threshold_m > 0))
    throw ValidationError("segment config: thresholds must be positive");
  if (pedestrian_counts.empty()) throw ValidationError("segment config: pedestrian_counts empty");
  for (int c : pedestrian_counts)
    if (c < 1) throw ValidationError("segment config: pedestrian counts must be >= 1");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
    throw ValidationError("segment config: train_fraction must be in [0,1]");
}

namespace {

Vec3 mean_root(const PoseSequence& p, int start, int count) {
  Vec3 m;
  for (int t = start; t < start + count; ++t) m += p.frames[t][0];
  return m * (1.0 / count);
}

void check_window(const Scene& scene, int start, int count) {
  if (count < 1) throw ValidationError("scene window: empty");
  if (start < 0 || start + count > scene.frame_count())
    throw ValidationError("scene window: out of range");
}

}  // namespace

std::vector<std::vector<int64_t>> group_nearby_pedestrians(const Scene& scene,
                                                           int frame_start,
                                                           int frame_count,
                                                           int group_size) {
  check_window(scene, frame_start, frame_count);
  if (group_size < 1) throw ValidationError("group_nearby_pedestrians: group size must be >= 1");
  const int n = int(scene.pedestrians.size());
  if (n < group_size) return {};

  std::vector<Vec3> points(n);
  std::vector<int64_t> ids(n);
  for (int i = 0; i < n; ++i) {
    points[i] = mean_root(scene.pedestrians[i], frame_start, frame_count);
    ids[i] = scene.pedestrians[i].agent_id;
  }
  KdIndex index(points, ids);

  std::set<std::vector<int64_t>> dedup;
  for (int i = 0; i < n; ++i) {
    auto group = index.nearest_ids(points[i], group_size);
    // self is at distance 0; the query point is always included
    std::sort(group.begin(), group.end());
    dedup.insert(std::move(group));
  }
  return {dedup.begin(), dedup.end()};
}

double min_max_pairwise_distance(const std::vector<const PoseSequence*>& group,
                                 int frame_start, int frame_count) {
  if (group.empty()) throw ValidationError("min_max_pairwise_distance: empty group");
  if (group.size() == 1) return 0.0;
  double r = std::numeric_limits<double>::infinity();
  for (int t = frame_start; t < frame_start + frame_count; ++t) {
    double worst = 0.0;
    for (size_t i = 0; i < group.size(); ++i) {
      for (size_t j = i + 1; j < group.size(); ++j) {
        const double d = distance(group[i]->frames[t][0], group[j]->frames[t][0]);
        if (d > worst) worst = d;
      }
    }
    if (worst < r) r = worst;
  }
  return r;
}

namespace {

const PoseSequence* find_pedestrian(const Scene& scene, int64_t id) {
  for (const auto& p : scene.pedestrians)
    if (p.agent_id == id) return &p;
  throw ValidationError("unknown pedestrian id in group");
}

double avg_vehicle_distance(const VehicleTrack& v,
                            const std::vector<const PoseSequence*>& peds,
                            int start, int count) {
  double acc = 0.0;
  for (int t = start; t < start + count; ++t) {
    const Vec3 c = v.center(t);
    double best = std::numeric_limits<double>::infinity();
    for (const auto* p : peds) {
      const double d = distance(p->frames[t][0], c);
      if (d < best) best = d;
    }
    acc += best;
  }
  return acc / count;
}

}  // namespace

std::vector<int64_t> select_vehicles(const Scene& scene,
                                     const std::vector<int64_t>& pedestrian_ids,
                                     int frame_start, int frame_count,
                                     double threshold_m) {
  check_window(scene, frame_start, frame_count);
  std::vector<const PoseSequence*> peds;
  for (int64_t id : pedestrian_ids) peds.push_back(find_pedestrian(scene, id));
  std::vector<int64_t> selected;
  for (const auto& v : scene.vehicles) {
    if (avg_vehicle_distance(v, peds, frame_start, frame_count) <= threshold_m)
      selected.push_back(v.vehicle_id);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<SegmentRecord> segment_scene(const Scene& scene,
                                         const SegmentFilterConfig& cfg) {
  cfg.validate();
  scene.validate();
  std::vector<SegmentRecord> records;
  if (scene.frame_count() < cfg.window_frames) return records;

  const bool keep_zero_veh =
      std::find(cfg.vehicle_counts.begin(), cfg.vehicle_counts.end(), 0) !=
      cfg.vehicle_counts.end();
  const int max_veh = cfg.vehicle_counts.empty()
                          ? 0
                          : *std::max_element(cfg.vehicle_counts.begin(),
                                              cfg.vehicle_counts.end());

  for (int start = 0; start + cfg.window_frames <= scene.frame_count();
       start += cfg.stride_frames) {
    for (int n_ped : cfg.pedestrian_counts) {
      auto groups = group_nearby_pedestrians(scene, start, cfg.window_frames, n_ped);
      for (auto& group : groups) {
        std::vector<const PoseSequence*> peds;
        for (int64_t id : group) peds.push_back(find_pedestrian(scene, id));
        const double r = min_max_pairwise_distance(peds, start, cfg.window_frames);
        if (r > cfg.max_pairwise_distance_m) continue;

        auto vehicles = select_vehicles(scene, group, start, cfg.window_frames,
                                        cfg.vehicle_distance_threshold_m);
        if (int(vehicles.size()) > max_veh) {
          // keep the nearest max_veh vehicles by average distance
          std::vector<std::pair<double, int64_t>> ranked;
          for (int64_t vid : vehicles) {
            for (const auto& v : scene.vehicles) {
              if (v.vehicle_id == vid) {
                ranked.push_back(
                    {avg_vehicle_distance(v, peds, start, cfg.window_frames), vid});
                break;
              }
            }
          }
          std::sort(ranked.begin(), ranked.end());
          vehicles.clear();
          for (int i = 0; i < max_veh; ++i) vehicles.push_back(ranked[i].second);
          std::sort(vehicles.begin(), vehicles.end());
        }
        if (vehicles.empty() && !keep_zero_veh) continue;

        SegmentRecord rec;
        rec.scene_id = scene.scene_id;
        rec.frame_start = start;
        rec.frame_end = start + cfg.window_frames;
        rec.pedestrian_ids = group;
        rec.vehicle_ids = vehicles;
        rec.min_max_distance = r;
        rec.n_ped = n_ped;
        rec.n_veh = int(vehicles.size());
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

std::vector<SegmentRecord> segment_scenes(const std::vector<Scene>& scenes,
                                          const SegmentFilterConfig& cfg) {
  std::vector<std::vector<SegmentRecord>> per_scene(scenes.size());
  parallel_for(int64_t(scenes.size()), [&](int64_t i) {
    per_scene[i] = segment_scene(scenes[i], cfg);
  });
  std::vector<SegmentRecord> all;
  for (auto& part : per_scene)
    for (auto& r : part) all.push_back(std::move(r));
  assign_splits(all, cfg.train_fraction);
  return all;
}

void assign_splits(std::vector<SegmentRecord>& records, double train_fraction) {
  // stratified by category so the ratio holds within +-1 record per cell
  std::map<std::pair<int, int>, std::vector<size_t>> by_cell;
  for (size_t i = 0; i < records.size(); ++i)
    by_cell[{records[i].n_ped, records[i].n_veh}].push_back(i);
  for (auto& [cell, idx] : by_cell) {
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      const auto& ra = records[a];
      const auto& rb = records[b];
      const uint64_t ha = splitmix64(uint64_t(ra.scene_id));
      const uint64_t hb = splitmix64(uint64_t(rb.scene_id));
      if (ha != hb) return ha < hb;
      if (ra.scene_id != rb.scene_id) return ra.scene_id < rb.scene_id;
      if (ra.frame_start != rb.frame_start) return ra.frame_start < rb.frame_start;
      return ra.pedestrian_ids < rb.pedestrian_ids;
    });
    const int64_t n_train = llround(train_fraction * double(idx.size()));
    for (size_t k = 0; k < idx.size(); ++k)
      records[idx[k]].split = (int64_t(k) < n_train) ? "train" : "val";
  }
}

StatsTable dataset_stats(const std::vector<SegmentRecord>& records) {
  StatsTable t;
  for (const auto& r : records) {
    auto& cell = t.cells[{r.n_ped, r.n_veh}];
    if (r.split == "val")
      ++cell.second;
    else
      ++cell.first;
  }
  return t;
}

std::string StatsTable::to_csv() const {
  std::ostringstream out;
  out << "n_ped,n_veh,train_count,val_count\n";
  for (const auto& [cell, counts] : cells)
    out << cell.first << ',' << cell.second << ',' << counts.first << ','
        << counts.second << '\n';
  return out.str();
}

std::string StatsTable::to_text() const {
  std::ostringstream out;
  out << " n_ped  n_veh  train    val\n";
  char buf[96];
  for (const auto& [cell, counts] : cells) {
    std::snprintf(buf, sizeof(buf), "%6d %6d %6lld %6lld\n", cell.first, cell.second,
                  (long long)counts.first, (long long)counts.second);
    out << buf;
  }
  return out.str();
}

}  // namespace vpf
