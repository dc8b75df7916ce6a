#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "vpf/core_types.hpp"
#include "vpf/scene_pipeline.hpp"

namespace vpf::io {

// Scene interchange: newline-delimited JSON, one scene per line.
// {scene_id, frame_rate_hz,
//  pedestrians: [{agent_id, joints: [T+1][J][3]}],
//  vehicles:    [{vehicle_id, corners: [T+1][8][3]}]}
// Coordinates in meters.
nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

std::vector<Scene> read_scenes_jsonl(const std::string& path);
void write_scenes_jsonl(const std::string& path, const std::vector<Scene>& scenes);

// Segment manifest: one record per line.
// {scene_id, frame_start, frame_end, pedestrian_ids, vehicle_ids, R,
//  category: [n_ped, n_veh], split}
nlohmann::json segment_to_json(const SegmentRecord& r);
SegmentRecord segment_from_json(const nlohmann::json& j);

std::vector<SegmentRecord> read_segments_jsonl(const std::string& path);
void write_segments_jsonl(const std::string& path, const std::vector<SegmentRecord>& records);

// Whole-file helpers; writes go to a temp file in the same directory and are
// renamed into place so interrupted runs never leave partial artifacts.
std::string read_text_file(const std::string& path);
void write_text_atomic(const std::string& path, const std::string& content);
void write_binary_atomic(const std::string& path, const void* data, size_t bytes);

}  // namespace vpf::io
