#include "vpf/scene_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace vpf::io {

namespace {

nlohmann::json frames_to_json(const std::vector<std::vector<Vec3>>& frames) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : frames) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& p : f) row.push_back({p.x, p.y, p.z});
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<std::vector<Vec3>> frames_from_json(const nlohmann::json& j,
                                                const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + ": expected array of frames");
  std::vector<std::vector<Vec3>> frames;
  frames.reserve(j.size());
  for (const auto& row : j) {
    std::vector<Vec3> f;
    f.reserve(row.size());
    for (const auto& p : row) {
      if (!p.is_array() || p.size() != 3)
        throw ValidationError(std::string(what) + ": point must be [x,y,z]");
      f.push_back(Vec3{p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["scene_id"] = scene.scene_id;
  j["frame_rate_hz"] = scene.frame_rate_hz;
  j["pedestrians"] = nlohmann::json::array();
  for (const auto& p : scene.pedestrians) {
    j["pedestrians"].push_back(
        {{"agent_id", p.agent_id}, {"joints", frames_to_json(p.frames)}});
  }
  j["vehicles"] = nlohmann::json::array();
  for (const auto& v : scene.vehicles) {
    j["vehicles"].push_back(
        {{"vehicle_id", v.vehicle_id}, {"corners", frames_to_json(v.frames)}});
  }
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  s.scene_id = j.at("scene_id").get<int64_t>();
  s.frame_rate_hz = j.at("frame_rate_hz").get<double>();
  for (const auto& p : j.at("pedestrians")) {
    PoseSequence seq;
    seq.agent_id = p.at("agent_id").get<int64_t>();
    seq.frames = frames_from_json(p.at("joints"), "pedestrian joints");
    seq.frame_rate_hz = s.frame_rate_hz;
    s.pedestrians.push_back(std::move(seq));
  }
  if (j.contains("vehicles")) {
    for (const auto& v : j.at("vehicles")) {
      VehicleTrack t;
      t.vehicle_id = v.at("vehicle_id").get<int64_t>();
      t.frames = frames_from_json(v.at("corners"), "vehicle corners");
      t.frame_rate_hz = s.frame_rate_hz;
      s.vehicles.push_back(std::move(t));
    }
  }
  s.validate();
  return s;
}

std::vector<Scene> read_scenes_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file: " + path);
  std::vector<Scene> scenes;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError(path + ":" + std::to_string(line_no) + ": invalid JSON");
    scenes.push_back(scene_from_json(j));
  }
  return scenes;
}

void write_scenes_jsonl(const std::string& path, const std::vector<Scene>& scenes) {
  std::ostringstream out;
  for (const auto& s : scenes) out << scene_to_json(s).dump() << '\n';
  write_text_atomic(path, out.str());
}

nlohmann::json segment_to_json(const SegmentRecord& r) {
  nlohmann::json j;
  j["scene_id"] = r.scene_id;
  j["frame_start"] = r.frame_start;
  j["frame_end"] = r.frame_end;
  j["pedestrian_ids"] = r.pedestrian_ids;
  j["vehicle_ids"] = r.vehicle_ids;
  j["R"] = r.min_max_distance;
  j["category"] = {r.n_ped, r.n_veh};
  j["split"] = r.split;
  return j;
}

SegmentRecord segment_from_json(const nlohmann::json& j) {
  SegmentRecord r;
  r.scene_id = j.at("scene_id").get<int64_t>();
  r.frame_start = j.at("frame_start").get<int>();
  r.frame_end = j.at("frame_end").get<int>();
  r.pedestrian_ids = j.at("pedestrian_ids").get<std::vector<int64_t>>();
  r.vehicle_ids = j.at("vehicle_ids").get<std::vector<int64_t>>();
  r.min_max_distance = j.at("R").get<double>();
  r.n_ped = j.at("category")[0].get<int>();
  r.n_veh = j.at("category")[1].get<int>();
  r.split = j.value("split", "");
  return r;
}

std::vector<SegmentRecord> read_segments_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open segment manifest: " + path);
  std::vector<SegmentRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError(path + ":" + std::to_string(line_no) + ": invalid JSON");
    records.push_back(segment_from_json(j));
  }
  return records;
}

void write_segments_jsonl(const std::string& path,
                          const std::vector<SegmentRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << segment_to_json(r).dump() << '\n';
  write_text_atomic(path, out.str());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_binary_atomic(const std::string& path, const void* data, size_t bytes) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + tmp.string());
    out.write(static_cast<const char*>(data), std::streamsize(bytes));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("rename failed for " + target.string() + ": " + ec.message());
}

void write_text_atomic(const std::string& path, const std::string& content) {
  write_binary_atomic(path, content.data(), content.size());
}

}  // namespace vpf::io
