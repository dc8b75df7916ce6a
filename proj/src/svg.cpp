#include "vpf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace vpf::svg {

namespace {

struct Mapper {
  double min_x, min_y, scale, height;
  double x(double wx) const { return (wx - min_x) * scale + 20.0; }
  double y(double wy) const { return height - ((wy - min_y) * scale + 20.0); }
};

std::string polyline(const Mapper& m, const std::vector<Vec3>& pts,
                     const std::string& color, double width, bool dashed) {
  std::ostringstream out;
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
      << '"';
  if (dashed) out << " stroke-dasharray=\"4 3\"";
  out << " points=\"";
  char buf[64];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", m.x(p.x), m.y(p.y));
    out << buf;
  }
  out << "\"/>\n";
  return out.str();
}

}  // namespace

std::string render_segment_svg(const PlotInputs& in) {
  const Scene& scene = *in.scene;
  const SegmentRecord& rec = *in.record;
  const int start = rec.frame_start;
  const int end = rec.frame_end;

  // collect world extents over everything drawn
  double min_x = 1e18, max_x = -1e18, min_y = 1e18, max_y = -1e18;
  auto grow = [&](double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  };
  for (const auto& p : scene.pedestrians)
    for (int t = start; t < end; ++t) grow(p.frames[t][0].x, p.frames[t][0].y);
  for (int64_t vid : rec.vehicle_ids)
    for (const auto& v : scene.vehicles)
      if (v.vehicle_id == vid)
        for (int t = start; t < end; ++t)
          for (int c = 0; c < 4; ++c) grow(v.frames[t][c].x, v.frames[t][c].y);
  if (min_x > max_x) grow(0, 0);
  const double span = std::max({max_x - min_x, max_y - min_y, 1.0});
  const double scale = 560.0 / span;
  const double width = (max_x - min_x) * scale + 40.0;
  const double height = (max_y - min_y) * scale + 40.0;
  Mapper m{min_x, min_y, scale, height};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << int(width)
      << "\" height=\"" << int(height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // vehicle footprints at a few frames along the window
  for (int64_t vid : rec.vehicle_ids) {
    for (const auto& v : scene.vehicles) {
      if (v.vehicle_id != vid) continue;
      for (int t = start; t < end; t += std::max(1, (end - start) / 4)) {
        out << "<polygon fill=\"none\" stroke=\"#444444\" stroke-width=\"1\" points=\"";
        char buf[64];
        for (int c = 0; c < 4; ++c) {
          std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", m.x(v.frames[t][c].x),
                        m.y(v.frames[t][c].y));
          out << buf;
        }
        out << "\"/>\n";
      }
    }
  }

  const int split = start + in.t_obs;  // last observed frame
  size_t ped_idx = 0;
  for (int64_t pid : rec.pedestrian_ids) {
    for (const auto& p : scene.pedestrians) {
      if (p.agent_id != pid) continue;
      std::vector<Vec3> observed, future;
      for (int t = start; t <= split && t < end; ++t) observed.push_back(p.frames[t][0]);
      for (int t = split; t < end; ++t) future.push_back(p.frames[t][0]);
      out << polyline(m, observed, "#777777", 1.5, false);
      out << polyline(m, future, "#2e8b57", 2.0, false);  // truth
      if (in.baseline && ped_idx < in.baseline->size()) {
        std::vector<Vec3> roots{p.frames[split][0]};
        for (const auto& frame : (*in.baseline)[ped_idx]) roots.push_back(frame[0]);
        out << polyline(m, roots, "#1f77b4", 2.0, true);
      }
      if (in.ours && ped_idx < in.ours->size()) {
        std::vector<Vec3> roots{p.frames[split][0]};
        for (const auto& frame : (*in.ours)[ped_idx]) roots.push_back(frame[0]);
        out << polyline(m, roots, "#d62728", 2.0, true);
      }
    }
    ++ped_idx;
  }
  out << "<text x=\"24\" y=\"18\" font-size=\"12\">truth green, model red, baseline "
         "blue, vehicles grey</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace vpf::svg
