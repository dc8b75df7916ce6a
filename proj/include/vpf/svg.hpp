#pragma once

#include <optional>
#include <string>

#include "vpf/core_types.hpp"
#include "vpf/model.hpp"

namespace vpf::svg {

// Top-down (x, y) trajectory plot for one segment: observed root path,
// ground-truth future, predicted futures, and vehicle box footprints.
struct PlotInputs {
  const Scene* scene = nullptr;
  const SegmentRecord* record = nullptr;
  int t_obs = 0;  // observed displacement steps within the window
  std::optional<model::PosePrediction> ours;
  std::optional<model::PosePrediction> baseline;
};

std::string render_segment_svg(const PlotInputs& in);

}  // namespace vpf::svg
