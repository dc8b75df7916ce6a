#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpf/model.hpp"

namespace vpf::gradcheck {

struct CheckLine {
  std::string name;
  double max_rel_err = 0.0;
  int64_t checked = 0;
  bool pass = false;
};

// Finite-difference checks for every autodiff primitive, `seeds` random
// instances each (random shapes, remainder-unfriendly sizes included).
std::vector<CheckLine> primitive_checks(int seeds, double step, double tol);

// Full forecaster on a micro configuration: every parameter element of the
// model is perturbed, dropout active, vehicles present.
model::ModelConfig micro_config();
Scene random_scene(uint64_t seed, const model::ModelConfig& cfg, int n_ped, int n_veh);
CheckLine full_model_check(uint64_t seed, double step, double tol);

}  // namespace vpf::gradcheck
