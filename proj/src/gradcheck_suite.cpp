#include "vpf/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "vpf/synthgen.hpp"

namespace vpf::gradcheck {

using ad::Shape;
using ad::Tensor;

namespace {

Tensor random_param(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return Tensor::param(std::move(shape), std::move(v));
}

Tensor random_const(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

struct Case {
  std::string name;
  // builds leaves + returns the scalar function over them
  std::function<void(Rng&, std::vector<Tensor>&, std::function<Tensor()>&)> make;
};

std::vector<Case> primitive_cases() {
  std::vector<Case> cases;
  auto push = [&](std::string name, auto fn) {
    cases.push_back({std::move(name), fn});
  };

  push("matmul_2d", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(4)), k = 2 + int(rng.uniform_int(4)),
              n = 2 + int(rng.uniform_int(4));
    leaves = {random_param(rng, {m, k}), random_param(rng, {k, n})};
    Tensor weights = random_const(rng, {m, n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::matmul(leaves[0], leaves[1]), weights)); };
  });
  push("matmul_batched", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int b = 2 + int(rng.uniform_int(2)), m = 2 + int(rng.uniform_int(3)),
              k = 2 + int(rng.uniform_int(3)), n = 2 + int(rng.uniform_int(3));
    leaves = {random_param(rng, {b, m, k}), random_param(rng, {b, k, n})};
    Tensor weights = random_const(rng, {b, m, n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::matmul(leaves[0], leaves[1]), weights)); };
  });
  push("matmul_3d_2d", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int b = 2 + int(rng.uniform_int(2)), m = 2 + int(rng.uniform_int(3)),
              k = 2 + int(rng.uniform_int(3)), n = 2 + int(rng.uniform_int(3));
    leaves = {random_param(rng, {b, m, k}), random_param(rng, {k, n})};
    Tensor weights = random_const(rng, {b, m, n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::matmul(leaves[0], leaves[1]), weights)); };
  });
  push("matmul_2d_3d", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int b = 2 + int(rng.uniform_int(2)), m = 2 + int(rng.uniform_int(3)),
              k = 2 + int(rng.uniform_int(3)), n = 2 + int(rng.uniform_int(3));
    leaves = {random_param(rng, {m, k}), random_param(rng, {b, k, n})};
    Tensor weights = random_const(rng, {b, m, n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::matmul(leaves[0], leaves[1]), weights)); };
  });
  push("add", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(5)), n = 1 + int(rng.uniform_int(7));
    leaves = {random_param(rng, {m, n}), random_param(rng, {m, n})};
    Tensor weights = random_const(rng, {m, n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::add(leaves[0], leaves[1]), weights)); };
  });
  push("add_broadcast", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(5)), n = 1 + int(rng.uniform_int(7));
    leaves = {random_param(rng, {m, n}), random_param(rng, {n})};
    Tensor weights = random_const(rng, {m, n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::add(leaves[0], leaves[1]), weights)); };
  });
  push("sub", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int n = 3 + int(rng.uniform_int(9));
    leaves = {random_param(rng, {n}), random_param(rng, {n})};
    Tensor weights = random_const(rng, {n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::sub(leaves[0], leaves[1]), weights)); };
  });
  push("mul", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(4)), n = 1 + int(rng.uniform_int(6));
    leaves = {random_param(rng, {m, n}), random_param(rng, {m, n})};
    Tensor weights = random_const(rng, {m, n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::mul(leaves[0], leaves[1]), weights)); };
  });
  push("mul_broadcast", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(4)), n = 1 + int(rng.uniform_int(6));
    leaves = {random_param(rng, {m, n}), random_param(rng, {n})};
    Tensor weights = random_const(rng, {m, n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::mul(leaves[0], leaves[1]), weights)); };
  });
  push("concat", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int n = 2 + int(rng.uniform_int(4));
    const int m1 = 1 + int(rng.uniform_int(3)), m2 = 1 + int(rng.uniform_int(3));
    leaves = {random_param(rng, {m1, n}), random_param(rng, {m2, n})};
    Tensor weights = random_const(rng, {m1 + m2, n});
    f = [&leaves, weights] {
      return ad::reduce_sum(ad::mul(ad::concat({leaves[0], leaves[1]}, 0), weights));
    };
  });
  push("slice", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 4 + int(rng.uniform_int(4)), n = 2 + int(rng.uniform_int(4));
    const int start = int(rng.uniform_int(2)), len = 2 + int(rng.uniform_int(m - 2 - start));
    leaves = {random_param(rng, {m, n})};
    Tensor weights = random_const(rng, {len, n});
    f = [&leaves, weights, start, len] {
      return ad::reduce_sum(ad::mul(ad::slice(leaves[0], 0, start, len), weights));
    };
  });
  push("reshape", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(3)), n = 2 * (1 + int(rng.uniform_int(3)));
    leaves = {random_param(rng, {m, n})};
    Tensor weights = random_const(rng, {m * n / 2, 2});
    f = [&leaves, weights, m, n] {
      return ad::reduce_sum(ad::mul(ad::reshape(leaves[0], {m * n / 2, 2}), weights));
    };
  });
  push("transpose", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int a = 2 + int(rng.uniform_int(3)), b = 2 + int(rng.uniform_int(3)),
              c = 2 + int(rng.uniform_int(3));
    leaves = {random_param(rng, {a, b, c})};
    Tensor weights = random_const(rng, {b, c, a});
    f = [&leaves, weights] {
      return ad::reduce_sum(ad::mul(ad::transpose(leaves[0], {1, 2, 0}), weights));
    };
  });
  push("softmax", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(4)), n = 2 + int(rng.uniform_int(6));
    leaves = {random_param(rng, {m, n}, 2.0)};
    Tensor weights = random_const(rng, {m, n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::softmax(leaves[0]), weights)); };
  });
  push("layer_norm", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(4)), n = 4 + int(rng.uniform_int(8));
    leaves = {random_param(rng, {m, n}, 2.0)};
    Tensor weights = random_const(rng, {m, n});
    f = [&leaves, weights] {
      return ad::reduce_sum(ad::mul(ad::layer_norm(leaves[0]), weights));
    };
  });
  push("gelu", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int n = 5 + int(rng.uniform_int(12));
    leaves = {random_param(rng, {n}, 2.0)};
    Tensor weights = random_const(rng, {n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::gelu(leaves[0]), weights)); };
  });
  push("dropout_train", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int n = 8 + int(rng.uniform_int(16));
    leaves = {random_param(rng, {n})};
    Tensor weights = random_const(rng, {n});
    f = [&leaves, weights] {
      return ad::reduce_sum(ad::mul(ad::dropout(leaves[0], 0.3, true), weights));
    };
  });
  push("dropout_eval", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int n = 8 + int(rng.uniform_int(16));
    leaves = {random_param(rng, {n})};
    Tensor weights = random_const(rng, {n});
    f = [&leaves, weights] {
      return ad::reduce_sum(ad::mul(ad::dropout(leaves[0], 0.3, false), weights));
    };
  });
  push("scalar_mul", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int n = 3 + int(rng.uniform_int(9));
    const double c = rng.uniform(-2.0, 2.0);
    leaves = {random_param(rng, {n})};
    Tensor weights = random_const(rng, {n});
    f = [&leaves, weights, c] {
      return ad::reduce_sum(ad::mul(ad::scalar_mul(leaves[0], c), weights));
    };
  });
  push("reduce_mean", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(4)), n = 2 + int(rng.uniform_int(5));
    leaves = {random_param(rng, {m, n})};
    f = [&leaves] { return ad::reduce_mean(leaves[0]); };
  });
  push("reduce_sum", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int n = 3 + int(rng.uniform_int(9));
    leaves = {random_param(rng, {n})};
    f = [&leaves] { return ad::reduce_sum(leaves[0]); };
  });
  push("sqrt", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int n = 3 + int(rng.uniform_int(9));
    std::vector<double> v(n);
    for (auto& x : v) x = 0.5 + rng.uniform();  // keep away from the kink at 0
    leaves = {Tensor::param({n}, std::move(v))};
    Tensor weights = random_const(rng, {n});
    f = [&leaves, weights] { return ad::reduce_sum(ad::mul(ad::sqrt_op(leaves[0]), weights)); };
  });
  push("gather_rows", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int rows = 4 + int(rng.uniform_int(4)), n = 2 + int(rng.uniform_int(4));
    std::vector<int> idx(6);
    for (auto& i : idx) i = int(rng.uniform_int(rows));  // repeats exercise accumulation
    leaves = {random_param(rng, {rows, n})};
    Tensor weights = random_const(rng, {int(idx.size()), n});
    f = [&leaves, weights, idx] {
      return ad::reduce_sum(ad::mul(ad::gather_rows(leaves[0], idx), weights));
    };
  });
  push("linear", [](Rng& rng, std::vector<Tensor>& leaves, std::function<Tensor()>& f) {
    const int m = 2 + int(rng.uniform_int(4)), k = 2 + int(rng.uniform_int(4)),
              n = 2 + int(rng.uniform_int(4));
    leaves = {random_param(rng, {m, k}), random_param(rng, {k, n}), random_param(rng, {n})};
    Tensor weights = random_const(rng, {m, n});
    f = [&leaves, weights] {
      return ad::reduce_sum(ad::mul(ad::linear(leaves[0], leaves[1], leaves[2]), weights));
    };
  });
  return cases;
}

}  // namespace

std::vector<CheckLine> primitive_checks(int seeds, double step, double tol) {
  std::vector<CheckLine> lines;
  for (const auto& c : primitive_cases()) {
    CheckLine line;
    line.name = c.name;
    line.pass = true;
    for (int s = 0; s < seeds; ++s) {
      Rng rng(splitmix64(uint64_t(s) * 7919 + 13) ^ std::hash<std::string>{}(c.name));
      std::vector<Tensor> leaves;
      std::function<Tensor()> f;
      c.make(rng, leaves, f);
      std::vector<Tensor*> ptrs;
      for (auto& l : leaves) ptrs.push_back(&l);
      const auto r = ad::grad_check(f, ptrs, step, tol, uint64_t(s) + 1);
      line.checked += r.checked;
      line.max_rel_err = std::max(line.max_rel_err, r.max_rel_err);
      line.pass = line.pass && r.pass;
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

model::ModelConfig micro_config() {
  model::ModelConfig cfg;
  cfg.feature_dim = 8;
  cfg.heads = 2;
  cfg.encoder_blocks = 1;
  cfg.pvi_blocks = 1;
  cfg.decoder_blocks = 1;
  cfg.dct_keep = 2;
  cfg.partition.joint_count = 6;
  cfg.partition.groups = {{0, 1, 2}, {3, 4, 5}};
  cfg.corner_scheme = 4;
  cfg.trpe_bins = 4;
  cfg.dropout = 0.2;
  cfg.t_obs = 4;
  cfg.n_pred = 2;
  cfg.ffn_mult = 2;
  cfg.max_agents = 4;
  cfg.zero_init_head = false;  // zero head would stall upstream gradients
  return cfg;
}

Scene random_scene(uint64_t seed, const model::ModelConfig& cfg, int n_ped, int n_veh) {
  Rng rng(seed);
  Scene scene;
  scene.scene_id = int64_t(seed & 0x7fffffff);
  scene.frame_rate_hz = 10.0;
  const int frames = cfg.window_frames();
  const int J = cfg.partition.joint_count;
  for (int p = 0; p < n_ped; ++p) {
    PoseSequence seq;
    seq.agent_id = p;
    seq.frame_rate_hz = scene.frame_rate_hz;
    seq.frames.resize(frames);
    std::vector<Vec3> pos(J);
    for (auto& v : pos) v = Vec3{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 2)};
    for (int t = 0; t < frames; ++t) {
      seq.frames[t] = pos;
      for (auto& v : pos)
        v += Vec3{0.05 * rng.gaussian(), 0.05 * rng.gaussian(), 0.05 * rng.gaussian()};
    }
    scene.pedestrians.push_back(std::move(seq));
  }
  for (int k = 0; k < n_veh; ++k) {
    scene.vehicles.push_back(synth::gen_vehicle_track(
        100 + k, Vec3{rng.uniform(-10, 0), rng.uniform(2, 6), 0}, rng.uniform(0, 2 * M_PI),
        rng.uniform(1, 5), 0.0, frames, scene.frame_rate_hz));
  }
  return scene;
}

CheckLine full_model_check(uint64_t seed, double step, double tol) {
  model::ModelConfig cfg = micro_config();
  cfg.init_seed = seed * 31 + 7;
  model::ForecastModel m(cfg);

  Scene scene = random_scene(seed, cfg, 2, 2);
  SegmentRecord rec;
  rec.scene_id = scene.scene_id;
  rec.frame_start = 0;
  rec.frame_end = cfg.window_frames();
  rec.pedestrian_ids = {0, 1};
  rec.vehicle_ids = {100, 101};
  const model::SceneSample sample = model::make_sample(scene, rec, cfg);

  auto f = [&] { return m.loss(sample, true); };
  const auto r = ad::grad_check(f, m.parameters(), step, tol, seed + 17);

  CheckLine line;
  line.name = "forecast_model(seed=" + std::to_string(seed) + ")";
  line.max_rel_err = r.max_rel_err;
  line.checked = r.checked;
  line.pass = r.pass;
  return line;
}

}  // namespace vpf::gradcheck
