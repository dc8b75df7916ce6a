#include "vpf/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "vpf/scene_io.hpp"

namespace vpf::model {

using ad::Tensor;

void ModelConfig::validate() const {
  if (feature_dim < 1 || heads < 1 || feature_dim % heads != 0)
    throw ValidationError("ModelConfig: feature_dim must be a positive multiple of heads");
  if (encoder_blocks < 1 || decoder_blocks < 1 || pvi_blocks < 1)
    throw ValidationError("ModelConfig: block counts must be positive");
  if (t_obs < 1 || n_pred < 1) throw ValidationError("ModelConfig: t_obs/n_pred must be positive");
  if (n_pred > t_obs)
    throw ValidationError("ModelConfig: n_pred must not exceed t_obs (decoder query window)");
  if (dct_keep < 1 || dct_keep > t_obs)
    throw ValidationError("ModelConfig: dct_keep must be in [1, t_obs]");
  if (trpe_bins < 2) throw ValidationError("ModelConfig: trpe_bins must be >= 2");
  if (!(trpe_min_m > 0) || !(trpe_max_m > trpe_min_m))
    throw ValidationError("ModelConfig: trpe distance range invalid");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ValidationError("ModelConfig: dropout must be in [0, 1)");
  if (ffn_mult < 1) throw ValidationError("ModelConfig: ffn_mult must be >= 1");
  if (max_agents < 1) throw ValidationError("ModelConfig: max_agents must be >= 1");
  partition.validate();
  CornerGrouping::make(corner_scheme);
}

int ModelConfig::veh_feat_dim() const {
  return CornerGrouping::make(corner_scheme).max_group_size() * 3;
}

int ModelConfig::veh_tokens(int n_veh) const {
  return n_veh * corner_scheme * dct_keep;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["feature_dim"] = feature_dim;
  j["heads"] = heads;
  j["encoder_blocks"] = encoder_blocks;
  j["pvi_blocks"] = pvi_blocks;
  j["decoder_blocks"] = decoder_blocks;
  j["dct_keep"] = dct_keep;
  j["partition"] = {{"joint_count", partition.joint_count}, {"groups", partition.groups}};
  j["corner_scheme"] = corner_scheme;
  j["trpe_bins"] = trpe_bins;
  j["trpe_min_m"] = trpe_min_m;
  j["trpe_max_m"] = trpe_max_m;
  j["dropout"] = dropout;
  j["t_obs"] = t_obs;
  j["n_pred"] = n_pred;
  j["ffn_mult"] = ffn_mult;
  j["max_agents"] = max_agents;
  j["use_vehicles"] = use_vehicles;
  j["use_tpe"] = use_tpe;
  j["use_ie"] = use_ie;
  j["zero_init_head"] = zero_init_head;
  j["init_seed"] = init_seed;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.encoder_blocks = j.at("encoder_blocks").get<int>();
  c.pvi_blocks = j.at("pvi_blocks").get<int>();
  c.decoder_blocks = j.at("decoder_blocks").get<int>();
  c.dct_keep = j.at("dct_keep").get<int>();
  c.partition.joint_count = j.at("partition").at("joint_count").get<int>();
  c.partition.groups = j.at("partition").at("groups").get<std::vector<std::vector<int>>>();
  c.corner_scheme = j.at("corner_scheme").get<int>();
  c.trpe_bins = j.at("trpe_bins").get<int>();
  c.trpe_min_m = j.at("trpe_min_m").get<double>();
  c.trpe_max_m = j.at("trpe_max_m").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.t_obs = j.at("t_obs").get<int>();
  c.n_pred = j.at("n_pred").get<int>();
  c.ffn_mult = j.at("ffn_mult").get<int>();
  c.max_agents = j.at("max_agents").get<int>();
  c.use_vehicles = j.at("use_vehicles").get<bool>();
  c.use_tpe = j.at("use_tpe").get<bool>();
  c.use_ie = j.at("use_ie").get<bool>();
  c.zero_init_head = j.at("zero_init_head").get<bool>();
  c.init_seed = j.at("init_seed").get<uint64_t>();
  c.validate();
  return c;
}

int trpe_bin(double distance_m, int bins, double min_m, double max_m) {
  if (distance_m <= min_m) return 0;
  if (distance_m >= max_m) return bins - 1;
  const double t =
      (std::log(distance_m) - std::log(min_m)) / (std::log(max_m) - std::log(min_m));
  int b = int(t * bins);
  if (b < 0) b = 0;
  if (b > bins - 1) b = bins - 1;
  return b;
}

namespace {

// mean centroid distance over the observed frames, then bucketized
double trajectory_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double acc = 0.0;
  for (size_t t = 0; t < a.size(); ++t) acc += distance(a[t], b[t]);
  return acc / double(a.size());
}

std::vector<Vec3> group_centroid_trajectory(const std::vector<std::vector<Vec3>>& frames,
                                            const std::vector<int>& group, int start,
                                            int count) {
  std::vector<Vec3> traj(count);
  for (int t = 0; t < count; ++t) {
    Vec3 c;
    for (int idx : group) c += frames[start + t][idx];
    traj[t] = c * (1.0 / double(group.size()));
  }
  return traj;
}

const PoseSequence& ped_by_id(const Scene& scene, int64_t id) {
  for (const auto& p : scene.pedestrians)
    if (p.agent_id == id) return p;
  throw ValidationError("make_sample: pedestrian id not in scene");
}

const VehicleTrack& veh_by_id(const Scene& scene, int64_t id) {
  for (const auto& v : scene.vehicles)
    if (v.vehicle_id == id) return v;
  throw ValidationError("make_sample: vehicle id not in scene");
}

}  // namespace

SceneSample make_sample(const Scene& scene, const SegmentRecord& record,
                        const ModelConfig& cfg) {
  cfg.validate();
  const int window = cfg.window_frames();
  if (record.frame_end - record.frame_start != window)
    throw ValidationError("make_sample: record window does not match model config (" +
                          std::to_string(record.frame_end - record.frame_start) + " vs " +
                          std::to_string(window) + " frames)");
  if (record.frame_start < 0 || record.frame_end > scene.frame_count())
    throw ValidationError("make_sample: record window out of scene range");
  if (record.pedestrian_ids.empty()) throw ValidationError("make_sample: no pedestrians");

  SceneSample s;
  s.n_ped = int(record.pedestrian_ids.size());
  s.n_veh = cfg.use_vehicles ? int(record.vehicle_ids.size()) : 0;
  s.frame_rate_hz = scene.frame_rate_hz;
  s.scene_id = scene.scene_id;
  s.frame_start = record.frame_start;
  s.pedestrian_ids = record.pedestrian_ids;
  if (s.n_ped + s.n_veh > cfg.max_agents)
    throw ValidationError("make_sample: agent count exceeds max_agents identity slots");

  const int J = cfg.partition.joint_count;
  const int L = cfg.dct_keep;
  const int Bp = cfg.partition.group_count();
  const int start = record.frame_start;
  const sigproc::DctPlan plan(cfg.t_obs, L);

  // --- pedestrian tokens ---
  const int ped_fd = cfg.ped_feat_dim();
  std::vector<double> ped_feats(size_t(cfg.ped_tokens(s.n_ped)) * ped_fd, 0.0);
  std::vector<std::vector<Vec3>> ped_traj(size_t(s.n_ped) * Bp);
  std::vector<const PoseSequence*> peds;
  int tok = 0;
  for (int p = 0; p < s.n_ped; ++p) {
    const PoseSequence& seq = ped_by_id(scene, record.pedestrian_ids[p]);
    if (seq.joint_count() != J)
      throw ValidationError("make_sample: pedestrian joint count does not match partition");
    peds.push_back(&seq);
    // observed displacements as a (t_obs x J*3) signal
    std::vector<double> signal(size_t(cfg.t_obs) * J * 3);
    for (int t = 0; t < cfg.t_obs; ++t)
      for (int j = 0; j < J; ++j) {
        const Vec3 d = seq.frames[start + t + 1][j] - seq.frames[start + t][j];
        signal[(size_t(t) * J + j) * 3 + 0] = d.x;
        signal[(size_t(t) * J + j) * 3 + 1] = d.y;
        signal[(size_t(t) * J + j) * 3 + 2] = d.z;
      }
    const auto coeffs = plan.forward(signal, J * 3);
    for (int g = 0; g < Bp; ++g) {
      const auto& group = cfg.partition.groups[g];
      ped_traj[size_t(p) * Bp + g] =
          group_centroid_trajectory(seq.frames, group, start, cfg.t_obs + 1);
      for (int l = 0; l < L; ++l, ++tok) {
        double* row = ped_feats.data() + size_t(tok) * ped_fd;
        int w = 0;
        for (int idx : group) {
          row[w++] = coeffs[size_t(l) * J * 3 + idx * 3 + 0];
          row[w++] = coeffs[size_t(l) * J * 3 + idx * 3 + 1];
          row[w++] = coeffs[size_t(l) * J * 3 + idx * 3 + 2];
        }
        s.ped_time_idx.push_back(l);
        s.ped_slots.push_back(p);
      }
    }
  }
  s.ped_feats = Tensor({cfg.ped_tokens(s.n_ped), ped_fd}, std::move(ped_feats));

  // --- vehicle tokens ---
  std::vector<std::vector<Vec3>> veh_traj;
  if (s.n_veh > 0) {
    const CornerGrouping grouping = CornerGrouping::make(cfg.corner_scheme);
    const int Bv = grouping.group_count();
    const int veh_fd = cfg.veh_feat_dim();
    std::vector<double> veh_feats(size_t(cfg.veh_tokens(s.n_veh)) * veh_fd, 0.0);
    veh_traj.resize(size_t(s.n_veh) * Bv);
    int vtok = 0;
    for (int k = 0; k < s.n_veh; ++k) {
      const VehicleTrack& track = veh_by_id(scene, record.vehicle_ids[k]);
      std::vector<double> signal(size_t(cfg.t_obs) * 8 * 3);
      for (int t = 0; t < cfg.t_obs; ++t)
        for (int cidx = 0; cidx < 8; ++cidx) {
          const Vec3 d = track.frames[start + t + 1][cidx] - track.frames[start + t][cidx];
          signal[(size_t(t) * 8 + cidx) * 3 + 0] = d.x;
          signal[(size_t(t) * 8 + cidx) * 3 + 1] = d.y;
          signal[(size_t(t) * 8 + cidx) * 3 + 2] = d.z;
        }
      const auto coeffs = plan.forward(signal, 8 * 3);
      for (int g = 0; g < Bv; ++g) {
        const auto& group = grouping.groups[g];
        veh_traj[size_t(k) * Bv + g] =
            group_centroid_trajectory(track.frames, group, start, cfg.t_obs + 1);
        for (int l = 0; l < L; ++l, ++vtok) {
          double* row = veh_feats.data() + size_t(vtok) * veh_fd;
          int w = 0;
          for (int idx : group) {
            row[w++] = coeffs[size_t(l) * 8 * 3 + idx * 3 + 0];
            row[w++] = coeffs[size_t(l) * 8 * 3 + idx * 3 + 1];
            row[w++] = coeffs[size_t(l) * 8 * 3 + idx * 3 + 2];
          }
          s.veh_time_idx.push_back(l);
          s.veh_slots.push_back(s.n_ped + k);
        }
      }
    }
    s.veh_feats = Tensor({cfg.veh_tokens(s.n_veh), veh_fd}, std::move(veh_feats));
  }

  // --- TRPE bins, group-level then expanded to token pairs ---
  const int PG = s.n_ped * Bp;
  std::vector<int> self_group_bins(size_t(PG) * PG);
  for (int i = 0; i < PG; ++i)
    for (int j = 0; j < PG; ++j)
      self_group_bins[size_t(i) * PG + j] =
          trpe_bin(trajectory_distance(ped_traj[i], ped_traj[j]), cfg.trpe_bins,
                   cfg.trpe_min_m, cfg.trpe_max_m);
  const int Tp = cfg.ped_tokens(s.n_ped);
  s.self_bins.resize(size_t(Tp) * Tp);
  for (int i = 0; i < Tp; ++i)
    for (int j = 0; j < Tp; ++j)
      s.self_bins[size_t(i) * Tp + j] = self_group_bins[size_t(i / L) * PG + (j / L)];

  if (s.n_veh > 0) {
    const int Bv = cfg.corner_scheme;
    const int VG = s.n_veh * Bv;
    std::vector<int> cross_group_bins(size_t(PG) * VG);
    for (int i = 0; i < PG; ++i)
      for (int j = 0; j < VG; ++j)
        cross_group_bins[size_t(i) * VG + j] =
            trpe_bin(trajectory_distance(ped_traj[i], veh_traj[j]), cfg.trpe_bins,
                     cfg.trpe_min_m, cfg.trpe_max_m);
    const int Tv = cfg.veh_tokens(s.n_veh);
    s.cross_bins.resize(size_t(Tp) * Tv);
    for (int i = 0; i < Tp; ++i)
      for (int j = 0; j < Tv; ++j)
        s.cross_bins[size_t(i) * Tv + j] = cross_group_bins[size_t(i / L) * VG + (j / L)];
  }

  // --- decoder query patches over the last n_pred observed displacements ---
  const int kernel = cfg.query_kernel();
  const int stride = cfg.query_stride();
  const int nq = cfg.queries_per_ped();
  const int qfd = kernel * J * 3;
  std::vector<double> qfeats(size_t(s.n_ped) * nq * qfd);
  for (int p = 0; p < s.n_ped; ++p) {
    const PoseSequence& seq = *peds[p];
    const int base = cfg.t_obs - cfg.n_pred;  // first displacement step of the window
    for (int q = 0; q < nq; ++q) {
      double* row = qfeats.data() + (size_t(p) * nq + q) * qfd;
      int w = 0;
      for (int kk = 0; kk < kernel; ++kk) {
        const int step = base + q * stride + kk;
        for (int j = 0; j < J; ++j) {
          const Vec3 d = seq.frames[start + step + 1][j] - seq.frames[start + step][j];
          row[w++] = d.x;
          row[w++] = d.y;
          row[w++] = d.z;
        }
      }
      s.query_time_idx.push_back(q);
      s.query_slots.push_back(p);
    }
  }
  s.query_feats = Tensor({s.n_ped * nq, qfd}, std::move(qfeats));

  // --- ground-truth future displacements and the reconstruction origin ---
  std::vector<double> truth(size_t(s.n_ped) * cfg.n_pred * J * 3);
  s.last_pose.resize(s.n_ped);
  for (int p = 0; p < s.n_ped; ++p) {
    const PoseSequence& seq = *peds[p];
    s.last_pose[p] = seq.frames[start + cfg.t_obs];
    for (int t = 0; t < cfg.n_pred; ++t)
      for (int j = 0; j < J; ++j) {
        const Vec3 d = seq.frames[start + cfg.t_obs + t + 1][j] -
                       seq.frames[start + cfg.t_obs + t][j];
        const size_t off = ((size_t(p) * cfg.n_pred + t) * J + j) * 3;
        truth[off + 0] = d.x;
        truth[off + 1] = d.y;
        truth[off + 2] = d.z;
      }
  }
  s.truth_disp = Tensor({s.n_ped, cfg.n_pred, J * 3}, std::move(truth));
  return s;
}

Tensor attention_probs(const Tensor& q, const Tensor& k, const Tensor& bias,
                       int heads) {
  if (q.ndim() != 2 || k.ndim() != 2 || q.dim(1) != k.dim(1))
    throw ValidationError("attention: q/k must be (tokens, D) with matching D");
  const int d = q.dim(1);
  if (d % heads != 0) throw ValidationError("attention: D not divisible by heads");
  const int dz = d / heads;
  const int nq = q.dim(0), nk = k.dim(0);
  Tensor q3 = ad::transpose(ad::reshape(q, {nq, heads, dz}), {1, 0, 2});
  Tensor k3 = ad::transpose(ad::reshape(k, {nk, heads, dz}), {1, 2, 0});
  Tensor logits = ad::matmul(q3, k3);  // (heads, nq, nk)
  if (bias.defined()) {
    if (bias.shape() != ad::Shape{heads, nq, nk})
      throw ValidationError("attention: bias must be (heads, queries, keys)");
    logits = ad::add(logits, bias);
  }
  logits = ad::scalar_mul(logits, 1.0 / std::sqrt(double(dz)));
  return ad::softmax(logits);
}

Tensor attention_core(const Tensor& q, const Tensor& k, const Tensor& v,
                      const Tensor& bias, int heads) {
  if (v.ndim() != 2 || v.dim(0) != k.dim(0) || v.dim(1) != q.dim(1))
    throw ValidationError("attention: v must match k rows and q dim");
  const int d = q.dim(1);
  const int dz = d / heads;
  const int nq = q.dim(0), nk = k.dim(0);
  Tensor probs = attention_probs(q, k, bias, heads);
  Tensor v3 = ad::transpose(ad::reshape(v, {nk, heads, dz}), {1, 0, 2});
  Tensor ctx = ad::matmul(probs, v3);  // (heads, nq, dz)
  return ad::reshape(ad::transpose(ctx, {1, 0, 2}), {nq, d});
}

// ---- ForecastModel ----

ForecastModel::ForecastModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int D = cfg_.feature_dim;
  const int F = D * cfg_.ffn_mult;

  auto add = [&](const std::string& name, ad::Shape shape) {
    names_.push_back(name);
    params_.push_back(Tensor::param(shape, std::vector<double>(ad::numel(shape), 0.0)));
    return int(params_.size()) - 1;
  };
  auto add_mha = [&](const std::string& p) {
    Mha m;
    m.wq = add(p + ".wq", {D, D});
    m.bq = add(p + ".bq", {D});
    m.wk = add(p + ".wk", {D, D});
    m.bk = add(p + ".bk", {D});
    m.wv = add(p + ".wv", {D, D});
    m.bv = add(p + ".bv", {D});
    m.wo = add(p + ".wo", {D, D});
    m.bo = add(p + ".bo", {D});
    return m;
  };
  auto add_ffn = [&](const std::string& p) {
    Ffn f;
    f.w1 = add(p + ".w1", {D, F});
    f.b1 = add(p + ".b1", {F});
    f.w2 = add(p + ".w2", {F, D});
    f.b2 = add(p + ".b2", {D});
    return f;
  };

  ped_w1_ = add("ped_embed.w1", {cfg_.ped_feat_dim(), D});
  ped_b1_ = add("ped_embed.b1", {D});
  ped_w2_ = add("ped_embed.w2", {D, D});
  ped_b2_ = add("ped_embed.b2", {D});
  veh_w1_ = add("veh_embed.w1", {cfg_.veh_feat_dim(), D});
  veh_b1_ = add("veh_embed.b1", {D});
  veh_w2_ = add("veh_embed.w2", {D, D});
  veh_b2_ = add("veh_embed.b2", {D});
  ie_ = add("ie", {cfg_.max_agents, D});
  trpe_self_ = add("trpe_self", {cfg_.trpe_bins, cfg_.heads});
  trpe_cross_ = add("trpe_cross", {cfg_.trpe_bins, cfg_.heads});

  for (int i = 0; i < cfg_.encoder_blocks; ++i) {
    const std::string p = "enc" + std::to_string(i);
    EncBlock b;
    b.ln1_g = add(p + ".ln1.g", {D});
    b.ln1_b = add(p + ".ln1.b", {D});
    b.attn = add_mha(p + ".attn");
    b.ln2_g = add(p + ".ln2.g", {D});
    b.ln2_b = add(p + ".ln2.b", {D});
    b.ffn = add_ffn(p + ".ffn");
    enc_.push_back(b);
  }
  for (int i = 0; i < cfg_.pvi_blocks; ++i) {
    const std::string p = "pvi" + std::to_string(i);
    PviBlock b;
    b.lnq_g = add(p + ".lnq.g", {D});
    b.lnq_b = add(p + ".lnq.b", {D});
    b.lnkv_g = add(p + ".lnkv.g", {D});
    b.lnkv_b = add(p + ".lnkv.b", {D});
    b.attn = add_mha(p + ".attn");
    b.ln2_g = add(p + ".ln2.g", {D});
    b.ln2_b = add(p + ".ln2.b", {D});
    b.ffn = add_ffn(p + ".ffn");
    pvi_.push_back(b);
  }
  for (int i = 0; i < cfg_.decoder_blocks; ++i) {
    const std::string p = "dec" + std::to_string(i);
    DecBlock b;
    b.ln1_g = add(p + ".ln1.g", {D});
    b.ln1_b = add(p + ".ln1.b", {D});
    b.self_attn = add_mha(p + ".self");
    b.lnq_g = add(p + ".lnq.g", {D});
    b.lnq_b = add(p + ".lnq.b", {D});
    b.cross_attn = add_mha(p + ".cross");
    b.ln2_g = add(p + ".ln2.g", {D});
    b.ln2_b = add(p + ".ln2.b", {D});
    b.ffn = add_ffn(p + ".ffn");
    dec_.push_back(b);
  }
  mem_ln_g_ = add("mem_ln.g", {D});
  mem_ln_b_ = add("mem_ln.b", {D});
  qproj_w_ = add("qproj.w", {cfg_.query_kernel() * cfg_.partition.joint_count * 3, D});
  qproj_b_ = add("qproj.b", {D});
  dec_ln_g_ = add("dec_ln.g", {D});
  dec_ln_b_ = add("dec_ln.b", {D});

  const int head_in = cfg_.queries_per_ped() * D;
  const int head_out = cfg_.out_dct_keep() * cfg_.partition.joint_count * 3;
  head_w1_ = add("head.w1", {head_in, F});
  head_b1_ = add("head.b1", {F});
  head_w2_ = add("head.w2", {F, head_out});
  head_b2_ = add("head.b2", {head_out});

  init_params();

  // constants: sinusoidal TPE, output DCT synthesis matrix, row-norm helper
  const int max_pos = std::max(cfg_.dct_keep, cfg_.queries_per_ped());
  std::vector<double> tpe(size_t(max_pos) * D);
  for (int pos = 0; pos < max_pos; ++pos)
    for (int i = 0; i < D; ++i) {
      const double rate = std::pow(10000.0, -double(2 * (i / 2)) / D);
      tpe[size_t(pos) * D + i] =
          (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  tpe_table_ = Tensor({max_pos, D}, std::move(tpe));

  const sigproc::DctPlan out_plan(cfg_.n_pred, cfg_.out_dct_keep());
  std::vector<double> synth(size_t(cfg_.n_pred) * cfg_.out_dct_keep());
  for (int t = 0; t < cfg_.n_pred; ++t)
    for (int l = 0; l < cfg_.out_dct_keep(); ++l)
      synth[size_t(t) * cfg_.out_dct_keep() + l] =
          out_plan.basis()[size_t(l) * cfg_.n_pred + t];
  idct_out_ = Tensor({cfg_.n_pred, cfg_.out_dct_keep()}, std::move(synth));

  ones3_ = Tensor({3, 1}, std::vector<double>{1.0, 1.0, 1.0});
}

void ForecastModel::init_params() {
  Rng rng(cfg_.init_seed ^ 0xf0e1d2c3b4a59687ULL);
  for (size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = names_[i];
    Tensor& t = params_[i];
    auto& v = t.raw();
    const bool is_ln_gain = name.ends_with(".g") || name == "mem_ln.g" || name == "dec_ln.g";
    if (is_ln_gain) {
      std::fill(v.begin(), v.end(), 1.0);
    } else if (name.ends_with(".b") || name.ends_with(".bq") || name.ends_with(".bk") ||
               name.ends_with(".bv") || name.ends_with(".bo") || name.ends_with(".b1") ||
               name.ends_with(".b2")) {
      std::fill(v.begin(), v.end(), 0.0);
    } else if (name == "ie") {
      for (auto& x : v) x = 0.02 * rng.gaussian();
    } else if (name == "trpe_self" || name == "trpe_cross") {
      std::fill(v.begin(), v.end(), 0.0);
    } else {
      const int fan_in = t.dim(0);
      const int fan_out = t.ndim() == 2 ? t.dim(1) : t.dim(0);
      const double a = std::sqrt(6.0 / double(fan_in + fan_out));
      for (auto& x : v) x = rng.uniform(-a, a);
    }
  }
  if (cfg_.zero_init_head) {
    std::fill(params_[head_w2_].raw().begin(), params_[head_w2_].raw().end(), 0.0);
    std::fill(params_[head_b2_].raw().begin(), params_[head_b2_].raw().end(), 0.0);
  }
}

void ForecastModel::randomize_head(uint64_t seed) {
  Rng rng(seed);
  Tensor& w = params_[head_w2_];
  const double a = std::sqrt(6.0 / double(w.dim(0) + w.dim(1)));
  for (auto& x : w.raw()) x = rng.uniform(-a, a);
  for (auto& x : params_[head_b2_].raw()) x = 0.1 * rng.uniform(-1.0, 1.0);
}

ad::Tensor* ForecastModel::param_by_name(const std::string& name) {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return &params_[i];
  return nullptr;
}

std::vector<ad::Tensor*> ForecastModel::parameters() {
  std::vector<ad::Tensor*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

int64_t ForecastModel::scalar_parameter_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

void ForecastModel::zero_grads() {
  for (auto& p : params_) p.zero_grad();
}

Tensor ForecastModel::tpe_rows(const std::vector<int>& positions) const {
  const int D = cfg_.feature_dim;
  std::vector<double> rows(positions.size() * size_t(D));
  for (size_t i = 0; i < positions.size(); ++i)
    std::copy(tpe_table_.values().begin() + int64_t(positions[i]) * D,
              tpe_table_.values().begin() + int64_t(positions[i] + 1) * D,
              rows.begin() + int64_t(i) * D);
  return Tensor({int(positions.size()), D}, std::move(rows));
}

Tensor ForecastModel::bias_from_bins(int table_idx, const std::vector<int>& bins,
                                     int nq, int nk) {
  Tensor rows = ad::gather_rows(params_[table_idx], bins);  // (nq*nk, heads)
  return ad::reshape(ad::transpose2d(rows), {cfg_.heads, nq, nk});
}

Tensor ForecastModel::embed(const Tensor& feats, int w1, int b1, int w2, int b2) {
  Tensor h = ad::gelu(ad::linear(feats, params_[w1], params_[b1]));
  return ad::linear(h, params_[w2], params_[b2]);
}

Tensor ForecastModel::affine_ln(const Tensor& x, int g, int b) {
  return ad::add(ad::mul(ad::layer_norm(x), params_[g]), params_[b]);
}

Tensor ForecastModel::drop(const Tensor& x, bool train) {
  return ad::dropout(x, cfg_.dropout, train);
}

Tensor ForecastModel::mha_forward(const Mha& m, const Tensor& xq, const Tensor& xkv,
                                  const Tensor& bias, bool train) {
  Tensor q = ad::linear(xq, params_[m.wq], params_[m.bq]);
  Tensor k = ad::linear(xkv, params_[m.wk], params_[m.bk]);
  Tensor v = ad::linear(xkv, params_[m.wv], params_[m.bv]);
  Tensor ctx = attention_core(q, k, v, bias, cfg_.heads);
  return drop(ad::linear(ctx, params_[m.wo], params_[m.bo]), train);
}

Tensor ForecastModel::ffn_forward(const Ffn& f, const Tensor& x, bool train) {
  Tensor h = drop(ad::gelu(ad::linear(x, params_[f.w1], params_[f.b1])), train);
  return ad::linear(h, params_[f.w2], params_[f.b2]);
}

Tensor ForecastModel::encode_pedestrians(const SceneSample& s, bool train) {
  Tensor x = embed(s.ped_feats, ped_w1_, ped_b1_, ped_w2_, ped_b2_);
  if (cfg_.use_tpe) x = ad::add(x, tpe_rows(s.ped_time_idx));
  if (cfg_.use_ie) x = ad::add(x, ad::gather_rows(params_[ie_], s.ped_slots));
  x = drop(x, train);
  const int tp = x.dim(0);
  Tensor bias = bias_from_bins(trpe_self_, s.self_bins, tp, tp);
  for (const auto& blk : enc_) {
    Tensor n1 = affine_ln(x, blk.ln1_g, blk.ln1_b);
    x = ad::add(x, mha_forward(blk.attn, n1, n1, bias, train));
    x = ad::add(x, ffn_forward(blk.ffn, affine_ln(x, blk.ln2_g, blk.ln2_b), train));
  }
  return x;
}

Tensor ForecastModel::encode_vehicles(const SceneSample& s, bool train) {
  if (s.n_veh == 0) return Tensor();  // pedestrian-only path
  Tensor x = embed(s.veh_feats, veh_w1_, veh_b1_, veh_w2_, veh_b2_);
  if (cfg_.use_tpe) x = ad::add(x, tpe_rows(s.veh_time_idx));
  if (cfg_.use_ie) x = ad::add(x, ad::gather_rows(params_[ie_], s.veh_slots));
  return drop(x, train);
}

Tensor ForecastModel::forward_displacements(const SceneSample& s, bool train) {
  Tensor hp = encode_pedestrians(s, train);
  if (cfg_.use_vehicles && s.n_veh > 0) {
    Tensor hv = encode_vehicles(s, train);
    Tensor bias = bias_from_bins(trpe_cross_, s.cross_bins, hp.dim(0), hv.dim(0));
    for (const auto& blk : pvi_) {
      Tensor qn = affine_ln(hp, blk.lnq_g, blk.lnq_b);
      Tensor kvn = affine_ln(hv, blk.lnkv_g, blk.lnkv_b);
      hp = ad::add(hp, mha_forward(blk.attn, qn, kvn, bias, train));
      hp = ad::add(hp, ffn_forward(blk.ffn, affine_ln(hp, blk.ln2_g, blk.ln2_b), train));
    }
  }
  Tensor mem = affine_ln(hp, mem_ln_g_, mem_ln_b_);

  Tensor q = ad::linear(s.query_feats, params_[qproj_w_], params_[qproj_b_]);
  if (cfg_.use_tpe) q = ad::add(q, tpe_rows(s.query_time_idx));
  if (cfg_.use_ie) q = ad::add(q, ad::gather_rows(params_[ie_], s.query_slots));
  q = drop(q, train);
  for (const auto& blk : dec_) {
    Tensor n1 = affine_ln(q, blk.ln1_g, blk.ln1_b);
    q = ad::add(q, mha_forward(blk.self_attn, n1, n1, Tensor(), train));
    Tensor nq = affine_ln(q, blk.lnq_g, blk.lnq_b);
    q = ad::add(q, mha_forward(blk.cross_attn, nq, mem, Tensor(), train));
    q = ad::add(q, ffn_forward(blk.ffn, affine_ln(q, blk.ln2_g, blk.ln2_b), train));
  }
  q = affine_ln(q, dec_ln_g_, dec_ln_b_);

  const int D = cfg_.feature_dim;
  Tensor q2 = ad::reshape(q, {s.n_ped, cfg_.queries_per_ped() * D});
  Tensor h = drop(ad::gelu(ad::linear(q2, params_[head_w1_], params_[head_b1_])), train);
  Tensor coeffs = ad::linear(h, params_[head_w2_], params_[head_b2_]);
  Tensor c3 = ad::reshape(coeffs,
                          {s.n_ped, cfg_.out_dct_keep(), cfg_.partition.joint_count * 3});
  return ad::matmul(idct_out_, c3);  // (P, n_pred, J*3)
}

Tensor ForecastModel::loss(const SceneSample& s, bool train) {
  Tensor disp = forward_displacements(s, train);
  Tensor diff = ad::sub(disp, s.truth_disp);
  const int rows = s.n_ped * cfg_.n_pred * cfg_.partition.joint_count;
  Tensor r = ad::reshape(diff, {rows, 3});
  Tensor norms = ad::sqrt_op(ad::matmul(ad::mul(r, r), ones3_));
  return ad::reduce_mean(norms);
}

PosePrediction ForecastModel::predict(const SceneSample& s) {
  ad::NoTapeScope no_tape;
  Tensor disp = forward_displacements(s, false);
  const int J = cfg_.partition.joint_count;
  PosePrediction out(s.n_ped);
  for (int p = 0; p < s.n_ped; ++p) {
    out[p].resize(cfg_.n_pred);
    std::vector<Vec3> cur = s.last_pose[p];
    for (int t = 0; t < cfg_.n_pred; ++t) {
      for (int j = 0; j < J; ++j) {
        const size_t off = ((size_t(p) * cfg_.n_pred + t) * J + j) * 3;
        cur[j] += Vec3{disp.values()[off], disp.values()[off + 1], disp.values()[off + 2]};
      }
      out[p][t] = cur;
    }
  }
  return out;
}

void ForecastModel::save(const std::string& prefix) const {
  nlohmann::json manifest;
  manifest["format"] = "vpf-checkpoint-v1";
  manifest["config"] = cfg_.to_json();
  manifest["params"] = nlohmann::json::array();
  size_t total = 0;
  for (size_t i = 0; i < params_.size(); ++i) {
    manifest["params"].push_back({{"name", names_[i]}, {"shape", params_[i].shape()}});
    total += params_[i].values().size();
  }
  std::vector<double> blob;
  blob.reserve(total);
  for (const auto& p : params_)
    blob.insert(blob.end(), p.values().begin(), p.values().end());
  io::write_text_atomic(prefix + ".json", manifest.dump(2) + "\n");
  // raw little-endian float64 in manifest order (IEEE-754 host layout)
  io::write_binary_atomic(prefix + ".bin", blob.data(), blob.size() * sizeof(double));
}

ForecastModel ForecastModel::load(const std::string& prefix) {
  nlohmann::json manifest = nlohmann::json::parse(io::read_text_file(prefix + ".json"));
  if (manifest.value("format", "") != "vpf-checkpoint-v1")
    throw ValidationError("checkpoint: unknown format in " + prefix + ".json");
  ForecastModel model(ModelConfig::from_json(manifest.at("config")));

  const std::string blob = io::read_text_file(prefix + ".bin");
  const auto& plist = manifest.at("params");
  if (plist.size() != model.params_.size())
    throw ValidationError("checkpoint: parameter count mismatch");
  size_t offset = 0;
  for (size_t i = 0; i < model.params_.size(); ++i) {
    if (plist[i].at("name").get<std::string>() != model.names_[i])
      throw ValidationError("checkpoint: parameter order mismatch at " + model.names_[i]);
    auto& v = model.params_[i].raw();
    const size_t bytes = v.size() * sizeof(double);
    if (offset + bytes > blob.size())
      throw ValidationError("checkpoint: parameter blob too short");
    std::memcpy(v.data(), blob.data() + offset, bytes);
    offset += bytes;
  }
  if (offset != blob.size()) throw ValidationError("checkpoint: parameter blob too long");
  return model;
}

}  // namespace vpf::model
