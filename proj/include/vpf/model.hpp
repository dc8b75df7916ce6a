#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpf/core_types.hpp"
#include "vpf/scene_pipeline.hpp"
#include "vpf/sigproc.hpp"
#include "vpf/tensor.hpp"

namespace vpf::model {

struct ModelConfig {
  int feature_dim = 32;  // D, divisible by heads
  int heads = 2;
  int encoder_blocks = 2;
  int pvi_blocks = 1;
  int decoder_blocks = 2;
  int dct_keep = 4;  // L coefficients kept on the observed window
  BodyPartition partition = BodyPartition::default15();
  int corner_scheme = 12;  // B_V in {1,2,4,6,8,12}
  int trpe_bins = 16;
  double trpe_min_m = 0.5;
  double trpe_max_m = 32.0;
  double dropout = 0.2;
  int t_obs = 10;   // observed displacement steps (t_obs + 1 absolute frames)
  int n_pred = 5;   // predicted displacement steps
  int ffn_mult = 4;
  int max_agents = 8;  // identity-encoding slots (pedestrians then vehicles)
  bool use_vehicles = true;
  bool use_tpe = true;
  bool use_ie = true;
  bool zero_init_head = true;  // untrained model freezes the last pose
  uint64_t init_seed = 1;

  void validate() const;

  int window_frames() const { return t_obs + 1 + n_pred; }
  int out_dct_keep() const { return std::min(dct_keep, n_pred); }
  int ped_feat_dim() const { return partition.max_group_size() * 3; }
  int veh_feat_dim() const;
  int ped_tokens(int n_ped) const {
    return n_ped * partition.group_count() * dct_keep;
  }
  int veh_tokens(int n_veh) const;
  // decoder query convolution over the last n_pred observed displacement
  // frames: kernel min(3, n_pred), stride 2 when it fits
  int query_kernel() const { return std::min(3, n_pred); }
  int query_stride() const { return n_pred > query_kernel() ? 2 : 1; }
  int queries_per_ped() const {
    return (n_pred - query_kernel()) / query_stride() + 1;
  }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Log-spaced distance bucket; 0 for d <= min_m, bins-1 for d >= max_m,
// monotone in between.
int trpe_bin(double distance_m, int bins, double min_m, double max_m);

// Preprocessed, graph-free view of one segment: token features (DCT domain),
// TRPE bin indices, decoder query patches and targets. Everything here is
// constant w.r.t. the parameters, so it is computed once and cached across
// epochs.
struct SceneSample {
  int n_ped = 0;
  int n_veh = 0;
  double frame_rate_hz = 0.0;
  int64_t scene_id = 0;
  int frame_start = 0;
  std::vector<int64_t> pedestrian_ids;

  ad::Tensor ped_feats;  // (P*Bp*L, ped_feat_dim)
  ad::Tensor veh_feats;  // (K*Bv*L, veh_feat_dim), undefined when K == 0
  std::vector<int> ped_time_idx, ped_slots;  // per pedestrian token
  std::vector<int> veh_time_idx, veh_slots;  // per vehicle token
  std::vector<int> self_bins;   // (ped_tokens^2) TRPE bins
  std::vector<int> cross_bins;  // (ped_tokens * veh_tokens)
  ad::Tensor query_feats;       // (P*Nq, kernel*J*3)
  std::vector<int> query_time_idx, query_slots;
  ad::Tensor truth_disp;  // (P, n_pred, J*3)
  std::vector<std::vector<Vec3>> last_pose;  // per pedestrian, J joints
};

SceneSample make_sample(const Scene& scene, const SegmentRecord& record,
                        const ModelConfig& cfg);

// Multi-head attention pieces, exposed so the naive per-head oracle can be
// checked against the exact math used in the model. q/k/v are the projected
// features (Nq,D)/(Nk,D); bias, when defined, is (heads, Nq, Nk) and is added
// to QK^T before the 1/sqrt(d_z) scaling.
ad::Tensor attention_probs(const ad::Tensor& q, const ad::Tensor& k,
                           const ad::Tensor& bias, int heads);
ad::Tensor attention_core(const ad::Tensor& q, const ad::Tensor& k,
                          const ad::Tensor& v, const ad::Tensor& bias, int heads);

// Per-pedestrian absolute predicted poses: [P][n_pred][J]
using PosePrediction = std::vector<std::vector<std::vector<Vec3>>>;

class ForecastModel {
 public:
  explicit ForecastModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }

  size_t param_count() const { return params_.size(); }
  const std::string& param_name(size_t i) const { return names_[i]; }
  ad::Tensor& param(size_t i) { return params_[i]; }
  ad::Tensor* param_by_name(const std::string& name);
  std::vector<ad::Tensor*> parameters();
  int64_t scalar_parameter_count() const;
  void zero_grads();

  // pedestrian branch: TBPM tokens -> embeddings -> TRPE-biased self-attention
  ad::Tensor encode_pedestrians(const SceneSample& s, bool train);
  // vehicle branch: corner-group tokens -> two-layer MLP embeddings (+TPE/IE)
  ad::Tensor encode_vehicles(const SceneSample& s, bool train);
  // full forward to predicted displacement frames, shape (P, n_pred, J*3)
  ad::Tensor forward_displacements(const SceneSample& s, bool train);
  // scalar L_rec: mean joint displacement error over pedestrians/frames/joints
  ad::Tensor loss(const SceneSample& s, bool train);

  PosePrediction predict(const SceneSample& s);

  void save(const std::string& prefix) const;  // prefix.json + prefix.bin
  static ForecastModel load(const std::string& prefix);

  // re-randomizes the zero-initialized output head (gradient checking)
  void randomize_head(uint64_t seed);

 private:
  struct Mha {
    int wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Ffn {
    int w1, b1, w2, b2;
  };
  struct EncBlock {
    int ln1_g, ln1_b, ln2_g, ln2_b;
    Mha attn;
    Ffn ffn;
  };
  struct PviBlock {
    int lnq_g, lnq_b, lnkv_g, lnkv_b, ln2_g, ln2_b;
    Mha attn;
    Ffn ffn;
  };
  struct DecBlock {
    int ln1_g, ln1_b, lnq_g, lnq_b, ln2_g, ln2_b;
    Mha self_attn, cross_attn;
    Ffn ffn;
  };

  void init_params();
  ad::Tensor tpe_rows(const std::vector<int>& positions) const;
  ad::Tensor bias_from_bins(int table_idx, const std::vector<int>& bins, int nq,
                            int nk);
  ad::Tensor embed(const ad::Tensor& feats, int w1, int b1, int w2, int b2);
  ad::Tensor affine_ln(const ad::Tensor& x, int g, int b);
  ad::Tensor mha_forward(const Mha& m, const ad::Tensor& xq, const ad::Tensor& xkv,
                         const ad::Tensor& bias, bool train);
  ad::Tensor ffn_forward(const Ffn& f, const ad::Tensor& x, bool train);
  ad::Tensor drop(const ad::Tensor& x, bool train);

  ModelConfig cfg_;
  std::vector<std::string> names_;
  std::vector<ad::Tensor> params_;

  int ped_w1_, ped_b1_, ped_w2_, ped_b2_;
  int veh_w1_, veh_b1_, veh_w2_, veh_b2_;
  int ie_, trpe_self_, trpe_cross_;
  std::vector<EncBlock> enc_;
  std::vector<PviBlock> pvi_;
  std::vector<DecBlock> dec_;
  int mem_ln_g_, mem_ln_b_, dec_ln_g_, dec_ln_b_;
  int qproj_w_, qproj_b_;
  int head_w1_, head_b1_, head_w2_, head_b2_;

  ad::Tensor tpe_table_;    // constant sinusoidal table
  ad::Tensor idct_out_;     // constant (n_pred, out_dct_keep) synthesis matrix
  ad::Tensor ones3_;        // constant (3,1) used by the loss row norms
};

}  // namespace vpf::model
