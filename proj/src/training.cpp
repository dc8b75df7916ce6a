#include "vpf/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

namespace vpf::training {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (!(lr >= 0)) throw ValidationError("train config: learning rate must be >= 0");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ValidationError("train config: betas must be in [0, 1)");
  if (!(eps > 0)) throw ValidationError("train config: eps must be positive");
  if (clip_norm < 0) throw ValidationError("train config: clip_norm must be >= 0");
}

Adam::Adam(double lr_in, double beta1, double beta2, double eps)
    : lr(lr_in), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<ad::Tensor*>& params,
                const std::vector<std::string>& names) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->size(), 0.0);
      v_[i].assign(params[i]->size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->raw();
    const auto& g = params[i]->grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      if (!std::isfinite(gk))
        throw NumericalError("non-finite gradient in parameter " +
                             (i < names.size() ? names[i] : std::to_string(i)));
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * gk;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * gk * gk;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double clip_gradients(const std::vector<ad::Tensor*>& params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params)
    for (double g : p->grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm && norm > 0) {
    const double scale = max_norm / norm;
    for (auto* p : params)
      for (double& g : p->grad_mut()) g *= scale;
  }
  return norm;
}

std::string FitResult::loss_csv() const {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (size_t e = 0; e < train_loss.size(); ++e) {
    if (e < val_loss.size() && std::isfinite(val_loss[e]))
      std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.9f\n", e, train_loss[e], val_loss[e]);
    else
      std::snprintf(buf, sizeof(buf), "%zu,%.9f,\n", e, train_loss[e]);
    out << buf;
  }
  return out.str();
}

double mean_loss(model::ForecastModel& m, const std::vector<model::SceneSample>& samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0.0;
  for (const auto& s : samples) {
    ad::NoTapeScope no_tape;
    acc += m.loss(s, false).scalar();
  }
  return acc / double(samples.size());
}

FitResult fit(model::ForecastModel& m, const std::vector<model::SceneSample>& train,
              const std::vector<model::SceneSample>& val, const TrainConfig& cfg,
              const std::string& ckpt_prefix) {
  cfg.validate();
  if (train.empty()) throw ValidationError("fit: empty training set");

  auto params = m.parameters();
  std::vector<std::string> names(m.param_count());
  for (size_t i = 0; i < names.size(); ++i) names[i] = m.param_name(i);
  Adam adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);

  FitResult result;
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  int64_t step_counter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // deterministic per-epoch shuffle stream
    std::mt19937_64 shuffle_rng(splitmix64(cfg.seed ^ (0xabcdef12345ULL + epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    int64_t seen = 0;
    for (size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const size_t b_end = std::min(order.size(), b + cfg.batch_size);
      m.zero_grads();
      double batch_loss = 0.0;
      for (size_t k = b; k < b_end; ++k) {
        // one tape per scene; gradients accumulate in sample order
        const uint64_t tape_seed =
            splitmix64(cfg.seed ^ (uint64_t(step_counter) << 20) ^ (k - b));
        ad::Tape tape(tape_seed);
        ad::Tensor loss = m.loss(train[order[k]], true);
        tape.backward(loss);
        batch_loss += loss.scalar();
      }
      const double inv = 1.0 / double(b_end - b);
      for (auto* p : params)
        for (double& g : p->grad_mut()) g *= inv;
      if (cfg.clip_norm > 0) clip_gradients(params, cfg.clip_norm);
      adam.step(params, names);
      epoch_loss += batch_loss;
      seen += int64_t(b_end - b);
      ++step_counter;
    }
    result.train_loss.push_back(epoch_loss / double(seen));
    if (!std::isfinite(result.train_loss.back()))
      throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));

    if (!val.empty()) {
      const double vl = mean_loss(m, val);
      result.val_loss.push_back(vl);
      if (vl < best_val) {
        best_val = vl;
        result.best_epoch = epoch;
        if (!ckpt_prefix.empty()) m.save(ckpt_prefix);
      }
    }
    if (!ckpt_prefix.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0) {
      m.save(ckpt_prefix + "_epoch" + std::to_string(epoch + 1));
    }
  }
  if (!ckpt_prefix.empty() && val.empty()) m.save(ckpt_prefix);
  return result;
}

}  // namespace vpf::training
