// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "abic/pipeline_backward.hpp"
#include "abic/rng.hpp"
#include "abic/scene.hpp"

namespace abic {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int steps = 500;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw InputError("train: learning rate must be >= 0");
    if (batch_size < 1 || steps < 0) throw InputError("train: bad batch size or step count");
  }
};

struct AdamState {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments;
  long step = 0;
};

inline void adam_step(ModelWeights& w, const GradientMap& grads, AdamState& state,
                      const TrainConfig& cfg) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
  for (const auto& [name, g] : grads) {
    auto& [m, v] = state.moments[name];
    if (m.empty()) {
      m.assign(g.size(), 0.0);
      v.assign(g.size(), 0.0);
    }
    auto& theta = w.mut(name).v;
    for (size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      theta[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
    }
  }
}

struct TrainResult {
  std::vector<double> loss_trace;  // mean batch loss per step
};

// Seeded Adam on snr_loss over the given scenes, batch-norm in batch-stats
// mode. Scene order is reshuffled per epoch from the seed, so runs are
// reproducible trace-for-trace.
inline TrainResult train_toy(const std::vector<Scene>& scenes, ModelWeights& weights,
                             const TrainConfig& cfg, const EnhanceConfig& enhance_cfg) {
  cfg.validate();
  if (scenes.empty()) throw InputError("train: no scenes");
  Rng rng(cfg.seed);
  AdamState adam;
  TrainResult result;
  result.loss_trace.reserve(cfg.steps);

  std::vector<int> order(scenes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  size_t cursor = order.size();  // trigger shuffle on first use

  for (int step = 0; step < cfg.steps; ++step) {
    GradientMap batch_grads = zero_gradients(weights.arch);
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor >= order.size()) {
        for (size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
        cursor = 0;
      }
      const Scene& scene = scenes[order[cursor++]];
      PipelineGradient g = enhance_loss_gradient(scene.mixture, scene.speech_image, weights,
                                                 enhance_cfg, true, false);
      batch_loss += g.loss;
      for (auto& [name, vec] : batch_grads) {
        const auto& src = g.grads.at(name);
        for (size_t i = 0; i < vec.size(); ++i) vec[i] += src[i];
      }
    }
    batch_loss /= cfg.batch_size;
    if (!std::isfinite(batch_loss))
      throw NumericError("training diverged (non-finite loss) at step " + std::to_string(step));
    for (auto& [name, vec] : batch_grads)
      for (auto& v : vec) v /= cfg.batch_size;
    adam_step(weights, batch_grads, adam, cfg);
    result.loss_trace.push_back(batch_loss);
  }
  return result;
}

}  // namespace abic
