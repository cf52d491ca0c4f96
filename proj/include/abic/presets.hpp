// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "abic/igcrn.hpp"
#include "abic/pipeline.hpp"
#include "abic/rng.hpp"
#include "abic/scene.hpp"

namespace abic {

// Reduced architecture for gradient checking: 2 mics, 5 bins, widths <= 4,
// double precision end to end.
inline ArchConfig gradcheck_arch() {
  ArchConfig a;
  a.num_mics = 2;
  a.conv_channels = 3;
  a.num_conv_layers = 3;
  a.lstm_hidden = 3;
  a.num_lstm_layers = 2;
  a.head_dim = 2;
  a.kernel_freq = 3;
  return a;
}

// Slightly wider architecture for the toy training loop.
inline ArchConfig toy_arch() {
  ArchConfig a;
  a.num_mics = 2;
  a.conv_channels = 4;
  a.num_conv_layers = 3;
  a.lstm_hidden = 4;
  a.num_lstm_layers = 2;
  a.head_dim = 3;
  a.kernel_freq = 3;
  return a;
}

// The gradcheck scene runs at 1 kHz so a 0.3 m path is under one sample of
// delay and even the first frame carries signal in causal mode.
inline StftConfig tiny_stft() {
  StftConfig cfg;
  cfg.frame_length = 8;
  cfg.hop = 4;
  cfg.sample_rate = 1000.0;
  return cfg;
}

inline StftConfig toy_stft() {
  StftConfig cfg;
  cfg.frame_length = 32;
  cfg.hop = 16;
  return cfg;
}

// Two mics 6 cm apart with sources a short reach away, so the propagation
// delay stays small against the very short test signals.
inline SceneConfig two_mic_scene_config(std::uint64_t seed, bool moving = false) {
  SceneConfig cfg;
  cfg.geometry.mic_positions = {{-0.03, 0.0, 0.0}, {0.03, 0.0, 0.0}};
  cfg.seed = seed;
  cfg.source_moving = moving;
  cfg.snr_db = 0.0;
  cfg.annulus = {0.25, 0.35};
  return cfg;
}

inline Scene make_tiny_scene(std::uint64_t seed, long samples, double sample_rate = 16000.0) {
  Rng rng(seed);
  std::vector<double> dry(samples);
  for (auto& v : dry) v = rng.normal();
  Waveform dry_noise(1, samples);
  for (auto& v : dry_noise.data) v = rng.normal();
  return make_scene(two_mic_scene_config(seed + 1), dry, dry_noise, sample_rate);
}

struct GradCheckPreset {
  Scene scene;
  ModelWeights weights;
  EnhanceConfig cfg;
};

// T = 6 frames at the 8/4 tiny STFT: 28 samples. Loading is raised so the
// per-bin solves stay well conditioned under finite differencing.
inline GradCheckPreset make_gradcheck_preset(std::uint64_t seed = 0,
                                             EstimatorConfig::Kind kind =
                                                 EstimatorConfig::Kind::attention,
                                             bool causal = false) {
  GradCheckPreset p;
  p.scene = make_tiny_scene(seed + 100, 28, 1000.0);
  p.weights = init_weights(gradcheck_arch(), seed + 7);
  p.cfg.stft = tiny_stft();
  p.cfg.causal = causal;
  p.cfg.estimator.kind = kind;
  p.cfg.estimator.block_size = 2;
  p.cfg.estimator.forgetting_factor = 0.9;
  p.cfg.loading = 1e-2;
  return p;
}

struct ToyTrainPreset {
  std::vector<Scene> scenes;
  ModelWeights weights;
  EnhanceConfig cfg;
};

inline ToyTrainPreset make_toy_train_preset(std::uint64_t seed = 0, int num_scenes = 10,
                                            long samples = 3200) {
  ToyTrainPreset p;
  for (int i = 0; i < num_scenes; ++i)
    p.scenes.push_back(make_tiny_scene(seed + 1000 + i, samples));
  p.weights = init_weights(toy_arch(), seed + 11);
  p.cfg.stft = toy_stft();
  p.cfg.causal = false;
  p.cfg.estimator.kind = EstimatorConfig::Kind::attention;
  p.cfg.loading = 1e-3;
  return p;
}

}  // namespace abic
