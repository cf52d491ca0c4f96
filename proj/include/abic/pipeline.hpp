// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "abic/igcrn.hpp"
#include "abic/isam.hpp"
#include "abic/metrics.hpp"
#include "abic/mvdr.hpp"
#include "abic/scene.hpp"
#include "abic/scm.hpp"
#include "abic/spectral.hpp"

namespace abic {

struct EnhanceConfig {
  bool causal = false;
  EstimatorConfig estimator;
  int ref_channel = 0;  // first channel is the reference
  StftConfig stft;
  double loading = 1e-6;
  int attention_frame_cap = 3000;

  void validate() const {
    stft.validate();
    estimator.validate();
    if (ref_channel < 0) throw InputError("enhance: bad reference channel");
    if (loading < 0.0) throw InputError("enhance: loading must be >= 0");
  }
};

struct EnhanceDiagnostics {
  int bins = 0, frames = 0;
  long fallback_bins = 0;
  double fallback_ratio = 0.0;
  std::vector<double> attention_entropy;  // per frame, mean over bins and both targets
  double runtime_ms = 0.0;
};

struct EnhanceResult {
  Waveform enhanced;                   // single channel
  ComplexSpectrogram enhanced_spec;
  EnhanceDiagnostics diagnostics;
};

// Network input: real parts of all channels, then imaginary parts.
inline Real3 spectrogram_features(const ComplexSpectrogram& spec) {
  Real3 x(2 * spec.channels, spec.bins, spec.frames);
  for (int m = 0; m < spec.channels; ++m)
    for (int f = 0; f < spec.bins; ++f)
      for (int t = 0; t < spec.frames; ++t) {
        x.at(m, f, t) = spec.at(m, f, t).real();
        x.at(spec.channels + m, f, t) = spec.at(m, f, t).imag();
      }
  return x;
}

// Wiener-like oracle from scene ground truth at the reference channel:
// m = |S|^2 / (|S|^2 + |N|^2); silent bins get 0.
inline Real2 oracle_mask(const Scene& scene, const StftConfig& cfg, int ref_channel) {
  ComplexSpectrogram s = stft(scene.speech_image, cfg);
  ComplexSpectrogram n = stft(scene.noise_image, cfg);
  Real2 mask(s.bins, s.frames);
  for (int f = 0; f < s.bins; ++f)
    for (int t = 0; t < s.frames; ++t) {
      double ps = std::norm(s.at(ref_channel, f, t));
      double pn = std::norm(n.at(ref_channel, f, t));
      mask.at(f, t) = (ps + pn) > 0.0 ? ps / (ps + pn) : 0.0;
    }
  return mask;
}

// How the temporal weighting is produced when not using the network heads.
struct AttentionOverride {
  enum class Kind { uniform, onehot, exponential, external } kind = Kind::uniform;
  double lambda = 0.995;
  const AttentionTensor* external = nullptr;
};

namespace detail_pipeline {

inline void entropy_diag(const AttentionTensor& a, std::vector<double>& acc) {
  if (acc.empty()) acc.assign(a.frames, 0.0);
  for (int t = 0; t < a.frames; ++t) {
    double h = 0.0;
    for (int f = 0; f < a.bins; ++f)
      for (int j = 0; j < a.frames; ++j) {
        double v = a.at(f, t, j);
        if (v > 0.0) h -= v * std::log(v);
      }
    acc[t] += h / (2.0 * a.bins);  // two targets accumulate into the same slot
  }
}

struct ScmPair {
  ScmSequence speech, noise;
};

inline ScmPair reconstruct_scms(const IscmSequence& psi_s, const IscmSequence& psi_n,
                                const EnhanceConfig& cfg,
                                const AttentionTensor* att_s, const AttentionTensor* att_n,
                                EnhanceDiagnostics* diag) {
  ScmPair out;
  switch (cfg.estimator.kind) {
    case EstimatorConfig::Kind::attention:
      out.speech = attention_scm(*att_s, psi_s);
      out.noise = attention_scm(*att_n, psi_n);
      if (diag) {
        entropy_diag(*att_s, diag->attention_entropy);
        entropy_diag(*att_n, diag->attention_entropy);
      }
      break;
    case EstimatorConfig::Kind::online:
      out.speech = online_scm(psi_s, cfg.estimator.forgetting_factor);
      out.noise = online_scm(psi_n, cfg.estimator.forgetting_factor);
      break;
    case EstimatorConfig::Kind::blockwise:
      out.speech = blockwise_scm(psi_s, cfg.estimator.block_size, cfg.causal);
      out.noise = blockwise_scm(psi_n, cfg.estimator.block_size, cfg.causal);
      break;
  }
  return out;
}

inline AttentionTensor make_override(const AttentionOverride& ov, int bins, int frames,
                                     bool causal) {
  switch (ov.kind) {
    case AttentionOverride::Kind::uniform:
      return uniform_attention(bins, frames, causal);
    case AttentionOverride::Kind::onehot:
      return onehot_attention(bins, frames);
    case AttentionOverride::Kind::exponential:
      return exponential_attention(bins, frames, ov.lambda);
    case AttentionOverride::Kind::external:
      if (!ov.external) throw InputError("enhance: external attention not provided");
      return *ov.external;
  }
  throw InputError("enhance: bad attention override");
}

inline EnhanceResult run_beamformer(const ComplexSpectrogram& spec, const IscmSequence& psi_s,
                                    const IscmSequence& psi_n, const EnhanceConfig& cfg,
                                    const AttentionTensor* att_s, const AttentionTensor* att_n,
                                    std::chrono::steady_clock::time_point t0) {
  EnhanceResult res;
  res.diagnostics.bins = spec.bins;
  res.diagnostics.frames = spec.frames;
  ScmPair scms = reconstruct_scms(psi_s, psi_n, cfg, att_s, att_n, &res.diagnostics);
  BeamformerWeights bw =
      mvdr_weights(scms.speech, scms.noise, cfg.ref_channel, cfg.loading);
  res.enhanced_spec = apply_beamformer(bw, spec);
  res.enhanced = istft(res.enhanced_spec);
  res.diagnostics.fallback_bins = bw.fallback_count();
  res.diagnostics.fallback_ratio =
      static_cast<double>(res.diagnostics.fallback_bins) /
      (static_cast<double>(spec.bins) * spec.frames);
  res.diagnostics.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace detail_pipeline

// Full network-driven pipeline: stft -> features -> backbone -> ISCM masking
// -> temporal reconstruction -> MVDR -> istft.
inline EnhanceResult enhance(const Waveform& mixture, const ModelWeights& weights,
                             const EnhanceConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (mixture.channels != weights.arch.num_mics)
    throw InputError("enhance: mixture has " + std::to_string(mixture.channels) +
                     " channels but the model expects " +
                     std::to_string(weights.arch.num_mics));
  if (cfg.ref_channel >= mixture.channels) throw InputError("enhance: bad reference channel");

  ComplexSpectrogram spec = stft(mixture, cfg.stft);
  Real3 features = spectrogram_features(spec);
  NetworkOutputs net = igcrn_forward(features, weights);

  IscmSequence psi_s = instantaneous_scm(spec, net.mask, MaskTarget::speech);
  IscmSequence psi_n = instantaneous_scm(spec, net.mask, MaskTarget::noise);

  std::optional<AttentionTensor> att_s, att_n;
  if (cfg.estimator.kind == EstimatorConfig::Kind::attention) {
    att_s = attention_weights(net.q_speech, net.k_speech, cfg.causal, cfg.attention_frame_cap);
    att_n = attention_weights(net.q_noise, net.k_noise, cfg.causal, cfg.attention_frame_cap);
  }
  return detail_pipeline::run_beamformer(spec, psi_s, psi_n, cfg,
                                         att_s ? &*att_s : nullptr,
                                         att_n ? &*att_n : nullptr, t0);
}

// Mask-driven pipeline without the network (oracle and baseline runs). The
// same mask drives both targets; attention comes from the override.
inline EnhanceResult enhance_with_mask(const Waveform& mixture, const Real2& mask,
                                       const EnhanceConfig& cfg,
                                       const AttentionOverride& ov = {}) {
  auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (cfg.ref_channel >= mixture.channels) throw InputError("enhance: bad reference channel");
  ComplexSpectrogram spec = stft(mixture, cfg.stft);
  IscmSequence psi_s = instantaneous_scm(spec, mask, MaskTarget::speech);
  IscmSequence psi_n = instantaneous_scm(spec, mask, MaskTarget::noise);

  std::optional<AttentionTensor> att_s, att_n;
  if (cfg.estimator.kind == EstimatorConfig::Kind::attention) {
    att_s = detail_pipeline::make_override(ov, spec.bins, spec.frames, cfg.causal);
    att_n = att_s;  // same rows for both targets
  }
  return detail_pipeline::run_beamformer(spec, psi_s, psi_n, cfg,
                                         att_s ? &*att_s : nullptr,
                                         att_n ? &*att_n : nullptr, t0);
}

}  // namespace abic
