// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <string>
#include <vector>

#include "abic/pipeline_backward.hpp"

namespace abic {

// Forward-only loss used by the finite-difference loop: the spectrogram,
// features and reference are fixed, only the weights vary.
inline double pipeline_loss(const ComplexSpectrogram& spec, const Real3& features,
                            const std::vector<double>& reference, const ModelWeights& w,
                            const EnhanceConfig& cfg) {
  NetworkOutputs net = igcrn_forward(features, w);
  IscmSequence psi_s = instantaneous_scm(spec, net.mask, MaskTarget::speech);
  IscmSequence psi_n = instantaneous_scm(spec, net.mask, MaskTarget::noise);
  ScmSequence phi_s, phi_n;
  switch (cfg.estimator.kind) {
    case EstimatorConfig::Kind::attention: {
      auto att_s = attention_weights(net.q_speech, net.k_speech, cfg.causal,
                                     cfg.attention_frame_cap);
      auto att_n = attention_weights(net.q_noise, net.k_noise, cfg.causal,
                                     cfg.attention_frame_cap);
      phi_s = attention_scm(att_s, psi_s);
      phi_n = attention_scm(att_n, psi_n);
      break;
    }
    case EstimatorConfig::Kind::online:
      phi_s = online_scm(psi_s, cfg.estimator.forgetting_factor);
      phi_n = online_scm(psi_n, cfg.estimator.forgetting_factor);
      break;
    case EstimatorConfig::Kind::blockwise:
      phi_s = blockwise_scm(psi_s, cfg.estimator.block_size, cfg.causal);
      phi_n = blockwise_scm(psi_n, cfg.estimator.block_size, cfg.causal);
      break;
  }
  BeamformerWeights bw = mvdr_weights(phi_s, phi_n, cfg.ref_channel, cfg.loading);
  if (bw.fallback_count() > 0)
    throw NumericError("non-differentiable configuration; adjust scene");
  Waveform shat = istft(apply_beamformer(bw, spec));
  std::vector<double> est(shat.data.begin(), shat.data.end());
  return snr_loss(est, std::span<const double>(reference.data(), est.size()));
}

struct GradCheckResult {
  std::map<std::string, double> group_rel_err;  // per named tensor
  double max_rel_err = 0.0;
  double loss = 0.0;
};

// Central finite differences against the hand-derived adjoints, parameter by
// parameter. Relative error is measured per tensor against the larger of the
// two gradient norms.
inline GradCheckResult grad_check(const Waveform& mixture, const Waveform& reference,
                                  ModelWeights weights, const EnhanceConfig& cfg,
                                  double eps_rel = 1e-5) {
  PipelineGradient analytic =
      enhance_loss_gradient(mixture, reference, weights, cfg, false, true);

  ComplexSpectrogram spec = stft(mixture, cfg.stft);
  Real3 features = spectrogram_features(spec);
  const long est_len =
      static_cast<long>(stft_num_frames(mixture.length, cfg.stft) - 1) * cfg.stft.hop +
      cfg.stft.frame_length;
  std::vector<double> ref(est_len);
  for (long n = 0; n < est_len; ++n) ref[n] = reference.at(cfg.ref_channel, n);

  GradCheckResult res;
  res.loss = analytic.loss;
  for (auto& [name, grad] : analytic.grads) {
    auto& tensor = weights.mut(name);
    std::vector<double> fd(grad.size());
    for (size_t i = 0; i < tensor.v.size(); ++i) {
      const double saved = tensor.v[i];
      const double h = eps_rel * std::max(std::abs(saved), 1.0);
      tensor.v[i] = saved + h;
      const double up = pipeline_loss(spec, features, ref, weights, cfg);
      tensor.v[i] = saved - h;
      const double down = pipeline_loss(spec, features, ref, weights, cfg);
      tensor.v[i] = saved;
      fd[i] = (up - down) / (2.0 * h);
    }
    double scale = 1e-12;
    for (size_t i = 0; i < fd.size(); ++i)
      scale = std::max({scale, std::abs(fd[i]), std::abs(grad[i])});
    double worst = 0.0;
    for (size_t i = 0; i < fd.size(); ++i)
      worst = std::max(worst, std::abs(fd[i] - grad[i]));
    double rel = worst / scale;
    res.group_rel_err[name] = rel;
    res.max_rel_err = std::max(res.max_rel_err, rel);
  }
  return res;
}

}  // namespace abic
