// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "abic/igcrn_backward.hpp"
#include "abic/metrics.hpp"
#include "abic/pipeline.hpp"

// Gradient convention for complex intermediates: the carrier for z = x + iy is
// g_z = dL/dx + i dL/dy. Under this convention products follow
// g_a = conj(b) g_out for out = a b, and holomorphic maps pick up conj(f').

namespace abic {

// dL/dA and dL/dPsi from dL/dPhi for Phi_t = sum_tau A[t,tau] Psi_tau.
inline void attention_scm_backward(const AttentionTensor& att, const IscmSequence& psi,
                                   const IscmSequence& g_phi, AttentionTensor* g_att,
                                   IscmSequence* g_psi) {
  const int mm = psi.mics * psi.mics;
  for (int f = 0; f < psi.bins; ++f)
    for (int t = 0; t < psi.frames; ++t) {
      const cplx* gp = g_phi.matrix(f, t);
      const int last = att.causal ? t : psi.frames - 1;
      for (int tau = 0; tau <= last; ++tau) {
        const cplx* src = psi.matrix(f, tau);
        cplx* gpsi = g_psi->matrix(f, tau);
        const double a = att.at(f, t, tau);
        double ga = 0.0;
        for (int e = 0; e < mm; ++e) {
          ga += gp[e].real() * src[e].real() + gp[e].imag() * src[e].imag();
          gpsi[e] += a * gp[e];
        }
        g_att->at(f, t, tau) += ga;
      }
    }
}

inline void online_scm_backward(const IscmSequence& g_phi, double lambda, IscmSequence* g_psi) {
  const int mm = g_phi.mics * g_phi.mics;
  std::vector<cplx> carry(mm);
  for (int f = 0; f < g_phi.bins; ++f) {
    std::fill(carry.begin(), carry.end(), cplx(0.0, 0.0));
    for (int t = g_phi.frames - 1; t >= 1; --t) {
      const cplx* gp = g_phi.matrix(f, t);
      cplx* gpsi = g_psi->matrix(f, t);
      for (int e = 0; e < mm; ++e) {
        cplx total = gp[e] + carry[e];
        gpsi[e] += (1.0 - lambda) * total;
        carry[e] = lambda * total;
      }
    }
    const cplx* gp0 = g_phi.matrix(f, 0);
    cplx* gpsi0 = g_psi->matrix(f, 0);
    for (int e = 0; e < mm; ++e) gpsi0[e] += gp0[e] + carry[e];
  }
}

inline void blockwise_scm_backward(const IscmSequence& g_phi, int block_size, bool causal,
                                   IscmSequence* g_psi) {
  const int mm = g_phi.mics * g_phi.mics;
  for (int f = 0; f < g_phi.bins; ++f)
    for (int start = 0; start < g_phi.frames; start += block_size) {
      const int end = std::min(start + block_size, g_phi.frames);
      if (causal) {
        // Phi_t averages Psi_{start..t}: accumulate backwards
        std::vector<cplx> acc(mm, cplx(0.0, 0.0));
        for (int t = end - 1; t >= start; --t) {
          const cplx* gp = g_phi.matrix(f, t);
          const double inv = 1.0 / (t - start + 1);
          for (int e = 0; e < mm; ++e) acc[e] += inv * gp[e];
          cplx* gpsi = g_psi->matrix(f, t);
          for (int e = 0; e < mm; ++e) gpsi[e] += acc[e];
        }
      } else {
        std::vector<cplx> acc(mm, cplx(0.0, 0.0));
        const double inv = 1.0 / (end - start);
        for (int t = start; t < end; ++t) {
          const cplx* gp = g_phi.matrix(f, t);
          for (int e = 0; e < mm; ++e) acc[e] += inv * gp[e];
        }
        for (int t = start; t < end; ++t) {
          cplx* gpsi = g_psi->matrix(f, t);
          for (int e = 0; e < mm; ++e) gpsi[e] += acc[e];
        }
      }
    }
}

// Softmax + scaled-dot-product backward; accumulates into g_q/g_k.
inline void attention_weights_backward(const AttentionTensor& att, const Real3& query,
                                       const Real3& key, const AttentionTensor& g_att,
                                       Real3* g_query, Real3* g_key) {
  const int bins = query.d0, frames = query.d1, dim = query.d2;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<double> g_logit(frames);
  for (int f = 0; f < bins; ++f)
    for (int i = 0; i < frames; ++i) {
      const int last = att.causal ? i : frames - 1;
      double dot = 0.0;
      for (int j = 0; j <= last; ++j) dot += g_att.at(f, i, j) * att.at(f, i, j);
      for (int j = 0; j <= last; ++j)
        g_logit[j] = att.at(f, i, j) * (g_att.at(f, i, j) - dot);
      for (int j = 0; j <= last; ++j) {
        const double gl = g_logit[j] * inv_sqrt_d;
        if (gl == 0.0) continue;
        for (int d = 0; d < dim; ++d) {
          g_query->at(f, i, d) += gl * key.at(f, j, d);
          g_key->at(f, j, d) += gl * query.at(f, i, d);
        }
      }
    }
}

// dL/dmask from the ISCM gradients; the mask scales the outer product for the
// speech target and its complement for the noise target.
inline Real2 iscm_mask_backward(const ComplexSpectrogram& spec, const IscmSequence& g_psi_s,
                                const IscmSequence& g_psi_n) {
  const int mics = spec.channels;
  Real2 g_mask(spec.bins, spec.frames);
  for (int f = 0; f < spec.bins; ++f)
    for (int t = 0; t < spec.frames; ++t) {
      const cplx* gs = g_psi_s.matrix(f, t);
      const cplx* gn = g_psi_n.matrix(f, t);
      double acc = 0.0;
      for (int i = 0; i < mics; ++i)
        for (int j = 0; j < mics; ++j) {
          const cplx outer = spec.at(i, f, t) * std::conj(spec.at(j, f, t));
          const cplx diff = gs[i * mics + j] - gn[i * mics + j];
          acc += diff.real() * outer.real() + diff.imag() * outer.imag();
        }
      g_mask.at(f, t) = acc;
    }
  return g_mask;
}

// Per-bin adjoint of the Souden solve. Fallback bins contribute nothing (the
// passthrough branch is constant in the covariances).
inline void mvdr_backward(const BeamformerWeights& bw, MvdrCache& cache, double loading,
                          const Cplx3& g_w /* [F x T x M] */, IscmSequence* g_phi_s,
                          IscmSequence* g_phi_n) {
  const int mics = bw.mics;
  const int nn = mics * mics;
  std::vector<cplx> chol(nn), g_c(nn), g_b(nn), g_a(nn), col(mics), numer(mics);
  for (int f = 0; f < bw.bins; ++f)
    for (int t = 0; t < bw.frames; ++t) {
      if (bw.flag(f, t)) continue;
      const cplx* a = cache.loaded(f, t);
      const cplx* c = cache.c(f, t);
      const cplx tau = cache.trace[static_cast<size_t>(f) * bw.frames + t];
      const cplx s = 1.0 / tau;

      for (int i = 0; i < mics; ++i) numer[i] = c[i * mics + bw.ref_channel];
      // w = numer * s
      cplx g_s(0.0, 0.0);
      std::fill(g_c.begin(), g_c.end(), cplx(0.0, 0.0));
      for (int i = 0; i < mics; ++i) {
        const cplx gw = g_w.at(f, t, i);
        g_c[i * mics + bw.ref_channel] += std::conj(s) * gw;
        g_s += std::conj(numer[i]) * gw;
      }
      const cplx g_tau = std::conj(-s * s) * g_s;
      for (int i = 0; i < mics; ++i) g_c[i * mics + i] += g_tau;

      // C = A^{-1} B  =>  g_B = A^{-1} g_C,  g_A = -g_B C^H
      std::copy(a, a + nn, chol.begin());
      if (!linalg::cholesky(chol.data(), mics)) continue;  // forward succeeded; keep safe
      for (int j = 0; j < mics; ++j) {
        for (int i = 0; i < mics; ++i) col[i] = g_c[i * mics + j];
        linalg::cholesky_solve(chol.data(), mics, col.data());
        for (int i = 0; i < mics; ++i) g_b[i * mics + j] = col[i];
      }
      for (int i = 0; i < mics; ++i)
        for (int j = 0; j < mics; ++j) {
          cplx acc(0.0, 0.0);
          for (int k = 0; k < mics; ++k)
            acc -= g_b[i * mics + k] * std::conj(c[j * mics + k]);
          g_a[i * mics + j] = acc;
        }

      // loading: A = Hn + (loading * tr/M [+ floor]) I, tr = sum Re(Hn_kk)
      double g_tr = 0.0;
      for (int i = 0; i < mics; ++i) g_tr += g_a[i * mics + i].real();
      g_tr *= loading / mics;

      // Hermitian projection adjoints: G -> (G + G^H)/2
      cplx* gs_out = g_phi_s->matrix(f, t);
      cplx* gn_out = g_phi_n->matrix(f, t);
      for (int i = 0; i < mics; ++i)
        for (int j = 0; j < mics; ++j) {
          gs_out[i * mics + j] +=
              0.5 * (g_b[i * mics + j] + std::conj(g_b[j * mics + i]));
          gn_out[i * mics + j] +=
              0.5 * (g_a[i * mics + j] + std::conj(g_a[j * mics + i]));
        }
      for (int i = 0; i < mics; ++i) gn_out[i * mics + i] += g_tr;
    }
}

struct PipelineGradient {
  double loss = 0.0;
  GradientMap grads;
  long fallback_bins = 0;
};

// Loss and parameter gradients for snr_loss(enhance(mixture)) against the
// reference-channel speech image. training_bn switches batch-norm to batch
// statistics (and updates running stats), matching the training forward.
// error_on_fallback makes degenerate bins a hard error for gradient checking.
inline PipelineGradient enhance_loss_gradient(const Waveform& mixture,
                                              const Waveform& reference, ModelWeights& w,
                                              const EnhanceConfig& cfg, bool training_bn,
                                              bool error_on_fallback) {
  cfg.validate();
  if (mixture.channels != w.arch.num_mics)
    throw InputError("gradient: mixture channel count mismatch");

  // ---- forward with caches ----
  ComplexSpectrogram spec = stft(mixture, cfg.stft);
  Real3 features = spectrogram_features(spec);
  IgcrnCache cache;
  NetworkOutputs net = igcrn_forward(features, w, &cache, training_bn,
                                     training_bn ? &w : nullptr);

  IscmSequence psi_s = instantaneous_scm(spec, net.mask, MaskTarget::speech);
  IscmSequence psi_n = instantaneous_scm(spec, net.mask, MaskTarget::noise);

  std::optional<AttentionTensor> att_s, att_n;
  ScmSequence phi_s, phi_n;
  switch (cfg.estimator.kind) {
    case EstimatorConfig::Kind::attention:
      att_s = attention_weights(net.q_speech, net.k_speech, cfg.causal,
                                cfg.attention_frame_cap);
      att_n = attention_weights(net.q_noise, net.k_noise, cfg.causal,
                                cfg.attention_frame_cap);
      phi_s = attention_scm(*att_s, psi_s);
      phi_n = attention_scm(*att_n, psi_n);
      break;
    case EstimatorConfig::Kind::online:
      phi_s = online_scm(psi_s, cfg.estimator.forgetting_factor);
      phi_n = online_scm(psi_n, cfg.estimator.forgetting_factor);
      break;
    case EstimatorConfig::Kind::blockwise:
      phi_s = blockwise_scm(psi_s, cfg.estimator.block_size, cfg.causal);
      phi_n = blockwise_scm(psi_n, cfg.estimator.block_size, cfg.causal);
      break;
  }

  MvdrCache mvdr_cache;
  BeamformerWeights bw = mvdr_weights(phi_s, phi_n, cfg.ref_channel, cfg.loading, &mvdr_cache);
  if (error_on_fallback && bw.fallback_count() > 0)
    throw NumericError("non-differentiable configuration; adjust scene (" +
                       std::to_string(bw.fallback_count()) + " fallback bins)");
  ComplexSpectrogram shat_spec = apply_beamformer(bw, spec);
  Waveform shat = istft(shat_spec);

  if (reference.length < shat.length) throw InputError("gradient: reference too short");
  std::vector<double> ref(shat.length);
  for (long n = 0; n < shat.length; ++n) ref[n] = reference.at(cfg.ref_channel, n);
  std::vector<double> est(shat.data.begin(), shat.data.end());

  PipelineGradient out;
  out.loss = snr_loss(est, ref);
  out.fallback_bins = bw.fallback_count();
  out.grads = zero_gradients(w.arch);

  // ---- backward ----
  std::vector<double> g_time(est.size());
  snr_loss_grad(est, ref, g_time);
  Waveform g_wave(1, shat.length);
  std::copy(g_time.begin(), g_time.end(), g_wave.data.begin());
  Cplx2 g_spec_hat;
  istft_adjoint(g_wave, cfg.stft, shat_spec.frames, &g_spec_hat);

  // apply_beamformer: S_hat = sum_m conj(w_m) Y_m  =>  g_w = conj(g_S) Y
  Cplx3 g_bw(bw.bins, bw.frames, bw.mics);
  for (int f = 0; f < bw.bins; ++f)
    for (int t = 0; t < bw.frames; ++t) {
      const cplx gs = g_spec_hat.at(f, t);
      for (int m = 0; m < bw.mics; ++m)
        g_bw.at(f, t, m) = std::conj(gs) * spec.at(m, f, t);
    }

  IscmSequence g_phi_s(spec.bins, spec.frames, spec.channels);
  IscmSequence g_phi_n(spec.bins, spec.frames, spec.channels);
  mvdr_backward(bw, mvdr_cache, cfg.loading, g_bw, &g_phi_s, &g_phi_n);

  IscmSequence g_psi_s(spec.bins, spec.frames, spec.channels);
  IscmSequence g_psi_n(spec.bins, spec.frames, spec.channels);
  NetworkOutputGrads g_net;
  g_net.mask = Real2(spec.bins, spec.frames);
  g_net.q_speech = Real3(spec.bins, spec.frames, w.arch.head_dim);
  g_net.k_speech = Real3(spec.bins, spec.frames, w.arch.head_dim);
  g_net.q_noise = Real3(spec.bins, spec.frames, w.arch.head_dim);
  g_net.k_noise = Real3(spec.bins, spec.frames, w.arch.head_dim);

  switch (cfg.estimator.kind) {
    case EstimatorConfig::Kind::attention: {
      AttentionTensor g_att_s(spec.bins, spec.frames, att_s->causal);
      AttentionTensor g_att_n(spec.bins, spec.frames, att_n->causal);
      attention_scm_backward(*att_s, psi_s, g_phi_s, &g_att_s, &g_psi_s);
      attention_scm_backward(*att_n, psi_n, g_phi_n, &g_att_n, &g_psi_n);
      attention_weights_backward(*att_s, net.q_speech, net.k_speech, g_att_s,
                                 &g_net.q_speech, &g_net.k_speech);
      attention_weights_backward(*att_n, net.q_noise, net.k_noise, g_att_n,
                                 &g_net.q_noise, &g_net.k_noise);
      break;
    }
    case EstimatorConfig::Kind::online:
      online_scm_backward(g_phi_s, cfg.estimator.forgetting_factor, &g_psi_s);
      online_scm_backward(g_phi_n, cfg.estimator.forgetting_factor, &g_psi_n);
      break;
    case EstimatorConfig::Kind::blockwise:
      blockwise_scm_backward(g_phi_s, cfg.estimator.block_size, cfg.causal, &g_psi_s);
      blockwise_scm_backward(g_phi_n, cfg.estimator.block_size, cfg.causal, &g_psi_n);
      break;
  }

  g_net.mask = iscm_mask_backward(spec, g_psi_s, g_psi_n);
  igcrn_backward(cache, w, net, g_net, out.grads);
  return out;
}

}  // namespace abic
