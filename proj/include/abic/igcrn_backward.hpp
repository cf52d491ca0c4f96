// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <string>
#include <vector>

#include "abic/igcrn.hpp"

namespace abic {

// Parameter gradients keyed like the weight container (trainable tensors only).
using GradientMap = std::map<std::string, std::vector<double>>;

inline GradientMap zero_gradients(const ArchConfig& arch) {
  GradientMap g;
  for (const auto& s : expected_tensors(arch))
    if (s.trainable) g.emplace(s.name, std::vector<double>(s.elements(), 0.0));
  return g;
}

struct NetworkOutputGrads {
  Real2 mask;
  Real3 q_speech, k_speech, q_noise, k_noise;

  const Real3& head(const std::string& name) const {
    if (name == "q_speech") return q_speech;
    if (name == "k_speech") return k_speech;
    if (name == "q_noise") return q_noise;
    if (name == "k_noise") return k_noise;
    throw InputError("unknown head " + name);
  }
};

namespace detail_igcrn {

// adjoint of conv_freq; accumulates weight/bias grads and returns input grads
inline Real3 conv_freq_backward(const Real3& input, const NamedTensor& weight,
                                const Real3& g_out, std::vector<double>& g_weight,
                                std::vector<double>& g_bias) {
  const int c_out = weight.shape[0], c_in = weight.shape[1], k = weight.shape[2];
  const int bins = input.d1, frames = input.d2, pad = (k - 1) / 2;
  Real3 g_in(c_in, bins, frames);
  for (int co = 0; co < c_out; ++co) {
    for (int f = 0; f < bins; ++f) {
      const double* go = &g_out.at(co, f, 0);
      for (int t = 0; t < frames; ++t) g_bias[co] += go[t];
      for (int ci = 0; ci < c_in; ++ci) {
        for (int kk = 0; kk < k; ++kk) {
          int fs = f + kk - pad;
          if (fs < 0 || fs >= bins) continue;
          const double* src = &input.at(ci, fs, 0);
          double* gi = &g_in.at(ci, fs, 0);
          const double wv = weight.v[(co * c_in + ci) * k + kk];
          double acc = 0.0;
          for (int t = 0; t < frames; ++t) {
            acc += go[t] * src[t];
            gi[t] += wv * go[t];
          }
          g_weight[(co * c_in + ci) * k + kk] += acc;
        }
      }
    }
  }
  return g_in;
}

// adjoint of BN + ELU given the block cache; `training` selects the batch
// statistics path (statistics depend on the input) versus the affine path
inline Real3 conv_block_backward(const ConvBlockCache& cache, const ModelWeights& w,
                                 const std::string& prefix, const Real3& g_act,
                                 bool training, GradientMap& grads) {
  const auto& gamma = w.get(prefix + ".bn.gamma");
  const int channels = cache.conv_out.d0;
  const long n = static_cast<long>(cache.conv_out.d1) * cache.conv_out.d2;

  // ELU': 1 for positive pre-activations, act + 1 otherwise
  Real3 g_bn(cache.bn_out.d0, cache.bn_out.d1, cache.bn_out.d2);
  for (size_t i = 0; i < g_bn.v.size(); ++i) {
    double a = cache.act_out.v[i];
    g_bn.v[i] = g_act.v[i] * (cache.bn_out.v[i] > 0.0 ? 1.0 : a + 1.0);
  }

  auto& g_gamma = grads.at(prefix + ".bn.gamma");
  auto& g_beta = grads.at(prefix + ".bn.beta");
  Real3 g_conv(channels, cache.conv_out.d1, cache.conv_out.d2);
  for (int c = 0; c < channels; ++c) {
    const double mu = cache.stats.mean[c];
    const double inv_sigma = 1.0 / std::sqrt(cache.stats.var[c] + kBnEpsilon);
    const double* x = &cache.conv_out.at(c, 0, 0);
    const double* gy = &g_bn.at(c, 0, 0);
    double* gx = &g_conv.at(c, 0, 0);
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (long i = 0; i < n; ++i) {
      double xhat = (x[i] - mu) * inv_sigma;
      sum_gy += gy[i];
      sum_gy_xhat += gy[i] * xhat;
    }
    g_gamma[c] += sum_gy_xhat;
    g_beta[c] += sum_gy;
    const double gam = gamma.v[c];
    if (!training) {
      for (long i = 0; i < n; ++i) gx[i] = gy[i] * gam * inv_sigma;
    } else {
      // batch statistics: dx = gamma/sigma * (gy - mean(gy) - xhat*mean(gy*xhat))
      const double m_gy = sum_gy / n;
      const double m_gy_xhat = sum_gy_xhat / n;
      for (long i = 0; i < n; ++i) {
        double xhat = (x[i] - mu) * inv_sigma;
        gx[i] = gam * inv_sigma * (gy[i] - m_gy - xhat * m_gy_xhat);
      }
    }
  }

  auto& g_weight = grads.at(prefix + ".weight");
  auto& g_bias = grads.at(prefix + ".bias");
  return conv_freq_backward(cache.input, w.get(prefix + ".weight"), g_conv, g_weight, g_bias);
}

}  // namespace detail_igcrn

// BPTT through one frequency-shared LSTM layer. Serial over bins so the
// shared-weight accumulation order is fixed.
inline Real3 lstm_backward(const LstmLayerCache& cache, const ModelWeights& w,
                           const std::string& prefix, const Real3& g_hidden,
                           GradientMap& grads) {
  const auto& w_ih = w.get(prefix + ".w_ih");
  const auto& w_hh = w.get(prefix + ".w_hh");
  const int hidden = w_hh.shape[1];
  const int in_dim = w_ih.shape[1];
  const int bins = cache.input.d0, frames = cache.input.d1;
  auto& g_wih = grads.at(prefix + ".w_ih");
  auto& g_whh = grads.at(prefix + ".w_hh");
  auto& g_bias = grads.at(prefix + ".bias");

  Real3 g_x(bins, frames, in_dim);
  std::vector<double> dh(hidden), dc(hidden), da(4 * hidden);
  for (int f = 0; f < bins; ++f) {
    std::fill(dh.begin(), dh.end(), 0.0);
    std::fill(dc.begin(), dc.end(), 0.0);
    for (int t = frames - 1; t >= 0; --t) {
      for (int u = 0; u < hidden; ++u) {
        const double gi = cache.gate_i.at(f, t, u);
        const double gf = cache.gate_f.at(f, t, u);
        const double gg = cache.gate_g.at(f, t, u);
        const double go = cache.gate_o.at(f, t, u);
        const double ct = cache.cell.at(f, t, u);
        const double tct = std::tanh(ct);
        const double dht = g_hidden.at(f, t, u) + dh[u];
        const double dct = dht * go * (1.0 - tct * tct) + dc[u];
        const double c_prev = t > 0 ? cache.cell.at(f, t - 1, u) : 0.0;
        da[u] = dct * gg * gi * (1.0 - gi);                      // input gate
        da[hidden + u] = dct * c_prev * gf * (1.0 - gf);         // forget gate
        da[2 * hidden + u] = dct * gi * (1.0 - gg * gg);         // candidate
        da[3 * hidden + u] = dht * tct * go * (1.0 - go);        // output gate
        dc[u] = dct * gf;
      }
      const double* x = &cache.input.at(f, t, 0);
      for (int u = 0; u < 4 * hidden; ++u) {
        const double a = da[u];
        g_bias[u] += a;
        double* gw = &g_wih[static_cast<size_t>(u) * in_dim];
        for (int i = 0; i < in_dim; ++i) gw[i] += a * x[i];
        if (t > 0) {
          const double* h_prev = &cache.hidden.at(f, t - 1, 0);
          double* gh = &g_whh[static_cast<size_t>(u) * hidden];
          for (int i = 0; i < hidden; ++i) gh[i] += a * h_prev[i];
        }
      }
      double* gx = &g_x.at(f, t, 0);
      for (int i = 0; i < in_dim; ++i) {
        double acc = 0.0;
        for (int u = 0; u < 4 * hidden; ++u) acc += w_ih.v[static_cast<size_t>(u) * in_dim + i] * da[u];
        gx[i] = acc;
      }
      std::fill(dh.begin(), dh.end(), 0.0);
      for (int i = 0; i < hidden; ++i) {
        double acc = 0.0;
        for (int u = 0; u < 4 * hidden; ++u) acc += w_hh.v[static_cast<size_t>(u) * hidden + i] * da[u];
        dh[i] = acc;
      }
    }
  }
  return g_x;
}

// Full backbone backward from output-space gradients to parameter gradients.
inline void igcrn_backward(const IgcrnCache& cache, const ModelWeights& w,
                           const NetworkOutputs& outputs, const NetworkOutputGrads& g_out,
                           GradientMap& grads) {
  using namespace detail_igcrn;
  const ArchConfig& arch = w.arch;
  const int c = arch.conv_channels;
  const int n_layers = arch.num_conv_layers;
  const int bins = cache.features.d1, frames = cache.features.d2;
  const bool training = cache.training;

  std::vector<Real3> g_enc(n_layers);
  for (int i = 0; i < n_layers; ++i) g_enc[i] = Real3(c, bins, frames);
  Real3 g_trunk(c, bins, frames);

  // decoders (reverse of the forward walk)
  for (const auto& head : decoder_names()) {
    const auto& dcache = cache.decoder.at(head);
    const int out_ch = head == "mask" ? 1 : arch.head_dim;

    // head activation -> final conv pre-activation
    const auto& fin = dcache[n_layers - 1];
    Real3 g_pre(out_ch, bins, frames);
    if (head == "mask") {
      for (int f = 0; f < bins; ++f)
        for (int t = 0; t < frames; ++t) {
          double y = outputs.mask.at(f, t);
          g_pre.at(0, f, t) = g_out.mask.at(f, t) * y * (1.0 - y);
        }
    } else {
      const Real3& y = outputs.head(head);
      const Real3& gy = g_out.head(head);
      for (int d = 0; d < out_ch; ++d)
        for (int f = 0; f < bins; ++f)
          for (int t = 0; t < frames; ++t) {
            double v = y.at(f, t, d);
            g_pre.at(d, f, t) = gy.at(f, t, d) * (1.0 - v * v);
          }
    }
    std::string p = "dec." + head + ".out";
    Real3 g_fin_in = conv_freq_backward(fin.input, w.get(p + ".weight"), g_pre,
                                        grads.at(p + ".weight"), grads.at(p + ".bias"));
    // split concat(z1, enc1)
    Real3 g_z(c, bins, frames);
    std::copy(g_fin_in.v.begin(), g_fin_in.v.begin() + g_z.v.size(), g_z.v.begin());
    for (size_t i = 0; i < g_enc[0].v.size(); ++i)
      g_enc[0].v[i] += g_fin_in.v[g_z.v.size() + i];

    for (int i = 2; i <= n_layers; ++i) {
      const auto& blk = dcache[n_layers - i];
      std::string prefix = "dec." + head + ".deconv" + std::to_string(i);
      Real3 g_in = conv_block_backward(blk, w, prefix, g_z, training, grads);
      g_z = Real3(c, bins, frames);
      std::copy(g_in.v.begin(), g_in.v.begin() + g_z.v.size(), g_z.v.begin());
      for (size_t e = 0; e < g_enc[i - 1].v.size(); ++e)
        g_enc[i - 1].v[e] += g_in.v[g_z.v.size() + e];
    }
    for (size_t e = 0; e < g_trunk.v.size(); ++e) g_trunk.v[e] += g_z.v[e];
  }

  // trunk linear: y[ch] = W[ch,:] h + b
  const auto& lw = w.get("trunk_linear.weight");
  const int hidden = arch.lstm_hidden;
  Real3 g_seq(bins, frames, hidden);
  {
    auto& g_lw = grads.at("trunk_linear.weight");
    auto& g_lb = grads.at("trunk_linear.bias");
    const Real3& h_top = cache.lstm[arch.num_lstm_layers - 1].hidden;
    for (int ch = 0; ch < c; ++ch) {
      const double* wrow = &lw.v[static_cast<size_t>(ch) * hidden];
      double* gw = &g_lw[static_cast<size_t>(ch) * hidden];
      for (int f = 0; f < bins; ++f)
        for (int t = 0; t < frames; ++t) {
          const double gy = g_trunk.at(ch, f, t);
          g_lb[ch] += gy;
          const double* hvec = &h_top.at(f, t, 0);
          double* gs = &g_seq.at(f, t, 0);
          for (int u = 0; u < hidden; ++u) {
            gw[u] += gy * hvec[u];
            gs[u] += gy * wrow[u];
          }
        }
    }
  }

  for (int l = arch.num_lstm_layers; l >= 1; --l)
    g_seq = lstm_backward(cache.lstm[l - 1], w, "lstm" + std::to_string(l), g_seq, grads);

  // sequences [F x T x C] back to feature maps [C x F x T]
  for (int ch = 0; ch < c; ++ch)
    for (int f = 0; f < bins; ++f)
      for (int t = 0; t < frames; ++t)
        g_enc[n_layers - 1].at(ch, f, t) += g_seq.at(f, t, ch);

  // encoder stack
  for (int i = n_layers; i >= 1; --i) {
    Real3 g_in = conv_block_backward(cache.encoder[i - 1], w, "enc" + std::to_string(i),
                                     g_enc[i - 1], training, grads);
    if (i > 1)
      for (size_t e = 0; e < g_enc[i - 2].v.size(); ++e) g_enc[i - 2].v[e] += g_in.v[e];
  }
}

}  // namespace abic
