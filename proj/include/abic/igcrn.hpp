// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <string>
#include <vector>

#include "abic/common.hpp"
#include "abic/parallel.hpp"
#include "abic/rng.hpp"
#include "abic/tensor.hpp"

namespace abic {

// Head order is fixed everywhere: mask, then the four attention heads.
inline const std::vector<std::string>& decoder_names() {
  static const std::vector<std::string> names{"mask", "q_speech", "k_speech", "q_noise",
                                              "k_noise"};
  return names;
}

struct ArchConfig {
  int num_mics = 5;
  int conv_channels = 24;
  int num_conv_layers = 6;
  int lstm_hidden = 48;
  int num_lstm_layers = 2;
  int head_dim = 24;
  int kernel_freq = 5;

  int in_channels() const { return 2 * num_mics; }

  void validate() const {
    if (num_mics < 1) throw InputError("arch: need at least one microphone");
    if (conv_channels < 1 || lstm_hidden < 1 || head_dim < 1)
      throw InputError("arch: channel widths must be positive");
    if (num_conv_layers < 2) throw InputError("arch: need at least 2 conv layers");
    if (num_lstm_layers < 1) throw InputError("arch: need at least 1 lstm layer");
    if (kernel_freq < 1 || kernel_freq % 2 == 0)
      throw InputError("arch: frequency kernel extent must be odd");
  }

  bool operator==(const ArchConfig& o) const {
    return num_mics == o.num_mics && conv_channels == o.conv_channels &&
           num_conv_layers == o.num_conv_layers && lstm_hidden == o.lstm_hidden &&
           num_lstm_layers == o.num_lstm_layers && head_dim == o.head_dim &&
           kernel_freq == o.kernel_freq;
  }
};

inline ArchConfig published_arch() { return ArchConfig{}; }

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
  bool trainable = true;

  long elements() const {
    long n = 1;
    for (int d : shape) n *= d;
    return n;
  }
};

// Single source of truth for the container layout; init, save/load validation
// and the forward pass all walk this list.
inline std::vector<TensorSpec> expected_tensors(const ArchConfig& a) {
  a.validate();
  std::vector<TensorSpec> out;
  const int c = a.conv_channels, k = a.kernel_freq, h = a.lstm_hidden, d = a.head_dim;

  auto add_bn = [&out](const std::string& prefix, int ch) {
    out.push_back({prefix + ".bn.gamma", {ch}, true});
    out.push_back({prefix + ".bn.beta", {ch}, true});
    out.push_back({prefix + ".bn.running_mean", {ch}, false});
    out.push_back({prefix + ".bn.running_var", {ch}, false});
  };

  for (int i = 1; i <= a.num_conv_layers; ++i) {
    std::string p = "enc" + std::to_string(i);
    int cin = i == 1 ? a.in_channels() : c;
    out.push_back({p + ".weight", {c, cin, k}, true});
    out.push_back({p + ".bias", {c}, true});
    add_bn(p, c);
  }
  for (int l = 1; l <= a.num_lstm_layers; ++l) {
    std::string p = "lstm" + std::to_string(l);
    int in = l == 1 ? c : h;
    out.push_back({p + ".w_ih", {4 * h, in}, true});
    out.push_back({p + ".w_hh", {4 * h, h}, true});
    out.push_back({p + ".bias", {4 * h}, true});
  }
  out.push_back({"trunk_linear.weight", {c, h}, true});
  out.push_back({"trunk_linear.bias", {c}, true});

  for (const auto& head : decoder_names()) {
    for (int i = a.num_conv_layers; i >= 2; --i) {
      std::string p = "dec." + head + ".deconv" + std::to_string(i);
      out.push_back({p + ".weight", {c, 2 * c, k}, true});
      out.push_back({p + ".bias", {c}, true});
      add_bn(p, c);
    }
    int out_ch = head == "mask" ? 1 : d;
    std::string p = "dec." + head + ".out";
    out.push_back({p + ".weight", {out_ch, 2 * c, k}, true});
    out.push_back({p + ".bias", {out_ch}, true});
  }
  return out;
}

inline long parameter_count(const ArchConfig& a) {
  long n = 0;
  for (const auto& t : expected_tensors(a))
    if (t.trainable) n += t.elements();
  return n;
}

struct NamedTensor {
  std::vector<int> shape;
  std::vector<double> v;
};

struct ModelWeights {
  ArchConfig arch;
  std::map<std::string, NamedTensor> tensors;

  const NamedTensor& get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("weights: missing tensor '" + name + "'");
    return it->second;
  }
  NamedTensor& mut(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("weights: missing tensor '" + name + "'");
    return it->second;
  }

  void validate() const {
    auto specs = expected_tensors(arch);
    for (const auto& s : specs) {
      const auto& t = get(s.name);
      if (t.shape != s.shape) throw DataError("weights: shape mismatch for '" + s.name + "'");
      if (static_cast<long>(t.v.size()) != s.elements())
        throw DataError("weights: element count mismatch for '" + s.name + "'");
    }
    if (tensors.size() != specs.size())
      for (const auto& [name, t] : tensors) {
        bool known = false;
        for (const auto& s : specs)
          if (s.name == name) known = true;
        if (!known) throw DataError("weights: unexpected tensor '" + name + "'");
      }
  }
};

// Uniform [-k, k] with k = 1/sqrt(fan_in), values quantized to f32 so that a
// container round trip is bit-identical. BN starts as the identity transform.
inline ModelWeights init_weights(const ArchConfig& arch, std::uint64_t seed) {
  ModelWeights w;
  w.arch = arch;
  Rng rng(seed);
  long last_weight_fan_in = 1;  // bias fan-in follows the weight it belongs to
  for (const auto& s : expected_tensors(arch)) {
    NamedTensor t;
    t.shape = s.shape;
    t.v.resize(s.elements());
    if (s.name.ends_with("bn.gamma") || s.name.ends_with("bn.running_var")) {
      std::fill(t.v.begin(), t.v.end(), 1.0);
    } else if (s.name.ends_with("bn.beta") || s.name.ends_with("bn.running_mean")) {
      std::fill(t.v.begin(), t.v.end(), 0.0);
    } else {
      long fan_in;
      if (s.name.find("lstm") != std::string::npos) {
        fan_in = arch.lstm_hidden;
      } else if (s.name.ends_with(".bias")) {
        fan_in = last_weight_fan_in;
      } else {
        fan_in = s.elements() / s.shape[0];
        last_weight_fan_in = fan_in;
      }
      double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (auto& v : t.v) v = static_cast<float>(rng.uniform(-k, k));
    }
    w.tensors.emplace(s.name, std::move(t));
  }
  return w;
}

struct NetworkOutputs {
  Real2 mask;                              // [F x T], sigmoid range
  Real3 q_speech, k_speech, q_noise, k_noise;  // [F x T x D], tanh range

  Real3& head(const std::string& name) {
    if (name == "q_speech") return q_speech;
    if (name == "k_speech") return k_speech;
    if (name == "q_noise") return q_noise;
    if (name == "k_noise") return k_noise;
    throw InputError("unknown head " + name);
  }
  const Real3& head(const std::string& name) const {
    return const_cast<NetworkOutputs*>(this)->head(name);
  }
};

inline constexpr double kBnEpsilon = 1e-5;

// ------------------------------------------------------------------
// layer primitives
// ------------------------------------------------------------------

// Frequency-only convolution, stride 1, zero padding (k-1)/2: the inplace
// property; time extent is 1 so the whole stack stays causal.
inline Real3 conv_freq(const Real3& x, const NamedTensor& weight, const NamedTensor& bias,
                       const std::string& layer_name) {
  const int c_out = weight.shape[0], c_in = weight.shape[1], k = weight.shape[2];
  if (x.d0 != c_in)
    throw InputError("conv '" + layer_name + "': expected " + std::to_string(c_in) +
                     " input channels, got " + std::to_string(x.d0));
  const int bins = x.d1, frames = x.d2, pad = (k - 1) / 2;
  Real3 y(c_out, bins, frames);
  parallel_for(0, c_out, [&](long co) {
    const double b = bias.v[co];
    for (int f = 0; f < bins; ++f) {
      double* dst = &y.at(static_cast<int>(co), f, 0);
      for (int t = 0; t < frames; ++t) dst[t] = b;
      for (int ci = 0; ci < c_in; ++ci) {
        const double* wrow = &weight.v[(co * c_in + ci) * k];
        for (int kk = 0; kk < k; ++kk) {
          int fs = f + kk - pad;
          if (fs < 0 || fs >= bins) continue;
          const double wv = wrow[kk];
          const double* src = &x.at(ci, fs, 0);
          for (int t = 0; t < frames; ++t) dst[t] += wv * src[t];
        }
      }
    }
  });
  return y;
}

struct BnStats {
  std::vector<double> mean, var;  // per channel, batch statistics
};

// y = gamma * (x - mu) / sqrt(var + eps) + beta, per channel over (F, T).
inline Real3 batch_norm(const Real3& x, const NamedTensor& gamma, const NamedTensor& beta,
                        const std::vector<double>& mean, const std::vector<double>& var) {
  Real3 y(x.d0, x.d1, x.d2);
  const long n = static_cast<long>(x.d1) * x.d2;
  for (int c = 0; c < x.d0; ++c) {
    double inv = 1.0 / std::sqrt(var[c] + kBnEpsilon);
    double g = gamma.v[c] * inv;
    double b = beta.v[c] - gamma.v[c] * mean[c] * inv;
    const double* src = &x.at(c, 0, 0);
    double* dst = &y.at(c, 0, 0);
    for (long i = 0; i < n; ++i) dst[i] = g * src[i] + b;
  }
  return y;
}

inline BnStats batch_statistics(const Real3& x) {
  BnStats s;
  s.mean.resize(x.d0);
  s.var.resize(x.d0);
  const long n = static_cast<long>(x.d1) * x.d2;
  for (int c = 0; c < x.d0; ++c) {
    const double* src = &x.at(c, 0, 0);
    double mu = 0.0;
    for (long i = 0; i < n; ++i) mu += src[i];
    mu /= n;
    double var = 0.0;
    for (long i = 0; i < n; ++i) {
      double d = src[i] - mu;
      var += d * d;
    }
    s.mean[c] = mu;
    s.var[c] = var / n;
  }
  return s;
}

inline void elu_inplace(Real3& x) {
  for (auto& v : x.v) v = v > 0.0 ? v : std::expm1(v);
}

// ------------------------------------------------------------------
// forward cache (allocated only for training / gradient checking)
// ------------------------------------------------------------------

struct ConvBlockCache {
  Real3 input;     // concatenated input as seen by the conv
  Real3 conv_out;  // pre-BN
  Real3 bn_out;    // pre-activation
  Real3 act_out;
  BnStats stats;   // statistics actually used (batch or running)
};

struct LstmLayerCache {
  Real3 input;                    // [F x T x I] sequences
  Real3 gate_i, gate_f, gate_g, gate_o, cell, hidden;  // [F x T x H]
};

struct IgcrnCache {
  bool training = false;
  Real3 features;
  std::vector<ConvBlockCache> encoder;
  std::vector<LstmLayerCache> lstm;
  Real3 linear_out;  // trunk output [C x F x T]
  // per decoder head: deconv blocks N..2 then the final block (act = head act)
  std::map<std::string, std::vector<ConvBlockCache>> decoder;
};

// ------------------------------------------------------------------
// forward pass
// ------------------------------------------------------------------

namespace detail_igcrn {

inline Real3 concat_channels(const Real3& a, const Real3& b) {
  Real3 out(a.d0 + b.d0, a.d1, a.d2);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One conv + BN + ELU block. `training` selects batch statistics and, when a
// mutable weights pointer is given, updates the running stats with momentum.
inline Real3 conv_block(const Real3& in, const ModelWeights& w, const std::string& prefix,
                        bool training, double momentum, ModelWeights* update,
                        ConvBlockCache* cache) {
  Real3 conv = conv_freq(in, w.get(prefix + ".weight"), w.get(prefix + ".bias"), prefix);
  BnStats stats;
  if (training) {
    stats = batch_statistics(conv);
    if (update) {
      auto& rm = update->mut(prefix + ".bn.running_mean").v;
      auto& rv = update->mut(prefix + ".bn.running_var").v;
      for (size_t c = 0; c < rm.size(); ++c) {
        rm[c] = momentum * rm[c] + (1.0 - momentum) * stats.mean[c];
        rv[c] = momentum * rv[c] + (1.0 - momentum) * stats.var[c];
      }
    }
  } else {
    stats.mean = w.get(prefix + ".bn.running_mean").v;
    stats.var = w.get(prefix + ".bn.running_var").v;
  }
  Real3 bn = batch_norm(conv, w.get(prefix + ".bn.gamma"), w.get(prefix + ".bn.beta"),
                        stats.mean, stats.var);
  Real3 act = bn;
  elu_inplace(act);
  if (cache) {
    cache->input = in;
    cache->conv_out = std::move(conv);
    cache->bn_out = std::move(bn);
    cache->act_out = act;
    cache->stats = std::move(stats);
  }
  return act;
}

}  // namespace detail_igcrn

// Frequency-shared LSTM: every bin runs the same cell over its frame sequence.
// Gate order i, f, g, o; zero initial states.
inline Real3 lstm_forward(const Real3& x_seq /* [F x T x I] */, const ModelWeights& w,
                          const std::string& prefix, LstmLayerCache* cache = nullptr) {
  const auto& w_ih = w.get(prefix + ".w_ih");
  const auto& w_hh = w.get(prefix + ".w_hh");
  const auto& bias = w.get(prefix + ".bias");
  const int hidden = w_hh.shape[1];
  const int in_dim = w_ih.shape[1];
  if (x_seq.d2 != in_dim) throw InputError("lstm '" + prefix + "': input dim mismatch");
  const int bins = x_seq.d0, frames = x_seq.d1;

  Real3 h_out(bins, frames, hidden);
  if (cache) {
    cache->input = x_seq;
    cache->gate_i = Real3(bins, frames, hidden);
    cache->gate_f = Real3(bins, frames, hidden);
    cache->gate_g = Real3(bins, frames, hidden);
    cache->gate_o = Real3(bins, frames, hidden);
    cache->cell = Real3(bins, frames, hidden);
  }
  std::vector<int> bad(bins, 0);
  parallel_for(0, bins, [&](long fb) {
    const int f = static_cast<int>(fb);
    std::vector<double> c(hidden, 0.0), h(hidden, 0.0), pre(4 * hidden);
    for (int t = 0; t < frames; ++t) {
      const double* x = &x_seq.at(f, t, 0);
      for (int u = 0; u < 4 * hidden; ++u) {
        double acc = bias.v[u];
        const double* wi = &w_ih.v[static_cast<size_t>(u) * in_dim];
        for (int i = 0; i < in_dim; ++i) acc += wi[i] * x[i];
        const double* wh = &w_hh.v[static_cast<size_t>(u) * hidden];
        for (int i = 0; i < hidden; ++i) acc += wh[i] * h[i];
        pre[u] = acc;
      }
      for (int u = 0; u < hidden; ++u) {
        double gi = detail_igcrn::sigmoid(pre[u]);
        double gf = detail_igcrn::sigmoid(pre[hidden + u]);
        double gg = std::tanh(pre[2 * hidden + u]);
        double go = detail_igcrn::sigmoid(pre[3 * hidden + u]);
        c[u] = gf * c[u] + gi * gg;
        h[u] = go * std::tanh(c[u]);
        if (!std::isfinite(h[u])) bad[f] = 1;
        h_out.at(f, t, u) = h[u];
        if (cache) {
          cache->gate_i.at(f, t, u) = gi;
          cache->gate_f.at(f, t, u) = gf;
          cache->gate_g.at(f, t, u) = gg;
          cache->gate_o.at(f, t, u) = go;
          cache->cell.at(f, t, u) = c[u];
        }
      }
    }
  });
  for (int f = 0; f < bins; ++f)
    if (bad[f]) throw NumericError("LSTM divergence (non-finite activation)");
  if (cache) cache->hidden = h_out;
  return h_out;
}

// Full backbone forward. `features` is [2M x F x T] (re parts then im parts).
// Pass a cache to retain intermediates; `training` switches BN to batch
// statistics (and updates running stats when `update` is non-null).
inline NetworkOutputs igcrn_forward(const Real3& features, const ModelWeights& w,
                                    IgcrnCache* cache = nullptr, bool training = false,
                                    ModelWeights* update = nullptr, double bn_momentum = 0.9) {
  using namespace detail_igcrn;
  w.arch.validate();
  if (features.d0 != w.arch.in_channels())
    throw InputError("igcrn: expected " + std::to_string(w.arch.in_channels()) +
                     " feature channels, got " + std::to_string(features.d0));
  const int c = w.arch.conv_channels, bins = features.d1, frames = features.d2;
  const int n_layers = w.arch.num_conv_layers;

  if (cache) {
    cache->training = training;
    cache->features = features;
    cache->encoder.resize(n_layers);
    cache->lstm.resize(w.arch.num_lstm_layers);
  }

  // encoder
  std::vector<Real3> enc_out(n_layers);
  const Real3* cur = &features;
  for (int i = 1; i <= n_layers; ++i) {
    enc_out[i - 1] = conv_block(*cur, w, "enc" + std::to_string(i), training, bn_momentum,
                                update, cache ? &cache->encoder[i - 1] : nullptr);
    cur = &enc_out[i - 1];
  }

  // trunk: [C x F x T] -> per-bin sequences [F x T x C]
  Real3 seq(bins, frames, c);
  for (int ch = 0; ch < c; ++ch)
    for (int f = 0; f < bins; ++f)
      for (int t = 0; t < frames; ++t) seq.at(f, t, ch) = enc_out[n_layers - 1].at(ch, f, t);

  for (int l = 1; l <= w.arch.num_lstm_layers; ++l)
    seq = lstm_forward(seq, w, "lstm" + std::to_string(l),
                       cache ? &cache->lstm[l - 1] : nullptr);

  // channel-wise linear H -> C, back to [C x F x T]
  const auto& lw = w.get("trunk_linear.weight");
  const auto& lb = w.get("trunk_linear.bias");
  const int hidden = w.arch.lstm_hidden;
  Real3 trunk(c, bins, frames);
  for (int ch = 0; ch < c; ++ch) {
    const double* wrow = &lw.v[static_cast<size_t>(ch) * hidden];
    for (int f = 0; f < bins; ++f)
      for (int t = 0; t < frames; ++t) {
        double acc = lb.v[ch];
        const double* hvec = &seq.at(f, t, 0);
        for (int u = 0; u < hidden; ++u) acc += wrow[u] * hvec[u];
        trunk.at(ch, f, t) = acc;
      }
  }
  if (cache) cache->linear_out = trunk;

  // five skip-connected decoders
  NetworkOutputs out;
  for (const auto& head : decoder_names()) {
    std::vector<ConvBlockCache>* dcache = nullptr;
    if (cache) {
      cache->decoder[head].resize(n_layers);
      dcache = &cache->decoder[head];
    }
    Real3 z = trunk;
    for (int i = n_layers; i >= 2; --i) {
      Real3 in = concat_channels(z, enc_out[i - 1]);
      z = conv_block(in, w, "dec." + head + ".deconv" + std::to_string(i), training,
                     bn_momentum, update, dcache ? &(*dcache)[n_layers - i] : nullptr);
    }
    Real3 in = concat_channels(z, enc_out[0]);
    std::string p = "dec." + head + ".out";
    Real3 pre = conv_freq(in, w.get(p + ".weight"), w.get(p + ".bias"), p);
    if (dcache) {
      auto& fin = (*dcache)[n_layers - 1];
      fin.input = in;
      fin.conv_out = pre;
    }
    if (head == "mask") {
      out.mask = Real2(bins, frames);
      for (int f = 0; f < bins; ++f)
        for (int t = 0; t < frames; ++t) out.mask.at(f, t) = sigmoid(pre.at(0, f, t));
    } else {
      Real3& dst = out.head(head);
      dst = Real3(bins, frames, w.arch.head_dim);
      for (int dch = 0; dch < w.arch.head_dim; ++dch)
        for (int f = 0; f < bins; ++f)
          for (int t = 0; t < frames; ++t) dst.at(f, t, dch) = std::tanh(pre.at(dch, f, t));
    }
  }
  return out;
}

// ------------------------------------------------------------------
// accounting
// ------------------------------------------------------------------

struct MacCounts {
  long network = 0;
  long attention_scores = 0;  // q.k logits, both ISAMs
  long attention_apply = 0;   // covariance reconstruction, both targets
  long total() const { return network + attention_scores + attention_apply; }
};

// Multiply-accumulate convention: conv C_in*C_out*K per bin-frame;
// LSTM 4(I*H + H^2); linear I*O; attention F*T^2*D scores and F*T^2*M^2
// application. Biases, normalization and activations are not counted.
inline MacCounts mac_count(const ArchConfig& a, int bins, long frames) {
  a.validate();
  MacCounts mc;
  const long ft = static_cast<long>(bins) * frames;
  const long c = a.conv_channels, k = a.kernel_freq, h = a.lstm_hidden, d = a.head_dim;
  mc.network += static_cast<long>(a.in_channels()) * c * k * ft;  // enc1
  mc.network += (a.num_conv_layers - 1) * c * c * k * ft;         // enc2..N
  for (int l = 1; l <= a.num_lstm_layers; ++l) {
    long in = l == 1 ? c : h;
    mc.network += 4 * (in * h + h * h) * ft;
  }
  mc.network += h * c * ft;  // trunk linear
  const long dec_hidden = (a.num_conv_layers - 1) * (2 * c) * c * k * ft;
  mc.network += 5 * dec_hidden;
  mc.network += (2 * c) * 1 * k * ft;      // mask head
  mc.network += 4 * (2 * c) * d * k * ft;  // attention heads
  const long m2 = static_cast<long>(a.num_mics) * a.num_mics;
  mc.attention_scores = 2 * static_cast<long>(bins) * frames * frames * d;
  mc.attention_apply = 2 * static_cast<long>(bins) * frames * frames * m2;
  return mc;
}

}  // namespace abic
