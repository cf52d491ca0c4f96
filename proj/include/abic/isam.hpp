// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "abic/common.hpp"
#include "abic/parallel.hpp"
#include "abic/tensor.hpp"

namespace abic {

// Per-frequency temporal attention weights, [bins x frames x frames].
// Row at(f, t, .) is the weighting over key frames for query frame t; rows
// are stochastic, and in causal mode entries at j > i are exact zeros.
struct AttentionTensor {
  int bins = 0, frames = 0;
  bool causal = false;
  std::vector<double> w;

  AttentionTensor() = default;
  AttentionTensor(int f, int t, bool c)
      : bins(f), frames(t), causal(c),
        w(static_cast<size_t>(f) * t * t, 0.0) {}

  double& at(int f, int i, int j) {
    return w[(static_cast<size_t>(f) * frames + i) * frames + j];
  }
  const double& at(int f, int i, int j) const {
    return w[(static_cast<size_t>(f) * frames + i) * frames + j];
  }
};

// Scaled dot-product attention per frequency bin: softmax over key frames of
// q.k / sqrt(D). Causal mode excludes future frames from the softmax sum
// entirely, giving exact zero mass there; max-subtraction keeps large logits
// finite. query/key are [F x T x D].
inline AttentionTensor attention_weights(const Real3& query, const Real3& key, bool causal,
                                         int frame_cap = 3000) {
  if (query.d0 != key.d0 || query.d1 != key.d1 || query.d2 != key.d2)
    throw InputError("attention: query/key shape mismatch");
  const int bins = query.d0, frames = query.d1, dim = query.d2;
  if (frames <= 0) throw InputError("attention: empty time axis");
  if (dim < 1) throw InputError("attention: feature dim must be >= 1");
  if (frames > frame_cap)
    throw InputError("attention: " + std::to_string(frames) + " frames exceeds cap " +
                     std::to_string(frame_cap) + "; raise the cap or process blockwise");

  AttentionTensor att(bins, frames, causal);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));
  parallel_for(0, bins, [&](long fb) {
    const int f = static_cast<int>(fb);
    std::vector<double> logits(frames);
    for (int i = 0; i < frames; ++i) {
      const int last = causal ? i : frames - 1;
      double max_logit = -HUGE_VAL;
      for (int j = 0; j <= last; ++j) {
        double dot = 0.0;
        for (int d = 0; d < dim; ++d) dot += query.at(f, i, d) * key.at(f, j, d);
        logits[j] = dot * inv_sqrt_d;
        if (logits[j] > max_logit) max_logit = logits[j];
      }
      double denom = 0.0;
      for (int j = 0; j <= last; ++j) {
        logits[j] = std::exp(logits[j] - max_logit);
        denom += logits[j];
      }
      for (int j = 0; j <= last; ++j) att.at(f, i, j) = logits[j] / denom;
    }
  });
  return att;
}

// Rows of a uniform average: 1/T everywhere, or 1/(t+1) over the causal past.
inline AttentionTensor uniform_attention(int bins, int frames, bool causal) {
  AttentionTensor att(bins, frames, causal);
  for (int f = 0; f < bins; ++f)
    for (int i = 0; i < frames; ++i) {
      int last = causal ? i : frames - 1;
      double v = 1.0 / (last + 1);
      for (int j = 0; j <= last; ++j) att.at(f, i, j) = v;
    }
  return att;
}

inline AttentionTensor onehot_attention(int bins, int frames) {
  AttentionTensor att(bins, frames, true);
  for (int f = 0; f < bins; ++f)
    for (int i = 0; i < frames; ++i) att.at(f, i, i) = 1.0;
  return att;
}

// Rows matching the exponential forgetting recursion: weight lambda^t on the
// first frame and (1-lambda)*lambda^(t-j) on frames 1..t.
inline AttentionTensor exponential_attention(int bins, int frames, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw InputError("attention: forgetting factor must lie in (0,1)");
  AttentionTensor att(bins, frames, true);
  for (int f = 0; f < bins; ++f)
    for (int i = 0; i < frames; ++i) {
      att.at(f, i, 0) = std::pow(lambda, i);
      for (int j = 1; j <= i; ++j)
        att.at(f, i, j) = (1.0 - lambda) * std::pow(lambda, i - j);
    }
  return att;
}

}  // namespace abic
