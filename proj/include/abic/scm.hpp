// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <vector>

#include "abic/common.hpp"
#include "abic/isam.hpp"
#include "abic/parallel.hpp"
#include "abic/spectral.hpp"
#include "abic/tensor.hpp"

namespace abic {

// Per time-frequency bin an M x M Hermitian matrix, [F x T x M x M].
struct IscmSequence {
  int bins = 0, frames = 0, mics = 0;
  std::vector<cplx> m;

  IscmSequence() = default;
  IscmSequence(int f, int t, int ch)
      : bins(f), frames(t), mics(ch),
        m(static_cast<size_t>(f) * t * ch * ch, cplx(0.0, 0.0)) {}

  cplx& at(int f, int t, int i, int j) {
    return m[((static_cast<size_t>(f) * frames + t) * mics + i) * mics + j];
  }
  const cplx& at(int f, int t, int i, int j) const {
    return m[((static_cast<size_t>(f) * frames + t) * mics + i) * mics + j];
  }
  const cplx* matrix(int f, int t) const {
    return m.data() + (static_cast<size_t>(f) * frames + t) * mics * mics;
  }
  cplx* matrix(int f, int t) {
    return m.data() + (static_cast<size_t>(f) * frames + t) * mics * mics;
  }
};

// Reconstructed (temporally smoothed) covariance sequence; same layout.
struct ScmSequence : IscmSequence {
  using IscmSequence::IscmSequence;
};

enum class MaskTarget { speech, noise };

struct EstimatorConfig {
  enum class Kind { attention, online, blockwise } kind = Kind::attention;
  double forgetting_factor = 0.995;
  int block_size = 30;

  void validate() const {
    if (kind == Kind::online && !(forgetting_factor > 0.0 && forgetting_factor < 1.0))
      throw InputError("estimator: forgetting factor must lie in (0,1)");
    if (kind == Kind::blockwise && block_size < 1)
      throw InputError("estimator: block size must be >= 1");
  }
};

namespace detail_scm {

// Splits x into s ~ w*x and n ~ (1-w)*x such that s + n == x holds bitwise.
// When |s| >= |x|/2 the subtraction x - s is exact by the Sterbenz lemma; in
// the opposite case the complement n is in [x/2, x] and s is re-derived from
// it, again exactly. Either way the rounded sum lands back on x.
inline void complement_split(double x, double w, double& s, double& n) {
  s = w * x;
  n = x - s;
  if (std::abs(s) < 0.5 * std::abs(x)) s = x - n;
}

}  // namespace detail_scm

// Mask-weighted instantaneous covariance: speech gets m * Y Y^H and noise the
// exact complement, so the two targets always sum to the unmasked outer
// product. The outer product is formed once and scaled per component; scaling
// before the product would leak rounding error into the Hermitian structure.
inline IscmSequence instantaneous_scm(const ComplexSpectrogram& spec, const Real2& mask,
                                      MaskTarget target) {
  if (mask.d0 != spec.bins || mask.d1 != spec.frames)
    throw InputError("iscm: mask shape mismatch");
  for (double v : mask.v)
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("iscm: mask value outside [0,1]");

  const int mics = spec.channels;
  IscmSequence out(spec.bins, spec.frames, mics);
  parallel_for(0, spec.bins, [&](long fb) {
    const int f = static_cast<int>(fb);
    std::vector<cplx> y(mics);
    for (int t = 0; t < spec.frames; ++t) {
      for (int i = 0; i < mics; ++i) y[i] = spec.at(i, f, t);
      const double w = mask.at(f, t);
      cplx* dst = out.matrix(f, t);
      for (int i = 0; i < mics; ++i)
        for (int j = 0; j < mics; ++j) {
          const cplx outer = y[i] * std::conj(y[j]);
          double s_re, n_re, s_im, n_im;
          detail_scm::complement_split(outer.real(), w, s_re, n_re);
          detail_scm::complement_split(outer.imag(), w, s_im, n_im);
          dst[i * mics + j] =
              target == MaskTarget::speech ? cplx(s_re, s_im) : cplx(n_re, n_im);
        }
    }
  });
  return out;
}

// Temporal contraction of attention rows with the ISCM stream:
// Phi_{t,f} = sum_tau A[f,t,tau] Psi_{tau,f}.
inline ScmSequence attention_scm(const AttentionTensor& att, const IscmSequence& iscm) {
  if (att.bins != iscm.bins || att.frames != iscm.frames)
    throw InputError("attention_scm: shape mismatch");
  const int mm = iscm.mics * iscm.mics;
  ScmSequence out(iscm.bins, iscm.frames, iscm.mics);
  parallel_for(0, iscm.bins, [&](long fb) {
    const int f = static_cast<int>(fb);
    for (int t = 0; t < iscm.frames; ++t) {
      cplx* dst = out.matrix(f, t);
      const int last = att.causal ? t : iscm.frames - 1;
      for (int tau = 0; tau <= last; ++tau) {
        double a = att.at(f, t, tau);
        if (a == 0.0) continue;
        const cplx* src = iscm.matrix(f, tau);
        for (int e = 0; e < mm; ++e) dst[e] += a * src[e];
      }
    }
  });
  return out;
}

// Exponential forgetting recursion, initialized at the first frame to avoid a
// startup bias toward zero.
inline ScmSequence online_scm(const IscmSequence& iscm, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw InputError("online_scm: forgetting factor must lie in (0,1)");
  const int mm = iscm.mics * iscm.mics;
  ScmSequence out(iscm.bins, iscm.frames, iscm.mics);
  parallel_for(0, iscm.bins, [&](long fb) {
    const int f = static_cast<int>(fb);
    for (int e = 0; e < mm; ++e) out.matrix(f, 0)[e] = iscm.matrix(f, 0)[e];
    for (int t = 1; t < iscm.frames; ++t) {
      const cplx* prev = out.matrix(f, t - 1);
      const cplx* cur = iscm.matrix(f, t);
      cplx* dst = out.matrix(f, t);
      for (int e = 0; e < mm; ++e) dst[e] = lambda * prev[e] + (1.0 - lambda) * cur[e];
    }
  });
  return out;
}

// Consecutive blocks of block_size frames (last may be short). Non-causal:
// every frame gets its block's mean. Causal: running mean from block start.
inline ScmSequence blockwise_scm(const IscmSequence& iscm, int block_size, bool causal) {
  if (block_size < 1) throw InputError("blockwise_scm: block size must be >= 1");
  const int mm = iscm.mics * iscm.mics;
  ScmSequence out(iscm.bins, iscm.frames, iscm.mics);
  parallel_for(0, iscm.bins, [&](long fb) {
    const int f = static_cast<int>(fb);
    std::vector<cplx> acc(mm);
    for (int start = 0; start < iscm.frames; start += block_size) {
      const int end = std::min(start + block_size, iscm.frames);
      std::fill(acc.begin(), acc.end(), cplx(0.0, 0.0));
      if (causal) {
        for (int t = start; t < end; ++t) {
          const cplx* src = iscm.matrix(f, t);
          for (int e = 0; e < mm; ++e) acc[e] += src[e];
          cplx* dst = out.matrix(f, t);
          double inv = 1.0 / (t - start + 1);
          for (int e = 0; e < mm; ++e) dst[e] = acc[e] * inv;
        }
      } else {
        for (int t = start; t < end; ++t) {
          const cplx* src = iscm.matrix(f, t);
          for (int e = 0; e < mm; ++e) acc[e] += src[e];
        }
        double inv = 1.0 / (end - start);
        for (int t = start; t < end; ++t) {
          cplx* dst = out.matrix(f, t);
          for (int e = 0; e < mm; ++e) dst[e] = acc[e] * inv;
        }
      }
    }
  });
  return out;
}

}  // namespace abic
