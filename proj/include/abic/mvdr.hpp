// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "abic/common.hpp"
#include "abic/parallel.hpp"
#include "abic/scm.hpp"
#include "abic/spectral.hpp"

namespace abic {

// Covariance-form beamformer coefficients, [F x T x M] plus per-bin fallback
// flags. Fallback bins carry the one-hot reference selector.
struct BeamformerWeights {
  int bins = 0, frames = 0, mics = 0;
  int ref_channel = 0;
  std::vector<cplx> w;
  std::vector<std::uint8_t> fallback;

  BeamformerWeights() = default;
  BeamformerWeights(int f, int t, int m, int ref)
      : bins(f), frames(t), mics(m), ref_channel(ref),
        w(static_cast<size_t>(f) * t * m, cplx(0.0, 0.0)),
        fallback(static_cast<size_t>(f) * t, 0) {}

  cplx& at(int f, int t, int m) {
    return w[(static_cast<size_t>(f) * frames + t) * mics + m];
  }
  const cplx& at(int f, int t, int m) const {
    return w[(static_cast<size_t>(f) * frames + t) * mics + m];
  }
  std::uint8_t& flag(int f, int t) { return fallback[static_cast<size_t>(f) * frames + t]; }
  std::uint8_t flag(int f, int t) const { return fallback[static_cast<size_t>(f) * frames + t]; }

  long fallback_count() const {
    long c = 0;
    for (auto v : fallback) c += v;
    return c;
  }
};

namespace linalg {

// In-place lower Cholesky A = L L^H for a Hermitian matrix given in full
// storage. Returns false on a non-positive pivot.
inline bool cholesky(cplx* a, int n) {
  for (int j = 0; j < n; ++j) {
    double d = a[j * n + j].real();
    for (int k = 0; k < j; ++k) d -= std::norm(a[j * n + k]);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    double lj = std::sqrt(d);
    a[j * n + j] = cplx(lj, 0.0);
    for (int i = j + 1; i < n; ++i) {
      cplx s = a[i * n + j];
      for (int k = 0; k < j; ++k) s -= a[i * n + k] * std::conj(a[j * n + k]);
      a[i * n + j] = s / lj;
    }
  }
  return true;
}

// Solves L L^H x = b in place using the factor from cholesky().
inline void cholesky_solve(const cplx* l, int n, cplx* b) {
  for (int i = 0; i < n; ++i) {
    cplx s = b[i];
    for (int k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
    b[i] = s / l[i * n + i].real();
  }
  for (int i = n - 1; i >= 0; --i) {
    cplx s = b[i];
    for (int k = i + 1; k < n; ++k) s -= std::conj(l[k * n + i]) * b[k];
    b[i] = s / l[i * n + i].real();
  }
}

inline double max_abs(const cplx* a, int nn) {
  double m = 0.0;
  for (int e = 0; e < nn; ++e) m = std::max(m, std::abs(a[e]));
  return m;
}

inline double hermitian_asymmetry(const cplx* a, int n) {
  double asym = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      asym = std::max(asym, std::abs(a[i * n + j] - std::conj(a[j * n + i])));
  return asym;
}

inline void hermitian_project(const cplx* a, int n, cplx* out) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out[i * n + j] = 0.5 * (a[i * n + j] + std::conj(a[j * n + i]));
}

}  // namespace linalg

// Per-bin solve intermediates kept for the training chain.
struct MvdrCache {
  int bins = 0, frames = 0, mics = 0;
  std::vector<cplx> loaded_noise;  // A = herm(Phi_n) + loading, per bin
  std::vector<cplx> ratio;         // C = A^{-1} herm(Phi_s), per bin
  std::vector<cplx> trace;         // tr(C)

  void resize(int f, int t, int m) {
    bins = f;
    frames = t;
    mics = m;
    loaded_noise.assign(static_cast<size_t>(f) * t * m * m, cplx(0.0, 0.0));
    ratio.assign(static_cast<size_t>(f) * t * m * m, cplx(0.0, 0.0));
    trace.assign(static_cast<size_t>(f) * t, cplx(0.0, 0.0));
  }
  cplx* loaded(int f, int t) {
    return loaded_noise.data() + (static_cast<size_t>(f) * frames + t) * mics * mics;
  }
  cplx* c(int f, int t) {
    return ratio.data() + (static_cast<size_t>(f) * frames + t) * mics * mics;
  }
};

// Souden-form solve per (f, t): w = (Phi_n^{-1} Phi_s u) / tr(Phi_n^{-1} Phi_s)
// with relative diagonal loading on Phi_n. A bin falls back to the reference
// selector when its noise statistics are absent (zero trace), the factorization
// fails, or the trace normalizer is negligible against |C|_F.
inline BeamformerWeights mvdr_weights(const ScmSequence& phi_s, const ScmSequence& phi_n,
                                      int ref_channel, double loading = 1e-6,
                                      MvdrCache* cache = nullptr) {
  if (phi_s.bins != phi_n.bins || phi_s.frames != phi_n.frames || phi_s.mics != phi_n.mics)
    throw InputError("mvdr: covariance shapes differ");
  const int mics = phi_s.mics;
  if (ref_channel < 0 || ref_channel >= mics) throw InputError("mvdr: bad reference channel");
  if (loading < 0.0) throw InputError("mvdr: loading must be >= 0");

  // non-Hermitian input beyond tolerance is an upstream bug, not a bin fallback
  const double herm_tol_s = 1e-8 * std::max(1.0, linalg::max_abs(phi_s.m.data(), static_cast<int>(phi_s.m.size())));
  const double herm_tol_n = 1e-8 * std::max(1.0, linalg::max_abs(phi_n.m.data(), static_cast<int>(phi_n.m.size())));

  BeamformerWeights bw(phi_s.bins, phi_s.frames, mics, ref_channel);
  if (cache) cache->resize(phi_s.bins, phi_s.frames, mics);

  std::vector<int> herm_bad(phi_s.bins, 0);
  parallel_for(0, phi_s.bins, [&](long fb) {
    const int f = static_cast<int>(fb);
    const int nn = mics * mics;
    std::vector<cplx> hs(nn), hn(nn), a(nn), c(nn);
    for (int t = 0; t < phi_s.frames; ++t) {
      const cplx* ps = phi_s.matrix(f, t);
      const cplx* pn = phi_n.matrix(f, t);
      if (linalg::hermitian_asymmetry(ps, mics) > herm_tol_s ||
          linalg::hermitian_asymmetry(pn, mics) > herm_tol_n) {
        herm_bad[f] = 1;
        return;
      }
      linalg::hermitian_project(ps, mics, hs.data());
      linalg::hermitian_project(pn, mics, hn.data());

      auto fall_back = [&] {
        bw.flag(f, t) = 1;
        for (int i = 0; i < mics; ++i) bw.at(f, t, i) = cplx(i == ref_channel ? 1.0 : 0.0, 0.0);
      };

      double tr_n = 0.0;
      for (int i = 0; i < mics; ++i) tr_n += hn[i * mics + i].real();
      if (!(tr_n > 0.0)) {
        fall_back();
        continue;
      }
      double load = loading * tr_n / mics;
      if (tr_n / mics < 1e-10) load += 1e-10;  // absolute floor for near-zero traces
      for (int e = 0; e < nn; ++e) a[e] = hn[e];
      for (int i = 0; i < mics; ++i) a[i * mics + i] += load;
      if (cache) std::copy(a.begin(), a.end(), cache->loaded(f, t));

      std::vector<cplx> chol(a);
      if (!linalg::cholesky(chol.data(), mics)) {
        fall_back();
        continue;
      }
      // C = A^{-1} Phi_s, column by column
      std::vector<cplx> col(mics);
      for (int j = 0; j < mics; ++j) {
        for (int i = 0; i < mics; ++i) col[i] = hs[i * mics + j];
        linalg::cholesky_solve(chol.data(), mics, col.data());
        for (int i = 0; i < mics; ++i) c[i * mics + j] = col[i];
      }
      cplx tr_c(0.0, 0.0);
      double frob = 0.0;
      for (int i = 0; i < mics; ++i) tr_c += c[i * mics + i];
      for (int e = 0; e < nn; ++e) frob += std::norm(c[e]);
      frob = std::sqrt(frob);
      if (cache) {
        std::copy(c.begin(), c.end(), cache->c(f, t));
        cache->trace[static_cast<size_t>(f) * phi_s.frames + t] = tr_c;
      }
      if (frob == 0.0 || std::abs(tr_c) < 1e-8 * frob) {
        fall_back();
        continue;
      }
      for (int i = 0; i < mics; ++i) bw.at(f, t, i) = c[i * mics + ref_channel] / tr_c;
    }
  });
  for (int f = 0; f < phi_s.bins; ++f)
    if (herm_bad[f])
      throw NumericError("mvdr: covariance input is not Hermitian within tolerance");
  return bw;
}

// Eq-style application: S_hat = w^H Y per bin. Output is single-channel.
inline ComplexSpectrogram apply_beamformer(const BeamformerWeights& bw,
                                           const ComplexSpectrogram& spec) {
  if (bw.bins != spec.bins || bw.frames != spec.frames || bw.mics != spec.channels)
    throw InputError("apply_beamformer: shape mismatch");
  ComplexSpectrogram out(spec.config, 1, spec.frames);
  for (int f = 0; f < spec.bins; ++f)
    for (int t = 0; t < spec.frames; ++t) {
      cplx acc(0.0, 0.0);
      for (int m = 0; m < spec.channels; ++m)
        acc += std::conj(bw.at(f, t, m)) * spec.at(m, f, t);
      out.at(0, f, t) = acc;
    }
  return out;
}

}  // namespace abic
