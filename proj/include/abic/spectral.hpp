// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "abic/common.hpp"
#include "abic/fft.hpp"
#include "abic/parallel.hpp"
#include "abic/tensor.hpp"

namespace abic {

// Multichannel sample block, [channels x length] row-major.
struct Waveform {
  int channels = 0;
  long length = 0;
  std::vector<double> data;

  Waveform() = default;
  Waveform(int ch, long len)
      : channels(ch), length(len), data(static_cast<size_t>(ch) * len, 0.0) {}

  double& at(int ch, long n) { return data[static_cast<size_t>(ch) * length + n]; }
  const double& at(int ch, long n) const {
    return data[static_cast<size_t>(ch) * length + n];
  }
  const double* channel(int ch) const {
    return data.data() + static_cast<size_t>(ch) * length;
  }
  double* channel(int ch) { return data.data() + static_cast<size_t>(ch) * length; }
};

struct StftConfig {
  int frame_length = 320;
  int hop = 160;
  double sample_rate = 16000.0;
  enum class Window { sqrt_hann } window = Window::sqrt_hann;

  int bins() const { return frame_length / 2 + 1; }
  double frames_per_second() const { return sample_rate / hop; }

  void validate() const {
    if (frame_length <= 0 || hop <= 0) throw InputError("stft: frame and hop must be positive");
    if (frame_length % 2 != 0) throw InputError("stft: frame_length must be even");
    if (frame_length % hop != 0) throw InputError("stft: hop must divide frame_length");
    if (hop >= frame_length)
      throw InputError("stft: window is not overlap-add consistent without overlap");
  }

  bool operator==(const StftConfig& o) const {
    return frame_length == o.frame_length && hop == o.hop &&
           sample_rate == o.sample_rate && window == o.window;
  }
};

// Periodic sqrt-Hann: w[n] = sin(pi*n/N). Squared windows overlap-add to
// exactly 1 at 50% (or denser) overlap, which is what makes analysis +
// synthesis windowing perfectly reconstructing on interior samples.
inline std::vector<double> stft_window(const StftConfig& cfg) {
  std::vector<double> w(cfg.frame_length);
  for (int n = 0; n < cfg.frame_length; ++n)
    w[n] = std::sin(M_PI * n / cfg.frame_length);
  return w;
}

// One-sided complex spectrogram, [channels x bins x frames].
struct ComplexSpectrogram {
  StftConfig config;
  int channels = 0, bins = 0, frames = 0;
  std::vector<cplx> data;

  ComplexSpectrogram() = default;
  ComplexSpectrogram(const StftConfig& cfg, int ch, int t)
      : config(cfg),
        channels(ch),
        bins(cfg.bins()),
        frames(t),
        data(static_cast<size_t>(ch) * cfg.bins() * t) {}

  cplx& at(int ch, int f, int t) {
    return data[(static_cast<size_t>(ch) * bins + f) * frames + t];
  }
  const cplx& at(int ch, int f, int t) const {
    return data[(static_cast<size_t>(ch) * bins + f) * frames + t];
  }
};

inline int stft_num_frames(long length, const StftConfig& cfg) {
  if (length < cfg.frame_length) return 0;
  return static_cast<int>((length - cfg.frame_length) / cfg.hop) + 1;
}

// Frame t covers samples [t*hop, t*hop + frame_length). No padding: partial
// tail samples beyond the last full frame are dropped.
inline ComplexSpectrogram stft(const Waveform& x, const StftConfig& cfg) {
  cfg.validate();
  if (x.channels < 1) throw InputError("stft: no channels");
  if (x.length < cfg.frame_length) throw InputError("stft: input too short");
  for (double s : x.data)
    if (!std::isfinite(s)) throw InputError("stft: non-finite sample");

  const int num_frames = stft_num_frames(x.length, cfg);
  const int n = cfg.frame_length;
  const int nbins = cfg.bins();
  const auto win = stft_window(cfg);
  const Fft fft(n);

  ComplexSpectrogram out(cfg, x.channels, num_frames);
  parallel_for(0, static_cast<long>(x.channels) * num_frames, [&](long job) {
    int ch = static_cast<int>(job / num_frames);
    int t = static_cast<int>(job % num_frames);
    std::vector<cplx> buf(n), spec(n);
    const double* sig = x.channel(ch);
    long off = static_cast<long>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) buf[i] = cplx(sig[off + i] * win[i], 0.0);
    fft.forward(buf.data(), spec.data());
    for (int f = 0; f < nbins; ++f) out.at(ch, f, t) = spec[f];
  });
  return out;
}

// Overlap-add synthesis with the same sqrt-Hann window, scaled by the exact
// interior window-square sum 2*hop/N (the squared periodic Hann sums to
// N/(2*hop) at any hop that divides N). Output length (T-1)*hop +
// frame_length; the first and last frame_length-hop samples see a partial
// window sum and are not perfectly reconstructed.
inline Waveform istft(const ComplexSpectrogram& spec) {
  spec.config.validate();
  const int n = spec.config.frame_length;
  const int nbins = spec.config.bins();
  if (spec.bins != nbins) throw InputError("istft: bin count inconsistent with config");
  if (spec.frames < 1) throw InputError("istft: empty spectrogram");

  const auto win = stft_window(spec.config);
  const Fft fft(n);
  const long out_len = static_cast<long>(spec.frames - 1) * spec.config.hop + n;
  const double cola_scale = 2.0 * spec.config.hop / n;

  Waveform out(spec.channels, out_len);
  for (int ch = 0; ch < spec.channels; ++ch) {
    std::vector<cplx> full(n);
    for (int t = 0; t < spec.frames; ++t) {
      full[0] = spec.at(ch, 0, t);
      full[n / 2] = spec.at(ch, n / 2, t);
      for (int f = 1; f < n / 2; ++f) {
        full[f] = spec.at(ch, f, t);
        full[n - f] = std::conj(spec.at(ch, f, t));
      }
      auto frame = fft.inverse(full);
      double* sig = out.channel(ch);
      long off = static_cast<long>(t) * spec.config.hop;
      for (int i = 0; i < n; ++i) sig[off + i] += cola_scale * win[i] * frame[i].real();
    }
  }
  return out;
}

// Adjoint of istft as a linear map from one-sided spectra (treated as
// independent re/im parts) to time samples. Used by the training chain; the
// dot-product identity against istft is what the tests pin down.
inline void istft_adjoint(const Waveform& grad_out, const StftConfig& cfg, int frames,
                          Cplx2* grad_spec /* [bins x frames], single channel */) {
  cfg.validate();
  const int n = cfg.frame_length;
  const int nbins = cfg.bins();
  const auto win = stft_window(cfg);
  const Fft fft(n);
  const double cola_scale = 2.0 * cfg.hop / n;
  *grad_spec = Cplx2(nbins, frames);
  std::vector<cplx> buf(n), spec(n);
  for (int t = 0; t < frames; ++t) {
    long off = static_cast<long>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) {
      double g = (off + i < grad_out.length) ? grad_out.at(0, off + i) : 0.0;
      buf[i] = cplx(cola_scale * win[i] * g / n, 0.0);
    }
    fft.forward(buf.data(), spec.data());
    grad_spec->at(0, t) = spec[0];
    grad_spec->at(n / 2, t) = spec[n / 2];
    for (int f = 1; f < n / 2; ++f) grad_spec->at(f, t) = 2.0 * spec[f];
  }
}

}  // namespace abic
