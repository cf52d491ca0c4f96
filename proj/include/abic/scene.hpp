// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "abic/common.hpp"
#include "abic/rng.hpp"
#include "abic/spectral.hpp"

namespace abic {

using Vec3 = std::array<double, 3>;

inline double distance(const Vec3& a, const Vec3& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct ArrayGeometry {
  std::vector<Vec3> mic_positions;

  int num_mics() const { return static_cast<int>(mic_positions.size()); }

  void validate() const {
    if (num_mics() < 2) throw InputError("geometry: need at least 2 microphones");
    for (size_t i = 0; i < mic_positions.size(); ++i)
      for (size_t j = i + 1; j < mic_positions.size(); ++j)
        if (distance(mic_positions[i], mic_positions[j]) == 0.0)
          throw InputError("geometry: coincident microphones");
  }
};

inline ArrayGeometry circular_array(int mics = 5, double radius = 0.10) {
  ArrayGeometry g;
  for (int m = 0; m < mics; ++m) {
    double a = 2.0 * M_PI * m / mics;
    g.mic_positions.push_back({radius * std::cos(a), radius * std::sin(a), 0.0});
  }
  return g;
}

struct Trajectory {
  struct Waypoint {
    double time = 0.0;
    Vec3 position{0.0, 0.0, 0.0};
  };
  std::vector<Waypoint> waypoints;

  void validate() const {
    if (waypoints.empty()) throw InputError("trajectory: no waypoints");
    for (size_t i = 1; i < waypoints.size(); ++i)
      if (!(waypoints[i].time > waypoints[i - 1].time))
        throw InputError("trajectory: waypoint times must be strictly increasing");
    for (const auto& w : waypoints)
      for (double c : w.position)
        if (!std::isfinite(c)) throw InputError("trajectory: non-finite position");
  }

  // piecewise linear, clamped at the ends
  Vec3 position(double t) const {
    if (waypoints.size() == 1 || t <= waypoints.front().time)
      return waypoints.front().position;
    if (t >= waypoints.back().time) return waypoints.back().position;
    size_t i = 1;
    while (waypoints[i].time < t) ++i;
    const auto& a = waypoints[i - 1];
    const auto& b = waypoints[i];
    double u = (t - a.time) / (b.time - a.time);
    return {a.position[0] + u * (b.position[0] - a.position[0]),
            a.position[1] + u * (b.position[1] - a.position[1]),
            a.position[2] + u * (b.position[2] - a.position[2])};
  }

  double path_length() const {
    double len = 0.0;
    for (size_t i = 1; i < waypoints.size(); ++i)
      len += distance(waypoints[i].position, waypoints[i - 1].position);
    return len;
  }
};

struct SceneConfig {
  ArrayGeometry geometry = circular_array();
  std::optional<double> snr_db;               // fixed SNR when set
  std::array<double, 2> snr_range{-10.0, 10.0};
  double sound_speed = 343.0;
  std::uint64_t seed = 0;
  bool source_moving = true;
  std::array<double, 2> speed_range{0.012, 2.404};  // observed source velocity extremes
  std::array<double, 2> annulus{1.0, 2.5};          // source start radius bounds [m]
  int ref_channel = 0;

  void validate() const {
    geometry.validate();
    if (snr_db && !std::isfinite(*snr_db)) throw InputError("scene: snr_db must be finite");
    if (!(annulus[0] > 0.0 && annulus[1] >= annulus[0]))
      throw InputError("scene: bad annulus radii");
    if (!(speed_range[0] >= 0.0 && speed_range[1] >= speed_range[0]))
      throw InputError("scene: bad speed range");
  }
};

struct Scene {
  Waveform mixture, speech_image, noise_image;
  SceneConfig config;
  Trajectory speech_trajectory;
  Trajectory noise_trajectory;  // single waypoint when noise came in pre-rendered
  double snr_db = 0.0;
  double sample_rate = 16000.0;
};

inline constexpr double kMinSourceDistance = 0.05;  // meters
inline constexpr int kSincHalfTaps = 16;            // 32-tap interpolator

// Band-limited fractional read: Hann-windowed sinc over 32 neighbours,
// exact passthrough at integer positions, zero outside the signal.
inline double sinc_interp(const double* x, long len, double pos) {
  long i0 = static_cast<long>(std::floor(pos));
  double acc = 0.0;
  for (long k = i0 - kSincHalfTaps + 1; k <= i0 + kSincHalfTaps; ++k) {
    if (k < 0 || k >= len) continue;
    double u = pos - k;
    double au = std::abs(u);
    if (au >= kSincHalfTaps) continue;
    double sinc = (u == 0.0) ? 1.0 : std::sin(M_PI * u) / (M_PI * u);
    double win = 0.5 + 0.5 * std::cos(M_PI * u / kSincHalfTaps);
    acc += x[k] * sinc * win;
  }
  return acc;
}

// Free-field propagation: per-sample time-varying delay d(t)/c plus 1/r gain.
inline Waveform render_moving_source(const std::vector<double>& dry, const Trajectory& traj,
                                     const ArrayGeometry& geom, const SceneConfig& cfg,
                                     double sample_rate) {
  geom.validate();
  traj.validate();
  const long len = static_cast<long>(dry.size());
  const int mics = geom.num_mics();
  Waveform out(mics, len);
  for (int m = 0; m < mics; ++m) {
    const Vec3& mic = geom.mic_positions[m];
    double* dst = out.channel(m);
    for (long n = 0; n < len; ++n) {
      double t = n / sample_rate;
      Vec3 p = traj.position(t);
      double d = distance(p, mic);
      if (d < kMinSourceDistance) throw InputError("render: source too close to microphone");
      double read_pos = n - sample_rate * d / cfg.sound_speed;
      dst[n] = sinc_interp(dry.data(), len, read_pos) / d;
    }
  }
  return out;
}

inline double channel_power(const Waveform& x, int ch) {
  double p = 0.0;
  const double* s = x.channel(ch);
  for (long n = 0; n < x.length; ++n) p += s[n] * s[n];
  return p;
}

// Scales the noise image so the reference-channel SNR hits snr_db exactly,
// then sums. mixture == speech_image + noise_image holds by construction.
inline Scene mix_at_snr(const Waveform& speech_image, const Waveform& noise_image,
                        double snr_db, int ref_channel) {
  if (speech_image.channels != noise_image.channels ||
      speech_image.length != noise_image.length)
    throw InputError("mix: image shapes differ");
  if (ref_channel < 0 || ref_channel >= speech_image.channels)
    throw InputError("mix: bad reference channel");
  double ps = channel_power(speech_image, ref_channel);
  double pn = channel_power(noise_image, ref_channel);
  if (ps <= 0.0 || pn <= 0.0) throw InputError("mix: degenerate SNR (silent image)");

  double scale = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  Scene scene;
  scene.speech_image = speech_image;
  scene.noise_image = noise_image;
  for (auto& v : scene.noise_image.data) v *= scale;
  scene.mixture = scene.speech_image;
  for (size_t i = 0; i < scene.mixture.data.size(); ++i)
    scene.mixture.data[i] += scene.noise_image.data[i];
  scene.snr_db = snr_db;
  return scene;
}

namespace detail {

inline Vec3 sample_annulus_point(Rng& rng, const std::array<double, 2>& annulus) {
  double r = rng.uniform(annulus[0], annulus[1]);
  double a = rng.uniform(0.0, 2.0 * M_PI);
  return {r * std::cos(a), r * std::sin(a), 0.0};
}

inline double min_distance_to_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  Vec3 ap{p[0] - a[0], p[1] - a[1], p[2] - a[2]};
  double denom = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double u = denom > 0.0 ? (ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / denom : 0.0;
  u = u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
  Vec3 q{a[0] + u * ab[0], a[1] + u * ab[1], a[2] + u * ab[2]};
  return distance(p, q);
}

inline bool trajectory_clear_of_mics(const Trajectory& traj, const ArrayGeometry& geom) {
  const auto& wp = traj.waypoints;
  const size_t segments = wp.size() > 1 ? wp.size() - 1 : 1;
  for (size_t i = 0; i < segments; ++i) {
    const Vec3& a = wp[i].position;
    const Vec3& b = wp[std::min(i + 1, wp.size() - 1)].position;
    for (const auto& mic : geom.mic_positions)
      if (min_distance_to_segment(mic, a, b) < 2.0 * kMinSourceDistance) return false;
  }
  return true;
}

inline Trajectory sample_trajectory(Rng& rng, const SceneConfig& cfg, double duration) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Vec3 start = sample_annulus_point(rng, cfg.annulus);
    Trajectory traj;
    if (!cfg.source_moving) {
      traj.waypoints.push_back({0.0, start});
    } else {
      double speed = rng.uniform(cfg.speed_range[0], cfg.speed_range[1]);
      double heading = rng.uniform(0.0, 2.0 * M_PI);
      Vec3 end{start[0] + speed * duration * std::cos(heading),
               start[1] + speed * duration * std::sin(heading), start[2]};
      traj.waypoints.push_back({0.0, start});
      traj.waypoints.push_back({duration, end});
    }
    if (trajectory_clear_of_mics(traj, cfg.geometry)) return traj;
  }
  throw InputError("scene: could not place source clear of the array");
}

}  // namespace detail

// Deterministic given (cfg, inputs). Draw order: speech trajectory, noise
// position (only when the noise is mono), SNR.
inline Scene make_scene(const SceneConfig& cfg, const std::vector<double>& dry_speech,
                        const Waveform& dry_noise, double sample_rate = 16000.0) {
  cfg.validate();
  if (dry_speech.empty()) throw InputError("scene: empty dry speech");
  Rng rng(cfg.seed);
  const double duration = static_cast<double>(dry_speech.size()) / sample_rate;

  Trajectory speech_traj = detail::sample_trajectory(rng, cfg, duration);
  Waveform speech_image =
      render_moving_source(dry_speech, speech_traj, cfg.geometry, cfg, sample_rate);

  Waveform noise_image;
  Trajectory noise_traj;
  if (dry_noise.channels == 1) {
    SceneConfig fixed = cfg;
    fixed.source_moving = false;
    noise_traj = detail::sample_trajectory(rng, fixed, duration);
    std::vector<double> mono(dry_noise.data.begin(), dry_noise.data.end());
    mono.resize(dry_speech.size(), 0.0);
    noise_image = render_moving_source(mono, noise_traj, cfg.geometry, cfg, sample_rate);
  } else if (dry_noise.channels == cfg.geometry.num_mics()) {
    noise_image = dry_noise;
    if (noise_image.length < static_cast<long>(dry_speech.size()))
      throw InputError("scene: multichannel noise shorter than speech");
    if (noise_image.length > static_cast<long>(dry_speech.size())) {
      Waveform trimmed(noise_image.channels, static_cast<long>(dry_speech.size()));
      for (int ch = 0; ch < noise_image.channels; ++ch)
        for (long n = 0; n < trimmed.length; ++n) trimmed.at(ch, n) = noise_image.at(ch, n);
      noise_image = trimmed;
    }
    noise_traj.waypoints.push_back({0.0, {0.0, 0.0, 0.0}});
  } else {
    throw InputError("scene: noise must be mono or match the microphone count");
  }

  double snr = cfg.snr_db ? *cfg.snr_db : rng.uniform(cfg.snr_range[0], cfg.snr_range[1]);
  Scene scene = mix_at_snr(speech_image, noise_image, snr, cfg.ref_channel);
  scene.config = cfg;
  scene.speech_trajectory = speech_traj;
  scene.noise_trajectory = noise_traj;
  scene.sample_rate = sample_rate;
  return scene;
}

}  // namespace abic
