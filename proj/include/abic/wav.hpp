// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "abic/common.hpp"
#include "abic/spectral.hpp"

namespace abic {

enum class WavFormat { pcm16, float32 };

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

struct WavData {
  Waveform samples;  // interleaved on disk, deinterleaved here
  double sample_rate = 0.0;
};

inline WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open wav file: " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (raw.size() < 44 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw InputError("not a RIFF/WAVE file: " + path);

  std::uint16_t fmt_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::uint32_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const unsigned char* hdr = raw.data() + pos;
    std::uint32_t chunk_len = detail::get_u32(hdr + 4);
    const unsigned char* body = hdr + 8;
    if (pos + 8 + chunk_len > raw.size()) throw InputError("truncated wav chunk: " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw InputError("malformed fmt chunk: " + path);
      fmt_tag = detail::get_u16(body);
      channels = detail::get_u16(body + 2);
      rate = detail::get_u32(body + 4);
      bits = detail::get_u16(body + 14);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_ptr = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (fmt_tag == 0 || data_ptr == nullptr) throw InputError("wav missing fmt/data chunk: " + path);
  if (channels < 1 || channels > 16)
    throw InputError("unsupported channel count " + std::to_string(channels) + ": " + path);

  const bool pcm16 = (fmt_tag == 1 && bits == 16);
  const bool f32 = (fmt_tag == 3 && bits == 32);
  if (!pcm16 && !f32)
    throw InputError("unsupported wav encoding (only 16-bit PCM and 32-bit float): " + path);

  const int bytes_per = pcm16 ? 2 : 4;
  long num_frames = data_len / (bytes_per * channels);
  WavData out;
  out.sample_rate = rate;
  out.samples = Waveform(channels, num_frames);
  for (long n = 0; n < num_frames; ++n) {
    for (int ch = 0; ch < channels; ++ch) {
      const unsigned char* p = data_ptr + (static_cast<size_t>(n) * channels + ch) * bytes_per;
      double v;
      if (pcm16) {
        std::int16_t s = static_cast<std::int16_t>(detail::get_u16(p));
        v = s / 32768.0;
      } else {
        std::uint32_t u = detail::get_u32(p);
        float f;
        std::memcpy(&f, &u, 4);
        v = f;
      }
      out.samples.at(ch, n) = v;
    }
  }
  return out;
}

// Refuses any rate other than expected_rate when expected_rate > 0 (no
// resampling in this toolkit).
inline WavData read_wav_expect_rate(const std::string& path, double expected_rate) {
  WavData w = read_wav(path);
  if (expected_rate > 0 && w.sample_rate != expected_rate)
    throw InputError("wav sample rate " + std::to_string(w.sample_rate) + " != expected " +
                     std::to_string(expected_rate) + " (resampling refused): " + path);
  return w;
}

inline void write_wav(const std::string& path, const Waveform& x, double sample_rate,
                      WavFormat format = WavFormat::float32) {
  if (x.channels < 1 || x.channels > 16)
    throw InputError("unsupported channel count for wav write");
  const int bytes_per = format == WavFormat::pcm16 ? 2 : 4;
  const std::uint16_t tag = format == WavFormat::pcm16 ? 1 : 3;
  const std::uint32_t data_len =
      static_cast<std::uint32_t>(x.length * x.channels * bytes_per);

  std::string s;
  s.reserve(44 + data_len);
  s.append("RIFF");
  detail::put_u32(s, 36 + data_len);
  s.append("WAVE");
  s.append("fmt ");
  detail::put_u32(s, 16);
  detail::put_u16(s, tag);
  detail::put_u16(s, static_cast<std::uint16_t>(x.channels));
  detail::put_u32(s, static_cast<std::uint32_t>(sample_rate));
  detail::put_u32(s, static_cast<std::uint32_t>(sample_rate) * x.channels * bytes_per);
  detail::put_u16(s, static_cast<std::uint16_t>(x.channels * bytes_per));
  detail::put_u16(s, static_cast<std::uint16_t>(8 * bytes_per));
  s.append("data");
  detail::put_u32(s, data_len);
  for (long n = 0; n < x.length; ++n) {
    for (int ch = 0; ch < x.channels; ++ch) {
      double v = x.at(ch, n);
      if (format == WavFormat::pcm16) {
        double c = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
        auto q = static_cast<std::int16_t>(std::lrint(c * 32767.0));
        detail::put_u16(s, static_cast<std::uint16_t>(q));
      } else {
        float f = static_cast<float>(v);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        detail::put_u32(s, u);
      }
    }
  }
  // write whole file at once; a failed command leaves no partial output
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write wav file: " + path);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!out) throw InputError("short write to wav file: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw InputError("cannot finalize wav file: " + path);
}

}  // namespace abic
