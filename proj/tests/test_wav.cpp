// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "abic/rng.hpp"
#include "abic/wav.hpp"

using namespace abic;

TEST_SUITE("wav") {

TEST_CASE("float32 round trip is exact at f32 resolution") {
  Waveform x(3, 500);
  Rng rng(1);
  for (auto& v : x.data) v = static_cast<float>(rng.normal());
  const std::string path = "/tmp/abic_wav_f32.wav";
  write_wav(path, x, 16000.0, WavFormat::float32);
  auto back = read_wav(path);
  CHECK(back.sample_rate == 16000.0);
  REQUIRE(back.samples.channels == 3);
  REQUIRE(back.samples.length == 500);
  CHECK(back.samples.data == x.data);
  std::remove(path.c_str());
}

TEST_CASE("pcm16 round trip is within quantization") {
  Waveform x(2, 300);
  Rng rng(2);
  for (auto& v : x.data) v = 0.5 * std::sin(rng.uniform(0.0, 6.28));
  const std::string path = "/tmp/abic_wav_pcm.wav";
  write_wav(path, x, 16000.0, WavFormat::pcm16);
  auto back = read_wav(path);
  for (size_t i = 0; i < x.data.size(); ++i)
    CHECK(std::abs(back.samples.data[i] - x.data[i]) <= 1.0 / 32768.0);
  std::remove(path.c_str());
}

TEST_CASE("unexpected sample rate is refused, not resampled") {
  Waveform x(1, 100);
  const std::string path = "/tmp/abic_wav_rate.wav";
  write_wav(path, x, 8000.0);
  CHECK_THROWS_WITH_AS(read_wav_expect_rate(path, 16000.0), doctest::Contains("refused"),
                       InputError);
  CHECK_NOTHROW(read_wav_expect_rate(path, 8000.0));
  std::remove(path.c_str());
}

TEST_CASE("malformed and unsupported files are rejected") {
  const std::string path = "/tmp/abic_wav_bad.wav";
  std::ofstream(path) << "definitely not a RIFF container, just text padding......";
  CHECK_THROWS_AS(read_wav(path), InputError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_wav("/tmp/abic_wav_does_not_exist.wav"), InputError);
}

TEST_CASE("channel count limits") {
  Waveform x(17, 10);
  CHECK_THROWS_AS(write_wav("/tmp/abic_wav_many.wav", x, 16000.0), InputError);
}

}  // TEST_SUITE
