// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abic/common.hpp"
#include "abic/igcrn.hpp"

namespace abic {

// Container layout: magic "ABIC", version u32 LE, index length u64 LE,
// JSON index (arch + tensor records with byte offsets), then raw f32 LE
// payloads. Values are stored as f32; in-memory doubles that came from a
// container round-trip without loss.
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail_wio {

inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline nlohmann::json arch_to_json(const ArchConfig& a) {
  return {{"num_mics", a.num_mics},
          {"conv_channels", a.conv_channels},
          {"num_conv_layers", a.num_conv_layers},
          {"lstm_hidden", a.lstm_hidden},
          {"num_lstm_layers", a.num_lstm_layers},
          {"head_dim", a.head_dim},
          {"kernel_freq", a.kernel_freq}};
}

inline ArchConfig arch_from_json(const nlohmann::json& j) {
  ArchConfig a;
  a.num_mics = j.at("num_mics").get<int>();
  a.conv_channels = j.at("conv_channels").get<int>();
  a.num_conv_layers = j.at("num_conv_layers").get<int>();
  a.lstm_hidden = j.at("lstm_hidden").get<int>();
  a.num_lstm_layers = j.at("num_lstm_layers").get<int>();
  a.head_dim = j.at("head_dim").get<int>();
  a.kernel_freq = j.at("kernel_freq").get<int>();
  return a;
}

}  // namespace detail_wio

inline void save_weights(const ModelWeights& w, const std::string& path) {
  w.validate();
  nlohmann::json index;
  index["arch"] = detail_wio::arch_to_json(w.arch);
  index["tensors"] = nlohmann::json::array();

  std::string payload;
  for (const auto& spec : expected_tensors(w.arch)) {
    const auto& t = w.get(spec.name);
    nlohmann::json rec;
    rec["name"] = spec.name;
    rec["dtype"] = "f32";
    rec["shape"] = t.shape;
    rec["offset"] = payload.size();
    rec["kind"] = spec.trainable ? "param" : "buffer";
    index["tensors"].push_back(rec);
    for (double v : t.v) {
      float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      detail_wio::put_u32(payload, u);
    }
  }

  std::string header = index.dump();
  std::string out;
  out.append("ABIC");
  detail_wio::put_u32(out, kWeightsVersion);
  detail_wio::put_u64(out, header.size());
  out += header;
  out += payload;

  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write weights file: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("short write to weights file: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot finalize weights file: " + path);
}

inline ModelWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weights file: " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (raw.size() < 16 || std::memcmp(raw.data(), "ABIC", 4) != 0)
    throw DataError("corrupt weights container (bad magic): " + path);
  std::uint32_t version = 0;
  std::memcpy(&version, raw.data() + 4, 4);
  if (version != kWeightsVersion)
    throw DataError("unsupported weights container version " + std::to_string(version));
  std::uint64_t hlen = 0;
  std::memcpy(&hlen, raw.data() + 8, 8);
  if (16 + hlen > raw.size()) throw DataError("corrupt weights container (truncated index)");

  nlohmann::json index;
  try {
    index = nlohmann::json::parse(raw.begin() + 16, raw.begin() + 16 + hlen);
  } catch (const nlohmann::json::exception&) {
    throw DataError("corrupt weights container (bad index): " + path);
  }

  ModelWeights w;
  w.arch = detail_wio::arch_from_json(index.at("arch"));
  auto specs = expected_tensors(w.arch);

  const size_t payload_off = 16 + hlen;
  for (const auto& rec : index.at("tensors")) {
    std::string name = rec.at("name").get<std::string>();
    bool known = false;
    for (const auto& s : specs)
      if (s.name == name) known = true;
    if (!known) throw DataError("weights container holds unexpected tensor '" + name + "'");
    if (rec.at("dtype").get<std::string>() != "f32")
      throw DataError("weights: unsupported dtype for '" + name + "'");
    NamedTensor t;
    t.shape = rec.at("shape").get<std::vector<int>>();
    long elems = 1;
    for (int d : t.shape) elems *= d;
    size_t off = payload_off + rec.at("offset").get<size_t>();
    if (off + 4 * static_cast<size_t>(elems) > raw.size())
      throw DataError("corrupt weights container (truncated payload): " + path);
    t.v.resize(elems);
    for (long i = 0; i < elems; ++i) {
      std::uint32_t u;
      std::memcpy(&u, raw.data() + off + 4 * i, 4);
      float f;
      std::memcpy(&f, &u, 4);
      t.v[i] = f;
    }
    w.tensors.emplace(std::move(name), std::move(t));
  }
  w.validate();  // reports missing tensors / shape mismatches by name
  return w;
}

}  // namespace abic
