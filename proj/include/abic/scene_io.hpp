// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include <json.hpp>

#include "abic/scene.hpp"
#include "abic/wav.hpp"

namespace abic {

namespace detail_scene_io {

inline nlohmann::json trajectory_to_json(const Trajectory& t) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& w : t.waypoints)
    arr.push_back({{"time", w.time}, {"position", w.position}});
  return arr;
}

inline Trajectory trajectory_from_json(const nlohmann::json& arr) {
  Trajectory t;
  for (const auto& j : arr) {
    Trajectory::Waypoint w;
    w.time = j.at("time").get<double>();
    auto p = j.at("position").get<std::vector<double>>();
    w.position = {p.at(0), p.at(1), p.at(2)};
    t.waypoints.push_back(w);
  }
  return t;
}

}  // namespace detail_scene_io

inline nlohmann::json scene_metadata(const Scene& scene) {
  nlohmann::json j;
  j["sample_rate"] = scene.sample_rate;
  j["snr_db"] = scene.snr_db;
  j["seed"] = scene.config.seed;
  j["sound_speed"] = scene.config.sound_speed;
  j["source_moving"] = scene.config.source_moving;
  j["ref_channel"] = scene.config.ref_channel;
  nlohmann::json mics = nlohmann::json::array();
  for (const auto& m : scene.config.geometry.mic_positions) mics.push_back(m);
  j["geometry"] = {{"mic_positions", mics}};
  j["speech_trajectory"] = detail_scene_io::trajectory_to_json(scene.speech_trajectory);
  j["noise_trajectory"] = detail_scene_io::trajectory_to_json(scene.noise_trajectory);
  return j;
}

struct SceneFiles {
  std::string mixture, speech, noise, sidecar;
};

inline SceneFiles scene_paths(const std::string& dir, const std::string& stem) {
  return {dir + "/" + stem + "_mixture.wav", dir + "/" + stem + "_speech.wav",
          dir + "/" + stem + "_noise.wav", dir + "/" + stem + "_scene.json"};
}

inline SceneFiles write_scene(const Scene& scene, const std::string& dir,
                              const std::string& stem) {
  SceneFiles paths = scene_paths(dir, stem);
  write_wav(paths.mixture, scene.mixture, scene.sample_rate);
  write_wav(paths.speech, scene.speech_image, scene.sample_rate);
  write_wav(paths.noise, scene.noise_image, scene.sample_rate);
  nlohmann::json j = scene_metadata(scene);
  std::string tmp = paths.sidecar + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InputError("cannot write sidecar: " + paths.sidecar);
    out << j.dump(2) << "\n";
  }
  if (std::rename(tmp.c_str(), paths.sidecar.c_str()) != 0)
    throw InputError("cannot finalize sidecar: " + paths.sidecar);
  return paths;
}

// Loads the ground-truth images referenced next to a sidecar (for oracle runs).
struct LoadedScene {
  Scene scene;
};

inline Scene read_scene(const std::string& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw InputError("cannot open sidecar: " + sidecar_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed sidecar " + sidecar_path + ": " + e.what());
  }
  Scene scene;
  scene.sample_rate = j.at("sample_rate").get<double>();
  scene.snr_db = j.at("snr_db").get<double>();
  scene.config.seed = j.at("seed").get<std::uint64_t>();
  scene.config.sound_speed = j.at("sound_speed").get<double>();
  scene.config.source_moving = j.at("source_moving").get<bool>();
  scene.config.ref_channel = j.at("ref_channel").get<int>();
  for (const auto& m : j.at("geometry").at("mic_positions")) {
    auto p = m.get<std::vector<double>>();
    scene.config.geometry.mic_positions.push_back({p.at(0), p.at(1), p.at(2)});
  }
  scene.speech_trajectory = detail_scene_io::trajectory_from_json(j.at("speech_trajectory"));
  scene.noise_trajectory = detail_scene_io::trajectory_from_json(j.at("noise_trajectory"));

  // companion wavs live next to the sidecar: <stem>_scene.json
  const std::string suffix = "_scene.json";
  if (sidecar_path.size() < suffix.size() ||
      sidecar_path.substr(sidecar_path.size() - suffix.size()) != suffix)
    throw InputError("sidecar path must end in _scene.json: " + sidecar_path);
  std::string base = sidecar_path.substr(0, sidecar_path.size() - suffix.size());
  scene.mixture = read_wav_expect_rate(base + "_mixture.wav", scene.sample_rate).samples;
  scene.speech_image = read_wav_expect_rate(base + "_speech.wav", scene.sample_rate).samples;
  scene.noise_image = read_wav_expect_rate(base + "_noise.wav", scene.sample_rate).samples;
  return scene;
}

}  // namespace abic
