// Copyright 2026 abic contributors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Command-line front end: scene simulation, enhancement, metrics, model
// accounting, gradient checking and toy training.
//
// Exit codes: 0 ok, 1 usage, 2 input error, 3 data/weights error,
// 4 numerical failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abic/gradcheck.hpp"
#include "abic/parallel.hpp"
#include "abic/pipeline.hpp"
#include "abic/presets.hpp"
#include "abic/scene_io.hpp"
#include "abic/train.hpp"
#include "abic/weights_io.hpp"

using nlohmann::json;

namespace {

// ------------------------------------------------------------------
// config document
// ------------------------------------------------------------------

struct CliConfig {
  abic::StftConfig stft;
  // scene section
  int mics = 5;
  double array_radius = 0.10;
  std::optional<double> snr_db;
  std::array<double, 2> snr_range{-10.0, 10.0};
  std::uint64_t seed = 0;
  bool moving = true;
  std::array<double, 2> speed_range{0.012, 2.404};
  std::array<double, 2> annulus{1.0, 2.5};
  double sound_speed = 343.0;
  int count = 1;
  double duration_s = 3.0;
  std::string dry_speech_wav;  // optional; synthesized when empty
  std::string dry_noise_wav;
  // estimator + enhance
  abic::EstimatorConfig estimator;
  bool causal = false;
  int ref_channel = 0;
  double loading = 1e-6;
  int attention_frame_cap = 3000;
  // train
  abic::TrainConfig train;
  int train_scenes = 10;

  abic::SceneConfig scene_config(std::uint64_t scene_seed) const {
    abic::SceneConfig cfg;
    cfg.geometry = abic::circular_array(mics, array_radius);
    cfg.snr_db = snr_db;
    cfg.snr_range = snr_range;
    cfg.seed = scene_seed;
    cfg.source_moving = moving;
    cfg.speed_range = speed_range;
    cfg.annulus = annulus;
    cfg.sound_speed = sound_speed;
    cfg.ref_channel = ref_channel;
    return cfg;
  }

  abic::EnhanceConfig enhance_config() const {
    abic::EnhanceConfig cfg;
    cfg.causal = causal;
    cfg.estimator = estimator;
    cfg.ref_channel = ref_channel;
    cfg.stft = stft;
    cfg.loading = loading;
    cfg.attention_frame_cap = attention_frame_cap;
    return cfg;
  }
};

std::string estimator_name(abic::EstimatorConfig::Kind k) {
  switch (k) {
    case abic::EstimatorConfig::Kind::attention: return "attention";
    case abic::EstimatorConfig::Kind::online: return "online";
    case abic::EstimatorConfig::Kind::blockwise: return "blockwise";
  }
  return "attention";
}

abic::EstimatorConfig::Kind estimator_from_name(const std::string& s) {
  if (s == "attention") return abic::EstimatorConfig::Kind::attention;
  if (s == "online") return abic::EstimatorConfig::Kind::online;
  if (s == "blockwise") return abic::EstimatorConfig::Kind::blockwise;
  throw abic::UsageError("unknown estimator '" + s + "'");
}

json config_to_json(const CliConfig& c) {
  json j;
  j["stft"] = {{"frame_length", c.stft.frame_length},
               {"hop", c.stft.hop},
               {"sample_rate", c.stft.sample_rate},
               {"window", "sqrt_hann"}};
  j["scene"] = {{"mics", c.mics},
                {"array_radius", c.array_radius},
                {"snr_db", c.snr_db ? json(*c.snr_db) : json(nullptr)},
                {"snr_range", c.snr_range},
                {"seed", c.seed},
                {"moving", c.moving},
                {"speed_range", c.speed_range},
                {"annulus", c.annulus},
                {"sound_speed", c.sound_speed},
                {"count", c.count},
                {"duration_s", c.duration_s},
                {"dry_speech_wav", c.dry_speech_wav},
                {"dry_noise_wav", c.dry_noise_wav}};
  j["estimator"] = {{"kind", estimator_name(c.estimator.kind)},
                    {"forgetting_factor", c.estimator.forgetting_factor},
                    {"block_size", c.estimator.block_size}};
  j["enhance"] = {{"causal", c.causal},
                  {"ref_channel", c.ref_channel},
                  {"loading", c.loading},
                  {"attention_frame_cap", c.attention_frame_cap}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"steps", c.train.steps},
                {"seed", c.train.seed},
                {"scenes", c.train_scenes}};
  return j;
}

void reject_unknown_keys(const json& j, const json& defaults, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!defaults.contains(it.key()))
      throw abic::InputError("config: unknown key '" + path + it.key() + "'");
    if (it->is_object() && defaults.at(it.key()).is_object())
      reject_unknown_keys(*it, defaults.at(it.key()), path + it.key() + ".");
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

CliConfig config_from_json(const json& j) {
  CliConfig c;
  reject_unknown_keys(j, config_to_json(c), "");
  if (j.contains("stft")) {
    const auto& s = j.at("stft");
    maybe(s, "frame_length", c.stft.frame_length);
    maybe(s, "hop", c.stft.hop);
    maybe(s, "sample_rate", c.stft.sample_rate);
    if (s.contains("window") && s.at("window") != "sqrt_hann")
      throw abic::InputError("config: only the sqrt_hann window is supported");
  }
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    maybe(s, "mics", c.mics);
    maybe(s, "array_radius", c.array_radius);
    if (s.contains("snr_db") && !s.at("snr_db").is_null())
      c.snr_db = s.at("snr_db").get<double>();
    maybe(s, "snr_range", c.snr_range);
    maybe(s, "seed", c.seed);
    maybe(s, "moving", c.moving);
    maybe(s, "speed_range", c.speed_range);
    maybe(s, "annulus", c.annulus);
    maybe(s, "sound_speed", c.sound_speed);
    maybe(s, "count", c.count);
    maybe(s, "duration_s", c.duration_s);
    maybe(s, "dry_speech_wav", c.dry_speech_wav);
    maybe(s, "dry_noise_wav", c.dry_noise_wav);
  }
  if (j.contains("estimator")) {
    const auto& s = j.at("estimator");
    if (s.contains("kind"))
      c.estimator.kind = estimator_from_name(s.at("kind").get<std::string>());
    maybe(s, "forgetting_factor", c.estimator.forgetting_factor);
    maybe(s, "block_size", c.estimator.block_size);
  }
  if (j.contains("enhance")) {
    const auto& s = j.at("enhance");
    maybe(s, "causal", c.causal);
    maybe(s, "ref_channel", c.ref_channel);
    maybe(s, "loading", c.loading);
    maybe(s, "attention_frame_cap", c.attention_frame_cap);
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    maybe(s, "learning_rate", c.train.learning_rate);
    maybe(s, "batch_size", c.train.batch_size);
    maybe(s, "steps", c.train.steps);
    maybe(s, "seed", c.train.seed);
    maybe(s, "scenes", c.train_scenes);
  }
  return c;
}

CliConfig load_config(const std::string& path) {
  if (path.empty()) return CliConfig{};
  std::ifstream in(path);
  if (!in) throw abic::InputError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw abic::InputError(std::string("malformed config JSON: ") + e.what());
  }
  return config_from_json(j);
}

void write_text_atomic(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw abic::InputError("cannot write file: " + path);
    out << text;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw abic::InputError("cannot finalize file: " + path);
}

// ------------------------------------------------------------------
// deterministic dry-signal synthesis for simulate/train
// ------------------------------------------------------------------

std::vector<double> synth_speech(std::uint64_t seed, long samples, double fs) {
  abic::Rng rng(seed);
  const double f0_base = rng.uniform(100.0, 180.0);
  const double vibrato = rng.uniform(0.5, 1.2);
  const double syllable = rng.uniform(1.8, 3.2);
  const double ph_v = rng.uniform(0.0, 2.0 * M_PI);
  const double ph_s = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<double> ph(8);
  for (auto& p : ph) p = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<double> x(samples);
  double phase = 0.0;
  for (long n = 0; n < samples; ++n) {
    double t = n / fs;
    double f0 = f0_base * (1.0 + 0.05 * std::sin(2.0 * M_PI * vibrato * t + ph_v));
    phase += 2.0 * M_PI * f0 / fs;
    double env = 0.55 + 0.45 * std::sin(2.0 * M_PI * syllable * t + ph_s);
    double v = 0.0;
    for (int k = 1; k <= 8; ++k) v += std::sin(k * phase + ph[k - 1]) / k;
    x[n] = env * v / 2.0 + 0.01 * rng.normal();
  }
  return x;
}

std::vector<double> synth_noise(std::uint64_t seed, long samples) {
  abic::Rng rng(seed);
  std::vector<double> x(samples);
  double prev = 0.0;
  for (auto& v : x) {
    // mildly colored noise
    prev = 0.7 * prev + 0.3 * rng.normal();
    v = prev;
  }
  return x;
}

abic::Scene build_scene(const CliConfig& cfg, std::uint64_t scene_seed) {
  const long samples = static_cast<long>(cfg.duration_s * cfg.stft.sample_rate);
  std::vector<double> dry_speech;
  if (!cfg.dry_speech_wav.empty()) {
    auto w = abic::read_wav_expect_rate(cfg.dry_speech_wav, cfg.stft.sample_rate);
    if (w.samples.channels != 1) throw abic::InputError("dry speech wav must be mono");
    dry_speech.assign(w.samples.data.begin(), w.samples.data.end());
    if (static_cast<long>(dry_speech.size()) > samples) dry_speech.resize(samples);
  } else {
    dry_speech = synth_speech(scene_seed * 2 + 1, samples, cfg.stft.sample_rate);
  }
  abic::Waveform dry_noise;
  if (!cfg.dry_noise_wav.empty()) {
    auto w = abic::read_wav_expect_rate(cfg.dry_noise_wav, cfg.stft.sample_rate);
    dry_noise = w.samples;
  } else {
    auto n = synth_noise(scene_seed * 2 + 2, static_cast<long>(dry_speech.size()));
    dry_noise = abic::Waveform(1, static_cast<long>(n.size()));
    std::copy(n.begin(), n.end(), dry_noise.data.begin());
  }
  return abic::make_scene(cfg.scene_config(scene_seed), dry_speech, dry_noise,
                          cfg.stft.sample_rate);
}

// ------------------------------------------------------------------
// subcommands
// ------------------------------------------------------------------

int cmd_config_dump() {
  std::cout << config_to_json(CliConfig{}).dump(2) << "\n";
  return 0;
}

int cmd_simulate(const CliConfig& cfg, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (!std::filesystem::is_directory(out_dir))
    throw abic::InputError("cannot create output directory: " + out_dir);
  for (int i = 0; i < cfg.count; ++i) {
    abic::Scene scene = build_scene(cfg, cfg.seed + i);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "scene_%04d", i);
    auto paths = abic::write_scene(scene, out_dir, stem);
    std::cout << paths.mixture << "\n";
  }
  return 0;
}

json diagnostics_to_json(const abic::EnhanceDiagnostics& d) {
  double entropy_mean = 0.0;
  for (double v : d.attention_entropy) entropy_mean += v;
  if (!d.attention_entropy.empty()) entropy_mean /= d.attention_entropy.size();
  return {{"bins", d.bins},
          {"frames", d.frames},
          {"fallback_bins", d.fallback_bins},
          {"fallback_bin_ratio", d.fallback_ratio},
          {"attention_entropy_mean", entropy_mean},
          {"runtime_ms", d.runtime_ms}};
}

int cmd_enhance(CliConfig cfg, const std::string& in_wav, const std::string& weights_path,
                const std::string& out_wav, const std::string& report_path, bool oracle,
                const std::string& sidecar) {
  abic::EnhanceConfig ecfg = cfg.enhance_config();
  abic::EnhanceResult result;
  std::optional<abic::Scene> scene;

  if (oracle) {
    std::string sc = sidecar;
    if (sc.empty()) {
      // derive from the input path: <stem>_mixture.wav -> <stem>_scene.json
      const std::string suffix = "_mixture.wav";
      if (in_wav.size() > suffix.size() &&
          in_wav.substr(in_wav.size() - suffix.size()) == suffix)
        sc = in_wav.substr(0, in_wav.size() - suffix.size()) + "_scene.json";
      else
        throw abic::InputError("--oracle-mask needs --sidecar or a *_mixture.wav input");
    }
    scene = abic::read_scene(sc);
    abic::Real2 mask = abic::oracle_mask(*scene, ecfg.stft, ecfg.ref_channel);
    abic::AttentionOverride ov;  // uniform rows (global or running mean)
    result = abic::enhance_with_mask(scene->mixture, mask, ecfg, ov);
  } else {
    auto wav = abic::read_wav_expect_rate(in_wav, ecfg.stft.sample_rate);
    abic::ModelWeights weights = abic::load_weights(weights_path);
    result = abic::enhance(wav.samples, weights, ecfg);
    if (!sidecar.empty()) scene = abic::read_scene(sidecar);
  }

  json report;
  report["estimator"] = estimator_name(ecfg.estimator.kind);
  report["lambda"] = ecfg.estimator.forgetting_factor;
  report["block_size"] = ecfg.estimator.block_size;
  report["causal"] = ecfg.causal;
  report["fallback_bin_ratio"] = result.diagnostics.fallback_ratio;
  report["runtime_ms"] = result.diagnostics.runtime_ms;
  report["diagnostics"] = diagnostics_to_json(result.diagnostics);
  report["config"] = config_to_json(cfg);
  report["si_sdr_in"] = nullptr;
  report["si_sdr_out"] = nullptr;
  report["snr_loss"] = nullptr;
  if (scene) {
    const long n = result.enhanced.length;
    std::vector<double> ref(n), mix(n), est(n);
    for (long i = 0; i < n; ++i) {
      ref[i] = scene->speech_image.at(ecfg.ref_channel, i);
      mix[i] = scene->mixture.at(ecfg.ref_channel, i);
      est[i] = result.enhanced.at(0, i);
    }
    report["si_sdr_in"] = abic::si_sdr(mix, ref);
    report["si_sdr_out"] = abic::si_sdr(est, ref);
    report["snr_loss"] = abic::snr_loss(est, ref);
    report["si_sdr_delta"] =
        report["si_sdr_out"].get<double>() - report["si_sdr_in"].get<double>();
  }

  abic::write_wav(out_wav, result.enhanced, ecfg.stft.sample_rate);
  if (!report_path.empty()) write_text_atomic(report_path, report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& est_path, const std::string& ref_path,
             const std::string& out_path) {
  auto est = abic::read_wav(est_path);
  auto ref = abic::read_wav(ref_path);
  if (est.sample_rate != ref.sample_rate)
    throw abic::InputError("eval: sample rates differ");
  if (est.samples.channels != 1 || ref.samples.channels < 1)
    throw abic::InputError("eval: estimate must be mono");
  long n = std::min(est.samples.length, ref.samples.length);
  if (n == 0) throw abic::InputError("eval: empty signals");
  std::vector<double> e(n), r(n);
  for (long i = 0; i < n; ++i) {
    e[i] = est.samples.at(0, i);
    r[i] = ref.samples.at(0, i);
  }
  json out = {{"si_sdr", abic::si_sdr(e, r)},
              {"snr_loss", abic::snr_loss(e, r)},
              {"samples_compared", n}};
  if (!out_path.empty()) write_text_atomic(out_path, out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_info(const std::string& weights_path, bool published, double duration_s, int bins) {
  abic::ArchConfig arch;
  if (!weights_path.empty()) {
    arch = abic::load_weights(weights_path).arch;
  } else if (published) {
    arch = abic::published_arch();
  } else {
    throw abic::UsageError("info: give --weights or --published-arch");
  }
  json out;
  out["arch"] = {{"num_mics", arch.num_mics},
                 {"conv_channels", arch.conv_channels},
                 {"num_conv_layers", arch.num_conv_layers},
                 {"lstm_hidden", arch.lstm_hidden},
                 {"num_lstm_layers", arch.num_lstm_layers},
                 {"head_dim", arch.head_dim},
                 {"kernel_freq", arch.kernel_freq}};
  json groups = json::object();
  long total = 0;
  for (const auto& s : abic::expected_tensors(arch)) {
    if (!s.trainable) continue;
    total += s.elements();
    std::string group = s.name.substr(0, s.name.find('.'));
    groups[group] = groups.value(group, 0L) + s.elements();
  }
  out["parameters"] = {{"total", total}, {"by_group", groups}};
  const long frames = static_cast<long>(duration_s * 100.0);  // 16 kHz, hop 160
  auto mc = abic::mac_count(arch, bins, frames);
  out["macs"] = {{"duration_s", duration_s},
                 {"network", mc.network},
                 {"attention_scores", mc.attention_scores},
                 {"attention_apply", mc.attention_apply},
                 {"total", mc.total()}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& estimator, bool causal, double eps) {
  auto preset = abic::make_gradcheck_preset(seed, estimator_from_name(estimator), causal);
  auto res = abic::grad_check(preset.scene.mixture, preset.scene.speech_image,
                              preset.weights, preset.cfg, eps);
  json out;
  out["max_rel_err"] = res.max_rel_err;
  out["loss"] = res.loss;
  out["groups"] = res.group_rel_err;
  bool pass = res.max_rel_err <= 1e-4;
  out["pass"] = pass;
  std::cout << out.dump(2) << "\n";
  std::cout << (pass ? "PASS" : "FAIL") << " max_rel_err=" << res.max_rel_err << "\n";
  return pass ? 0 : 4;
}

int cmd_train(const CliConfig& cfg, const std::string& out_weights,
              const std::string& trace_path) {
  abic::ToyTrainPreset preset = abic::make_toy_train_preset(cfg.train.seed, cfg.train_scenes);
  abic::TrainConfig tcfg = cfg.train;
  auto result = abic::train_toy(preset.scenes, preset.weights, tcfg, preset.cfg);
  abic::save_weights(preset.weights, out_weights);
  if (!trace_path.empty()) {
    std::string csv = "step,loss\n";
    for (size_t i = 0; i < result.loss_trace.size(); ++i)
      csv += std::to_string(i) + "," + std::to_string(result.loss_trace[i]) + "\n";
    write_text_atomic(trace_path, csv);
  }
  double first = result.loss_trace.empty() ? 0.0 : result.loss_trace.front();
  double last = result.loss_trace.empty() ? 0.0 : result.loss_trace.back();
  std::cout << json({{"steps", result.loss_trace.size()},
                     {"first_loss", first},
                     {"final_loss", last},
                     {"weights", out_weights}})
                   .dump(2)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-based MVDR speech-enhancement toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "cap worker threads (default: ABIC_THREADS or all cores)");

  std::string config_path;

  auto* sc_config = app.add_subcommand("config", "print the resolved configuration");
  bool dump = false;
  sc_config->add_flag("--dump", dump, "print default config JSON");

  auto* sc_sim = app.add_subcommand("simulate", "generate synthetic scenes");
  std::string sim_out;
  int sim_count = -1;
  std::int64_t sim_seed = -1;
  double sim_snr = std::nan("");
  bool sim_moving_on = false, sim_moving_off = false;
  sc_sim->add_option("--config", config_path, "config JSON file");
  sc_sim->add_option("--out", sim_out, "output directory")->required();
  sc_sim->add_option("--count", sim_count, "number of scenes");
  sc_sim->add_option("--seed", sim_seed, "base seed");
  sc_sim->add_option("--snr", sim_snr, "fixed SNR in dB");
  sc_sim->add_flag("--moving", sim_moving_on, "moving source");
  sc_sim->add_flag("--no-moving", sim_moving_off, "fixed source position");

  auto* sc_enh = app.add_subcommand("enhance", "enhance a multichannel wav");
  std::string enh_in, enh_weights, enh_out, enh_report, enh_sidecar, enh_estimator;
  bool enh_oracle = false;
  bool enh_causal_on = false, enh_causal_off = false;
  double enh_lambda = std::nan(""), enh_loading = std::nan("");
  int enh_block = -1, enh_ref = -1;
  sc_enh->add_option("--config", config_path, "config JSON file");
  sc_enh->add_option("--in", enh_in,
                     "input multichannel wav (no padding: tail samples beyond the last "
                     "full frame are dropped)")
      ->required();
  sc_enh->add_option("--weights", enh_weights, "model weights container");
  sc_enh->add_option("--out", enh_out, "output wav path")->required();
  sc_enh->add_option("--report", enh_report, "metrics report JSON path");
  sc_enh->add_flag("--causal", enh_causal_on, "causal processing");
  sc_enh->add_flag("--non-causal", enh_causal_off, "whole-utterance processing");
  sc_enh->add_option("--estimator", enh_estimator, "attention|online|blockwise");
  sc_enh->add_option("--lambda", enh_lambda, "online forgetting factor");
  sc_enh->add_option("--block-size", enh_block, "blockwise block size");
  sc_enh->add_option("--ref-channel", enh_ref, "reference channel index");
  sc_enh->add_option("--loading", enh_loading, "diagonal loading");
  sc_enh->add_flag("--oracle-mask", enh_oracle, "use the sidecar ground-truth mask");
  sc_enh->add_option("--sidecar", enh_sidecar, "scene sidecar JSON (for oracle/metrics)");

  auto* sc_eval = app.add_subcommand("eval", "compare an estimate against a reference");
  std::string eval_est, eval_ref, eval_out;
  sc_eval->add_option("--est", eval_est, "estimate wav")->required();
  sc_eval->add_option("--ref", eval_ref, "reference wav")->required();
  sc_eval->add_option("--out", eval_out, "metrics JSON path");

  auto* sc_info = app.add_subcommand("info", "parameter and MAC accounting");
  std::string info_weights;
  bool info_published = false;
  double info_duration = 1.0;
  int info_bins = 161;
  sc_info->add_option("--weights", info_weights, "weights container");
  sc_info->add_flag("--published-arch", info_published, "use the published architecture");
  sc_info->add_option("--duration", info_duration, "audio seconds for MAC accounting");
  sc_info->add_option("--bins", info_bins, "frequency bins for MAC accounting");

  auto* sc_grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::uint64_t grad_seed = 0;
  std::string grad_estimator = "attention";
  bool grad_causal = false;
  double grad_eps = 1e-5;
  sc_grad->add_option("--seed", grad_seed, "preset seed");
  sc_grad->add_option("--estimator", grad_estimator, "attention|online|blockwise");
  sc_grad->add_flag("--causal", grad_causal, "causal attention");
  sc_grad->add_option("--eps", grad_eps, "relative FD step");

  auto* sc_train = app.add_subcommand("train", "toy-scale training run");
  std::string train_out, train_trace;
  int train_steps = -1, train_batch = -1, train_scenes = -1;
  double train_lr = std::nan("");
  std::int64_t train_seed = -1;
  sc_train->add_option("--config", config_path, "config JSON file");
  sc_train->add_option("--out", train_out, "output weights container")->required();
  sc_train->add_option("--trace", train_trace, "loss trace CSV path");
  sc_train->add_option("--steps", train_steps, "Adam steps");
  sc_train->add_option("--lr", train_lr, "learning rate");
  sc_train->add_option("--batch", train_batch, "batch size");
  sc_train->add_option("--seed", train_seed, "training seed");
  sc_train->add_option("--scenes", train_scenes, "number of toy scenes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (threads > 0) abic::set_thread_count(threads);

    if (sc_config->parsed()) {
      if (!dump) throw abic::UsageError("config: nothing to do (use --dump)");
      return cmd_config_dump();
    }
    CliConfig cfg = load_config(config_path);
    if (sc_sim->parsed()) {
      if (sim_count >= 0) cfg.count = sim_count;
      if (sim_seed >= 0) cfg.seed = static_cast<std::uint64_t>(sim_seed);
      if (!std::isnan(sim_snr)) cfg.snr_db = sim_snr;
      if (sim_moving_on && sim_moving_off)
        throw abic::UsageError("simulate: --moving conflicts with --no-moving");
      if (sim_moving_on) cfg.moving = true;
      if (sim_moving_off) cfg.moving = false;
      return cmd_simulate(cfg, sim_out);
    }
    if (sc_enh->parsed()) {
      if (enh_causal_on && enh_causal_off)
        throw abic::UsageError("enhance: --causal conflicts with --non-causal");
      if (enh_causal_on) cfg.causal = true;
      if (enh_causal_off) cfg.causal = false;
      if (!enh_estimator.empty()) cfg.estimator.kind = estimator_from_name(enh_estimator);
      if (!std::isnan(enh_lambda)) cfg.estimator.forgetting_factor = enh_lambda;
      if (enh_block >= 0) cfg.estimator.block_size = enh_block;
      if (enh_ref >= 0) cfg.ref_channel = enh_ref;
      if (!std::isnan(enh_loading)) cfg.loading = enh_loading;
      if (!enh_oracle && enh_weights.empty())
        throw abic::UsageError("enhance: --weights required unless --oracle-mask is given");
      return cmd_enhance(cfg, enh_in, enh_weights, enh_out, enh_report, enh_oracle,
                         enh_sidecar);
    }
    if (sc_eval->parsed()) return cmd_eval(eval_est, eval_ref, eval_out);
    if (sc_info->parsed())
      return cmd_info(info_weights, info_published, info_duration, info_bins);
    if (sc_grad->parsed())
      return cmd_gradcheck(grad_seed, grad_estimator, grad_causal, grad_eps);
    if (sc_train->parsed()) {
      if (train_steps >= 0) cfg.train.steps = train_steps;
      if (!std::isnan(train_lr)) cfg.train.learning_rate = train_lr;
      if (train_batch > 0) cfg.train.batch_size = train_batch;
      if (train_seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(train_seed);
      if (train_scenes > 0) cfg.train_scenes = train_scenes;
      return cmd_train(cfg, train_out, train_trace);
    }
    throw abic::UsageError("no subcommand");
  } catch (const abic::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const abic::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const abic::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const abic::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
