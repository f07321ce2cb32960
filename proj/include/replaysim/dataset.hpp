#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "replaysim/directivity.hpp"
#include "replaysim/dsp.hpp"
#include "replaysim/error.hpp"
#include "replaysim/manifest.hpp"
#include "replaysim/noise.hpp"
#include "replaysim/rng.hpp"
#include "replaysim/scenario.hpp"
#include "replaysim/wav.hpp"

namespace replaysim {

struct DatasetConfig {
  std::string speech_dir;
  std::string noise_dir;
  std::string grids_dir;
  std::string out_dir;
  std::size_t utterances = 10;
  std::uint64_t seed = 0;
  NoiseMode noise_mode = NoiseMode::diffuse;
  SpoofingMode spoofing_mode = SpoofingMode::reverberant;
  GenuineRoom genuine_room = GenuineRoom::env_a;
  std::vector<int> sample_rates{48000};
  double utterance_seconds = 2.0;
  double snr_min_db = -10.0;
  double snr_max_db = 40.0;
  // Noise on the spoofing-microphone recording (reverberant mode only).
  bool spoof_noise = true;
  double spoof_snr_min_db = -10.0;
  double spoof_snr_max_db = 40.0;
  std::size_t replays_per_utterance = 4;
  SampleFormat output_format = SampleFormat::pcm24;
  // Every trial is scaled so its 48 kHz peak sits here.
  double output_peak = 0.9;
  std::size_t diffuse_frame = 1024;
  SceneConstraints constraints;
  SimulationOptions simulation;
  // Execution only; never affects outputs and is not part of the snapshot.
  std::size_t jobs = 1;
};

inline void validate(const DatasetConfig& c) {
  if (c.utterances == 0) throw ConfigError("utterances must be positive");
  if (c.replays_per_utterance == 0) throw ConfigError("replays_per_utterance must be positive");
  if (c.sample_rates.empty()) throw ConfigError("at least one output sample rate is required");
  if (c.sample_rates.front() != c.simulation.sample_rate)
    throw ConfigError("the first output rate must equal the engine rate " + std::to_string(c.simulation.sample_rate));
  for (int r : c.sample_rates)
    if (!is_supported_rate(r)) throw ConfigError("unsupported output rate " + std::to_string(r));
  if (!is_supported_rate(c.simulation.sample_rate)) throw ConfigError("unsupported engine rate");
  if (!(c.utterance_seconds > 0.0)) throw ConfigError("utterance_seconds must be positive");
  if (!(c.snr_max_db >= c.snr_min_db)) throw ConfigError("snr_range_db is empty");
  if (!(c.spoof_snr_max_db >= c.spoof_snr_min_db)) throw ConfigError("spoof_snr_range_db is empty");
  if (!(c.output_peak > 0.0 && c.output_peak < 1.0)) throw ConfigError("output_peak must lie in (0, 1)");
  if (c.simulation.max_order < 0) throw ConfigError("max_order must be non-negative");
  if (c.simulation.delay_taps < 21 || c.simulation.delay_taps % 2 == 0)
    throw ConfigError("delay_taps must be odd and >= 21");
  if (c.diffuse_frame < 64 || c.diffuse_frame % 2) throw ConfigError("diffuse_frame must be even and >= 64");
  if (c.noise_mode == NoiseMode::diffuse && c.constraints.mic_count < 2)
    throw ConfigError("diffuse noise needs at least two microphones");
  check_feasible(c.constraints);
}

// ---------------------------------------------------------------------------
// Config file (JSON)
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }))
      throw ConfigError("unknown config key '" + where + it.key() + "'");
  }
}

inline void read_range(const nlohmann::json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError(std::string(key) + " must be [min, max]");
  lo = v[0];
  hi = v[1];
}

}  // namespace detail

// Applies a config document on top of `base`.
inline DatasetConfig apply_config(DatasetConfig c, const nlohmann::json& j) {
  try {
    detail::reject_unknown(j,
                           {"speech_dir", "noise_dir", "grids_dir", "out_dir", "utterances", "seed", "noise_mode",
                            "spoofing_mode", "genuine_room", "sample_rates", "utterance_seconds", "snr_range_db",
                            "spoof_noise", "spoof_snr_range_db", "replays_per_utterance", "output_format",
                            "output_peak", "diffuse_frame", "coherence_model", "jobs", "constraints", "simulation",
                            "overrides"},
                           "");
    detail::read_if(j, "speech_dir", c.speech_dir);
    detail::read_if(j, "noise_dir", c.noise_dir);
    detail::read_if(j, "grids_dir", c.grids_dir);
    detail::read_if(j, "out_dir", c.out_dir);
    detail::read_if(j, "utterances", c.utterances);
    detail::read_if(j, "seed", c.seed);
    if (j.contains("noise_mode")) c.noise_mode = parse_noise_mode(j.at("noise_mode").get<std::string>());
    if (j.contains("spoofing_mode")) c.spoofing_mode = parse_spoofing_mode(j.at("spoofing_mode").get<std::string>());
    if (j.contains("genuine_room")) c.genuine_room = parse_genuine_room(j.at("genuine_room").get<std::string>());
    detail::read_if(j, "sample_rates", c.sample_rates);
    detail::read_if(j, "utterance_seconds", c.utterance_seconds);
    detail::read_range(j, "snr_range_db", c.snr_min_db, c.snr_max_db);
    detail::read_if(j, "spoof_noise", c.spoof_noise);
    detail::read_range(j, "spoof_snr_range_db", c.spoof_snr_min_db, c.spoof_snr_max_db);
    detail::read_if(j, "replays_per_utterance", c.replays_per_utterance);
    if (j.contains("output_format")) c.output_format = parse_sample_format(j.at("output_format").get<std::string>());
    detail::read_if(j, "output_peak", c.output_peak);
    detail::read_if(j, "diffuse_frame", c.diffuse_frame);
    detail::read_if(j, "jobs", c.jobs);
    if (j.contains("coherence_model") && j.at("coherence_model").get<std::string>() != "spherical")
      throw ConfigError("only the spherical coherence model is supported");
    if (j.contains("constraints")) {
      const auto& k = j.at("constraints");
      auto& s = c.constraints;
      detail::reject_unknown(k,
                             {"room_size_m", "absorption", "min_talker_array_m", "max_talker_spoof_m",
                              "min_talker_spoof_m", "min_speaker_array_m", "min_source_surface_m",
                              "min_mic_surface_m", "mic_count", "mic_spacing_m", "talker_aim_jitter_deg",
                              "speaker_aim_jitter_deg", "matched_rooms", "max_rejections"},
                             "constraints.");
      detail::read_range(k, "room_size_m", s.room_min, s.room_max);
      detail::read_range(k, "absorption", s.absorption_min, s.absorption_max);
      detail::read_if(k, "min_talker_array_m", s.min_talker_array);
      detail::read_if(k, "max_talker_spoof_m", s.max_talker_spoof);
      detail::read_if(k, "min_talker_spoof_m", s.min_talker_spoof);
      detail::read_if(k, "min_speaker_array_m", s.min_speaker_array);
      detail::read_if(k, "min_source_surface_m", s.min_source_surface);
      detail::read_if(k, "min_mic_surface_m", s.min_mic_surface);
      detail::read_if(k, "mic_count", s.mic_count);
      detail::read_if(k, "mic_spacing_m", s.mic_spacing);
      detail::read_if(k, "talker_aim_jitter_deg", s.talker_aim_jitter_deg);
      detail::read_if(k, "speaker_aim_jitter_deg", s.speaker_aim_jitter_deg);
      detail::read_if(k, "matched_rooms", s.matched_rooms);
      detail::read_if(k, "max_rejections", s.max_rejections);
    }
    if (j.contains("simulation")) {
      const auto& k = j.at("simulation");
      auto& s = c.simulation;
      detail::reject_unknown(k,
                             {"sample_rate", "max_order", "min_relative_gain_db", "delay_taps", "speed_of_sound",
                              "talker_pattern"},
                             "simulation.");
      detail::read_if(k, "sample_rate", s.sample_rate);
      detail::read_if(k, "max_order", s.max_order);
      if (k.contains("min_relative_gain_db")) {
        const double db = k.at("min_relative_gain_db").get<double>();
        s.min_relative_gain = std::isfinite(db) ? std::pow(10.0, db / 20.0) : 0.0;
      }
      detail::read_if(k, "delay_taps", s.delay_taps);
      detail::read_if(k, "speed_of_sound", s.speed_of_sound);
      if (k.contains("talker_pattern")) {
        const auto p = k.at("talker_pattern").get<std::string>();
        if (p == "cardioid")
          s.talker_pattern = PatternKind::cardioid;
        else if (p == "omni")
          s.talker_pattern = PatternKind::omnidirectional;
        else
          throw ConfigError("talker_pattern must be cardioid or omni");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

inline DatasetConfig load_config(const std::string& path, DatasetConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  }
  return apply_config(std::move(base), j);
}

// Fully resolved configuration; feeding it back through apply_config reproduces the run.
// `overrides` (command-line values) is echoed for the audit trail and ignored on reload.
inline nlohmann::json config_snapshot(const DatasetConfig& c, const nlohmann::json& overrides = nlohmann::json::object()) {
  const auto& k = c.constraints;
  const auto& s = c.simulation;
  const double gain_db = s.min_relative_gain > 0.0 ? 20.0 * std::log10(s.min_relative_gain) : -1e300;
  nlohmann::json j = {
      {"speech_dir", c.speech_dir},
      {"noise_dir", c.noise_dir},
      {"grids_dir", c.grids_dir},
      {"utterances", c.utterances},
      {"seed", c.seed},
      {"noise_mode", to_string(c.noise_mode)},
      {"coherence_model", "spherical"},
      {"spoofing_mode", to_string(c.spoofing_mode)},
      {"genuine_room", to_string(c.genuine_room)},
      {"sample_rates", c.sample_rates},
      {"utterance_seconds", c.utterance_seconds},
      {"snr_range_db", {c.snr_min_db, c.snr_max_db}},
      {"spoof_noise", c.spoof_noise},
      {"spoof_snr_range_db", {c.spoof_snr_min_db, c.spoof_snr_max_db}},
      {"replays_per_utterance", c.replays_per_utterance},
      {"output_format", to_string(c.output_format)},
      {"output_peak", c.output_peak},
      {"diffuse_frame", c.diffuse_frame},
      {"constraints",
       {{"room_size_m", {k.room_min, k.room_max}},
        {"absorption", {k.absorption_min, k.absorption_max}},
        {"min_talker_array_m", k.min_talker_array},
        {"max_talker_spoof_m", k.max_talker_spoof},
        {"min_talker_spoof_m", k.min_talker_spoof},
        {"min_speaker_array_m", k.min_speaker_array},
        {"min_source_surface_m", k.min_source_surface},
        {"min_mic_surface_m", k.min_mic_surface},
        {"mic_count", k.mic_count},
        {"mic_spacing_m", k.mic_spacing},
        {"talker_aim_jitter_deg", k.talker_aim_jitter_deg},
        {"speaker_aim_jitter_deg", k.speaker_aim_jitter_deg},
        {"matched_rooms", k.matched_rooms},
        {"max_rejections", k.max_rejections}}},
      {"simulation",
       {{"sample_rate", s.sample_rate},
        {"max_order", s.max_order},
        {"min_relative_gain_db", gain_db},
        {"delay_taps", s.delay_taps},
        {"speed_of_sound", s.speed_of_sound},
        {"talker_pattern", s.talker_pattern == PatternKind::cardioid ? "cardioid" : "omni"}}},
  };
  j["overrides"] = overrides;
  return j;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink stderr_sink() {
  return [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
}

struct CorpusEntry {
  std::string name;  // file name, used in the manifest
  MonoSignal signal;
};

struct LoudspeakerEntry {
  std::string id;  // file stem
  std::shared_ptr<const MeasuredGrid> grid;
};

inline std::vector<std::filesystem::path> list_files(const std::string& dir, const std::string& ext) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (dir.empty() || !fs::is_directory(dir, ec)) throw CorpusError("corpus directory '" + dir + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Loads mono audio at `rate`; unreadable, silent or unsupported files are skipped with a warning.
inline std::vector<CorpusEntry> load_audio_corpus(const std::string& dir, int rate, const WarningSink& warn) {
  std::vector<CorpusEntry> out;
  for (const auto& p : list_files(dir, ".wav")) {
    try {
      const auto w = read_wav(p.string());
      MonoSignal s{w.channels.front(), w.sample_rate};
      if (!is_supported_rate(s.sample_rate))
        throw FormatError("sample rate " + std::to_string(s.sample_rate) + " not supported");
      s = resample(s, rate);
      if (!(energy(s.samples) > 0.0)) throw FormatError("file is silent");
      if (!all_finite(s.samples)) throw FormatError("non-finite samples");
      out.push_back({p.filename().string(), std::move(s)});
    } catch (const Error& e) {
      warn("skipping " + p.string() + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<LoudspeakerEntry> load_grid_corpus(const std::string& dir, int rate, const WarningSink& warn) {
  std::vector<LoudspeakerEntry> out;
  for (const auto& p : list_files(dir, ".json")) {
    try {
      out.push_back({p.stem().string(), std::make_shared<const MeasuredGrid>(load_grid(p.string(), rate))});
    } catch (const Error& e) {
      warn("skipping " + p.string() + ": " + e.what());
    }
  }
  return out;
}

// Center 2 s crop, or zero-padding at the end for short clips.
inline MonoSignal fit_length(const MonoSignal& s, std::size_t length) {
  MonoSignal out{std::vector<double>(length, 0.0), s.sample_rate};
  if (s.size() >= length) {
    const std::size_t start = (s.size() - length) / 2;
    std::copy_n(s.samples.begin() + static_cast<std::ptrdiff_t>(start), length, out.samples.begin());
  } else {
    std::copy(s.samples.begin(), s.samples.end(), out.samples.begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

inline std::vector<std::string> manifest_columns() {
  std::vector<std::string> c{"trial_id",      "label",         "loudspeaker_id", "snr_db",     "sample_rate",
                             "seed",          "utterance",     "source_file",    "noise_file", "noise_mode",
                             "spoofing_mode", "genuine_room",  "spoof_snr_db",   "output_gain", "clip_count",
                             "speed_of_sound", "directivity_eval"};
  const auto s = scene_columns();
  c.insert(c.end(), s.begin(), s.end());
  c.push_back("path");
  return c;
}

struct GenerationResult {
  Manifest manifest;
  std::size_t genuine = 0;
  std::size_t replay = 0;
  std::size_t clipped = 0;
};

namespace detail {

inline MultichannelSignal truncate(MultichannelSignal s, std::size_t length) {
  for (auto& ch : s.channels) ch.resize(length, 0.0);
  return s;
}

inline MonoSignal circular_segment(const MonoSignal& noise, std::size_t offset, std::size_t length) {
  std::vector<double> rotated(noise.samples.begin() + static_cast<std::ptrdiff_t>(offset), noise.samples.end());
  rotated.insert(rotated.end(), noise.samples.begin(), noise.samples.begin() + static_cast<std::ptrdiff_t>(offset));
  return {loop_noise(rotated, std::max(length, rotated.size()), noise.sample_rate), noise.sample_rate};
}

struct TrialNoise {
  double snr_db;
  std::size_t noise_index;
  std::size_t offset;
};

inline TrialNoise draw_noise(const RngStream& trial, double lo, double hi, const std::vector<CorpusEntry>& noises) {
  auto snr = trial.child("snr");
  auto pick = trial.child("noise");
  TrialNoise t;
  t.snr_db = snr.uniform(lo, hi);
  t.noise_index = static_cast<std::size_t>(pick.index(noises.size()));
  t.offset = static_cast<std::size_t>(pick.index(noises[t.noise_index].signal.size()));
  return t;
}

inline NoisyMix add_array_noise(const MultichannelSignal& clean, const std::vector<Vec3>& mics, const TrialNoise& tn,
                                const std::vector<CorpusEntry>& noises, const DatasetConfig& cfg,
                                const WarningSink& warn) {
  const auto& noise = noises[tn.noise_index].signal;
  if (cfg.noise_mode == NoiseMode::omnidirectional)
    return inject_omni(clean, circular_segment(noise, tn.offset, clean.length()), tn.snr_db);
  const std::size_t need = std::max<std::size_t>(mics.size() * clean.length(), 2 * cfg.diffuse_frame * mics.size());
  const auto source = circular_segment(noise, tn.offset, need);
  DiffuseOptions opt;
  opt.frame_length = cfg.diffuse_frame;
  opt.speed_of_sound = cfg.simulation.speed_of_sound;
  opt.length = clean.length();
  DiffuseDiagnostics diag;
  const auto field = synthesize_diffuse(source, mics, clean.sample_rate, opt, &diag);
  if (diag.clamped_bins > 0)
    warn("coherence matrix clamped to nearest PSD at " + std::to_string(diag.clamped_bins) + " bins");
  return inject_diffuse(clean, field, tn.snr_db);
}

struct PendingTrial {
  ManifestRow row;
  MultichannelSignal audio;  // engine rate, before output scaling
  std::string stem;
  bool genuine = false;
};

}  // namespace detail

// Generates the dataset described by `cfg` into cfg.out_dir: WAVs under wav/<rate>/,
// manifest.csv and config.resolved.json. Output bytes do not depend on cfg.jobs.
inline GenerationResult generate_dataset(const DatasetConfig& cfg, const WarningSink& warn = stderr_sink(),
                                        const nlohmann::json& overrides = nlohmann::json::object()) {
  namespace fs = std::filesystem;
  validate(cfg);
  const int rate = cfg.simulation.sample_rate;
  const auto speech = load_audio_corpus(cfg.speech_dir, rate, warn);
  const auto noises = load_audio_corpus(cfg.noise_dir, rate, warn);
  const auto grids = load_grid_corpus(cfg.grids_dir, rate, warn);
  if (speech.empty()) throw CorpusError("no usable speech files in " + cfg.speech_dir);
  if (noises.empty()) throw CorpusError("no usable noise files in " + cfg.noise_dir);
  if (grids.empty()) throw CorpusError("no usable loudspeaker grids in " + cfg.grids_dir);
  if (cfg.out_dir.empty()) throw ConfigError("no output directory given");

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  for (int r : cfg.sample_rates) fs::create_directories(fs::path(cfg.out_dir) / "wav" / std::to_string(r), ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.out_dir + ": " + ec.message());

  const auto length = static_cast<std::size_t>(std::llround(cfg.utterance_seconds * rate));
  const std::size_t per_utt = 1 + cfg.replays_per_utterance;
  std::vector<std::vector<ManifestRow>> rows(cfg.utterances);
  std::vector<std::size_t> clip_counts(cfg.utterances, 0);
  std::vector<std::exception_ptr> errors(cfg.utterances);

  auto run_utterance = [&](std::size_t u) {
    const RngStream utt = derive_stream(cfg.seed, {"utterance", std::to_string(u)});
    const auto& src = speech[u % speech.size()];
    const MonoSignal s0 = fit_length(src.signal, length);
    if (!(energy(s0.samples) > 0.0))
      throw CorpusError("utterance " + std::to_string(u) + " is silent after cropping " + src.name);
    const Scene scene = sample_scene(utt.child("scene").key(), cfg.constraints);
    const auto& sim = cfg.simulation;
    char ubuf[16];
    std::snprintf(ubuf, sizeof ubuf, "u%04zu", u);
    const std::string utag = ubuf;

    auto base_row = [&](const RngStream& trial, const std::string& label) {
      ManifestRow row;
      for (const auto& col : manifest_columns()) row[col] = "";
      row["label"] = label;
      row["seed"] = std::to_string(trial.key());
      row["utterance"] = std::to_string(u);
      row["source_file"] = src.name;
      row["noise_mode"] = to_string(cfg.noise_mode);
      row["spoofing_mode"] = to_string(cfg.spoofing_mode);
      row["genuine_room"] = to_string(cfg.genuine_room);
      row["speed_of_sound"] = format_double(sim.speed_of_sound);
      row["directivity_eval"] = "per_path_per_mic";
      put_scene(row, scene, cfg.constraints.mic_count, cfg.constraints.mic_spacing);
      return row;
    };

    std::vector<detail::PendingTrial> pending;
    pending.reserve(per_utt);

    // Genuine.
    {
      const RngStream trial = utt.child("genuine");
      const auto clean = detail::truncate(simulate_genuine(scene, s0, sim, cfg.genuine_room), length);
      const auto& array = cfg.genuine_room == GenuineRoom::env_a ? scene.array_a : scene.array_b;
      const auto tn = detail::draw_noise(trial, cfg.snr_min_db, cfg.snr_max_db, noises);
      auto mix = detail::add_array_noise(clean, array.mics, tn, noises, cfg, warn);
      detail::PendingTrial p{base_row(trial, "genuine"), std::move(mix.mixture), utag + "_genuine", true};
      p.row["snr_db"] = format_double(tn.snr_db);
      p.row["noise_file"] = noises[tn.noise_index].name;
      pending.push_back(std::move(p));
    }

    // Spoofing-microphone recording, shared by every replay of this utterance.
    MonoSignal spoofed = simulate_spoof(scene, s0, cfg.spoofing_mode, sim);
    std::string spoof_snr;
    if (cfg.spoofing_mode == SpoofingMode::reverberant && cfg.spoof_noise) {
      const RngStream stage = utt.child("spoof");
      const auto tn = detail::draw_noise(stage, cfg.spoof_snr_min_db, cfg.spoof_snr_max_db, noises);
      spoofed = inject_mono(spoofed, detail::circular_segment(noises[tn.noise_index].signal, tn.offset, spoofed.size()),
                            tn.snr_db);
      spoof_snr = format_double(tn.snr_db);
    }

    for (std::size_t j = 0; j < cfg.replays_per_utterance; ++j) {
      const RngStream trial = utt.child("replay").child(j);
      const auto& speaker = grids[j % grids.size()];
      const auto clean = detail::truncate(simulate_replay(scene, spoofed, speaker.grid, sim), length);
      const auto tn = detail::draw_noise(trial, cfg.snr_min_db, cfg.snr_max_db, noises);
      auto mix = detail::add_array_noise(clean, scene.array_b.mics, tn, noises, cfg, warn);
      detail::PendingTrial p{base_row(trial, "replay"), std::move(mix.mixture),
                             utag + "_replay" + std::to_string(j), false};
      p.row["loudspeaker_id"] = speaker.id;
      p.row["snr_db"] = format_double(tn.snr_db);
      p.row["noise_file"] = noises[tn.noise_index].name;
      p.row["spoof_snr_db"] = spoof_snr;
      pending.push_back(std::move(p));
    }

    for (auto& p : pending) {
      double peak = 0.0;
      for (const auto& ch : p.audio.channels)
        for (double v : ch) peak = std::max(peak, std::abs(v));
      const double gain = peak > 0.0 ? cfg.output_peak / peak : 1.0;
      for (auto& ch : p.audio.channels)
        for (auto& v : ch) v *= gain;
      for (int r : cfg.sample_rates) {
        MultichannelSignal out = p.audio;
        if (r != rate)
          for (auto& ch : out.channels) ch = resample(MonoSignal{ch, rate}, r).samples;
        out.sample_rate = r;
        const std::string rel = "wav/" + std::to_string(r) + "/" + p.stem + ".wav";
        const std::size_t clipped = write_wav((fs::path(cfg.out_dir) / rel).string(), WavFile::from(out, cfg.output_format));
        clip_counts[u] += clipped;
        ManifestRow row = p.row;
        row["trial_id"] = p.stem + "_" + std::to_string(r / 1000) + "k";
        row["sample_rate"] = std::to_string(r);
        row["output_gain"] = format_double(gain);
        row["clip_count"] = std::to_string(clipped);
        row["path"] = rel;
        rows[u].push_back(std::move(row));
      }
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(cfg.jobs, 1, std::max<std::size_t>(cfg.utterances, 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t u = next++; u < cfg.utterances; u = next++) {
      try {
        run_utterance(u);
      } catch (...) {
        errors[u] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  GenerationResult result;
  result.manifest.columns = manifest_columns();
  for (std::size_t u = 0; u < cfg.utterances; ++u) {
    result.clipped += clip_counts[u];
    for (auto& r : rows[u]) {
      if (r["sample_rate"] == std::to_string(rate)) (r["label"] == "genuine" ? result.genuine : result.replay)++;
      result.manifest.rows.push_back(std::move(r));
    }
  }
  if (result.manifest.rows.empty()) throw Error("generation produced no trials");
  write_manifest((fs::path(cfg.out_dir) / "manifest.csv").string(), result.manifest);
  std::ofstream snap(fs::path(cfg.out_dir) / "config.resolved.json", std::ios::binary | std::ios::trunc);
  snap << config_snapshot(cfg, overrides).dump(2) << '\n';
  if (result.clipped > 0) warn(std::to_string(result.clipped) + " samples clipped");
  return result;
}

}  // namespace replaysim
