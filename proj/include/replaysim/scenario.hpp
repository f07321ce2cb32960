#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "replaysim/directivity.hpp"
#include "replaysim/dsp.hpp"
#include "replaysim/error.hpp"
#include "replaysim/geometry.hpp"
#include "replaysim/rir.hpp"
#include "replaysim/rng.hpp"

namespace replaysim {

enum class SpoofingMode { reverberant, anechoic };
enum class GenuineRoom { env_a, env_b };

inline std::string to_string(SpoofingMode m) { return m == SpoofingMode::reverberant ? "reverberant" : "anechoic"; }
inline std::string to_string(GenuineRoom r) { return r == GenuineRoom::env_a ? "env_a" : "env_b"; }

inline SpoofingMode parse_spoofing_mode(const std::string& s) {
  if (s == "reverberant") return SpoofingMode::reverberant;
  if (s == "anechoic") return SpoofingMode::anechoic;
  throw ConfigError("unknown spoofing mode '" + s + "' (expected reverberant or anechoic)");
}

inline GenuineRoom parse_genuine_room(const std::string& s) {
  if (s == "env_a") return GenuineRoom::env_a;
  if (s == "env_b") return GenuineRoom::env_b;
  throw ConfigError("unknown genuine room '" + s + "' (expected env_a or env_b)");
}

// Horizontal uniform linear array.
struct ArrayPlacement {
  Vec3 center;
  double azimuth = 0.0;  // direction of the array axis
  std::vector<Vec3> mics;

  // Broadside facing, used as boresight for directional microphones.
  Direction broadside() const { return Direction::normalized(azimuth + std::numbers::pi / 2, 0.0); }
};

inline ArrayPlacement make_array(Vec3 center, double azimuth, std::size_t count, double spacing) {
  if (count == 0) throw InvalidArgument("array needs at least one microphone");
  ArrayPlacement a{center, azimuth, {}};
  const Vec3 axis{std::cos(azimuth), std::sin(azimuth), 0.0};
  for (std::size_t i = 0; i < count; ++i) {
    const double offset = (static_cast<double>(i) - (static_cast<double>(count) - 1.0) / 2.0) * spacing;
    a.mics.push_back(center + offset * axis);
  }
  return a;
}

struct SceneConstraints {
  double room_min = 3.0;
  double room_max = 6.0;
  double absorption_min = 0.1;
  double absorption_max = 0.6;
  double min_talker_array = 1.0;     // ||p_tlk - p_asv|| > this
  double max_talker_spoof = 1.0;     // ||p_tlk - p_spf|| < this
  double min_talker_spoof = 0.1;     // keeps the spoofing microphone off the talker
  double min_speaker_array = 1.0;    // ||p_spk - p_asv|| > this
  double min_source_surface = 1.0;   // talker and loudspeaker
  double min_mic_surface = 0.1;      // every microphone
  std::size_t mic_count = 2;
  double mic_spacing = 0.05;
  double talker_aim_jitter_deg = 45.0;
  double speaker_aim_jitter_deg = 10.0;
  // Env-B copies Env-A's geometry and absorption.
  bool matched_rooms = false;
  std::size_t max_rejections = 10000;
};

// Throws ConfigError when no placement can satisfy the constraints.
inline void check_feasible(const SceneConstraints& c) {
  if (!(c.room_min > 0.0 && c.room_max >= c.room_min)) throw ConfigError("room size range is empty");
  if (!(c.absorption_min > 0.0 && c.absorption_max <= 1.0 && c.absorption_max >= c.absorption_min))
    throw ConfigError("absorption range must lie within (0, 1]");
  if (c.mic_count == 0) throw ConfigError("array needs at least one microphone");
  if (!(c.mic_spacing > 0.0) && c.mic_count > 1) throw ConfigError("microphone spacing must be positive");
  if (!(c.room_max > 2.0 * c.min_source_surface))
    throw ConfigError("rooms are too small to keep sources " + std::to_string(c.min_source_surface) +
                      " m from every surface");
  const double aperture = c.mic_spacing * static_cast<double>(c.mic_count - 1);
  if (!(c.room_max > aperture + 2.0 * c.min_mic_surface)) throw ConfigError("array does not fit in the rooms");
  if (!(c.max_talker_spoof > c.min_talker_spoof && c.min_talker_spoof > 0.0))
    throw ConfigError("talker-to-spoofing-microphone distance range is empty");
  const double diag = std::sqrt(3.0) * c.room_max;
  if (!(diag > c.min_talker_array) || !(diag > c.min_speaker_array))
    throw ConfigError("source-to-array distance constraint exceeds the room diagonal");
}

// One sampled acoustic world. The talker, spoofing microphone and array_a
// live in Env-A; the loudspeaker and array_b in Env-B. talker_b is the talker
// used when the genuine class is recorded in Env-B.
struct Scene {
  std::uint64_t seed = 0;
  RoomSpec room_a, room_b;
  Vec3 talker;
  Direction talker_orientation;
  Vec3 spoof_mic;
  ArrayPlacement array_a;
  Vec3 talker_b;
  Direction talker_b_orientation;
  ArrayPlacement array_b;
  Vec3 loudspeaker;
  Direction loudspeaker_orientation;
};

// Lists every violated constraint; empty means the scene is valid.
inline std::vector<std::string> scene_violations(const Scene& s, const SceneConstraints& c) {
  std::vector<std::string> v;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) v.push_back(what);
  };
  for (const auto* room : {&s.room_a, &s.room_b}) {
    const std::string name = room == &s.room_a ? "env_a" : "env_b";
    for (double d : room->dims()) check(d >= c.room_min && d <= c.room_max, name + " dimension out of range");
    for (double a : room->absorption)
      check(a >= c.absorption_min && a <= c.absorption_max, name + " absorption out of range");
  }
  auto check_array = [&](const ArrayPlacement& a, const RoomSpec& room, const std::string& name) {
    check(a.mics.size() == c.mic_count, name + " has the wrong microphone count");
    for (const auto& m : a.mics) check(room.contains(m, c.min_mic_surface), name + " microphone outside its room");
    for (std::size_t i = 1; i < a.mics.size(); ++i)
      check(std::abs(distance(a.mics[i], a.mics[i - 1]) - c.mic_spacing) < 1e-9, name + " spacing mismatch");
  };
  check_array(s.array_a, s.room_a, "array_a");
  check_array(s.array_b, s.room_b, "array_b");
  check(s.room_a.distance_to_nearest_surface(s.talker) > c.min_source_surface, "talker too close to a surface");
  check(s.room_b.distance_to_nearest_surface(s.talker_b) > c.min_source_surface,
        "env_b talker too close to a surface");
  check(s.room_b.distance_to_nearest_surface(s.loudspeaker) > c.min_source_surface,
        "loudspeaker too close to a surface");
  check(distance(s.talker, s.array_a.center) > c.min_talker_array, "talker too close to array_a");
  check(distance(s.talker_b, s.array_b.center) > c.min_talker_array, "env_b talker too close to array_b");
  const double ts = distance(s.talker, s.spoof_mic);
  check(ts < c.max_talker_spoof && ts >= c.min_talker_spoof, "spoofing microphone distance out of range");
  check(s.room_a.contains(s.spoof_mic, c.min_mic_surface), "spoofing microphone outside env_a");
  check(distance(s.loudspeaker, s.array_b.center) > c.min_speaker_array, "loudspeaker too close to array_b");
  return v;
}

namespace detail {

inline RoomSpec sample_room(RngStream& rng, const SceneConstraints& c) {
  RoomSpec r;
  r.width = rng.uniform(c.room_min, c.room_max);
  r.length = rng.uniform(c.room_min, c.room_max);
  r.height = rng.uniform(c.room_min, c.room_max);
  for (auto& a : r.absorption) a = rng.uniform(c.absorption_min, c.absorption_max);
  return r;
}

inline Vec3 sample_point(RngStream& rng, const RoomSpec& room, double margin) {
  return {rng.uniform(margin, room.width - margin), rng.uniform(margin, room.length - margin),
          rng.uniform(margin, room.height - margin)};
}

inline Vec3 sample_unit_vector(RngStream& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(-std::numbers::pi, std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

// Aims from `from` towards `to` with uniform azimuth/elevation jitter.
inline Direction aim(RngStream& rng, Vec3 from, Vec3 to, double jitter_deg, bool jitter_elevation) {
  const Direction base = Direction::from_vector(to - from);
  const double j = deg2rad(jitter_deg);
  const double daz = rng.uniform(-j, j);
  const double del = jitter_elevation ? rng.uniform(-j, j) : 0.0;
  return Direction::normalized(base.azimuth + daz, base.elevation + del);
}

inline ArrayPlacement sample_array(RngStream& rng, const RoomSpec& room, const SceneConstraints& c) {
  const double half_aperture = c.mic_spacing * static_cast<double>(c.mic_count - 1) / 2.0;
  const Vec3 center = sample_point(rng, room, c.min_mic_surface + half_aperture);
  const double az = rng.uniform(-std::numbers::pi, std::numbers::pi);
  return make_array(center, az, c.mic_count, c.mic_spacing);
}

}  // namespace detail

// Rejection-samples a scene satisfying `c`; identical seeds give identical scenes.
inline Scene sample_scene(std::uint64_t seed, const SceneConstraints& c = {}) {
  check_feasible(c);
  Scene s;
  s.seed = seed;
  const RngStream root(seed);
  auto rooms = root.child("rooms");
  s.room_a = detail::sample_room(rooms, c);
  s.room_b = c.matched_rooms ? s.room_a : detail::sample_room(rooms, c);

  std::size_t rejections = 0;
  auto reject = [&](const char* what) {
    if (++rejections > c.max_rejections)
      throw ConfigError(std::string("scene constraints infeasible: more than ") + std::to_string(c.max_rejections) +
                        " rejections (last: " + what + ")");
  };

  auto env_a = root.child("env_a");
  for (;;) {
    s.talker = detail::sample_point(env_a, s.room_a, c.min_source_surface);
    s.array_a = detail::sample_array(env_a, s.room_a, c);
    if (s.room_a.distance_to_nearest_surface(s.talker) <= c.min_source_surface) {
      reject("talker surface distance");
      continue;
    }
    if (distance(s.talker, s.array_a.center) <= c.min_talker_array) {
      reject("talker-array distance");
      continue;
    }
    s.talker_orientation = detail::aim(env_a, s.talker, s.array_a.center, c.talker_aim_jitter_deg, false);
    // Spoofing microphone in the talker's frontal half-space.
    const Vec3 dir = detail::sample_unit_vector(env_a);
    const double r = env_a.uniform(c.min_talker_spoof, c.max_talker_spoof);
    s.spoof_mic = s.talker + r * dir;
    if (dot(dir, s.talker_orientation.unit()) < 0.0 || !s.room_a.contains(s.spoof_mic, c.min_mic_surface) ||
        !(distance(s.talker, s.spoof_mic) < c.max_talker_spoof)) {
      reject("spoofing microphone placement");
      continue;
    }
    bool mics_ok = true;
    for (const auto& m : s.array_a.mics) mics_ok = mics_ok && s.room_a.contains(m, c.min_mic_surface);
    if (!mics_ok) {
      reject("array_a placement");
      continue;
    }
    break;
  }

  auto env_b = root.child("env_b");
  for (;;) {
    s.array_b = detail::sample_array(env_b, s.room_b, c);
    s.loudspeaker = detail::sample_point(env_b, s.room_b, c.min_source_surface);
    s.talker_b = detail::sample_point(env_b, s.room_b, c.min_source_surface);
    if (s.room_b.distance_to_nearest_surface(s.loudspeaker) <= c.min_source_surface ||
        s.room_b.distance_to_nearest_surface(s.talker_b) <= c.min_source_surface) {
      reject("env_b source surface distance");
      continue;
    }
    if (distance(s.loudspeaker, s.array_b.center) <= c.min_speaker_array ||
        distance(s.talker_b, s.array_b.center) <= c.min_talker_array) {
      reject("env_b source-array distance");
      continue;
    }
    bool mics_ok = true;
    for (const auto& m : s.array_b.mics) mics_ok = mics_ok && s.room_b.contains(m, c.min_mic_surface);
    if (!mics_ok) {
      reject("array_b placement");
      continue;
    }
    s.loudspeaker_orientation = detail::aim(env_b, s.loudspeaker, s.array_b.center, c.speaker_aim_jitter_deg, true);
    s.talker_b_orientation = detail::aim(env_b, s.talker_b, s.array_b.center, c.talker_aim_jitter_deg, false);
    break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Signal chains
// ---------------------------------------------------------------------------

struct SimulationOptions {
  int sample_rate = 48000;
  int max_order = kDefaultMaxOrder;
  double min_relative_gain = kDefaultMinRelativeGain;
  std::size_t delay_taps = kDefaultDelayTaps;
  double speed_of_sound = kSpeedOfSound;
  PatternKind talker_pattern = PatternKind::cardioid;
  // Measured microphone responses; null means omnidirectional.
  std::shared_ptr<const MeasuredGrid> asv_mic_grid;
  std::shared_ptr<const MeasuredGrid> spoof_mic_grid;

  RenderOptions render() const { return {sample_rate, delay_taps, speed_of_sound, min_relative_gain}; }
};

namespace detail {

inline DirectivityPattern talker_pattern(const SimulationOptions& o, Direction orientation) {
  return o.talker_pattern == PatternKind::cardioid ? DirectivityPattern::cardioid(orientation)
                                                   : DirectivityPattern::omni();
}

inline std::vector<DirectivityPattern> asv_patterns(const SimulationOptions& o, const ArrayPlacement& a) {
  const DirectivityPattern p =
      o.asv_mic_grid ? DirectivityPattern::measured(o.asv_mic_grid, a.broadside()) : DirectivityPattern::omni();
  return std::vector<DirectivityPattern>(a.mics.size(), p);
}

inline RoomSpec with_speed(RoomSpec r, double c) {
  r.speed_of_sound = c;
  return r;
}

inline MultichannelSignal convolve_channels(const MonoSignal& source, std::span<const RoomImpulseResponse> rirs) {
  MultichannelSignal out;
  out.sample_rate = source.sample_rate;
  for (const auto& r : rirs) out.channels.push_back(fast_convolve(std::span<const double>(source.samples), r.taps));
  return out;
}

}  // namespace detail

// Talker -> ASV array responses in the genuine room.
inline std::vector<RoomImpulseResponse> genuine_rirs(const Scene& scene, const SimulationOptions& o,
                                                     GenuineRoom room = GenuineRoom::env_a) {
  const bool in_a = room == GenuineRoom::env_a;
  const RoomSpec& spec = in_a ? scene.room_a : scene.room_b;
  const Vec3 talker = in_a ? scene.talker : scene.talker_b;
  const ArrayPlacement& array = in_a ? scene.array_a : scene.array_b;
  const auto paths = enumerate_images(detail::with_speed(spec, o.speed_of_sound), talker, o.max_order);
  const auto pattern = detail::talker_pattern(o, in_a ? scene.talker_orientation : scene.talker_b_orientation);
  const auto mic_patterns = detail::asv_patterns(o, array);
  return render_rirs(paths, array.mics, pattern, mic_patterns, o.render());
}

// Talker -> spoofing microphone response in Env-A.
inline RoomImpulseResponse spoof_rir(const Scene& scene, const SimulationOptions& o) {
  const auto paths = enumerate_images(detail::with_speed(scene.room_a, o.speed_of_sound), scene.talker, o.max_order);
  const auto mic = o.spoof_mic_grid
                       ? DirectivityPattern::measured(o.spoof_mic_grid,
                                                      Direction::from_vector(scene.talker - scene.spoof_mic))
                       : DirectivityPattern::omni();
  return render_rir(paths, scene.spoof_mic, detail::talker_pattern(o, scene.talker_orientation), mic, o.render());
}

// Loudspeaker -> ASV array responses in Env-B.
inline std::vector<RoomImpulseResponse> replay_rirs(const Scene& scene, std::shared_ptr<const MeasuredGrid> loudspeaker,
                                                    const SimulationOptions& o) {
  if (loudspeaker && loudspeaker->sample_rate != o.sample_rate)
    throw InvalidArgument("loudspeaker grid rate differs from the engine rate");
  const auto paths =
      enumerate_images(detail::with_speed(scene.room_b, o.speed_of_sound), scene.loudspeaker, o.max_order);
  const auto pattern = loudspeaker ? DirectivityPattern::measured(std::move(loudspeaker), scene.loudspeaker_orientation)
                                   : DirectivityPattern::omni();
  return render_rirs(paths, scene.array_b.mics, pattern, detail::asv_patterns(o, scene.array_b), o.render());
}

inline void require_engine_rate(const MonoSignal& s, const SimulationOptions& o) {
  validate(s);
  if (s.sample_rate != o.sample_rate) throw InvalidArgument("source is not at the engine sample rate");
  if (s.samples.empty()) throw InvalidArgument("source signal is empty");
}

// X_gen: the source through every talker-to-array path.
inline MultichannelSignal simulate_genuine(const Scene& scene, const MonoSignal& source, const SimulationOptions& o = {},
                                           GenuineRoom room = GenuineRoom::env_a) {
  require_engine_rate(source, o);
  if (!(energy(source.samples) > 0.0)) throw InvalidArgument("source signal is silent");
  const auto rirs = genuine_rirs(scene, o, room);
  return detail::convolve_channels(source, rirs);
}

// Y_spf: the spoofing-microphone recording, or the source itself in anechoic mode.
inline MonoSignal simulate_spoof(const Scene& scene, const MonoSignal& source, SpoofingMode mode,
                                 const SimulationOptions& o = {}) {
  if (mode == SpoofingMode::anechoic) return source;
  require_engine_rate(source, o);
  const auto rir = spoof_rir(scene, o);
  return fast_convolve(source, rir.taps);
}

// X_rep: the spoofed signal played through the loudspeaker in Env-B.
inline MultichannelSignal simulate_replay(const Scene& scene, const MonoSignal& spoofed,
                                          std::shared_ptr<const MeasuredGrid> loudspeaker,
                                          const SimulationOptions& o = {}) {
  require_engine_rate(spoofed, o);
  const auto rirs = replay_rirs(scene, std::move(loudspeaker), o);
  return detail::convolve_channels(spoofed, rirs);
}

}  // namespace replaysim
