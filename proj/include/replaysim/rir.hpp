#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "replaysim/directivity.hpp"
#include "replaysim/dsp.hpp"
#include "replaysim/error.hpp"
#include "replaysim/geometry.hpp"

namespace replaysim {

inline constexpr double kSpeedOfSound = 343.0;
// Order at which a path off surfaces of mean absorption 0.35 has lost 60 dB.
inline constexpr int kDefaultMaxOrder = 32;
// Reflected paths whose surface gain (direct path = 1) is below this are not rendered (-60 dB).
inline constexpr double kDefaultMinRelativeGain = 1e-3;

// Surface order used for absorption: x=0, x=W, y=0, y=L, floor z=0, ceiling z=H.
enum Surface : std::size_t { kWallX0 = 0, kWallX1, kWallY0, kWallY1, kFloor, kCeiling };

// Shoebox spanning [0,width] x [0,length] x [0,height].
struct RoomSpec {
  double width = 4.0;
  double length = 5.0;
  double height = 3.0;
  std::array<double, 6> absorption{0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
  double speed_of_sound = kSpeedOfSound;

  std::array<double, 3> dims() const { return {width, length, height}; }

  // Strictly inside with at least `margin` metres to every surface.
  bool contains(Vec3 p, double margin = 0.0) const {
    return p.x > margin && p.x < width - margin && p.y > margin && p.y < length - margin &&
           p.z > margin && p.z < height - margin;
  }

  double distance_to_nearest_surface(Vec3 p) const {
    return std::min({p.x, width - p.x, p.y, length - p.y, p.z, height - p.z});
  }
};

inline void validate(const RoomSpec& room) {
  if (!(room.width > 0.0 && room.length > 0.0 && room.height > 0.0))
    throw InvalidArgument("room dimensions must be positive");
  for (double a : room.absorption)
    if (!(a > 0.0 && a <= 1.0)) throw InvalidArgument("absorption must lie in (0, 1]");
  if (!(room.speed_of_sound > 0.0)) throw InvalidArgument("speed of sound must be positive");
}

// One mirror-image source. Along each axis the image is (1 - 2 parity) * s + 2 * index * dim,
// which takes |2 index - parity| reflections.
struct ImagePath {
  Vec3 image_position;
  int reflection_order = 0;
  double reflection_gain = 1.0;
  std::array<int, 3> index{0, 0, 0};
  std::array<int, 3> parity{0, 0, 0};

  // Departure direction at the real source for a ray arriving along `image_to_receiver`.
  Vec3 departure_vector(Vec3 image_to_receiver) const {
    return {parity[0] ? -image_to_receiver.x : image_to_receiver.x,
            parity[1] ? -image_to_receiver.y : image_to_receiver.y,
            parity[2] ? -image_to_receiver.z : image_to_receiver.z};
  }
};

// All images with reflection order <= max_order, sorted by order, then lattice index.
inline std::vector<ImagePath> enumerate_images(const RoomSpec& room, Vec3 source, int max_order) {
  validate(room);
  if (max_order < 0) throw InvalidArgument("max_order must be non-negative");
  if (!room.contains(source)) throw InvalidArgument("source must lie strictly inside the room");
  const auto dims = room.dims();
  const std::array<double, 3> s{source.x, source.y, source.z};
  std::array<double, 6> wall_gain;
  for (std::size_t i = 0; i < 6; ++i) wall_gain[i] = std::sqrt(1.0 - room.absorption[i]);

  // Per-axis candidates: (index, parity) pairs with |2n - q| <= max_order.
  struct AxisImage {
    int index, parity, order;
    double coord, gain;
  };
  std::array<std::vector<AxisImage>, 3> axes;
  for (std::size_t a = 0; a < 3; ++a) {
    for (int n = -(max_order + 1) / 2 - 1; n <= max_order / 2 + 1; ++n) {
      for (int q = 0; q <= 1; ++q) {
        const int order = std::abs(2 * n - q);
        if (order > max_order) continue;
        const int low_hits = std::abs(n - q);
        const int high_hits = std::abs(n);
        const double g = std::pow(wall_gain[2 * a], low_hits) * std::pow(wall_gain[2 * a + 1], high_hits);
        axes[a].push_back({n, q, order, (1 - 2 * q) * s[a] + 2.0 * n * dims[a], g});
      }
    }
  }

  std::vector<ImagePath> paths;
  for (const auto& ix : axes[0])
    for (const auto& iy : axes[1]) {
      if (ix.order + iy.order > max_order) continue;
      for (const auto& iz : axes[2]) {
        const int order = ix.order + iy.order + iz.order;
        if (order > max_order) continue;
        ImagePath p;
        p.image_position = {ix.coord, iy.coord, iz.coord};
        p.reflection_order = order;
        p.reflection_gain = ix.gain * iy.gain * iz.gain;
        p.index = {ix.index, iy.index, iz.index};
        p.parity = {ix.parity, iy.parity, iz.parity};
        paths.push_back(p);
      }
    }
  std::stable_sort(paths.begin(), paths.end(),
                   [](const ImagePath& a, const ImagePath& b) { return a.reflection_order < b.reflection_order; });
  return paths;
}

struct RenderOptions {
  int sample_rate = 48000;
  std::size_t delay_taps = kDefaultDelayTaps;
  double speed_of_sound = kSpeedOfSound;
  // 0 renders every path.
  double min_relative_gain = kDefaultMinRelativeGain;
};

struct RoomImpulseResponse {
  std::vector<double> taps;
  int sample_rate = 48000;
};

// Time-domain RIR from a source to one receiver: every path contributes a
// fractional-delay kernel at distance/c, scaled by reflection gain, 1/distance
// and both directivities. Measured directivities filter their paths with the
// nearest grid IR; paths sharing a grid entry are filtered together.
inline RoomImpulseResponse render_rir(std::span<const ImagePath> paths, Vec3 receiver,
                                      const DirectivityPattern& source_pattern,
                                      const DirectivityPattern& receiver_pattern, const RenderOptions& opt = {}) {
  if (!(opt.sample_rate > 0)) throw InvalidArgument("sample rate must be positive");
  if (paths.empty()) throw InvalidArgument("render_rir needs at least one path");
  const double samples_per_metre = opt.sample_rate / opt.speed_of_sound;
  const std::size_t half = opt.delay_taps / 2;

  auto rendered = [&](const ImagePath& p) { return p.reflection_order == 0 || p.reflection_gain >= opt.min_relative_gain; };
  double max_distance = 0.0;
  for (const auto& p : paths) {
    const double d = distance(p.image_position, receiver);
    if (!(d > 0.0)) throw InvalidArgument("path with zero source-receiver distance");
    if (rendered(p)) max_distance = std::max(max_distance, d);
  }

  const std::size_t base_len = static_cast<std::size_t>(std::ceil(max_distance * samples_per_metre)) + half + 2;
  const std::size_t src_ir = source_pattern.is_measured() ? source_pattern.grid().ir_length() : 1;
  const std::size_t rcv_ir = receiver_pattern.is_measured() ? receiver_pattern.grid().ir_length() : 1;

  // Sparse delay-line responses keyed by (source entry, receiver entry).
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> groups;
  for (const auto& p : paths) {
    if (!rendered(p)) continue;
    const Vec3 v = receiver - p.image_position;
    const double d = v.norm();
    const Vec3 departure = p.departure_vector(v);
    const Vec3 arrival = -1.0 * v;
    double gain = p.reflection_gain / d;
    std::size_t src_entry = 0, rcv_entry = 0;
    if (source_pattern.is_measured())
      src_entry = source_pattern.entry(departure);
    else
      gain *= source_pattern.gain(Direction::from_vector(departure));
    if (receiver_pattern.is_measured())
      rcv_entry = receiver_pattern.entry(arrival);
    else
      gain *= receiver_pattern.gain(Direction::from_vector(arrival));
    if (gain == 0.0) continue;
    auto& buf = groups[{src_entry, rcv_entry}];
    if (buf.empty()) buf.assign(base_len, 0.0);
    fractional_delay_kernel(d * samples_per_metre, opt.delay_taps).accumulate(buf, gain);
  }

  RoomImpulseResponse rir;
  rir.sample_rate = opt.sample_rate;
  rir.taps.assign(base_len + src_ir - 1 + rcv_ir - 1, 0.0);
  for (const auto& [key, buf] : groups) {
    std::vector<double> filtered = buf;
    if (source_pattern.is_measured())
      filtered = fast_convolve(std::span<const double>(filtered), source_pattern.grid().entries[key.first].ir);
    if (receiver_pattern.is_measured())
      filtered = fast_convolve(std::span<const double>(filtered), receiver_pattern.grid().entries[key.second].ir);
    for (std::size_t i = 0; i < filtered.size(); ++i) rir.taps[i] += filtered[i];
  }
  return rir;
}

// Renders one RIR per receiver, zero-padded to a common length.
inline std::vector<RoomImpulseResponse> render_rirs(std::span<const ImagePath> paths, std::span<const Vec3> receivers,
                                                    const DirectivityPattern& source_pattern,
                                                    std::span<const DirectivityPattern> receiver_patterns,
                                                    const RenderOptions& opt = {}) {
  if (receiver_patterns.size() != receivers.size())
    throw InvalidArgument("one directivity per receiver is required");
  std::vector<RoomImpulseResponse> out;
  std::size_t len = 0;
  for (std::size_t i = 0; i < receivers.size(); ++i) {
    out.push_back(render_rir(paths, receivers[i], source_pattern, receiver_patterns[i], opt));
    len = std::max(len, out.back().taps.size());
  }
  for (auto& r : out) r.taps.resize(len, 0.0);
  return out;
}

// Direct-path delay in samples.
inline double direct_delay_samples(Vec3 source, Vec3 receiver, int sample_rate, double c = kSpeedOfSound) {
  return distance(source, receiver) / c * sample_rate;
}

// Reverberation time from Schroeder backward integration: a least-squares
// line through the -5 dB..-35 dB part of the decay curve, extrapolated to 60 dB.
inline double rt60_estimate(std::span<const double> rir, int sample_rate) {
  if (!(sample_rate > 0)) throw InvalidArgument("sample rate must be positive");
  std::vector<double> edc(rir.size());
  double acc = 0.0;
  for (std::size_t i = rir.size(); i-- > 0;) {
    acc += rir[i] * rir[i];
    edc[i] = acc;
  }
  if (!(acc > 0.0)) throw InvalidArgument("rt60_estimate of a silent impulse response");
  const double total = acc;
  auto level_db = [&](std::size_t i) { return edc[i] > 0.0 ? 10.0 * std::log10(edc[i] / total) : -400.0; };

  // Index rir.size() stands for the silence just past the end (-inf dB).
  const std::size_t end = rir.size();
  std::size_t i5 = end, i35 = end;
  for (std::size_t i = 0; i < end; ++i) {
    const double l = level_db(i);
    if (i5 == end && l <= -5.0) i5 = i;
    if (l <= -35.0) {
      i35 = i;
      break;
    }
  }
  if (i35 == end && end - i5 > 2)
    throw NumericalError("decay curve only reaches " + std::to_string(level_db(end - 1)) +
                         " dB before the response ends; need -35 dB for the fit");
  if (i35 <= i5 + 2) {
    // Decay faster than the sampling grid resolves: bound it by the crossing spacing.
    const double span = static_cast<double>(std::max<std::size_t>(i35 - i5, 1));
    return 2.0 * span / sample_rate;
  }
  // Least-squares slope of level (dB) against time over [i5, i35].
  double st = 0, sl = 0, stt = 0, stl = 0;
  const double n = static_cast<double>(i35 - i5 + 1);
  for (std::size_t i = i5; i <= i35; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double l = level_db(i);
    st += t;
    sl += l;
    stt += t * t;
    stl += t * l;
  }
  const double slope = (n * stl - st * sl) / (n * stt - st * st);
  if (!(slope < 0.0)) throw NumericalError("decay curve has non-negative slope");
  return -60.0 / slope;
}

inline double rt60_estimate(const RoomImpulseResponse& rir) { return rt60_estimate(rir.taps, rir.sample_rate); }

}  // namespace replaysim
