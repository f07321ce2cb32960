#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "replaysim/dsp.hpp"
#include "replaysim/error.hpp"
#include "replaysim/geometry.hpp"

namespace replaysim {

enum class PatternKind { omnidirectional, cardioid, measured };

inline std::string to_string(PatternKind k) {
  switch (k) {
    case PatternKind::omnidirectional: return "omni";
    case PatternKind::cardioid: return "cardioid";
    case PatternKind::measured: return "measured";
  }
  return "unknown";
}

struct AnalyticPattern {
  PatternKind kind = PatternKind::omnidirectional;
  Direction orientation;
};

// First-order cardioid 0.5 (1 + cos g), g the angle between `d` and the boresight.
// Both directions are in world coordinates.
inline double analytic_gain(const AnalyticPattern& pattern, const Direction& d) {
  switch (pattern.kind) {
    case PatternKind::omnidirectional: return 1.0;
    case PatternKind::cardioid: {
      const double c = std::clamp(dot(d.unit(), pattern.orientation.unit()), -1.0, 1.0);
      return 0.5 * (1.0 + c);
    }
    case PatternKind::measured: break;
  }
  throw InvalidArgument("analytic_gain called on a measured pattern");
}

struct GridEntry {
  Direction direction;
  std::vector<double> ir;
};

// Direction-indexed impulse responses, directions in the element's local frame.
struct MeasuredGrid {
  std::string name;
  int sample_rate = 48000;
  std::vector<GridEntry> entries;

  std::size_t ir_length() const { return entries.empty() ? 0 : entries.front().ir.size(); }
};

inline void validate(const MeasuredGrid& g) {
  if (g.entries.size() < 4) throw FormatError("grid '" + g.name + "' needs at least 4 entries");
  if (g.sample_rate <= 0) throw FormatError("grid '" + g.name + "' has a non-positive sample rate");
  const std::size_t len = g.entries.front().ir.size();
  if (len == 0) throw FormatError("grid '" + g.name + "' has an empty impulse response");
  for (std::size_t i = 0; i < g.entries.size(); ++i) {
    const auto& e = g.entries[i];
    if (e.ir.size() != len) throw FormatError("grid '" + g.name + "' mixes impulse response lengths");
    if (!all_finite(e.ir)) throw FormatError("grid '" + g.name + "' has non-finite samples");
    for (std::size_t j = 0; j < i; ++j)
      if (angular_distance(e.direction, g.entries[j].direction) < 1e-9)
        throw FormatError("grid '" + g.name + "' repeats a direction");
  }
}

// Index of the entry nearest to `d` by great-circle angle; ties go to the lower index.
inline std::size_t grid_lookup_index(const MeasuredGrid& grid, const Direction& d) {
  if (grid.entries.empty()) throw InvalidArgument("lookup in an empty grid");
  const Vec3 q = d.unit();
  std::size_t best = 0;
  double best_cos = -2.0;
  for (std::size_t i = 0; i < grid.entries.size(); ++i) {
    // Larger cosine means smaller angle; strict comparison keeps the lower index on ties.
    const double c = dot(q, grid.entries[i].direction.unit());
    if (c > best_cos + 1e-12) {
      best_cos = c;
      best = i;
    }
  }
  return best;
}

inline const std::vector<double>& grid_lookup(const MeasuredGrid& grid, const Direction& d) {
  return grid.entries[grid_lookup_index(grid, d)].ir;
}

inline MeasuredGrid resample_grid(const MeasuredGrid& g, int target_rate) {
  if (g.sample_rate == target_rate) return g;
  MeasuredGrid out{g.name, target_rate, {}};
  out.entries.reserve(g.entries.size());
  for (const auto& e : g.entries)
    out.entries.push_back({e.direction, resample(MonoSignal{e.ir, g.sample_rate}, target_rate).samples});
  return out;
}

// Grid document: {"name": str, "fs": int, "entries": [{"azimuth_deg", "elevation_deg", "ir": [...]}]}
inline MeasuredGrid parse_grid(const nlohmann::json& doc) {
  try {
    MeasuredGrid g;
    g.name = doc.at("name").get<std::string>();
    g.sample_rate = doc.at("fs").get<int>();
    for (const auto& e : doc.at("entries"))
      g.entries.push_back({Direction::from_degrees(e.at("azimuth_deg").get<double>(),
                                                   e.at("elevation_deg").get<double>()),
                           e.at("ir").get<std::vector<double>>()});
    validate(g);
    return g;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed directivity grid: ") + ex.what());
  }
}

inline nlohmann::json grid_to_json(const MeasuredGrid& g) {
  nlohmann::json doc;
  doc["name"] = g.name;
  doc["fs"] = g.sample_rate;
  doc["entries"] = nlohmann::json::array();
  for (const auto& e : g.entries)
    doc["entries"].push_back({{"azimuth_deg", e.direction.azimuth * 180.0 / std::numbers::pi},
                              {"elevation_deg", e.direction.elevation * 180.0 / std::numbers::pi},
                              {"ir", e.ir}});
  return doc;
}

// Loads a grid file and brings it to `engine_rate`.
inline MeasuredGrid load_grid(const std::string& path, int engine_rate) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open directivity grid " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError("cannot parse directivity grid " + path + ": " + ex.what());
  }
  return resample_grid(parse_grid(doc), engine_rate);
}

// Any directivity the renderer understands. Analytic patterns scale a path;
// measured ones filter it with the nearest grid IR.
class DirectivityPattern {
public:
  DirectivityPattern() = default;

  static DirectivityPattern omni() { return {}; }

  static DirectivityPattern cardioid(Direction orientation) {
    DirectivityPattern p;
    p.analytic_ = {PatternKind::cardioid, orientation};
    return p;
  }

  static DirectivityPattern measured(std::shared_ptr<const MeasuredGrid> grid, Direction orientation) {
    if (!grid) throw InvalidArgument("measured pattern needs a grid");
    DirectivityPattern p;
    p.analytic_ = {PatternKind::measured, orientation};
    p.grid_ = std::move(grid);
    return p;
  }

  PatternKind kind() const { return analytic_.kind; }
  const Direction& orientation() const { return analytic_.orientation; }
  bool is_measured() const { return analytic_.kind == PatternKind::measured; }
  const MeasuredGrid& grid() const { return *grid_; }

  // Scalar gain towards a world-frame direction (analytic patterns only).
  double gain(const Direction& world) const { return analytic_gain(analytic_, world); }

  // Grid entry for a world-frame direction (measured patterns only).
  std::size_t entry(Vec3 world_vector) const {
    return grid_lookup_index(*grid_, Direction::from_vector(to_local_frame(world_vector, analytic_.orientation)));
  }

private:
  AnalyticPattern analytic_;
  std::shared_ptr<const MeasuredGrid> grid_;
};

}  // namespace replaysim
