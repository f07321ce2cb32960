#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "replaysim/error.hpp"
#include "replaysim/scenario.hpp"

namespace replaysim {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw FormatError("not an unsigned integer: '" + s + "'");
  return v;
}

// One manifest row; columns keyed by header name.
using ManifestRow = std::map<std::string, std::string>;

struct Manifest {
  std::vector<std::string> columns;
  std::vector<ManifestRow> rows;
};

inline std::vector<std::string> split_fields(const std::string& line, char delim = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline std::string sanitize_field(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = '_';
  return s;
}

inline void write_manifest(const std::string& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest " + path);
  for (std::size_t i = 0; i < m.columns.size(); ++i) out << (i ? "," : "") << m.columns[i];
  out << '\n';
  for (const auto& row : m.rows) {
    for (std::size_t i = 0; i < m.columns.size(); ++i) {
      const auto it = row.find(m.columns[i]);
      out << (i ? "," : "") << (it == row.end() ? "" : sanitize_field(it->second));
    }
    out << '\n';
  }
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path);
  Manifest m;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("manifest " + path + " is empty");
  m.columns = split_fields(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != m.columns.size())
      throw FormatError("manifest " + path + " line " + std::to_string(lineno) + " has " +
                        std::to_string(fields.size()) + " fields, expected " + std::to_string(m.columns.size()));
    ManifestRow row;
    for (std::size_t i = 0; i < fields.size(); ++i) row[m.columns[i]] = fields[i];
    m.rows.push_back(std::move(row));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Scene <-> flat manifest fields
// ---------------------------------------------------------------------------

inline const std::array<const char*, 6>& surface_names() {
  static const std::array<const char*, 6> names{"x0", "x1", "y0", "y1", "floor", "ceiling"};
  return names;
}

inline std::vector<std::string> scene_columns() {
  std::vector<std::string> c{"scene_seed"};
  for (const char* room : {"room_a", "room_b"}) {
    for (const char* d : {"width", "length", "height"}) c.push_back(std::string(room) + "_" + d);
    for (const char* s : surface_names()) c.push_back(std::string(room) + "_abs_" + s);
  }
  auto point = [&](const std::string& p) {
    for (const char* a : {"_x", "_y", "_z"}) c.push_back(p + a);
  };
  point("talker");
  c.push_back("talker_az");
  c.push_back("talker_el");
  point("spoof");
  point("array_a");
  c.push_back("array_a_az");
  point("talker_b");
  c.push_back("talker_b_az");
  c.push_back("talker_b_el");
  point("array_b");
  c.push_back("array_b_az");
  point("speaker");
  c.push_back("speaker_az");
  c.push_back("speaker_el");
  c.push_back("mic_count");
  c.push_back("mic_spacing");
  return c;
}

inline void put_scene(ManifestRow& row, const Scene& s, std::size_t mic_count, double mic_spacing) {
  row["scene_seed"] = std::to_string(s.seed);
  auto room = [&](const std::string& name, const RoomSpec& r) {
    row[name + "_width"] = format_double(r.width);
    row[name + "_length"] = format_double(r.length);
    row[name + "_height"] = format_double(r.height);
    for (std::size_t i = 0; i < 6; ++i) row[name + "_abs_" + surface_names()[i]] = format_double(r.absorption[i]);
  };
  room("room_a", s.room_a);
  room("room_b", s.room_b);
  auto point = [&](const std::string& p, Vec3 v) {
    row[p + "_x"] = format_double(v.x);
    row[p + "_y"] = format_double(v.y);
    row[p + "_z"] = format_double(v.z);
  };
  point("talker", s.talker);
  row["talker_az"] = format_double(s.talker_orientation.azimuth);
  row["talker_el"] = format_double(s.talker_orientation.elevation);
  point("spoof", s.spoof_mic);
  point("array_a", s.array_a.center);
  row["array_a_az"] = format_double(s.array_a.azimuth);
  point("talker_b", s.talker_b);
  row["talker_b_az"] = format_double(s.talker_b_orientation.azimuth);
  row["talker_b_el"] = format_double(s.talker_b_orientation.elevation);
  point("array_b", s.array_b.center);
  row["array_b_az"] = format_double(s.array_b.azimuth);
  point("speaker", s.loudspeaker);
  row["speaker_az"] = format_double(s.loudspeaker_orientation.azimuth);
  row["speaker_el"] = format_double(s.loudspeaker_orientation.elevation);
  row["mic_count"] = std::to_string(mic_count);
  row["mic_spacing"] = format_double(mic_spacing);
}

// Rebuilds the scene stored in a manifest row.
inline Scene scene_from_row(const ManifestRow& row) {
  auto get = [&](const std::string& k) -> const std::string& {
    const auto it = row.find(k);
    if (it == row.end()) throw FormatError("manifest row lacks column " + k);
    return it->second;
  };
  auto num = [&](const std::string& k) { return parse_double(get(k)); };
  Scene s;
  s.seed = parse_u64(get("scene_seed"));
  auto room = [&](const std::string& name) {
    RoomSpec r;
    r.width = num(name + "_width");
    r.length = num(name + "_length");
    r.height = num(name + "_height");
    for (std::size_t i = 0; i < 6; ++i) r.absorption[i] = num(name + "_abs_" + surface_names()[i]);
    return r;
  };
  s.room_a = room("room_a");
  s.room_b = room("room_b");
  auto point = [&](const std::string& p) { return Vec3{num(p + "_x"), num(p + "_y"), num(p + "_z")}; };
  const auto mic_count = static_cast<std::size_t>(parse_u64(get("mic_count")));
  const double spacing = num("mic_spacing");
  s.talker = point("talker");
  s.talker_orientation = {num("talker_az"), num("talker_el")};
  s.spoof_mic = point("spoof");
  s.array_a = make_array(point("array_a"), num("array_a_az"), mic_count, spacing);
  s.talker_b = point("talker_b");
  s.talker_b_orientation = {num("talker_b_az"), num("talker_b_el")};
  s.array_b = make_array(point("array_b"), num("array_b_az"), mic_count, spacing);
  s.loudspeaker = point("speaker");
  s.loudspeaker_orientation = {num("speaker_az"), num("speaker_el")};
  return s;
}

}  // namespace replaysim
