#pragma once

// Independent reference implementations and fixtures shared by the unit and
// acceptance tests. Nothing here calls into the code it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "replaysim/replaysim.hpp"

namespace testing_support {

using Complex = std::complex<double>;

inline std::vector<Complex> naive_dft(const std::vector<Complex>& x, bool inverse = false) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      acc += x[t] * std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / n);
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  return out;
}

inline std::vector<double> direct_convolve(const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
  return y;
}

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(gen);
  return v;
}

// Mirror images found by repeatedly reflecting through the six walls, breadth
// first. Returns (position, order) with order = fewest reflections reaching it.
struct MirrorImage {
  replaysim::Vec3 position;
  int order;
};

inline std::vector<MirrorImage> brute_force_images(const replaysim::RoomSpec& room, replaysim::Vec3 src,
                                                   int max_order) {
  auto same = [](replaysim::Vec3 a, replaysim::Vec3 b) {
    return std::abs(a.x - b.x) < 1e-9 && std::abs(a.y - b.y) < 1e-9 && std::abs(a.z - b.z) < 1e-9;
  };
  std::vector<MirrorImage> all{{src, 0}};
  std::vector<replaysim::Vec3> frontier{src};
  for (int order = 1; order <= max_order; ++order) {
    std::vector<replaysim::Vec3> next;
    for (const auto& p : frontier) {
      const replaysim::Vec3 mirrored[6] = {
          {-p.x, p.y, p.z}, {2 * room.width - p.x, p.y, p.z},  {p.x, -p.y, p.z},
          {p.x, 2 * room.length - p.y, p.z}, {p.x, p.y, -p.z}, {p.x, p.y, 2 * room.height - p.z},
      };
      for (const auto& m : mirrored) {
        const bool seen = std::any_of(all.begin(), all.end(), [&](const MirrorImage& e) { return same(e.position, m); });
        if (!seen) {
          all.push_back({m, order});
          next.push_back(m);
        }
      }
    }
    frontier = std::move(next);
  }
  return all;
}

// Minimum over the piecewise-linear ROC of max(FAR, FRR), with accept iff score >= t.
inline double eer_sweep_oracle(const std::vector<double>& genuine, const std::vector<double>& replay) {
  std::vector<double> ts(genuine);
  ts.insert(ts.end(), replay.begin(), replay.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  ts.push_back(std::numeric_limits<double>::infinity());
  std::vector<std::pair<double, double>> pts;  // (far, frr)
  for (double t : ts) {
    double frr = 0, far = 0;
    for (double g : genuine) frr += g < t;
    for (double r : replay) far += r >= t;
    pts.emplace_back(far / replay.size(), frr / genuine.size());
  }
  double best = 1.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto [fa0, fr0] = pts[i];
    const auto [fa1, fr1] = pts[i + 1];
    best = std::min({best, std::max(fa0, fr0), std::max(fa1, fr1)});
    const double d0 = fr0 - fa0, d1 = fr1 - fa1;
    if (d0 <= 0 && d1 >= 0 && d1 != d0) {
      const double a = -d0 / (d1 - d0);
      best = std::min(best, std::max(fa0 + a * (fa1 - fa0), fr0 + a * (fr1 - fr0)));
    }
  }
  return best;
}

// --- synthetic corpus ------------------------------------------------------

// Voiced-speech stand-in: harmonics of a gliding f0 under a syllabic envelope.
inline std::vector<double> synthetic_speech(double seconds, int fs, double f0, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> noise(0.0, 0.01);
  const auto n = static_cast<std::size_t>(seconds * fs);
  std::vector<double> x(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double f = f0 * (1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * 0.7 * t));
    phase += 2.0 * std::numbers::pi * f / fs;
    double v = 0.0;
    for (int h = 1; h <= 12 && h * f < 0.45 * fs; ++h) v += std::sin(h * phase) / h;
    const double env = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * 4.0 * t));
    x[i] = 0.25 * env * v + noise(gen);
  }
  return x;
}

inline void write_mono(const std::filesystem::path& p, const std::vector<double>& x, int fs,
                       replaysim::SampleFormat fmt = replaysim::SampleFormat::pcm24) {
  replaysim::MultichannelSignal s;
  s.sample_rate = fs;
  s.channels.push_back(x);
  replaysim::write_wav(p.string(), replaysim::WavFile::from(s, fmt));
}

// Loudspeaker grid: one short low-pass FIR per direction, darker away from boresight.
inline nlohmann::json synthetic_grid(const std::string& name, int fs, double brightness) {
  nlohmann::json entries = nlohmann::json::array();
  for (int el : {-45, 0, 45}) {
    for (int az = -180; az < 180; az += 45) {
      const double off = std::acos(std::cos(az * std::numbers::pi / 180) * std::cos(el * std::numbers::pi / 180));
      const double a = std::clamp(brightness * (1.0 - off / std::numbers::pi), 0.05, 0.95);
      std::vector<double> ir(24, 0.0);
      double g = 1.0;
      for (std::size_t i = 0; i < ir.size(); ++i, g *= a) ir[i] = g;
      double sum = 0.0;
      for (double v : ir) sum += v;
      const double level = 0.3 + 0.7 * (1.0 - off / std::numbers::pi);
      for (auto& v : ir) v *= level / sum;
      entries.push_back({{"azimuth_deg", az}, {"elevation_deg", el}, {"ir", ir}});
    }
  }
  return {{"name", name}, {"fs", fs}, {"entries", entries}};
}

// speech/ (mixed rates and lengths), noise/, grids/ (n_grids files) under root.
inline void write_corpus(const std::filesystem::path& root, int n_grids = 4, int n_speech = 3) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "speech");
  fs::create_directories(root / "noise");
  fs::create_directories(root / "grids");
  for (int i = 0; i < n_speech; ++i) {
    const int rate = i % 2 ? 16000 : 48000;
    const double len = i == 2 ? 1.5 : 2.6;
    write_mono(root / "speech" / ("spk" + std::to_string(i) + ".wav"), synthetic_speech(len, rate, 110.0 + 40.0 * i, 7 + i),
               rate, i % 2 ? replaysim::SampleFormat::pcm16 : replaysim::SampleFormat::pcm24);
  }
  std::mt19937_64 gen(99);
  for (int i = 0; i < 2; ++i) {
    auto n = random_vector(gen, static_cast<std::size_t>(3.0 * 48000), 0.1);
    if (i == 1)  // brown-ish
      for (std::size_t k = 1; k < n.size(); ++k) n[k] = 0.98 * n[k - 1] + 0.2 * n[k];
    write_mono(root / "noise" / ("noise" + std::to_string(i) + ".wav"), n, 48000);
  }
  for (int i = 0; i < n_grids; ++i) {
    std::ofstream out(root / "grids" / ("speaker" + std::to_string(i) + ".json"));
    out << synthetic_grid("speaker" + std::to_string(i), 48000, 0.2 + 0.2 * i).dump();
  }
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("replaysim_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every file under dir (relative path -> bytes) for byte-identity comparisons.
inline std::map<std::string, std::vector<std::uint8_t>> tree_bytes(const std::filesystem::path& dir) {
  std::map<std::string, std::vector<std::uint8_t>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = file_bytes(e.path());
  return out;
}

}  // namespace testing_support
