#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "test_support.hpp"

using namespace replaysim;
namespace ts = testing_support;

namespace {

WavFile stereo(std::mt19937_64& gen, std::size_t n, SampleFormat fmt) {
  WavFile w;
  w.format = fmt;
  w.sample_rate = 48000;
  w.channels = {ts::random_vector(gen, n, 0.9), ts::random_vector(gen, n, 0.5)};
  for (auto& ch : w.channels)
    for (auto& v : ch) v = std::clamp(v, -0.99, 0.99);
  return w;
}

}  // namespace

// --- WAV ---

TEST(Wav, Float32RoundTripIsExactForFloats) {
  std::mt19937_64 gen(51);
  auto w = stereo(gen, 1000, SampleFormat::float32);
  for (auto& ch : w.channels)
    for (auto& v : ch) v = static_cast<float>(v);
  const auto back = decode_wav(encode_wav(w).bytes);
  EXPECT_EQ(back.format, SampleFormat::float32);
  EXPECT_EQ(back.channels, w.channels);
}

TEST(Wav, PcmQuantizationError) {
  std::mt19937_64 gen(52);
  for (auto [fmt, step] : {std::pair{SampleFormat::pcm16, 1.0 / 32768}, std::pair{SampleFormat::pcm24, 1.0 / 8388608}}) {
    const auto w = stereo(gen, 2000, fmt);
    const auto back = decode_wav(encode_wav(w).bytes);
    ASSERT_EQ(back.channel_count(), 2u);
    ASSERT_EQ(back.frames(), 2000u);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 2000; ++i) EXPECT_LE(std::abs(back.channels[c][i] - w.channels[c][i]), step);
  }
}

TEST(Wav, HeaderFields) {
  std::mt19937_64 gen(53);
  auto w = stereo(gen, 10, SampleFormat::pcm24);
  const auto b = encode_wav(w).bytes;
  ASSERT_EQ(b.size(), 44u + 10 * 2 * 3);
  EXPECT_EQ(detail::get_u32(b, 24), 48000u);
  EXPECT_EQ(detail::get_u32(b, 28), 48000u * 2 * 3);
  EXPECT_EQ(detail::get_u16(b, 32), 6u);
  EXPECT_EQ(detail::get_u16(b, 34), 24u);
}

TEST(Wav, ClippingIsCounted) {
  WavFile w;
  w.format = SampleFormat::pcm16;
  w.channels = {{0.5, 1.5, -2.0, 1.0, -1.0}};
  const auto enc = encode_wav(w);
  EXPECT_EQ(enc.clipped, 3u);  // 1.0 saturates to the largest code
  const auto back = decode_wav(enc.bytes);
  EXPECT_NEAR(back.channels[0][1], 32767.0 / 32768.0, 1e-12);
  EXPECT_EQ(back.channels[0][2], -1.0);
}

TEST(Wav, MalformedAndUnsupported) {
  const std::vector<std::uint8_t> junk{'R', 'I', 'F', 'X', 0, 0, 0, 0, 'W', 'A', 'V', 'E'};
  EXPECT_THROW(decode_wav(junk), MalformedWav);
  WavFile w;
  w.channels = {{0.1, 0.2, 0.3}};
  auto b = encode_wav(w).bytes;
  auto truncated = b;
  truncated.resize(truncated.size() - 2);
  EXPECT_THROW(decode_wav(truncated), MalformedWav);
  auto eight_bit = b;
  eight_bit[34] = 8;
  EXPECT_THROW(decode_wav(eight_bit), UnsupportedWavFormat);
  auto alaw = b;
  alaw[20] = 6;
  EXPECT_THROW(decode_wav(alaw), UnsupportedWavFormat);
  EXPECT_THROW(read_wav("/nonexistent/x.wav"), FormatError);
}

TEST(Wav, SkipsUnknownChunks) {
  WavFile w;
  w.format = SampleFormat::pcm16;
  w.channels = {{0.25, -0.25}};
  auto b = encode_wav(w).bytes;
  const std::vector<std::uint8_t> list{'L', 'I', 'S', 'T', 3, 0, 0, 0, 'a', 'b', 'c', 0};
  b.insert(b.begin() + 36, list.begin(), list.end());
  EXPECT_EQ(decode_wav(b).channels, w.channels);
}

TEST(Wav, FileRoundTrip) {
  const auto dir = ts::fresh_dir("wav_file");
  std::mt19937_64 gen(54);
  const auto w = stereo(gen, 500, SampleFormat::pcm24);
  const auto path = (dir / "a.wav").string();
  EXPECT_EQ(write_wav(path, w), 0u);
  const auto r = read_wav(path);
  EXPECT_EQ(r.sample_rate, 48000);
  EXPECT_EQ(r.frames(), 500u);
}

// --- RNG ---

TEST(Rng, Deterministic) {
  auto a = derive_stream(7, {"trial", "3"});
  auto b = derive_stream(7, {"trial", "3"});
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
  EXPECT_NE(derive_stream(7, {"trial", "3"})(), derive_stream(8, {"trial", "3"})());
}

TEST(Rng, OrderIndependent) {
  const RngStream root(99);
  auto x = root.child("x");
  auto y = root.child("y");
  const auto y_first = y();
  for (int i = 0; i < 100; ++i) x();
  EXPECT_EQ(root.child("y")(), y_first);
  EXPECT_EQ(root.child(5).key(), root.child("5").key());
}

TEST(Rng, SiblingStreamsIndependent) {
  auto a = derive_stream(2024, {"trial", "0"});
  auto b = derive_stream(2024, {"trial", "1"});
  std::array<std::array<double, 10>, 10> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[a.index(10)][b.index(10)] += 1.0;
  double chi2 = 0.0;
  const double expected = n / 100.0;
  for (const auto& row : counts)
    for (double c : row) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 126.0826);  // 81 dof, 0.995 quantile
}

TEST(Rng, UniformRanges) {
  RngStream r(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(3.0, 6.0);
    ASSERT_GE(u, 3.0);
    ASSERT_LT(u, 6.0);
    ASSERT_LT(r.index(7), 7u);
  }
  double sum = 0, sq = 0;
  for (int i = 0; i < 20000; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / 20000, 0.0, 0.03);
  EXPECT_NEAR(sq / 20000, 1.0, 0.04);
}

// --- Manifest ---

TEST(Manifest, RoundTripReplacesDelimiters) {
  const auto dir = ts::fresh_dir("manifest");
  Manifest m;
  m.columns = {"a", "b", "c"};
  m.rows = {{{"a", "1"}, {"b", "x,y"}, {"c", ""}}, {{"a", "2"}, {"b", "plain"}}};
  const auto path = (dir / "m.csv").string();
  write_manifest(path, m);
  const auto r = read_manifest(path);
  EXPECT_EQ(r.columns, m.columns);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].at("b"), "x_y");
  EXPECT_EQ(r.rows[1].at("c"), "");
}

TEST(Manifest, DoublesRoundTripExactly) {
  std::mt19937_64 gen(55);
  for (double v : ts::random_vector(gen, 500, 1e3)) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_THROW(parse_double("1.5x"), FormatError);
  EXPECT_THROW(parse_u64("-3"), FormatError);
}

TEST(Manifest, SceneRoundTrip) {
  const SceneConstraints c;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = sample_scene(seed, c);
    ManifestRow row;
    put_scene(row, s, c.mic_count, c.mic_spacing);
    const auto back = scene_from_row(row);
    EXPECT_EQ(back.talker, s.talker);
    EXPECT_EQ(back.room_b.absorption, s.room_b.absorption);
    EXPECT_EQ(back.loudspeaker, s.loudspeaker);
    for (std::size_t i = 0; i < s.array_b.mics.size(); ++i)
      EXPECT_NEAR(distance(back.array_b.mics[i], s.array_b.mics[i]), 0.0, 1e-12);
    EXPECT_TRUE(scene_violations(back, c).empty());
  }
  ManifestRow partial;
  EXPECT_THROW(scene_from_row(partial), FormatError);
}

// --- Config ---

TEST(Config, AppliesKnownKeys) {
  const auto j = nlohmann::json::parse(R"({
    "utterances": 3, "seed": 11, "noise_mode": "omni", "spoofing_mode": "anechoic",
    "genuine_room": "env_b", "sample_rates": [48000, 16000], "snr_range_db": [0, 10],
    "output_format": "float32",
    "constraints": {"room_size_m": [4, 5], "matched_rooms": true},
    "simulation": {"max_order": 8, "talker_pattern": "omni"}
  })");
  const auto c = apply_config({}, j);
  EXPECT_EQ(c.utterances, 3u);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.noise_mode, NoiseMode::omnidirectional);
  EXPECT_EQ(c.spoofing_mode, SpoofingMode::anechoic);
  EXPECT_EQ(c.genuine_room, GenuineRoom::env_b);
  EXPECT_EQ(c.sample_rates, (std::vector<int>{48000, 16000}));
  EXPECT_EQ(c.snr_max_db, 10.0);
  EXPECT_EQ(c.output_format, SampleFormat::float32);
  EXPECT_EQ(c.constraints.room_min, 4.0);
  EXPECT_TRUE(c.constraints.matched_rooms);
  EXPECT_EQ(c.simulation.max_order, 8);
  EXPECT_EQ(c.simulation.talker_pattern, PatternKind::omnidirectional);
}

TEST(Config, RejectsUnknownAndInvalid) {
  EXPECT_THROW(apply_config({}, nlohmann::json::parse(R"({"utterance": 3})")), ConfigError);
  EXPECT_THROW(apply_config({}, nlohmann::json::parse(R"({"constraints": {"rooms": 1}})")), ConfigError);
  EXPECT_THROW(apply_config({}, nlohmann::json::parse(R"({"noise_mode": "pink"})")), ConfigError);
  EXPECT_THROW(apply_config({}, nlohmann::json::parse(R"({"utterances": "many"})")), ConfigError);
  EXPECT_THROW(apply_config({}, nlohmann::json::parse(R"({"coherence_model": "cylindrical"})")), ConfigError);
  DatasetConfig bad;
  bad.sample_rates = {16000, 48000};
  EXPECT_THROW(validate(bad), ConfigError);
  DatasetConfig taps;
  taps.simulation.delay_taps = 20;
  EXPECT_THROW(validate(taps), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, SnapshotRoundTrips) {
  DatasetConfig c;
  c.seed = 77;
  c.noise_mode = NoiseMode::omnidirectional;
  c.constraints.absorption_max = 0.6;
  c.simulation.min_relative_gain = 1e-4;
  c.out_dir = "/tmp/whatever";
  c.jobs = 4;
  auto snap = config_snapshot(c);
  EXPECT_FALSE(snap.contains("jobs"));
  EXPECT_FALSE(snap.contains("out_dir"));
  const auto back = apply_config({}, snap);
  EXPECT_EQ(config_snapshot(back), snap);
  EXPECT_NEAR(back.simulation.min_relative_gain, 1e-4, 1e-18);
}
