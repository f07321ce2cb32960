#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace replaysim;
namespace ts = testing_support;

namespace {

MonoSignal speech(double seconds = 0.5) { return {ts::synthetic_speech(seconds, 48000, 130.0, 3), 48000}; }

SimulationOptions fast_options(int order = 6) {
  SimulationOptions o;
  o.max_order = order;
  return o;
}

}  // namespace

TEST(SampleScene, Deterministic) {
  const auto a = sample_scene(42);
  const auto b = sample_scene(42);
  EXPECT_EQ(a.talker, b.talker);
  EXPECT_EQ(a.spoof_mic, b.spoof_mic);
  EXPECT_EQ(a.loudspeaker, b.loudspeaker);
  EXPECT_EQ(a.room_b.absorption, b.room_b.absorption);
  EXPECT_EQ(a.array_b.mics, b.array_b.mics);
  EXPECT_NE(sample_scene(43).talker, a.talker);
}

TEST(SampleScene, ThousandScenesSatisfyConstraints) {
  const SceneConstraints c;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto s = sample_scene(seed, c);
    const auto v = scene_violations(s, c);
    ASSERT_TRUE(v.empty()) << "seed " << seed << ": " << v.front();
    for (double d : s.room_a.dims()) {
      EXPECT_GE(d, 3.0);
      EXPECT_LE(d, 6.0);
    }
    EXPECT_EQ(s.array_a.mics.size(), 2u);
    EXPECT_NEAR(distance(s.array_b.mics[0], s.array_b.mics[1]), 0.05, 1e-12);
  }
}

TEST(SampleScene, InfeasibleConstraintsRejected) {
  SceneConstraints c;
  c.room_min = 3.0;
  c.room_max = 3.0;
  c.min_source_surface = 1.6;  // no interior point is 1.6 m from every wall of a 3 m cube
  EXPECT_THROW(sample_scene(1, c), ConfigError);
  SceneConstraints tight;
  tight.room_min = tight.room_max = 3.0;
  tight.min_talker_array = 2.5;  // feasible in principle only in corners; exhausts the budget
  tight.max_rejections = 50;
  EXPECT_THROW(sample_scene(1, tight), ConfigError);
}

TEST(SampleScene, MatchedRoomsShareGeometry) {
  SceneConstraints c;
  c.matched_rooms = true;
  const auto s = sample_scene(5, c);
  EXPECT_EQ(s.room_a.dims(), s.room_b.dims());
  EXPECT_EQ(s.room_a.absorption, s.room_b.absorption);
}

TEST(SimulateGenuine, AnechoicInterChannelDelay) {
  auto scene = sample_scene(7);
  SimulationOptions o = fast_options(0);
  o.talker_pattern = PatternKind::omnidirectional;
  o.delay_taps = 201;
  // Unit click; each channel's centroid tracks its path delay.
  MonoSignal x{std::vector<double>(4800, 0.0), 48000};
  x.samples[100] = 1.0;
  const auto y = simulate_genuine(scene, x, o);
  ASSERT_EQ(y.channel_count(), 2u);
  const double d0 = distance(scene.talker, scene.array_a.mics[0]);
  const double d1 = distance(scene.talker, scene.array_a.mics[1]);
  auto centroid = [](const std::vector<double>& ch) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      num += ch[i] * static_cast<double>(i);
      den += ch[i];
    }
    return num / den;
  };
  EXPECT_NEAR(centroid(y.channels[0]) - centroid(y.channels[1]), (d0 - d1) / 343.0 * 48000, 0.05);
}

TEST(SimulateGenuine, LinearityAndTimeInvariance) {
  const auto scene = sample_scene(8);
  const auto o = fast_options(4);
  const auto x = speech(0.3);
  MonoSignal x2 = x;
  for (auto& v : x2.samples) v *= -2.5;
  const auto y = simulate_genuine(scene, x, o);
  const auto y2 = simulate_genuine(scene, x2, o);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < y.length(); ++i) EXPECT_NEAR(y2.channels[c][i], -2.5 * y.channels[c][i], 1e-8);

  MonoSignal padded = x;
  padded.samples.insert(padded.samples.begin(), 37, 0.0);
  const auto yp = simulate_genuine(scene, padded, o);
  for (std::size_t i = 0; i < y.length(); ++i) EXPECT_NEAR(yp.channels[0][i + 37], y.channels[0][i], 1e-9);
}

TEST(SimulateGenuine, SilentSourceRejected) {
  const MonoSignal silent{std::vector<double>(1000, 0.0), 48000};
  EXPECT_THROW(simulate_genuine(sample_scene(1), silent, fast_options()), InvalidArgument);
  const MonoSignal wrong_rate{std::vector<double>(1000, 0.1), 16000};
  EXPECT_THROW(simulate_genuine(sample_scene(1), wrong_rate, fast_options()), InvalidArgument);
}

TEST(SimulateGenuine, EnvBUsesSecondPlacement) {
  const auto scene = sample_scene(9);
  const auto o = fast_options(0);
  const auto a = genuine_rirs(scene, o, GenuineRoom::env_a);
  const auto b = genuine_rirs(scene, o, GenuineRoom::env_b);
  const double da = distance(scene.talker, scene.array_a.mics[0]);
  const double db = distance(scene.talker_b, scene.array_b.mics[0]);
  auto peak = [](const std::vector<double>& t) {
    return static_cast<double>(std::max_element(t.begin(), t.end(), [](double p, double q) { return std::abs(p) < std::abs(q); }) - t.begin());
  };
  EXPECT_NEAR(peak(a[0].taps), da / 343.0 * 48000, 1.0);
  EXPECT_NEAR(peak(b[0].taps), db / 343.0 * 48000, 1.0);
}

TEST(SimulateSpoof, AnechoicIsBitExact) {
  const auto x = speech(0.4);
  const auto y = simulate_spoof(sample_scene(10), x, SpoofingMode::anechoic);
  EXPECT_EQ(y.samples, x.samples);
  EXPECT_EQ(y.sample_rate, x.sample_rate);
}

TEST(SimulateSpoof, ReverberantDirectOnlyIsDelayAndGain) {
  const auto scene = sample_scene(11);
  SimulationOptions o = fast_options(0);
  o.talker_pattern = PatternKind::omnidirectional;
  const auto x = speech(0.3);
  const auto y = simulate_spoof(scene, x, SpoofingMode::reverberant, o);
  const double d = distance(scene.talker, scene.spoof_mic);
  ASSERT_LT(d, 1.0);
  auto k = fractional_delay_kernel(d / 343.0 * 48000);
  // The renderer drops kernel taps that would land before t = 0.
  for (std::size_t i = 0; i < k.taps.size(); ++i)
    if (k.start + static_cast<std::ptrdiff_t>(i) < 0) k.taps[i] = 0.0;
  std::vector<double> shifted(y.size(), 0.0);
  std::copy(x.samples.begin(), x.samples.end(), shifted.begin());
  const auto delayed = apply_delay(shifted, k);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.samples[i], delayed[i] / d, 1e-9);
}

TEST(SimulateSpoof, ReverberantEnergyBoundedByPaths) {
  const auto scene = sample_scene(12);
  const auto o = fast_options(5);
  const auto x = speech(0.3);
  const auto y = simulate_spoof(scene, x, SpoofingMode::reverberant, o);
  // Triangle inequality on the sum of path contributions.
  double bound = 0.0;
  for (const auto& p : enumerate_images(scene.room_a, scene.talker, o.max_order))
    bound += p.reflection_gain / distance(p.image_position, scene.spoof_mic);
  EXPECT_LE(std::sqrt(energy(y.samples)), bound * std::sqrt(energy(x.samples)) * 1.01);
}

TEST(SimulateReplay, DegenerateGridMatchesGenuineGeometry) {
  MeasuredGrid g;
  g.name = "flat";
  g.sample_rate = 48000;
  for (int az : {0, 90, 180, -90}) g.entries.push_back({Direction::from_degrees(az, 0), {1.0}});
  auto grid = std::make_shared<const MeasuredGrid>(g);
  const auto scene = sample_scene(13);
  const auto o = fast_options(0);
  const auto x = speech(0.2);
  const auto rep = simulate_replay(scene, x, grid, o);
  // Omni point source at the loudspeaker position, same array.
  const auto paths = enumerate_images(scene.room_b, scene.loudspeaker, 0);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto rir = render_rir(paths, scene.array_b.mics[c], DirectivityPattern::omni(), DirectivityPattern::omni(),
                                o.render());
    const auto want = fast_convolve(std::span<const double>(x.samples), rir.taps);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(rep.channels[c][i], want[i], 1e-9);
  }
}

TEST(SimulateReplay, AnechoicChainConsistency) {
  const auto scene = sample_scene(14);
  const auto o = fast_options(3);
  const auto x = speech(0.2);
  auto grid = std::make_shared<const MeasuredGrid>(parse_grid(ts::synthetic_grid("g", 48000, 0.5)));
  const auto direct = simulate_replay(scene, x, grid, o);
  const auto chained = simulate_replay(scene, simulate_spoof(scene, x, SpoofingMode::anechoic, o), grid, o);
  EXPECT_EQ(direct.channels, chained.channels);
}

TEST(SimulateReplay, FourGridsFourOutputs) {
  const auto scene = sample_scene(15);
  const auto o = fast_options(2);
  const auto x = speech(0.2);
  std::vector<MultichannelSignal> outs;
  for (int i = 0; i < 4; ++i) {
    auto grid = std::make_shared<const MeasuredGrid>(parse_grid(ts::synthetic_grid("g", 48000, 0.2 + 0.2 * i)));
    outs.push_back(simulate_replay(scene, x, grid, o));
  }
  ASSERT_EQ(outs.size(), 4u);
  EXPECT_NE(outs[0].channels, outs[3].channels);
}

TEST(SimulateReplay, GridRateMustMatch) {
  auto grid = std::make_shared<const MeasuredGrid>(parse_grid(ts::synthetic_grid("g", 16000, 0.5)));
  EXPECT_THROW(simulate_replay(sample_scene(1), speech(0.1), grid, fast_options()), InvalidArgument);
}

TEST(DoubleReverberation, ReplayChainDecaysSlower) {
  SceneConstraints c;
  c.matched_rooms = true;
  const SimulationOptions o;
  const auto s = sample_scene(16, c);
  const auto gen = genuine_rirs(s, o, GenuineRoom::env_b);
  const auto spf = spoof_rir(s, o);
  const auto rep = replay_rirs(s, nullptr, o);
  const auto chain = fast_convolve(std::span<const double>(spf.taps), rep[0].taps);
  EXPECT_GE(rt60_estimate(chain, o.sample_rate), rt60_estimate(gen[0]));
}
