#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace replaysim;
namespace ts = testing_support;

namespace {

std::vector<ScoredTrial> trials(const std::vector<double>& genuine, const std::vector<double>& replay) {
  std::vector<ScoredTrial> t;
  for (double g : genuine) t.push_back({g, TrialLabel::genuine});
  for (double r : replay) t.push_back({r, TrialLabel::replay});
  return t;
}

}  // namespace

TEST(Eer, PerfectSeparation) {
  const auto r = compute_eer(trials({0.9, 0.8, 0.95}, {0.1, 0.2}));
  EXPECT_DOUBLE_EQ(r.eer, 0.0);
  EXPECT_EQ(r.n_genuine, 3u);
  EXPECT_EQ(r.n_replay, 2u);
}

TEST(Eer, ConstantScores) { EXPECT_DOUBLE_EQ(compute_eer(trials({0.5, 0.5, 0.5}, {0.5, 0.5})).eer, 0.5); }

TEST(Eer, WorkedExample) {
  EXPECT_NEAR(compute_eer(trials({0.9, 0.8, 0.7}, {0.75, 0.3, 0.2})).eer, 1.0 / 3.0, 1e-12);
}

TEST(Eer, ReversedScoresGiveOne) { EXPECT_DOUBLE_EQ(compute_eer(trials({0.1, 0.2}, {0.8, 0.9})).eer, 1.0); }

TEST(Eer, SingleClassRejected) {
  EXPECT_THROW(compute_eer(trials({0.1, 0.2}, {})), InvalidArgument);
  EXPECT_THROW(compute_eer(trials({}, {0.1})), InvalidArgument);
  EXPECT_THROW(compute_eer(trials({std::nan("")}, {0.1})), InvalidArgument);
}

TEST(Eer, MatchesSweepOracle) {
  std::mt19937_64 gen(41);
  std::uniform_int_distribution<int> count(1, 6), level(0, 7);
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> g(count(gen)), r(count(gen));
    // Coarse levels force plenty of ties.
    for (auto& v : g) v = level(gen) / 7.0 + 0.1;
    for (auto& v : r) v = level(gen) / 7.0;
    EXPECT_NEAR(compute_eer(trials(g, r)).eer, ts::eer_sweep_oracle(g, r), 1e-12);
  }
}

TEST(Eer, MonotoneTransformInvariance) {
  std::mt19937_64 gen(42);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> g(8), r(9);
    for (auto& v : g) v = n(gen) + 0.7;
    for (auto& v : r) v = n(gen);
    auto f = [](std::vector<double> v) {
      for (auto& x : v) x = std::exp(3.0 * x) + 2.0;
      return v;
    };
    EXPECT_NEAR(compute_eer(trials(g, r)).eer, compute_eer(trials(f(g), f(r))).eer, 1e-12);
  }
}

TEST(Eer, SignAndLabelSwapSymmetry) {
  std::mt19937_64 gen(43);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> g(7), r(5);
    for (auto& v : g) v = n(gen) + 0.5;
    for (auto& v : r) v = n(gen);
    auto neg = [](std::vector<double> v) {
      for (auto& x : v) x = -x;
      return v;
    };
    EXPECT_NEAR(compute_eer(trials(g, r)).eer, compute_eer(trials(neg(r), neg(g))).eer, 1e-12);
  }
}

TEST(ConfidenceInterval, Values) {
  const std::vector<double> same{0.2, 0.2, 0.2};
  EXPECT_NEAR(confidence_interval(same).half_width, 0.0, 1e-15);
  const std::vector<double> two{0.10, 0.20};
  const auto ci = confidence_interval(two);
  EXPECT_NEAR(ci.mean, 0.15, 1e-12);
  EXPECT_NEAR(ci.half_width, 0.6353102368087353, 1e-9);
  const std::vector<double> five{1, 2, 3, 4, 5};
  const auto c5 = confidence_interval(five);
  EXPECT_NEAR(c5.mean, 3.0, 1e-12);
  EXPECT_NEAR(c5.half_width, 1.9632431614775607, 1e-9);
  const std::vector<double> one{0.3};
  EXPECT_THROW(confidence_interval(one), InvalidArgument);
}
