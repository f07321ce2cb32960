#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "replaysim/error.hpp"

namespace replaysim {

enum class TrialLabel { genuine, replay };

inline std::string to_string(TrialLabel l) { return l == TrialLabel::genuine ? "genuine" : "replay"; }

inline TrialLabel parse_label(const std::string& s) {
  if (s == "genuine") return TrialLabel::genuine;
  if (s == "replay") return TrialLabel::replay;
  throw FormatError("unknown trial label '" + s + "'");
}

// Higher scores mean "more genuine".
struct ScoredTrial {
  double score = 0.0;
  TrialLabel label = TrialLabel::genuine;
};

struct EerReport {
  double eer = 0.0;
  double threshold = 0.0;
  std::size_t n_genuine = 0;
  std::size_t n_replay = 0;
};

/**
   Equal error rate of a genuine-vs-replay score list.

   A trial is accepted when score >= t. For every distinct score t (and +inf)
   FRR(t) is the fraction of genuine trials below t and FAR(t) the fraction of
   replay trials at or above t. Walking thresholds upwards, FRR - FAR goes from
   negative to non-negative exactly once; the EER is read off the straight line
   between the two operating points on either side of that crossing. An exact
   crossing at an operating point reports that point, the lowest such threshold.
*/
inline EerReport compute_eer(std::span<const ScoredTrial> trials) {
  std::vector<double> genuine, replay;
  for (const auto& t : trials) {
    if (!std::isfinite(t.score)) throw InvalidArgument("non-finite score");
    (t.label == TrialLabel::genuine ? genuine : replay).push_back(t.score);
  }
  if (genuine.empty() || replay.empty()) throw InvalidArgument("EER needs both genuine and replay trials");
  std::sort(genuine.begin(), genuine.end());
  std::sort(replay.begin(), replay.end());

  std::vector<double> thresholds;
  thresholds.reserve(genuine.size() + replay.size() + 1);
  thresholds.insert(thresholds.end(), genuine.begin(), genuine.end());
  thresholds.insert(thresholds.end(), replay.begin(), replay.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const double ng = static_cast<double>(genuine.size());
  const double nr = static_cast<double>(replay.size());
  auto frr = [&](double t) {
    return static_cast<double>(std::lower_bound(genuine.begin(), genuine.end(), t) - genuine.begin()) / ng;
  };
  auto far = [&](double t) {
    return static_cast<double>(replay.end() - std::lower_bound(replay.begin(), replay.end(), t)) / nr;
  };

  EerReport report{0.0, 0.0, genuine.size(), replay.size()};
  double prev_t = thresholds.front(), prev_frr = frr(prev_t), prev_far = far(prev_t);
  for (std::size_t j = 1; j < thresholds.size(); ++j) {
    const double t = thresholds[j];
    const double cur_frr = frr(t), cur_far = far(t);
    const double d_prev = prev_frr - prev_far;
    const double d_cur = cur_frr - cur_far;
    if (d_cur >= 0.0) {
      const double alpha = -d_prev / (d_cur - d_prev);
      report.eer = prev_frr + alpha * (cur_frr - prev_frr);
      report.threshold = std::isfinite(t) ? prev_t + alpha * (t - prev_t) : prev_t;
      return report;
    }
    prev_t = t;
    prev_frr = cur_frr;
    prev_far = cur_far;
  }
  // Unreachable: FRR - FAR = 1 at +inf.
  throw NumericalError("EER crossing not found");
}

struct ConfidenceInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

// Student-t interval mean +- t_{n-1,(1+level)/2} * s / sqrt(n).
inline ConfidenceInterval confidence_interval(std::span<const double> values, double level = 0.95) {
  if (values.size() < 2) throw InvalidArgument("confidence interval needs at least two values");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0, 1)");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.5 + level / 2.0);
  return {mean, t * sd / std::sqrt(n)};
}

}  // namespace replaysim
