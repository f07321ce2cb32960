#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "replaysim/dsp.hpp"
#include "replaysim/error.hpp"
#include "replaysim/geometry.hpp"
#include "replaysim/rir.hpp"

namespace replaysim {

enum class NoiseMode { omnidirectional, diffuse };

inline std::string to_string(NoiseMode m) { return m == NoiseMode::omnidirectional ? "omni" : "diffuse"; }

inline NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "omni" || s == "omnidirectional") return NoiseMode::omnidirectional;
  if (s == "diffuse") return NoiseMode::diffuse;
  throw ConfigError("unknown noise mode '" + s + "' (expected omni or diffuse)");
}

// Upper SNR used when a caller asks for "no noise"; keeps gains finite.
inline constexpr double kMaxSnrDb = 80.0;
inline constexpr double kLoopCrossfadeMs = 50.0;

// Repeats `noise` until `length` samples are available, blending each splice
// over a linear crossfade.
inline std::vector<double> loop_noise(std::span<const double> noise, std::size_t length, int sample_rate,
                                      double crossfade_ms = kLoopCrossfadeMs) {
  if (noise.empty()) throw InvalidArgument("cannot loop empty noise");
  if (noise.size() >= length) return {noise.begin(), noise.begin() + static_cast<std::ptrdiff_t>(length)};
  auto fade = static_cast<std::size_t>(std::llround(crossfade_ms * 1e-3 * sample_rate));
  fade = std::min(fade, noise.size() / 4);
  std::vector<double> out(noise.begin(), noise.end());
  out.reserve(length + noise.size());
  while (out.size() < length) {
    const std::size_t base = out.size() - fade;
    for (std::size_t i = 0; i < fade; ++i) {
      const double r = (static_cast<double>(i) + 0.5) / static_cast<double>(fade);
      out[base + i] = (1.0 - r) * out[base + i] + r * noise[i];
    }
    out.insert(out.end(), noise.begin() + static_cast<std::ptrdiff_t>(fade), noise.end());
  }
  out.resize(length);
  return out;
}

// Mixture plus the scaled noise that went into it (mixture = clean + noise).
struct NoisyMix {
  MultichannelSignal mixture;
  MultichannelSignal noise;
  std::vector<double> gains;
};

inline void require_audible(const MultichannelSignal& clean) {
  for (std::size_t c = 0; c < clean.channel_count(); ++c)
    if (!(energy(clean.channels[c]) > 0.0))
      throw InvalidArgument("clean channel " + std::to_string(c) + " is silent; SNR is undefined");
}

// The same noise waveform on every channel, each channel scaled to `snr_db`
// against its own clean signal. Shorter noise is looped.
inline NoisyMix inject_omni(const MultichannelSignal& clean, const MonoSignal& noise, double snr_db) {
  validate(clean);
  require_audible(clean);
  const auto n = loop_noise(noise.samples, clean.length(), clean.sample_rate);
  const double noise_energy = energy(n);
  NoisyMix out{clean, MultichannelSignal(clean.channel_count(), clean.length(), clean.sample_rate), {}};
  for (std::size_t c = 0; c < clean.channel_count(); ++c) {
    const double g = scale_to_snr(energy(clean.channels[c]), noise_energy, std::min(snr_db, kMaxSnrDb));
    out.gains.push_back(g);
    for (std::size_t i = 0; i < n.size(); ++i) {
      out.noise.channels[c][i] = g * n[i];
      out.mixture.channels[c][i] = clean.channels[c][i] + out.noise.channels[c][i];
    }
  }
  return out;
}

// Spherically isotropic coherence between two sensors d metres apart.
inline double diffuse_coherence(double frequency, double spacing, double c = kSpeedOfSound) {
  const double x = 2.0 * std::numbers::pi * frequency * spacing / c;
  return x == 0.0 ? 1.0 : std::sin(x) / x;
}

inline Eigen::MatrixXd coherence_matrix(std::span<const Vec3> mics, double frequency, double c = kSpeedOfSound) {
  const auto m = static_cast<Eigen::Index>(mics.size());
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      g(i, j) = diffuse_coherence(frequency, distance(mics[static_cast<std::size_t>(i)], mics[static_cast<std::size_t>(j)]), c);
  return g;
}

struct DiffuseOptions {
  std::size_t frame_length = 1024;
  double speed_of_sound = kSpeedOfSound;
  // Output length in samples; 0 means the noise length.
  std::size_t length = 0;
};

struct DiffuseDiagnostics {
  // Bins whose coherence matrix needed negative eigenvalues clamped.
  std::size_t clamped_bins = 0;
};

// Multichannel noise with the spherically isotropic coherence of the array.
// Channel inputs are circularly offset segments of the mono noise; each STFT
// bin is mixed through the symmetric square root of the target coherence
// matrix, so E[x x^H] = Gamma(f).
inline MultichannelSignal synthesize_diffuse(const MonoSignal& noise, std::span<const Vec3> mics, int sample_rate,
                                             const DiffuseOptions& opt = {}, DiffuseDiagnostics* diag = nullptr) {
  validate(noise);
  const std::size_t channels = mics.size();
  if (channels < 2) throw InvalidArgument("diffuse synthesis needs at least two microphones");
  const std::size_t frame = opt.frame_length;
  const std::size_t length = opt.length == 0 ? noise.size() : opt.length;
  const std::size_t stride = noise.size() / channels;
  if (stride < 2 * frame || length < frame)
    throw InvalidArgument("noise too short for diffuse synthesis (need " + std::to_string(2 * frame * channels) +
                          " samples)");

  const auto extended = loop_noise(noise.samples, stride * (channels - 1) + length, sample_rate);
  std::vector<Spectrogram> inputs;
  inputs.reserve(channels);
  for (std::size_t c = 0; c < channels; ++c)
    inputs.push_back(stft(std::span<const double>(extended).subspan(c * stride, length), sample_rate, frame));

  std::vector<Spectrogram> outputs = inputs;
  const std::size_t bins = inputs.front().bins();
  const auto m = static_cast<Eigen::Index>(channels);
  Eigen::VectorXcd in(m), mixed(m);
  std::size_t clamped = 0;
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(frame);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(coherence_matrix(mics, f, opt.speed_of_sound));
    Eigen::VectorXd lambda = eig.eigenvalues();
    if (lambda.minCoeff() < 0.0) {
      ++clamped;
      lambda = lambda.cwiseMax(0.0);
    }
    const Eigen::MatrixXd v = eig.eigenvectors();
    const Eigen::MatrixXd mix = v * lambda.cwiseSqrt().asDiagonal() * v.transpose();
    for (std::size_t t = 0; t < inputs.front().frames.size(); ++t) {
      for (Eigen::Index c = 0; c < m; ++c) in(c) = inputs[static_cast<std::size_t>(c)].frames[t][k];
      mixed = mix.cast<Complex>() * in;
      for (Eigen::Index c = 0; c < m; ++c) outputs[static_cast<std::size_t>(c)].frames[t][k] = mixed(c);
    }
  }
  if (diag) diag->clamped_bins = clamped;

  MultichannelSignal out;
  out.sample_rate = sample_rate;
  for (const auto& s : outputs) out.channels.push_back(istft(s).samples);
  return out;
}

// One global gain on the diffuse field so the all-channel SNR equals `snr_db`.
inline NoisyMix inject_diffuse(const MultichannelSignal& clean, const MultichannelSignal& diffuse, double snr_db) {
  validate(clean);
  validate(diffuse);
  if (clean.channel_count() != diffuse.channel_count() || clean.length() != diffuse.length())
    throw InvalidArgument("clean and diffuse signals have different shapes");
  if (!(energy(clean) > 0.0)) throw InvalidArgument("clean signal is silent; SNR is undefined");
  const double g = scale_to_snr(clean, diffuse, std::min(snr_db, kMaxSnrDb));
  NoisyMix out{clean, diffuse, std::vector<double>(clean.channel_count(), g)};
  for (std::size_t c = 0; c < clean.channel_count(); ++c)
    for (std::size_t i = 0; i < clean.length(); ++i) {
      out.noise.channels[c][i] = g * diffuse.channels[c][i];
      out.mixture.channels[c][i] = clean.channels[c][i] + out.noise.channels[c][i];
    }
  return out;
}

// Single-channel additive noise at `snr_db` (spoofing-microphone recordings).
inline MonoSignal inject_mono(const MonoSignal& clean, const MonoSignal& noise, double snr_db) {
  MultichannelSignal c;
  c.sample_rate = clean.sample_rate;
  c.channels.push_back(clean.samples);
  auto mix = inject_omni(c, noise, snr_db);
  return {std::move(mix.mixture.channels.front()), clean.sample_rate};
}

struct CoherenceEstimate {
  std::vector<double> frequency;
  std::vector<Complex> coherence;
};

// Welch estimate of the complex coherence between two signals (Hann, 50% overlap).
inline CoherenceEstimate estimate_coherence(std::span<const double> x, std::span<const double> y, int sample_rate,
                                            std::size_t segment = 1024) {
  if (x.size() != y.size()) throw InvalidArgument("coherence inputs differ in length");
  if (x.size() < segment) throw InvalidArgument("signal shorter than one Welch segment");
  const auto w = hann_window(segment);
  const std::size_t hop = segment / 2;
  const std::size_t bins = segment / 2 + 1;
  std::vector<Complex> sxy(bins), bx(segment), by(segment);
  std::vector<double> sxx(bins, 0.0), syy(bins, 0.0);
  const DftPlan plan(segment);
  for (std::size_t start = 0; start + segment <= x.size(); start += hop) {
    for (std::size_t i = 0; i < segment; ++i) {
      bx[i] = x[start + i] * w[i];
      by[i] = y[start + i] * w[i];
    }
    plan.transform(bx, false);
    plan.transform(by, false);
    for (std::size_t k = 0; k < bins; ++k) {
      sxy[k] += bx[k] * std::conj(by[k]);
      sxx[k] += std::norm(bx[k]);
      syy[k] += std::norm(by[k]);
    }
  }
  CoherenceEstimate est;
  for (std::size_t k = 0; k < bins; ++k) {
    est.frequency.push_back(static_cast<double>(k) * sample_rate / static_cast<double>(segment));
    const double den = std::sqrt(sxx[k] * syy[k]);
    est.coherence.push_back(den > 0.0 ? sxy[k] / den : Complex{});
  }
  return est;
}

}  // namespace replaysim
