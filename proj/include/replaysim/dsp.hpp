#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "replaysim/error.hpp"

namespace replaysim {

using Complex = std::complex<double>;

struct MonoSignal {
  std::vector<double> samples;
  int sample_rate = 48000;

  std::size_t size() const { return samples.size(); }
};

// C channels of equal length sharing one sample rate.
struct MultichannelSignal {
  std::vector<std::vector<double>> channels;
  int sample_rate = 48000;

  MultichannelSignal() = default;
  MultichannelSignal(std::size_t channel_count, std::size_t length, int rate)
      : channels(channel_count, std::vector<double>(length, 0.0)), sample_rate(rate) {}

  std::size_t channel_count() const { return channels.size(); }
  std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
};

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

inline void validate(const MonoSignal& s) {
  if (s.sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
  if (!all_finite(s.samples)) throw InvalidArgument("signal contains non-finite samples");
}

inline void validate(const MultichannelSignal& s) {
  if (s.channels.empty()) throw InvalidArgument("multichannel signal needs at least one channel");
  if (s.sample_rate <= 0) throw InvalidArgument("sample rate must be positive");
  for (const auto& ch : s.channels) {
    if (ch.size() != s.channels.front().size())
      throw InvalidArgument("multichannel signal has channels of unequal length");
    if (!all_finite(ch)) throw InvalidArgument("signal contains non-finite samples");
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// ---------------------------------------------------------------------------
// FFT
// ---------------------------------------------------------------------------

// Iterative radix-2 transform with a directly evaluated twiddle table.
class Radix2Fft {
public:
  explicit Radix2Fft(std::size_t n) : n_(n), twiddle_(n / 2) {
    if (!is_pow2(n)) throw InvalidArgument("radix-2 FFT length must be a power of two");
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
  }

  std::size_t size() const { return n_; }

  // Unnormalized forward transform, or inverse scaled by 1/N.
  void transform(std::span<Complex> a, bool inverse) const {
    if (a.size() != n_) throw InvalidArgument("FFT buffer size mismatch");
    for (std::size_t i = 1, j = 0; i < n_; ++i) {
      std::size_t bit = n_ >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t i = 0; i < n_; i += len) {
        for (std::size_t k = 0; k < half; ++k) {
          Complex w = twiddle_[k * stride];
          if (inverse) w = std::conj(w);
          const Complex u = a[i + k];
          const Complex v = a[i + k + half] * w;
          a[i + k] = u + v;
          a[i + k + half] = u - v;
        }
      }
    }
    if (inverse) {
      const double scale = 1.0 / static_cast<double>(n_);
      for (auto& v : a) v *= scale;
    }
  }

private:
  std::size_t n_;
  std::vector<Complex> twiddle_;
};

// Exact DFT of arbitrary length. Powers of two go straight to radix-2;
// everything else goes through Bluestein's chirp-z factorization.
class DftPlan {
public:
  explicit DftPlan(std::size_t n) : n_(n), fft_(is_pow2(n) ? n : next_pow2(2 * n - 1)) {
    if (n == 0) throw InvalidArgument("DFT length must be positive");
    if (is_pow2(n)) return;
    const std::size_t m = fft_.size();
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle argument small for long transforms.
      const auto k2 = static_cast<double>((static_cast<std::uint64_t>(k) * k) % (2 * n));
      const double a = std::numbers::pi * k2 / static_cast<double>(n);
      chirp_[k] = {std::cos(a), -std::sin(a)};
    }
    chirp_spectrum_.assign(m, Complex{});
    chirp_spectrum_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
      chirp_spectrum_[k] = std::conj(chirp_[k]);
      chirp_spectrum_[m - k] = std::conj(chirp_[k]);
    }
    fft_.transform(chirp_spectrum_, false);
  }

  std::size_t size() const { return n_; }

  void transform(std::span<Complex> a, bool inverse) const {
    if (a.size() != n_) throw InvalidArgument("DFT buffer size mismatch");
    if (chirp_.empty()) {
      fft_.transform(a, inverse);
      return;
    }
    // The inverse is the conjugated forward transform of the conjugate.
    if (inverse)
      for (auto& v : a) v = std::conj(v);
    std::vector<Complex> work(fft_.size(), Complex{});
    for (std::size_t k = 0; k < n_; ++k) work[k] = a[k] * chirp_[k];
    fft_.transform(work, false);
    for (std::size_t k = 0; k < work.size(); ++k) work[k] *= chirp_spectrum_[k];
    fft_.transform(work, true);
    for (std::size_t k = 0; k < n_; ++k) a[k] = work[k] * chirp_[k];
    if (inverse) {
      const double scale = 1.0 / static_cast<double>(n_);
      for (auto& v : a) v = std::conj(v) * scale;
    }
  }

private:
  std::size_t n_;
  Radix2Fft fft_;
  std::vector<Complex> chirp_;
  std::vector<Complex> chirp_spectrum_;
};

// Forward FFT; the input is zero-padded to the next power of two.
inline std::vector<Complex> fft(std::span<const Complex> x) {
  if (x.empty()) throw InvalidArgument("fft of empty input");
  std::vector<Complex> a(next_pow2(x.size()), Complex{});
  std::copy(x.begin(), x.end(), a.begin());
  Radix2Fft(a.size()).transform(a, false);
  return a;
}

inline std::vector<Complex> fft(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("fft of empty input");
  std::vector<Complex> a(next_pow2(x.size()), Complex{});
  std::copy(x.begin(), x.end(), a.begin());
  Radix2Fft(a.size()).transform(a, false);
  return a;
}

// Inverse of fft(); the spectrum length must already be a power of two.
inline std::vector<Complex> ifft(std::span<const Complex> spectrum) {
  if (spectrum.empty()) throw InvalidArgument("ifft of empty input");
  std::vector<Complex> a(spectrum.begin(), spectrum.end());
  Radix2Fft(a.size()).transform(a, true);
  return a;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

// Linear convolution via a single zero-padded FFT of length next_pow2(nx+nh-1).
inline std::vector<double> fast_convolve(std::span<const double> x, std::span<const double> h) {
  if (x.empty() || h.empty()) throw InvalidArgument("convolution operand is empty");
  const std::size_t out_len = x.size() + h.size() - 1;
  // Short kernels are cheaper to apply directly.
  if (std::min(x.size(), h.size()) <= 32) {
    std::vector<double> y(out_len, 0.0);
    const auto& a = x.size() >= h.size() ? x : h;
    const auto& b = x.size() >= h.size() ? h : x;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double bj = b[j];
      if (bj == 0.0) continue;
      for (std::size_t i = 0; i < a.size(); ++i) y[i + j] += a[i] * bj;
    }
    return y;
  }
  const std::size_t n = next_pow2(out_len);
  const Radix2Fft plan(n);
  // Pack both real sequences into one complex transform.
  std::vector<Complex> packed(n, Complex{});
  for (std::size_t i = 0; i < x.size(); ++i) packed[i].real(x[i]);
  for (std::size_t i = 0; i < h.size(); ++i) packed[i].imag(h[i]);
  plan.transform(packed, false);
  std::vector<Complex> product(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Complex zk = packed[k];
    const Complex zn = std::conj(packed[(n - k) % n]);
    const Complex xk = 0.5 * (zk + zn);
    const Complex hk = Complex(0.0, -0.5) * (zk - zn);
    product[k] = xk * hk;
  }
  plan.transform(product, true);
  std::vector<double> y(out_len);
  for (std::size_t i = 0; i < out_len; ++i) y[i] = product[i].real();
  return y;
}

inline MonoSignal fast_convolve(const MonoSignal& x, std::span<const double> h) {
  return {fast_convolve(std::span<const double>(x.samples), h), x.sample_rate};
}

// ---------------------------------------------------------------------------
// STFT
// ---------------------------------------------------------------------------

// Periodic Hann window; shifted copies at hop n/2 sum to exactly one.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

// Frame length in samples for a duration, rounded to the nearest even count.
inline std::size_t frame_length_for(double frame_ms, int sample_rate) {
  if (!(frame_ms > 0.0)) throw InvalidArgument("frame duration must be positive");
  const double samples = frame_ms * 1e-3 * sample_rate;
  auto even = static_cast<std::size_t>(std::llround(samples / 2.0)) * 2;
  return std::max<std::size_t>(even, 2);
}

// Default analysis frame: 32 ms at 16 kHz, 46 ms at 48 kHz.
inline double default_frame_ms(int sample_rate) { return sample_rate >= 48000 ? 46.0 : 32.0; }

struct Spectrogram {
  // frames[t][f], f in [0, frame_length/2].
  std::vector<std::vector<Complex>> frames;
  std::size_t frame_length = 0;
  std::size_t hop = 0;
  std::size_t signal_length = 0;
  int sample_rate = 0;
  // Set when the signal was shorter than one frame and got zero-padded.
  bool padded = false;

  std::size_t bins() const { return frame_length / 2 + 1; }
};

inline Spectrogram stft(std::span<const double> x, int sample_rate, std::size_t frame_length) {
  if (frame_length < 2 || frame_length % 2 != 0) throw InvalidArgument("STFT frame length must be even");
  Spectrogram s;
  s.frame_length = frame_length;
  s.hop = frame_length / 2;
  s.signal_length = x.size();
  s.sample_rate = sample_rate;
  s.padded = x.size() < frame_length;
  const std::size_t frames =
      s.padded ? 1 : 1 + (x.size() - frame_length + s.hop - 1) / s.hop;
  const auto window = hann_window(frame_length);
  const DftPlan plan(frame_length);
  std::vector<Complex> buf(frame_length);
  s.frames.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * s.hop;
    for (std::size_t i = 0; i < frame_length; ++i) {
      const std::size_t idx = start + i;
      buf[i] = idx < x.size() ? x[idx] * window[i] : 0.0;
    }
    plan.transform(buf, false);
    s.frames.emplace_back(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(s.bins()));
  }
  return s;
}

inline Spectrogram stft(const MonoSignal& x, double frame_ms, double overlap = 0.5) {
  if (overlap != 0.5) throw InvalidArgument("only 50% overlap is supported");
  validate(x);
  return stft(x.samples, x.sample_rate, frame_length_for(frame_ms, x.sample_rate));
}

// Weighted overlap-add inverse. Samples where the summed window vanishes
// (only the very first sample for Hann) are left at zero.
inline MonoSignal istft(const Spectrogram& s) {
  const std::size_t n = s.frame_length;
  if (n == 0 || s.frames.empty()) throw InvalidArgument("empty spectrogram");
  const std::size_t total = (s.frames.size() - 1) * s.hop + n;
  std::vector<double> acc(total, 0.0), norm(total, 0.0);
  const auto window = hann_window(n);
  const DftPlan plan(n);
  std::vector<Complex> buf(n);
  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    const auto& half = s.frames[t];
    if (half.size() != s.bins()) throw InvalidArgument("spectrogram frame has wrong bin count");
    for (std::size_t k = 0; k < half.size(); ++k) buf[k] = half[k];
    for (std::size_t k = half.size(); k < n; ++k) buf[k] = std::conj(half[n - k]);
    plan.transform(buf, true);
    const std::size_t start = t * s.hop;
    for (std::size_t i = 0; i < n; ++i) {
      acc[start + i] += buf[i].real();
      norm[start + i] += window[i];
    }
  }
  MonoSignal out;
  out.sample_rate = s.sample_rate;
  out.samples.assign(s.signal_length, 0.0);
  for (std::size_t i = 0; i < s.signal_length && i < total; ++i)
    if (norm[i] > 1e-8) out.samples[i] = acc[i] / norm[i];
  return out;
}

// ---------------------------------------------------------------------------
// Fractional delay
// ---------------------------------------------------------------------------

// Hann-windowed sinc interpolator. taps[i] sits at output time start + i.
struct FractionalDelayKernel {
  std::vector<double> taps;
  std::ptrdiff_t start = 0;

  // Adds gain * kernel into out; taps falling outside out are dropped.
  void accumulate(std::span<double> out, double gain) const {
    for (std::size_t i = 0; i < taps.size(); ++i) {
      const std::ptrdiff_t t = start + static_cast<std::ptrdiff_t>(i);
      if (t < 0 || t >= static_cast<std::ptrdiff_t>(out.size())) continue;
      out[static_cast<std::size_t>(t)] += gain * taps[i];
    }
  }
};

inline constexpr std::size_t kDefaultDelayTaps = 81;

inline FractionalDelayKernel fractional_delay_kernel(double delay, std::size_t taps = kDefaultDelayTaps) {
  if (!(delay >= 0.0) || !std::isfinite(delay)) throw InvalidArgument("delay must be finite and non-negative");
  if (taps < 21 || taps % 2 == 0) throw InvalidArgument("fractional delay needs an odd tap count >= 21");
  const auto whole = static_cast<std::ptrdiff_t>(std::floor(delay));
  const double frac = delay - static_cast<double>(whole);
  const auto half = static_cast<std::ptrdiff_t>(taps / 2);
  FractionalDelayKernel k;
  k.start = whole - half;
  k.taps.assign(taps, 0.0);
  if (frac == 0.0) {
    k.taps[static_cast<std::size_t>(half)] = 1.0;
    return k;
  }
  for (std::size_t i = 0; i < taps; ++i) {
    const double x = static_cast<double>(static_cast<std::ptrdiff_t>(i) - half) - frac;
    if (std::abs(x) > static_cast<double>(half)) {
      k.taps[i] = 0.0;
      continue;
    }
    const double window = 0.5 * (1.0 + std::cos(std::numbers::pi * x / static_cast<double>(half)));
    const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    k.taps[i] = window * sinc;
  }
  return k;
}

// Delays x by the kernel; the output keeps the input length.
inline std::vector<double> apply_delay(std::span<const double> x, const FractionalDelayKernel& k) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    for (std::size_t i = 0; i < k.taps.size(); ++i) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(n) - k.start - static_cast<std::ptrdiff_t>(i);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(x.size())) continue;
      y[n] += k.taps[i] * x[static_cast<std::size_t>(src)];
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Resampling between 16 kHz and 48 kHz
// ---------------------------------------------------------------------------

namespace detail {

inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// Kaiser-windowed sinc lowpass at the 48 kHz rate, cutoff 8.1 kHz,
// transition 7.9-8.3 kHz, ~80 dB stopband.
inline const std::vector<double>& rate3_lowpass() {
  static const std::vector<double> h = [] {
    constexpr double fs = 48000.0;
    constexpr double cutoff = 8100.0;
    constexpr double transition = 400.0;
    constexpr double atten = 80.0;
    const double beta = 0.1102 * (atten - 8.7);
    auto len = static_cast<std::size_t>(std::ceil((atten - 7.95) / (14.36 * transition / fs)));
    if (len % 2 == 0) ++len;
    const double half = static_cast<double>(len / 2);
    const double fc = cutoff / fs;
    std::vector<double> taps(len);
    for (std::size_t i = 0; i < len; ++i) {
      const double m = static_cast<double>(i) - half;
      const double sinc = m == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
      const double r = m / half;
      taps[i] = sinc * bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / bessel_i0(beta);
    }
    return taps;
  }();
  return h;
}

}  // namespace detail

inline bool is_supported_rate(int rate) { return rate == 16000 || rate == 48000; }

// Zero-phase polyphase resampler for the 16 kHz <-> 48 kHz pair.
inline MonoSignal resample(const MonoSignal& x, int target_rate) {
  if (!is_supported_rate(x.sample_rate) || !is_supported_rate(target_rate))
    throw InvalidArgument("unsupported resampling pair " + std::to_string(x.sample_rate) + " -> " +
                          std::to_string(target_rate));
  if (x.sample_rate == target_rate) return x;
  const auto& h = detail::rate3_lowpass();
  const auto half = static_cast<std::ptrdiff_t>(h.size() / 2);
  const auto n_in = static_cast<std::ptrdiff_t>(x.size());
  MonoSignal y;
  y.sample_rate = target_rate;
  if (x.sample_rate == 48000) {
    // Filter at 48 kHz, keep every third sample; taps normalized to unit DC gain.
    double dc = 0.0;
    for (double v : h) dc += v;
    const std::size_t n_out = (x.size() + 2) / 3;
    y.samples.assign(n_out, 0.0);
    for (std::size_t m = 0; m < n_out; ++m) {
      const auto center = static_cast<std::ptrdiff_t>(3 * m);
      double acc = 0.0;
      for (std::ptrdiff_t j = -half; j <= half; ++j) {
        const std::ptrdiff_t idx = center - j;
        if (idx < 0 || idx >= n_in) continue;
        acc += h[static_cast<std::size_t>(j + half)] * x.samples[static_cast<std::size_t>(idx)];
      }
      y.samples[m] = acc / dc;
    }
  } else {
    // Zero-stuff by three and filter; each polyphase branch normalized to unit DC gain.
    double phase_dc[3] = {0.0, 0.0, 0.0};
    for (std::ptrdiff_t j = -half; j <= half; ++j)
      phase_dc[((j % 3) + 3) % 3] += h[static_cast<std::size_t>(j + half)];
    const std::size_t n_out = x.size() * 3;
    y.samples.assign(n_out, 0.0);
    for (std::size_t n = 0; n < n_out; ++n) {
      const auto nn = static_cast<std::ptrdiff_t>(n);
      const std::ptrdiff_t phase = nn % 3;
      double acc = 0.0;
      // Input sample k sits at upsampled index 3k; tap offset j = n - 3k.
      const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, (nn - half + 2) / 3);
      const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(n_in - 1, (nn + half) / 3);
      for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) {
        const std::ptrdiff_t j = nn - 3 * k;
        if (j < -half || j > half) continue;
        acc += h[static_cast<std::size_t>(j + half)] * x.samples[static_cast<std::size_t>(k)];
      }
      y.samples[n] = acc / phase_dc[phase];
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// SNR arithmetic
// ---------------------------------------------------------------------------

inline double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

inline double energy(const MultichannelSignal& s) {
  double e = 0.0;
  for (const auto& ch : s.channels) e += energy(ch);
  return e;
}

inline double db_from_power_ratio(double ratio) { return 10.0 * std::log10(ratio); }

// Aggregate SNR over all channels: 10 log10(sum signal^2 / sum noise^2).
inline double measure_snr(const MultichannelSignal& signal, const MultichannelSignal& noise) {
  if (signal.channel_count() != noise.channel_count() || signal.length() != noise.length())
    throw InvalidArgument("signal and noise shapes differ");
  const double ps = energy(signal);
  const double pn = energy(noise);
  if (!(ps > 0.0)) throw InvalidArgument("SNR undefined for a silent signal");
  if (!(pn > 0.0)) throw InvalidArgument("SNR undefined for silent noise");
  return db_from_power_ratio(ps / pn);
}

inline double measure_snr(std::span<const double> signal, std::span<const double> noise) {
  if (signal.size() != noise.size()) throw InvalidArgument("signal and noise lengths differ");
  const double ps = energy(signal);
  const double pn = energy(noise);
  if (!(ps > 0.0)) throw InvalidArgument("SNR undefined for a silent signal");
  if (!(pn > 0.0)) throw InvalidArgument("SNR undefined for silent noise");
  return db_from_power_ratio(ps / pn);
}

// Gain g such that measure_snr(signal, g * noise) == target_db.
inline double scale_to_snr(double signal_energy, double noise_energy, double target_db) {
  if (!(signal_energy > 0.0)) throw InvalidArgument("SNR undefined for a silent signal");
  if (!(noise_energy > 0.0)) throw InvalidArgument("cannot scale silent noise to a target SNR");
  return std::sqrt(signal_energy / (noise_energy * std::pow(10.0, target_db / 10.0)));
}

inline double scale_to_snr(const MultichannelSignal& signal, const MultichannelSignal& noise, double target_db) {
  if (signal.channel_count() != noise.channel_count() || signal.length() != noise.length())
    throw InvalidArgument("signal and noise shapes differ");
  return scale_to_snr(energy(signal), energy(noise), target_db);
}

inline double scale_to_snr(std::span<const double> signal, std::span<const double> noise, double target_db) {
  if (signal.size() != noise.size()) throw InvalidArgument("signal and noise lengths differ");
  return scale_to_snr(energy(signal), energy(noise), target_db);
}

}  // namespace replaysim
