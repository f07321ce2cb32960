#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "replaysim/dsp.hpp"
#include "replaysim/error.hpp"

namespace replaysim {

enum class SampleFormat { pcm16, pcm24, float32 };

inline std::string to_string(SampleFormat f) {
  switch (f) {
    case SampleFormat::pcm16: return "pcm16";
    case SampleFormat::pcm24: return "pcm24";
    case SampleFormat::float32: return "float32";
  }
  return "unknown";
}

inline SampleFormat parse_sample_format(const std::string& s) {
  if (s == "pcm16") return SampleFormat::pcm16;
  if (s == "pcm24") return SampleFormat::pcm24;
  if (s == "float32") return SampleFormat::float32;
  throw ConfigError("unknown sample format '" + s + "'");
}

inline std::size_t bytes_per_sample(SampleFormat f) {
  switch (f) {
    case SampleFormat::pcm16: return 2;
    case SampleFormat::pcm24: return 3;
    case SampleFormat::float32: return 4;
  }
  return 0;
}

class UnsupportedWavFormat : public FormatError {
public:
  using FormatError::FormatError;
};

class MalformedWav : public FormatError {
public:
  using FormatError::FormatError;
};

struct WavFile {
  SampleFormat format = SampleFormat::pcm24;
  int sample_rate = 48000;
  std::vector<std::vector<double>> channels;

  std::size_t channel_count() const { return channels.size(); }
  std::size_t frames() const { return channels.empty() ? 0 : channels.front().size(); }

  static WavFile from(const MultichannelSignal& s, SampleFormat fmt = SampleFormat::pcm24) {
    return {fmt, s.sample_rate, s.channels};
  }
  MultichannelSignal signal() const {
    MultichannelSignal s;
    s.channels = channels;
    s.sample_rate = sample_rate;
    return s;
  }
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_tag(std::vector<std::uint8_t>& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

inline std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

inline bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

// Hard clip to [-1, 1); returns true when the sample was out of range.
inline bool clip_unit(double& x) {
  if (x >= 1.0) {
    x = 1.0;
    return true;
  }
  if (x < -1.0) {
    x = -1.0;
    return true;
  }
  return false;
}

}  // namespace detail

struct EncodedWav {
  std::vector<std::uint8_t> bytes;
  std::size_t clipped = 0;
};

// RIFF/WAVE with a plain PCM (1) or IEEE float (3) fmt chunk.
inline EncodedWav encode_wav(const WavFile& wav) {
  if (wav.channels.empty()) throw InvalidArgument("WAV needs at least one channel");
  if (wav.sample_rate <= 0) throw InvalidArgument("WAV sample rate must be positive");
  for (const auto& ch : wav.channels)
    if (ch.size() != wav.frames()) throw InvalidArgument("WAV channels differ in length");
  const std::size_t bps = bytes_per_sample(wav.format);
  const auto nch = static_cast<std::uint32_t>(wav.channel_count());
  const std::uint64_t data_bytes = static_cast<std::uint64_t>(wav.frames()) * nch * bps;
  if (data_bytes > 0xffffffffULL - 44) throw InvalidArgument("WAV payload exceeds 4 GiB");

  EncodedWav out;
  auto& b = out.bytes;
  b.reserve(44 + data_bytes);
  detail::put_tag(b, "RIFF");
  detail::put_u32(b, static_cast<std::uint32_t>(36 + data_bytes));
  detail::put_tag(b, "WAVE");
  detail::put_tag(b, "fmt ");
  detail::put_u32(b, 16);
  detail::put_u16(b, wav.format == SampleFormat::float32 ? 3 : 1);
  detail::put_u16(b, static_cast<std::uint16_t>(nch));
  detail::put_u32(b, static_cast<std::uint32_t>(wav.sample_rate));
  detail::put_u32(b, static_cast<std::uint32_t>(wav.sample_rate * nch * bps));
  detail::put_u16(b, static_cast<std::uint16_t>(nch * bps));
  detail::put_u16(b, static_cast<std::uint16_t>(8 * bps));
  detail::put_tag(b, "data");
  detail::put_u32(b, static_cast<std::uint32_t>(data_bytes));

  for (std::size_t i = 0; i < wav.frames(); ++i) {
    for (std::size_t c = 0; c < nch; ++c) {
      double x = wav.channels[c][i];
      if (!std::isfinite(x)) throw InvalidArgument("cannot encode non-finite sample");
      if (detail::clip_unit(x)) ++out.clipped;
      switch (wav.format) {
        case SampleFormat::pcm16: {
          const auto v = static_cast<std::int32_t>(std::clamp(std::lround(x * 32768.0), -32768L, 32767L));
          detail::put_u16(b, static_cast<std::uint16_t>(v & 0xffff));
          break;
        }
        case SampleFormat::pcm24: {
          const auto v = static_cast<std::int32_t>(std::clamp(std::lround(x * 8388608.0), -8388608L, 8388607L));
          const auto u = static_cast<std::uint32_t>(v);
          b.push_back(static_cast<std::uint8_t>(u & 0xff));
          b.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
          b.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
          break;
        }
        case SampleFormat::float32: {
          detail::put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
          break;
        }
      }
    }
  }
  return out;
}

inline WavFile decode_wav(std::span<const std::uint8_t> b) {
  if (b.size() < 12 || !detail::tag_is(b, 0, "RIFF") || !detail::tag_is(b, 8, "WAVE"))
    throw MalformedWav("not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t tag = 0, nch = 0, bits = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = detail::get_u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (detail::tag_is(b, pos, "fmt ")) {
      if (size < 16 || body + size > b.size()) throw MalformedWav("truncated fmt chunk");
      tag = detail::get_u16(b, body);
      nch = detail::get_u16(b, body + 2);
      rate = detail::get_u32(b, body + 4);
      bits = detail::get_u16(b, body + 14);
      if (tag == 0xfffe) {
        if (size < 40) throw MalformedWav("truncated WAVE_FORMAT_EXTENSIBLE chunk");
        tag = detail::get_u16(b, body + 24);
      }
      have_fmt = true;
    } else if (detail::tag_is(b, pos, "data")) {
      if (!have_fmt) throw MalformedWav("data chunk before fmt chunk");
      if (body + size > b.size()) throw MalformedWav("data chunk length exceeds file size");
      SampleFormat fmt;
      if (tag == 1 && bits == 16)
        fmt = SampleFormat::pcm16;
      else if (tag == 1 && bits == 24)
        fmt = SampleFormat::pcm24;
      else if (tag == 3 && bits == 32)
        fmt = SampleFormat::float32;
      else
        throw UnsupportedWavFormat("unsupported WAV encoding (format tag " + std::to_string(tag) + ", " +
                                   std::to_string(bits) + " bits)");
      if (nch == 0 || rate == 0) throw MalformedWav("WAV declares zero channels or zero sample rate");
      const std::size_t bps = bytes_per_sample(fmt);
      if (size % (bps * nch) != 0) throw MalformedWav("data chunk is not a whole number of frames");
      const std::size_t frames = size / (bps * nch);
      WavFile w{fmt, static_cast<int>(rate), std::vector<std::vector<double>>(nch, std::vector<double>(frames))};
      std::size_t at = body;
      for (std::size_t i = 0; i < frames; ++i)
        for (std::size_t c = 0; c < nch; ++c, at += bps) {
          double x = 0.0;
          switch (fmt) {
            case SampleFormat::pcm16:
              x = static_cast<std::int16_t>(detail::get_u16(b, at)) / 32768.0;
              break;
            case SampleFormat::pcm24: {
              std::uint32_t u = b[at] | (b[at + 1] << 8) | (static_cast<std::uint32_t>(b[at + 2]) << 16);
              if (u & 0x800000u) u |= 0xff000000u;
              x = static_cast<std::int32_t>(u) / 8388608.0;
              break;
            }
            case SampleFormat::float32:
              x = std::bit_cast<float>(detail::get_u32(b, at));
              break;
          }
          w.channels[c][i] = x;
        }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw MalformedWav(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

inline WavFile read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const UnsupportedWavFormat& e) {
    throw UnsupportedWavFormat(path + ": " + e.what());
  } catch (const MalformedWav& e) {
    throw MalformedWav(path + ": " + e.what());
  }
}

// Writes the file and returns the number of clipped samples.
inline std::size_t write_wav(const std::string& path, const WavFile& wav) {
  const auto enc = encode_wav(wav);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(enc.bytes.data()), static_cast<std::streamsize>(enc.bytes.size()));
  if (!out) throw FormatError("short write to " + path);
  return enc.clipped;
}

}  // namespace replaysim
