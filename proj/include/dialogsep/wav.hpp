#pragma once

// RIFF/WAVE reading and writing: PCM16, PCM24 and IEEE float32, little-endian,
// stereo interleaved.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dialogsep/audio.hpp"
#include "dialogsep/error.hpp"

namespace dialogsep {

enum class BitDepth { Pcm16, Pcm24, Float32 };

struct WavWriteReport {
  std::size_t clipped_samples = 0;
};

namespace wav_detail {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}
inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}
inline void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace wav_detail

/// Decodes a WAV image held in memory. `origin` names the source in errors.
inline AudioClip decode_wav(const std::vector<unsigned char>& bytes, const std::string& origin = "<memory>") {
  using namespace wav_detail;
  auto fail = [&](const std::string& msg) { return FormatError(origin + ": " + msg); };

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16 || size > available) throw fail("truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      sample_rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw fail("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk");
        format = read_u16(f + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      // Some writers leave the size at 0 or 0xFFFFFFFF when streaming.
      data_size = (size == 0 || size > available) ? available : size;
      break;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (channels != 2) throw fail("channels=" + std::to_string(channels) + " unsupported");
  if (sample_rate == 0) throw fail("sample_rate=0 unsupported");

  const bool is_pcm = format == kFormatPcm && (bits == 16 || bits == 24);
  const bool is_float = format == kFormatFloat && bits == 32;
  if (!is_pcm && !is_float) {
    throw fail("format=" + std::to_string(format) + " bits=" + std::to_string(bits) + " unsupported");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t frames = data_size / frame_bytes;
  std::vector<double> left(frames);
  std::vector<double> right(frames);

  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < 2; ++c) {
      const unsigned char* p = data + n * frame_bytes + c * bytes_per_sample;
      double v = 0.0;
      if (is_float) {
        v = static_cast<double>(std::bit_cast<float>(read_u32(p)));
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        std::int32_t s = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      }
      (c == 0 ? left : right)[n] = v;
    }
  }
  return AudioClip(std::move(left), std::move(right), static_cast<int>(sample_rate));
}

/// Encodes a clip as a canonical 44-byte-header WAV image.
inline std::vector<unsigned char> encode_wav(const AudioClip& clip, BitDepth depth, WavWriteReport* report = nullptr) {
  using namespace wav_detail;
  const std::uint16_t bits = depth == BitDepth::Pcm16 ? 16 : depth == BitDepth::Pcm24 ? 24 : 32;
  const std::uint16_t format = depth == BitDepth::Float32 ? kFormatFloat : kFormatPcm;
  const std::uint16_t block_align = static_cast<std::uint16_t>(2 * bits / 8);
  const std::uint64_t data_size = static_cast<std::uint64_t>(clip.length()) * block_align;
  if (data_size > 0xFFFFFFFFull - 36) throw ArgumentError("encode_wav: clip too long for RIFF");

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, static_cast<std::uint32_t>(36 + data_size));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 2);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate()) * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, static_cast<std::uint32_t>(data_size));

  std::size_t clipped = 0;
  auto quantize = [&](double v, double scale, std::int32_t lo, std::int32_t hi) {
    double q = std::nearbyint(v * scale);
    if (q > hi || q < lo) {
      ++clipped;
      q = std::clamp(q, static_cast<double>(lo), static_cast<double>(hi));
    }
    return static_cast<std::int32_t>(q);
  };

  const auto left = clip.channel(0);
  const auto right = clip.channel(1);
  for (std::size_t n = 0; n < clip.length(); ++n) {
    for (double v : {left[n], right[n]}) {
      switch (depth) {
        case BitDepth::Float32:
          put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
          break;
        case BitDepth::Pcm16:
          put_u16(out, static_cast<std::uint16_t>(quantize(v, 32768.0, -32768, 32767)));
          break;
        case BitDepth::Pcm24: {
          const auto s = static_cast<std::uint32_t>(quantize(v, 8388608.0, -8388608, 8388607));
          out.push_back(static_cast<unsigned char>(s & 0xFF));
          out.push_back(static_cast<unsigned char>((s >> 8) & 0xFF));
          out.push_back(static_cast<unsigned char>((s >> 16) & 0xFF));
          break;
        }
      }
    }
  }
  if (report != nullptr) report->clipped_samples = clipped;
  return out;
}

inline AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

/// Writes `clip`; integer depths clamp out-of-range samples and count them.
inline WavWriteReport save_wav(const AudioClip& clip, const std::filesystem::path& path, BitDepth depth) {
  WavWriteReport report;
  const auto bytes = encode_wav(clip, depth, &report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
  return report;
}

}  // namespace dialogsep
