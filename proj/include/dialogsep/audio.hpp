#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dialogsep/error.hpp"

namespace dialogsep {

inline constexpr std::size_t kChannels = 2;

/// Stereo audio with a fixed sample rate. Both channels always have the same
/// length; nominal full scale is [-1, 1].
class AudioClip {
 public:
  AudioClip() = default;

  AudioClip(std::vector<double> left, std::vector<double> right, int sample_rate)
      : channels_{std::move(left), std::move(right)}, sample_rate_(sample_rate) {
    if (channels_[0].size() != channels_[1].size()) {
      throw ArgumentError("AudioClip: channel lengths differ (" + std::to_string(channels_[0].size()) +
                          " vs " + std::to_string(channels_[1].size()) + ")");
    }
    if (sample_rate_ <= 0) {
      throw ArgumentError("AudioClip: sample_rate must be positive, got " + std::to_string(sample_rate_));
    }
  }

  static AudioClip zeros(std::size_t length, int sample_rate) {
    return AudioClip(std::vector<double>(length, 0.0), std::vector<double>(length, 0.0), sample_rate);
  }

  /// Same signal on both channels.
  static AudioClip dual_mono(std::vector<double> samples, int sample_rate) {
    auto copy = samples;
    return AudioClip(std::move(samples), std::move(copy), sample_rate);
  }

  [[nodiscard]] std::size_t length() const noexcept { return channels_[0].size(); }
  [[nodiscard]] int sample_rate() const noexcept { return sample_rate_; }
  [[nodiscard]] double duration_seconds() const noexcept {
    return sample_rate_ > 0 ? static_cast<double>(length()) / sample_rate_ : 0.0;
  }

  [[nodiscard]] std::span<const double> channel(std::size_t c) const { return channels_.at(c); }
  [[nodiscard]] std::span<double> channel(std::size_t c) { return channels_.at(c); }

  [[nodiscard]] double peak() const noexcept {
    double p = 0.0;
    for (const auto& ch : channels_) {
      for (double v : ch) p = std::max(p, std::abs(v));
    }
    return p;
  }

  /// Samples [begin, begin + count) of both channels.
  [[nodiscard]] AudioClip slice(std::size_t begin, std::size_t count) const {
    if (begin + count > length()) {
      throw ArgumentError("AudioClip::slice: range exceeds clip length");
    }
    auto cut = [&](const std::vector<double>& ch) {
      return std::vector<double>(ch.begin() + static_cast<std::ptrdiff_t>(begin),
                                 ch.begin() + static_cast<std::ptrdiff_t>(begin + count));
    };
    return AudioClip(cut(channels_[0]), cut(channels_[1]), sample_rate_);
  }

  /// Left channel followed by right channel.
  [[nodiscard]] std::vector<double> concatenated() const {
    std::vector<double> out;
    out.reserve(2 * length());
    out.insert(out.end(), channels_[0].begin(), channels_[0].end());
    out.insert(out.end(), channels_[1].begin(), channels_[1].end());
    return out;
  }

  friend bool operator==(const AudioClip&, const AudioClip&) = default;

 private:
  std::array<std::vector<double>, kChannels> channels_;
  int sample_rate_ = 1;
};

inline void require_aligned(const AudioClip& a, const AudioClip& b, const char* what) {
  if (a.length() != b.length() || a.sample_rate() != b.sample_rate()) {
    throw ArgumentError(std::string(what) + ": clips are not aligned (length " + std::to_string(a.length()) +
                        "@" + std::to_string(a.sample_rate()) + " vs " + std::to_string(b.length()) + "@" +
                        std::to_string(b.sample_rate()) + ")");
  }
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 20.0); }
inline double linear_to_db(double gain) { return 20.0 * std::log10(gain); }

/// Multiplies every sample by 10^(gain_db / 20).
inline AudioClip apply_gain_db(const AudioClip& clip, double gain_db) {
  if (!std::isfinite(gain_db)) throw ArgumentError("apply_gain_db: gain must be finite");
  const double factor = db_to_linear(gain_db);
  AudioClip out = clip;
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (double& v : out.channel(c)) v *= factor;
  }
  return out;
}

/// a + scale * b, sample-wise.
inline AudioClip add_scaled(const AudioClip& a, const AudioClip& b, double scale, const char* what = "add_scaled") {
  require_aligned(a, b, what);
  AudioClip out = a;
  for (std::size_t c = 0; c < kChannels; ++c) {
    auto dst = out.channel(c);
    auto src = b.channel(c);
    for (std::size_t n = 0; n < dst.size(); ++n) dst[n] += scale * src[n];
  }
  return out;
}

inline double max_abs_difference(const AudioClip& a, const AudioClip& b) {
  require_aligned(a, b, "max_abs_difference");
  double worst = 0.0;
  for (std::size_t c = 0; c < kChannels; ++c) {
    auto x = a.channel(c);
    auto y = b.channel(c);
    for (std::size_t n = 0; n < x.size(); ++n) worst = std::max(worst, std::abs(x[n] - y[n]));
  }
  return worst;
}

}  // namespace dialogsep
