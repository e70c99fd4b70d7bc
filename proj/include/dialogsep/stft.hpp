#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "dialogsep/audio.hpp"
#include "dialogsep/error.hpp"
#include "dialogsep/fft.hpp"

namespace dialogsep {

enum class WindowKind { Sine };

struct StftConfig {
  std::size_t window_length = 2048;
  std::size_t hop = 1024;
  std::size_t fft_length = 2048;
  WindowKind window_kind = WindowKind::Sine;

  /// Sine window of 2048 samples (about 43 ms at 48 kHz) with 50% overlap.
  static StftConfig oracle() { return {}; }

  /// Window of `window_length` samples with 50% overlap and no zero-padding.
  static StftConfig half_overlap(std::size_t window_length) {
    return {window_length, window_length / 2, window_length, WindowKind::Sine};
  }

  void validate() const {
    if (window_length < 2) throw ArgumentError("StftConfig: window_length must be >= 2");
    if (hop == 0 || hop > window_length) throw ArgumentError("StftConfig: hop must be in [1, window_length]");
    if (fft_length < window_length) throw ArgumentError("StftConfig: fft_length must be >= window_length");
  }

  [[nodiscard]] std::size_t bins() const noexcept { return fft_length / 2 + 1; }
  /// Zeros prepended before framing.
  [[nodiscard]] std::size_t padding() const noexcept { return window_length / 2; }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

/// w[n] = sin(pi (n + 0.5) / L).
inline std::vector<double> sine_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = std::sin(std::numbers::pi * (static_cast<double>(n) + 0.5) / static_cast<double>(length));
  }
  return w;
}

inline std::vector<double> analysis_window(const StftConfig& cfg) {
  switch (cfg.window_kind) {
    case WindowKind::Sine:
      return sine_window(cfg.window_length);
  }
  throw ArgumentError("unknown window kind");
}

/// Number of hop-spaced frames needed so that every sample of a clip of
/// `length` samples is covered by all frames that overlap it.
inline std::size_t stft_frame_count(std::size_t length, const StftConfig& cfg) {
  const std::size_t last_sample = cfg.padding() + length - 1;
  return last_sample / cfg.hop + 1;
}

/// Complex time-frequency representation, indexed (channel, frame, bin).
class Spectrogram {
 public:
  Spectrogram() = default;

  Spectrogram(StftConfig config, std::size_t frames, std::size_t original_length, int sample_rate)
      : config_(config),
        frames_(frames),
        bins_(config.bins()),
        original_length_(original_length),
        sample_rate_(sample_rate),
        data_(kChannels * frames * config.bins()) {}

  [[nodiscard]] const StftConfig& config() const noexcept { return config_; }
  [[nodiscard]] std::size_t frames() const noexcept { return frames_; }
  [[nodiscard]] std::size_t bins() const noexcept { return bins_; }
  [[nodiscard]] std::size_t original_length() const noexcept { return original_length_; }
  [[nodiscard]] int sample_rate() const noexcept { return sample_rate_; }

  [[nodiscard]] Complex& at(std::size_t channel, std::size_t frame, std::size_t bin) {
    return data_[index(channel, frame, bin)];
  }
  [[nodiscard]] const Complex& at(std::size_t channel, std::size_t frame, std::size_t bin) const {
    return data_[index(channel, frame, bin)];
  }

  [[nodiscard]] std::span<Complex> frame(std::size_t channel, std::size_t frame) {
    return {data_.data() + index(channel, frame, 0), bins_};
  }
  [[nodiscard]] std::span<const Complex> frame(std::size_t channel, std::size_t frame) const {
    return {data_.data() + index(channel, frame, 0), bins_};
  }

  [[nodiscard]] std::span<Complex> values() noexcept { return data_; }
  [[nodiscard]] std::span<const Complex> values() const noexcept { return data_; }

  [[nodiscard]] bool same_shape(const Spectrogram& other) const noexcept {
    return frames_ == other.frames_ && bins_ == other.bins_ && data_.size() == other.data_.size();
  }

 private:
  [[nodiscard]] std::size_t index(std::size_t channel, std::size_t frame, std::size_t bin) const {
    return (channel * frames_ + frame) * bins_ + bin;
  }

  StftConfig config_;
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::size_t original_length_ = 0;
  int sample_rate_ = 1;
  std::vector<Complex> data_;
};

/// Windowed real FFT per channel and frame. The signal is zero-padded by
/// window_length/2 in front and as needed at the end.
inline Spectrogram stft(const AudioClip& clip, const StftConfig& config) {
  config.validate();
  if (clip.length() < config.window_length) {
    throw ArgumentError("stft: clip of " + std::to_string(clip.length()) + " samples is shorter than one window (" +
                        std::to_string(config.window_length) + ")");
  }
  const std::size_t frames = stft_frame_count(clip.length(), config);
  const std::size_t pad = config.padding();
  const auto window = analysis_window(config);
  const RealFft fft(config.fft_length);

  Spectrogram spec(config, frames, clip.length(), clip.sample_rate());
  std::vector<double> segment(config.window_length);
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto x = clip.channel(c);
    for (std::size_t m = 0; m < frames; ++m) {
      const std::size_t start = m * config.hop;  // position in the padded signal
      for (std::size_t i = 0; i < config.window_length; ++i) {
        const std::size_t p = start + i;
        const double v = (p >= pad && p - pad < x.size()) ? x[p - pad] : 0.0;
        segment[i] = v * window[i];
      }
      fft.forward(segment, spec.frame(c, m));
    }
  }
  return spec;
}

/// Weighted overlap-add inverse with the matching synthesis window. The
/// overlap sum of the squared window is divided out, which is exactly 1 for
/// the sine window at 50% overlap.
inline AudioClip istft(const Spectrogram& spec) {
  const StftConfig& config = spec.config();
  config.validate();
  if (spec.bins() != config.bins() || spec.values().size() != kChannels * spec.frames() * spec.bins() ||
      spec.original_length() == 0 || spec.frames() != stft_frame_count(spec.original_length(), config)) {
    throw ArgumentError("istft: spectrogram shape is inconsistent with its configuration");
  }
  const std::size_t pad = config.padding();
  const std::size_t padded = (spec.frames() - 1) * config.hop + config.window_length;
  const auto window = analysis_window(config);
  const RealFft fft(config.fft_length);

  std::vector<double> norm(padded, 0.0);
  for (std::size_t m = 0; m < spec.frames(); ++m) {
    for (std::size_t i = 0; i < config.window_length; ++i) norm[m * config.hop + i] += window[i] * window[i];
  }

  std::vector<double> frame(config.fft_length);
  std::vector<std::vector<double>> out(kChannels);
  for (std::size_t c = 0; c < kChannels; ++c) {
    std::vector<double> acc(padded, 0.0);
    for (std::size_t m = 0; m < spec.frames(); ++m) {
      fft.inverse(spec.frame(c, m), frame);
      for (std::size_t i = 0; i < config.window_length; ++i) acc[m * config.hop + i] += frame[i] * window[i];
    }
    std::vector<double>& y = out[c];
    y.resize(spec.original_length());
    for (std::size_t n = 0; n < y.size(); ++n) {
      const double w = norm[n + pad];
      y[n] = w > 1e-12 ? acc[n + pad] / w : 0.0;
    }
  }
  return AudioClip(std::move(out[0]), std::move(out[1]), spec.sample_rate());
}

}  // namespace dialogsep
