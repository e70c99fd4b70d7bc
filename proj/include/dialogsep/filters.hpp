#pragma once

// Kaiser-windowed sinc design, polyphase sample-rate conversion and the
// 3.5 kHz linear-phase anchor low-pass.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "dialogsep/audio.hpp"
#include "dialogsep/error.hpp"

namespace dialogsep {

/// Kaiser beta for a given stopband attenuation in dB.
inline double kaiser_beta(double attenuation_db) {
  if (attenuation_db > 50.0) return 0.1102 * (attenuation_db - 8.7);
  if (attenuation_db >= 21.0) {
    return 0.5842 * std::pow(attenuation_db - 21.0, 0.4) + 0.07886 * (attenuation_db - 21.0);
  }
  return 0.0;
}

/// Kaiser window evaluated at relative position r in [-1, 1].
inline double kaiser(double r, double beta) {
  if (r < -1.0 || r > 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - r * r)) / std::cyl_bessel_i(0.0, beta);
}

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

/// Linear-phase low-pass: `taps` coefficients (odd), cutoff in cycles/sample
/// (the -6 dB point), unit DC gain.
inline std::vector<double> design_lowpass(std::size_t taps, double cutoff, double attenuation_db) {
  if (taps % 2 == 0 || taps < 3) throw ArgumentError("design_lowpass: tap count must be odd and >= 3");
  if (cutoff <= 0.0 || cutoff >= 0.5) throw ArgumentError("design_lowpass: cutoff must be in (0, 0.5)");
  const double beta = kaiser_beta(attenuation_db);
  const double center = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  for (std::size_t k = 0; k < taps; ++k) {
    const double t = static_cast<double>(k) - center;
    h[k] = 2.0 * cutoff * sinc(2.0 * cutoff * t) * kaiser(t / center, beta);
  }
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  for (double& v : h) v /= sum;
  return h;
}

/// Convolves each channel with a symmetric FIR and removes its group delay,
/// so output sample n lines up with input sample n. Length is preserved.
inline AudioClip filter_zero_phase(const AudioClip& clip, const std::vector<double>& h) {
  const std::size_t delay = (h.size() - 1) / 2;
  std::vector<std::vector<double>> out(kChannels);
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto x = clip.channel(c);
    const auto n_samples = static_cast<std::ptrdiff_t>(x.size());
    auto& y = out[c];
    y.assign(x.size(), 0.0);
    for (std::ptrdiff_t n = 0; n < n_samples; ++n) {
      double acc = 0.0;
      for (std::size_t k = 0; k < h.size(); ++k) {
        const std::ptrdiff_t idx = n + static_cast<std::ptrdiff_t>(delay) - static_cast<std::ptrdiff_t>(k);
        if (idx >= 0 && idx < n_samples) acc += h[k] * x[static_cast<std::size_t>(idx)];
      }
      y[static_cast<std::size_t>(n)] = acc;
    }
  }
  return AudioClip(std::move(out[0]), std::move(out[1]), clip.sample_rate());
}

inline constexpr std::size_t kAnchorTaps = 255;
inline constexpr double kAnchorCutoffHz = 3500.0;
inline constexpr double kAnchorAttenuationDb = 80.0;

/// 255-tap Kaiser low-pass with its -6 dB point at 3.5 kHz (MUSHRA anchor).
inline AudioClip lowpass_3k5(const AudioClip& clip) {
  if (clip.sample_rate() <= 7000) throw ArgumentError("lowpass_3k5: sample rate must exceed 7 kHz");
  const auto h = design_lowpass(kAnchorTaps, kAnchorCutoffHz / clip.sample_rate(), kAnchorAttenuationDb);
  return filter_zero_phase(clip, h);
}

/// Polyphase windowed-sinc rate converter. The kernel is symmetric around
/// each output instant, so no delay compensation is needed.
class Resampler {
 public:
  static constexpr double kStopbandDb = 90.0;
  /// Passband edge and stopband start as fractions of the lower rate.
  static constexpr double kPassbandEdge = 0.45;
  static constexpr double kStopbandEdge = 0.5;

  Resampler(int source_rate, int target_rate) : source_(source_rate), target_(target_rate) {
    if (source_rate <= 0 || target_rate <= 0) throw ArgumentError("Resampler: rates must be positive");
    const auto g = std::gcd(source_rate, target_rate);
    up_ = static_cast<std::size_t>(target_rate / g);
    down_ = static_cast<std::size_t>(source_rate / g);
    if (up_ == 1 && down_ == 1) return;

    const double lower = std::min(source_rate, target_rate);
    // Frequencies below in cycles per input sample.
    const double cutoff = 0.5 * (kPassbandEdge + kStopbandEdge) * lower / source_rate;
    const double transition = (kStopbandEdge - kPassbandEdge) * lower / source_rate;
    const double taps = (kStopbandDb - 7.95) / (2.285 * 2.0 * std::numbers::pi * transition) + 1.0;
    half_ = static_cast<std::size_t>(std::ceil(taps / 2.0));
    const double beta = kaiser_beta(kStopbandDb);

    const std::size_t width = 2 * half_;
    phases_.assign(up_, std::vector<double>(width));
    for (std::size_t phase = 0; phase < up_; ++phase) {
      const double frac = static_cast<double>(phase) / static_cast<double>(up_);
      double sum = 0.0;
      for (std::size_t k = 0; k < width; ++k) {
        // Tap k multiplies input sample base - half + 1 + k.
        const double tau = frac + static_cast<double>(half_) - 1.0 - static_cast<double>(k);
        const double v = 2.0 * cutoff * sinc(2.0 * cutoff * tau) * kaiser(tau / static_cast<double>(half_), beta);
        phases_[phase][k] = v;
        sum += v;
      }
      for (double& v : phases_[phase]) v /= sum;
    }
  }

  [[nodiscard]] std::size_t output_length(std::size_t input_length) const {
    // round(N * up / down), ties away from zero
    const auto num = static_cast<std::uint64_t>(input_length) * up_;
    return static_cast<std::size_t>((2 * num + down_) / (2 * down_));
  }

  [[nodiscard]] AudioClip process(const AudioClip& clip) const {
    if (clip.sample_rate() != source_) throw ArgumentError("Resampler: clip sample rate does not match");
    if (up_ == 1 && down_ == 1) return clip;
    const std::size_t out_len = output_length(clip.length());
    std::vector<std::vector<double>> out(kChannels, std::vector<double>(out_len));
    const auto n_in = static_cast<std::ptrdiff_t>(clip.length());
    for (std::size_t c = 0; c < kChannels; ++c) {
      const auto x = clip.channel(c);
      for (std::size_t j = 0; j < out_len; ++j) {
        const std::uint64_t pos = static_cast<std::uint64_t>(j) * down_;
        const auto base = static_cast<std::ptrdiff_t>(pos / up_);
        const auto& taps = phases_[pos % up_];
        const std::ptrdiff_t first = base - static_cast<std::ptrdiff_t>(half_) + 1;
        double acc = 0.0;
        for (std::size_t k = 0; k < taps.size(); ++k) {
          const std::ptrdiff_t idx = first + static_cast<std::ptrdiff_t>(k);
          if (idx >= 0 && idx < n_in) acc += taps[k] * x[static_cast<std::size_t>(idx)];
        }
        out[c][j] = acc;
      }
    }
    return AudioClip(std::move(out[0]), std::move(out[1]), target_);
  }

 private:
  int source_;
  int target_;
  std::size_t up_ = 1;
  std::size_t down_ = 1;
  std::size_t half_ = 0;
  std::vector<std::vector<double>> phases_;
};

inline AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ArgumentError("resample: target rate must be positive");
  if (target_rate == clip.sample_rate()) return clip;
  return Resampler(clip.sample_rate(), target_rate).process(clip);
}

}  // namespace dialogsep
