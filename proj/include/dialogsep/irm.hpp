#pragma once

// Oracle ideal-ratio-mask separation: the mask is built from the true stems
// and applied to the mixture spectrogram.

#include <cmath>
#include <string>
#include <vector>

#include "dialogsep/audio.hpp"
#include "dialogsep/error.hpp"
#include "dialogsep/stft.hpp"

namespace dialogsep {

inline constexpr double kDefaultMixTolerance = 1e-4;

/// Temporally aligned mixture y, dialog x and background b with y = x + b.
class Stems {
 public:
  Stems(AudioClip mixture, AudioClip dialog, AudioClip background, double mix_tolerance = kDefaultMixTolerance)
      : mixture_(std::move(mixture)), dialog_(std::move(dialog)), background_(std::move(background)) {
    require_aligned(mixture_, dialog_, "Stems (mixture vs dialog)");
    require_aligned(mixture_, background_, "Stems (mixture vs background)");
    const double err = mix_error();
    if (!(err <= mix_tolerance)) {
      throw ArgumentError("Stems: mixture differs from dialog + background by " + std::to_string(err) +
                          " (tolerance " + std::to_string(mix_tolerance) + ")");
    }
  }

  /// Builds stems whose mixture is exactly dialog + background.
  static Stems from_components(AudioClip dialog, AudioClip background) {
    AudioClip mixture = add_scaled(dialog, background, 1.0, "Stems::from_components");
    return Stems(std::move(mixture), std::move(dialog), std::move(background), 0.0);
  }

  [[nodiscard]] const AudioClip& mixture() const noexcept { return mixture_; }
  [[nodiscard]] const AudioClip& dialog() const noexcept { return dialog_; }
  [[nodiscard]] const AudioClip& background() const noexcept { return background_; }
  [[nodiscard]] int sample_rate() const noexcept { return mixture_.sample_rate(); }
  [[nodiscard]] std::size_t length() const noexcept { return mixture_.length(); }

  /// max |y - (x + b)|
  [[nodiscard]] double mix_error() const {
    double worst = 0.0;
    for (std::size_t c = 0; c < kChannels; ++c) {
      auto y = mixture_.channel(c);
      auto x = dialog_.channel(c);
      auto b = background_.channel(c);
      for (std::size_t n = 0; n < y.size(); ++n) worst = std::max(worst, std::abs(y[n] - (x[n] + b[n])));
    }
    return worst;
  }

 private:
  AudioClip mixture_;
  AudioClip dialog_;
  AudioClip background_;
};

struct IrmConfig {
  StftConfig stft = StftConfig::oracle();
  double exponent = 2.0;
  /// Added to the mask denominator (power domain).
  double floor = 1e-12;

  void validate() const {
    stft.validate();
    if (!(exponent > 0.0)) throw ArgumentError("IrmConfig: exponent must be positive");
    if (!(floor > 0.0)) throw ArgumentError("IrmConfig: floor must be positive");
  }
};

struct SeparationResult {
  AudioClip dialog;
  AudioClip background;
};

/// Real mask with the same (channel, frame, bin) layout as a Spectrogram.
struct TfMask {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> values;

  [[nodiscard]] double at(std::size_t channel, std::size_t frame, std::size_t bin) const {
    return values[(channel * frames + frame) * bins + bin];
  }
};

/// M = |X|^p / (|X|^p + |B|^p + floor)
inline TfMask irm_mask(const Spectrogram& dialog, const Spectrogram& background, const IrmConfig& cfg) {
  cfg.validate();
  if (!dialog.same_shape(background)) throw ArgumentError("irm_mask: dialog and background spectrograms differ in shape");
  TfMask mask{dialog.frames(), dialog.bins(), std::vector<double>(dialog.values().size())};
  const auto x = dialog.values();
  const auto b = background.values();
  const bool squared = cfg.exponent == 2.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double px = squared ? std::norm(x[i]) : std::pow(std::abs(x[i]), cfg.exponent);
    const double pb = squared ? std::norm(b[i]) : std::pow(std::abs(b[i]), cfg.exponent);
    mask.values[i] = px / (px + pb + cfg.floor);
  }
  return mask;
}

/// Applies `mask` (or 1 - mask when `complement`) to a spectrogram.
inline Spectrogram apply_mask(const Spectrogram& spec, const TfMask& mask, bool complement = false) {
  if (mask.values.size() != spec.values().size() || mask.frames != spec.frames() || mask.bins != spec.bins()) {
    throw ArgumentError("apply_mask: mask shape does not match spectrogram");
  }
  Spectrogram out = spec;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= complement ? 1.0 - mask.values[i] : mask.values[i];
  return out;
}

/// x_hat = istft(M * Y), b_hat = istft((1 - M) * Y).
inline SeparationResult separate_oracle(const Stems& stems, const IrmConfig& cfg = {}) {
  cfg.validate();
  const Spectrogram mix = stft(stems.mixture(), cfg.stft);
  const TfMask mask = irm_mask(stft(stems.dialog(), cfg.stft), stft(stems.background(), cfg.stft), cfg);
  return {istft(apply_mask(mix, mask)), istft(apply_mask(mix, mask, true))};
}

}  // namespace dialogsep
