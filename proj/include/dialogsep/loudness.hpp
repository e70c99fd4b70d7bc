#pragma once

// ITU-R BS.1770 integrated loudness: K-weighting, 400 ms blocks with 75%
// overlap, optional absolute/relative gating, and measurement restricted to
// dialog-inactive blocks.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dialogsep/audio.hpp"
#include "dialogsep/error.hpp"

namespace dialogsep {

/// A loudness value in LUFS, or "immeasurable" for digital silence.
class Lufs {
 public:
  static Lufs measured(double value) { return Lufs(value); }
  static Lufs immeasurable() { return Lufs(); }

  [[nodiscard]] bool is_measurable() const noexcept { return value_.has_value(); }

  [[nodiscard]] double value() const {
    if (!value_) throw CannotNormalizeError("loudness is immeasurable (digital silence)");
    return *value_;
  }

  /// The value, or -infinity when immeasurable.
  [[nodiscard]] double value_or_sentinel() const noexcept {
    return value_.value_or(-std::numeric_limits<double>::infinity());
  }

 private:
  Lufs() = default;
  explicit Lufs(double v) : value_(v) {}
  std::optional<double> value_;
};

struct LoudnessConfig {
  bool gating = false;
  double block_seconds = 0.4;
  double step_seconds = 0.1;  // 75% overlap
  std::array<double, kChannels> channel_weights{1.0, 1.0};

  static LoudnessConfig ungated() { return {}; }
  static LoudnessConfig gated() {
    LoudnessConfig c;
    c.gating = true;
    return c;
  }
};

inline constexpr double kAbsoluteGateLufs = -70.0;
inline constexpr double kRelativeGateLu = -10.0;
inline constexpr double kLoudnessOffset = -0.691;

/// Biquad coefficients, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// The two K-weighting stages (high-shelf pre-filter, RLB high-pass).
struct KWeighting {
  Biquad shelf;
  Biquad highpass;

  /// Coefficient table of the standard, valid at 48 kHz.
  static KWeighting table_48k() {
    return {{1.53512485958697, -2.69169618940638, 1.19839281085285, -1.69065929318241, 0.73248077421585},
            {1.0, -2.0, 1.0, -1.99004745483398, 0.99007225036621}};
  }

  /// Bilinear-transform design from the analog prototype parameters that
  /// reproduce the 48 kHz table.
  static KWeighting derive(double sample_rate) {
    KWeighting k{};
    {
      const double f0 = 1681.974450955533;
      const double gain_db = 3.999843853973347;
      const double q = 0.7071752369554196;
      const double kk = std::tan(std::numbers::pi * f0 / sample_rate);
      const double vh = std::pow(10.0, gain_db / 20.0);
      const double vb = std::pow(vh, 0.4996667741545416);
      const double a0 = 1.0 + kk / q + kk * kk;
      k.shelf = {(vh + vb * kk / q + kk * kk) / a0, 2.0 * (kk * kk - vh) / a0, (vh - vb * kk / q + kk * kk) / a0,
                 2.0 * (kk * kk - 1.0) / a0, (1.0 - kk / q + kk * kk) / a0};
    }
    {
      const double f0 = 38.13547087602444;
      const double q = 0.5003270373238773;
      const double kk = std::tan(std::numbers::pi * f0 / sample_rate);
      const double a0 = 1.0 + kk / q + kk * kk;
      k.highpass = {1.0, -2.0, 1.0, 2.0 * (kk * kk - 1.0) / a0, (1.0 - kk / q + kk * kk) / a0};
    }
    return k;
  }

  static KWeighting for_rate(int sample_rate) { return sample_rate == 48000 ? table_48k() : derive(sample_rate); }
};

namespace loudness_detail {

inline void run_biquad(const Biquad& f, std::vector<double>& x) {
  double z1 = 0.0;
  double z2 = 0.0;
  for (double& v : x) {
    const double in = v;
    const double out = f.b0 * in + z1;
    z1 = f.b1 * in - f.a1 * out + z2;
    z2 = f.b2 * in - f.a2 * out;
    v = out;
  }
}

struct BlockLayout {
  std::size_t block;
  std::size_t step;
  std::size_t count;
};

inline BlockLayout layout(std::size_t length, int sample_rate, const LoudnessConfig& cfg) {
  const auto block = static_cast<std::size_t>(std::lround(cfg.block_seconds * sample_rate));
  const auto step = static_cast<std::size_t>(std::lround(cfg.step_seconds * sample_rate));
  if (block == 0 || step == 0) throw ArgumentError("loudness: block or step rounds to zero samples");
  if (length < block) {
    throw ArgumentError("loudness: clip of " + std::to_string(length) + " samples is shorter than one " +
                        std::to_string(cfg.block_seconds) + " s block");
  }
  return {block, step, (length - block) / step + 1};
}

inline Lufs from_power(double power) {
  if (!(power > 0.0)) return Lufs::immeasurable();
  return Lufs::measured(kLoudnessOffset + 10.0 * std::log10(power));
}

}  // namespace loudness_detail

/// Number of measurement blocks for a clip of `length` samples.
inline std::size_t loudness_block_count(std::size_t length, int sample_rate, const LoudnessConfig& cfg = {}) {
  return loudness_detail::layout(length, sample_rate, cfg).count;
}

/// Channel-weighted mean-square power of the K-weighted signal per block.
inline std::vector<double> block_powers(const AudioClip& clip, const LoudnessConfig& cfg = {}) {
  using namespace loudness_detail;
  const BlockLayout lay = layout(clip.length(), clip.sample_rate(), cfg);
  const KWeighting k = KWeighting::for_rate(clip.sample_rate());
  std::vector<double> powers(lay.count, 0.0);
  for (std::size_t c = 0; c < kChannels; ++c) {
    std::vector<double> x(clip.channel(c).begin(), clip.channel(c).end());
    run_biquad(k.shelf, x);
    run_biquad(k.highpass, x);
    // Prefix sums of squares make every block O(1).
    std::vector<double> prefix(x.size() + 1, 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) prefix[n + 1] = prefix[n] + x[n] * x[n];
    for (std::size_t j = 0; j < lay.count; ++j) {
      const std::size_t begin = j * lay.step;
      const double ms = (prefix[begin + lay.block] - prefix[begin]) / static_cast<double>(lay.block);
      powers[j] += cfg.channel_weights[c] * ms;
    }
  }
  return powers;
}

/// Integrated loudness from block powers, honoring the gating setting.
inline Lufs integrate_blocks(const std::vector<double>& powers, bool gating) {
  using namespace loudness_detail;
  if (powers.empty()) return Lufs::immeasurable();
  auto mean_of = [&](double threshold_power) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double p : powers) {
      if (p > threshold_power) {
        sum += p;
        ++n;
      }
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
  };
  if (!gating) {
    double sum = 0.0;
    for (double p : powers) sum += p;
    return from_power(sum / static_cast<double>(powers.size()));
  }
  auto power_of = [](double lufs) { return std::pow(10.0, (lufs - kLoudnessOffset) / 10.0); };
  const double abs_gated = mean_of(power_of(kAbsoluteGateLufs));
  const Lufs abs_level = from_power(abs_gated);
  if (!abs_level.is_measurable()) return abs_level;
  return from_power(mean_of(power_of(abs_level.value() + kRelativeGateLu)));
}

inline Lufs integrated_loudness(const AudioClip& clip, const LoudnessConfig& cfg = {}) {
  return integrate_blocks(block_powers(clip, cfg), cfg.gating);
}

/// Per-block dialog activity flags on the loudness block grid.
struct ActivityMask {
  std::vector<bool> active;

  [[nodiscard]] std::size_t size() const noexcept { return active.size(); }
  [[nodiscard]] std::size_t inactive_count() const noexcept {
    return static_cast<std::size_t>(std::count(active.begin(), active.end(), false));
  }
};

inline constexpr double kDefaultActivityThresholdDbfs = -60.0;

/// Block is active iff the unweighted RMS of the dialog over both channels
/// exceeds `threshold_dbfs`.
inline ActivityMask dialog_activity_mask(const AudioClip& dialog, double threshold_dbfs = kDefaultActivityThresholdDbfs,
                                         const LoudnessConfig& cfg = {}) {
  using namespace loudness_detail;
  const BlockLayout lay = layout(dialog.length(), dialog.sample_rate(), cfg);
  std::vector<double> prefix(dialog.length() + 1, 0.0);
  for (std::size_t n = 0; n < dialog.length(); ++n) {
    const double l = dialog.channel(0)[n];
    const double r = dialog.channel(1)[n];
    prefix[n + 1] = prefix[n] + l * l + r * r;
  }
  const double threshold_ms = std::pow(10.0, threshold_dbfs / 10.0);
  ActivityMask mask;
  mask.active.resize(lay.count);
  for (std::size_t j = 0; j < lay.count; ++j) {
    const std::size_t begin = j * lay.step;
    const double ms = (prefix[begin + lay.block] - prefix[begin]) / (2.0 * static_cast<double>(lay.block));
    mask.active[j] = ms > threshold_ms;
  }
  return mask;
}

/// Ungated integrated loudness over the blocks the mask marks inactive.
inline Lufs loudness_during_inactivity(const AudioClip& clip, const ActivityMask& mask, LoudnessConfig cfg = {}) {
  cfg.gating = false;
  const auto powers = block_powers(clip, cfg);
  if (powers.size() != mask.size()) {
    throw ArgumentError("loudness_during_inactivity: mask has " + std::to_string(mask.size()) + " blocks, clip has " +
                        std::to_string(powers.size()));
  }
  std::vector<double> inactive;
  for (std::size_t j = 0; j < powers.size(); ++j) {
    if (!mask.active[j]) inactive.push_back(powers[j]);
  }
  if (inactive.empty()) throw NoInactivityError("loudness_during_inactivity: dialog is active in every block");
  return integrate_blocks(inactive, false);
}

struct NormalizedClip {
  AudioClip clip;
  double applied_gain_db = 0.0;
};

/// Scales `clip` so that its integrated loudness equals `target_lufs`.
inline NormalizedClip normalize_to_lufs(const AudioClip& clip, double target_lufs, const LoudnessConfig& cfg = {}) {
  const Lufs measured = integrated_loudness(clip, cfg);
  if (!measured.is_measurable()) throw CannotNormalizeError("normalize_to_lufs: clip is silent");
  const double gain = target_lufs - measured.value();
  return {apply_gain_db(clip, gain), gain};
}

}  // namespace dialogsep
