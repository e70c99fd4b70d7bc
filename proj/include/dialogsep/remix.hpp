#pragma once

// Dialog-enhancement remixing y_hat = x_hat + mu * b_hat and loudness-matched
// listening-test condition preparation.

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialogsep/audio.hpp"
#include "dialogsep/error.hpp"
#include "dialogsep/filters.hpp"
#include "dialogsep/irm.hpp"
#include "dialogsep/loudness.hpp"
#include "dialogsep/wav.hpp"

namespace dialogsep {

inline constexpr double kReferenceAttenuationDb = 12.0;
inline constexpr double kMaxAttenuationDb = 120.0;
inline constexpr double kTargetLufs = -23.0;
inline constexpr const char* kHiddenReferenceId = "hidden_reference";
inline constexpr const char* kAnchorId = "anchor_lp3500";

struct RemixSpec {
  double mu = 1.0;  // linear background scale
  double target_lufs = kTargetLufs;

  static RemixSpec from_attenuation_db(double attenuation_db, double target_lufs = kTargetLufs) {
    return {db_to_linear(-attenuation_db), target_lufs};
  }
};

/// x_hat + mu * b_hat
inline AudioClip remix(const AudioClip& dialog, const AudioClip& background, const RemixSpec& spec) {
  if (!(spec.mu >= 0.0)) throw ArgumentError("remix: mu must be >= 0");
  return add_scaled(dialog, background, spec.mu, "remix");
}

/// y - x_hat
inline AudioClip derive_background(const AudioClip& mixture, const AudioClip& dialog_estimate) {
  return add_scaled(mixture, dialog_estimate, -1.0, "derive_background");
}

/// True stems with the background attenuated by `attenuation_db`.
inline AudioClip make_reference_condition(const Stems& stems, double attenuation_db = kReferenceAttenuationDb) {
  return add_scaled(stems.dialog(), stems.background(), db_to_linear(-attenuation_db), "make_reference_condition");
}

struct Attenuation {
  double db = 0.0;
  bool silent_background = false;  // estimated background immeasurable
  bool silent_reference = false;   // reference background immeasurable
  bool clamped = false;            // exceeded the 120 dB maximum
  [[nodiscard]] bool amplification() const noexcept { return db < 0.0; }
};

/// Attenuation g (dB) that brings the inactive-block loudness of
/// `background_estimate` down to that of `reference_background`. Uses
/// gain-linearity of ungated loudness, so g is a loudness difference.
inline Attenuation condition_attenuation(const AudioClip& background_estimate, const AudioClip& reference_background,
                                         const ActivityMask& mask, const LoudnessConfig& cfg = {}) {
  const Lufs est = loudness_during_inactivity(background_estimate, mask, cfg);
  const Lufs ref = loudness_during_inactivity(reference_background, mask, cfg);
  Attenuation a;
  if (!est.is_measurable()) {
    a.db = kMaxAttenuationDb;
    a.silent_background = true;
    return a;
  }
  if (!ref.is_measurable()) {
    a.db = kMaxAttenuationDb;
    a.silent_reference = true;
    a.clamped = true;
    return a;
  }
  a.db = est.value() - ref.value();
  if (a.db > kMaxAttenuationDb) {
    a.db = kMaxAttenuationDb;
    a.clamped = true;
  }
  return a;
}

struct ConditionConfig {
  double reference_attenuation_db = kReferenceAttenuationDb;
  double target_lufs = kTargetLufs;
  double activity_threshold_dbfs = kDefaultActivityThresholdDbfs;
  LoudnessConfig loudness = LoudnessConfig::ungated();
};

/// One rendered, loudness-normalized listening-test condition.
struct ConditionItem {
  AudioClip signal;
  std::string condition_id;
  std::string item_id;
  double background_attenuation_db = 0.0;
  double normalization_gain_db = 0.0;
  std::vector<std::string> flags;
};

/// Activity mask from the reference dialog; rejects items without any
/// dialog-inactive block.
inline ActivityMask inactivity_mask_for(const Stems& stems, const ConditionConfig& cfg) {
  ActivityMask mask = dialog_activity_mask(stems.dialog(), cfg.activity_threshold_dbfs, cfg.loudness);
  if (mask.inactive_count() == 0) {
    throw NoInactivityError("dialog is active in every measurement block; background level cannot be matched");
  }
  return mask;
}

namespace remix_detail {

inline ConditionItem finish(AudioClip mix, std::string item_id, std::string condition_id, double attenuation_db,
                            std::vector<std::string> flags, const ConditionConfig& cfg) {
  auto normalized = normalize_to_lufs(mix, cfg.target_lufs, cfg.loudness);
  return {std::move(normalized.clip), std::move(condition_id), std::move(item_id), attenuation_db,
          normalized.applied_gain_db, std::move(flags)};
}

}  // namespace remix_detail

/// Hidden reference: true dialog plus background attenuated by 12 dB, normalized.
inline ConditionItem prepare_reference(const std::string& item_id, const Stems& stems, const ConditionConfig& cfg = {}) {
  return remix_detail::finish(make_reference_condition(stems, cfg.reference_attenuation_db), item_id,
                              kHiddenReferenceId, cfg.reference_attenuation_db, {}, cfg);
}

/// Derives the background from the estimate, matches its loudness during
/// dialog inactivity to the reference condition, remixes and normalizes.
inline ConditionItem prepare_condition(const std::string& item_id, const std::string& condition_id, const Stems& stems,
                                       const AudioClip& dialog_estimate, const ConditionConfig& cfg = {}) {
  require_aligned(stems.mixture(), dialog_estimate, "prepare_condition");
  const ActivityMask mask = inactivity_mask_for(stems, cfg);
  const AudioClip reference_background =
      apply_gain_db(stems.background(), -cfg.reference_attenuation_db);
  const AudioClip background = derive_background(stems.mixture(), dialog_estimate);
  const Attenuation att = condition_attenuation(background, reference_background, mask, cfg.loudness);

  std::vector<std::string> flags;
  if (att.silent_background) flags.emplace_back("silent_background");
  if (att.silent_reference) flags.emplace_back("silent_reference");
  if (att.clamped) flags.emplace_back("attenuation_clamped");
  if (att.amplification()) flags.emplace_back("amplification");

  const AudioClip mix = remix(dialog_estimate, background, RemixSpec::from_attenuation_db(att.db));
  return remix_detail::finish(mix, item_id, condition_id, att.db, std::move(flags), cfg);
}

/// 3.5 kHz low-passed reference condition, normalized.
inline AudioClip make_anchor(const AudioClip& reference_condition, const ConditionConfig& cfg = {}) {
  return normalize_to_lufs(lowpass_3k5(reference_condition), cfg.target_lufs, cfg.loudness).clip;
}

inline ConditionItem prepare_anchor(const ConditionItem& reference, const ConditionConfig& cfg = {}) {
  auto normalized = normalize_to_lufs(lowpass_3k5(reference.signal), cfg.target_lufs, cfg.loudness);
  return {std::move(normalized.clip), kAnchorId, reference.item_id, reference.background_attenuation_db,
          reference.normalization_gain_db + normalized.applied_gain_db, {}};
}

inline std::string condition_file_name(const std::string& item_id, const std::string& condition_id) {
  return item_id + "__" + condition_id + ".wav";
}

inline nlohmann::json to_json(const ConditionItem& c) {
  return {{"item_id", c.item_id},
          {"condition_id", c.condition_id},
          {"file", condition_file_name(c.item_id, c.condition_id)},
          {"background_attenuation_db", c.background_attenuation_db},
          // value the attenuation-only reading of the protocol would use
          {"attenuation_only_db", std::max(0.0, c.background_attenuation_db)},
          {"normalization_gain_db", c.normalization_gain_db},
          {"flags", c.flags}};
}

/// Writes `<item_id>__<condition_id>.wav` (float32) for each condition and
/// returns the manifest entries in input order.
inline nlohmann::json write_conditions(const std::filesystem::path& dir, const std::vector<ConditionItem>& items) {
  std::filesystem::create_directories(dir);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& item : items) {
    save_wav(item.signal, dir / condition_file_name(item.item_id, item.condition_id), BitDepth::Float32);
    entries.push_back(to_json(item));
  }
  return entries;
}

}  // namespace dialogsep
