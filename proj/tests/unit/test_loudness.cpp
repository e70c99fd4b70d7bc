#include <gtest/gtest.h>

#include "dialogsep/loudness.hpp"
#include "support/test_signals.hpp"

namespace ds = dialogsep;

namespace {

// Direct-form-I reference of the loudness pipeline, sharing nothing with the
// library except the coefficient table.
std::vector<double> ref_filter(const ds::Biquad& f, const std::vector<double>& x) {
  std::vector<double> y(x.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    y[n] = f.b0 * x[n] + f.b1 * x1 + f.b2 * x2 - f.a1 * y1 - f.a2 * y2;
    x2 = x1;
    x1 = x[n];
    y2 = y1;
    y1 = y[n];
  }
  return y;
}

std::vector<double> ref_block_powers(const ds::AudioClip& clip) {
  const auto k = ds::KWeighting::for_rate(clip.sample_rate());
  const std::size_t block = static_cast<std::size_t>(0.4 * clip.sample_rate() + 0.5);
  const std::size_t step = static_cast<std::size_t>(0.1 * clip.sample_rate() + 0.5);
  std::vector<std::vector<double>> ch;
  for (std::size_t c = 0; c < 2; ++c) {
    std::vector<double> x(clip.channel(c).begin(), clip.channel(c).end());
    ch.push_back(ref_filter(k.highpass, ref_filter(k.shelf, x)));
  }
  std::vector<double> out;
  for (std::size_t start = 0; start + block <= clip.length(); start += step) {
    double z = 0;
    for (const auto& y : ch) {
      double acc = 0;
      for (std::size_t n = start; n < start + block; ++n) acc += y[n] * y[n];
      z += acc / block;
    }
    out.push_back(z);
  }
  return out;
}

double ref_lufs(double power) { return -0.691 + 10 * std::log10(power); }

double ref_gated(const std::vector<double>& z) {
  std::vector<double> abs_kept;
  for (double p : z) {
    if (ref_lufs(p) > -70.0) abs_kept.push_back(p);
  }
  double mean = 0;
  for (double p : abs_kept) mean += p;
  mean /= abs_kept.size();
  const double rel = ref_lufs(mean) - 10.0;
  double acc = 0;
  std::size_t n = 0;
  for (double p : abs_kept) {
    if (ref_lufs(p) > rel) {
      acc += p;
      ++n;
    }
  }
  return ref_lufs(acc / n);
}

ds::AudioClip left_only(const std::vector<double>& x, int rate) {
  return ds::AudioClip(x, std::vector<double>(x.size(), 0.0), rate);
}

}  // namespace

TEST(Loudness, FullScaleSineOneChannel) {
  for (int rate : {48000, 44100}) {
    const auto clip = left_only(ds::testing::sine(997.0, rate, 5 * rate), rate);
    EXPECT_NEAR(ds::integrated_loudness(clip).value(), -3.01, 0.1) << rate;
    EXPECT_NEAR(ds::integrated_loudness(clip, ds::LoudnessConfig::gated()).value(), -3.01, 0.1) << rate;
  }
}

TEST(Loudness, MinusTwentyDbfsSine) {
  const auto clip = left_only(ds::testing::sine(997.0, 48000, 5 * 48000, 0.1), 48000);
  EXPECT_NEAR(ds::integrated_loudness(clip).value(), -23.01, 0.1);
}

TEST(Loudness, SilenceIsImmeasurable) {
  const auto l = ds::integrated_loudness(ds::AudioClip::zeros(48000, 48000));
  EXPECT_FALSE(l.is_measurable());
  EXPECT_THROW((void)l.value(), ds::CannotNormalizeError);
  EXPECT_EQ(l.value_or_sentinel(), -std::numeric_limits<double>::infinity());
}

TEST(Loudness, ShortClipRejected) {
  EXPECT_THROW((void)ds::integrated_loudness(ds::AudioClip::zeros(1000, 48000)), ds::ArgumentError);
}

TEST(Loudness, DerivedCoefficientsMatchTableAt48k) {
  const auto t = ds::KWeighting::table_48k();
  const auto d = ds::KWeighting::derive(48000);
  auto cmp = [](const ds::Biquad& a, const ds::Biquad& b) {
    EXPECT_NEAR(a.b0, b.b0, 1e-6);
    EXPECT_NEAR(a.b1, b.b1, 1e-6);
    EXPECT_NEAR(a.b2, b.b2, 1e-6);
    EXPECT_NEAR(a.a1, b.a1, 1e-6);
    EXPECT_NEAR(a.a2, b.a2, 1e-6);
  };
  cmp(t.shelf, d.shelf);
  cmp(t.highpass, d.highpass);
}

TEST(Loudness, BlockPowersMatchReference) {
  for (int rate : {48000, 44100}) {
    const auto clip = ds::testing::noise_clip(rate, rate, 11, 0.3);
    const auto got = ds::block_powers(clip);
    const auto want = ref_block_powers(clip);
    ASSERT_EQ(got.size(), want.size());
    EXPECT_EQ(got.size(), 7u);
    for (std::size_t j = 0; j < got.size(); ++j) EXPECT_NEAR(got[j], want[j], 1e-9 * want[j]);
  }
}

TEST(Loudness, GatingMatchesReference) {
  // 2 s tone, 2 s digital silence, 1 s quiet tone.
  const int rate = 48000;
  auto x = ds::testing::sine(440.0, rate, 2 * rate, 0.1);
  x.resize(4 * rate, 0.0);
  const auto quiet = ds::testing::sine(440.0, rate, rate, 0.001);
  x.insert(x.end(), quiet.begin(), quiet.end());
  const ds::AudioClip clip = ds::AudioClip::dual_mono(x, rate);

  const double gated = ds::integrated_loudness(clip, ds::LoudnessConfig::gated()).value();
  const double ungated = ds::integrated_loudness(clip).value();
  EXPECT_NEAR(gated, ref_gated(ref_block_powers(clip)), 1e-9);
  EXPECT_GT(gated, ungated + 2.0);

  double mean = 0;
  for (double p : ref_block_powers(clip)) mean += p;
  mean /= ref_block_powers(clip).size();
  EXPECT_NEAR(ungated, ref_lufs(mean), 1e-9);
}

TEST(Loudness, GainLinearityProperty) {
  const auto clip = ds::testing::noise_clip(2 * 44100, 44100, 3, 0.5);
  const double base = ds::integrated_loudness(clip).value();
  for (double g = -40.0; g <= 40.0; g += 5.0) {
    EXPECT_NEAR(ds::integrated_loudness(ds::apply_gain_db(clip, g)).value(), base + g, 0.01) << g;
  }
}

TEST(Loudness, ChannelSwapInvariance) {
  const auto clip = ds::testing::noise_clip(48000, 48000, 4, 0.5);
  const ds::AudioClip swapped(std::vector<double>(clip.channel(1).begin(), clip.channel(1).end()),
                              std::vector<double>(clip.channel(0).begin(), clip.channel(0).end()), 48000);
  EXPECT_NEAR(ds::integrated_loudness(clip).value(), ds::integrated_loudness(swapped).value(), 1e-9);
}

TEST(ActivityMask, SilentFullAndHalf) {
  const int rate = 48000;
  EXPECT_EQ(ds::dialog_activity_mask(ds::AudioClip::zeros(2 * rate, rate)).inactive_count(),
            ds::loudness_block_count(2 * rate, rate));
  EXPECT_EQ(ds::dialog_activity_mask(ds::testing::noise_clip(2 * rate, rate, 1, 0.1)).inactive_count(), 0u);

  auto x = ds::testing::sine(300.0, rate, rate, 0.1);
  x.resize(2 * rate, 0.0);
  const auto clip = ds::AudioClip::dual_mono(x, rate);
  const auto mask = ds::dialog_activity_mask(clip);
  const std::size_t block = 19200, step = 4800;
  ASSERT_EQ(mask.size(), 17u);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    const double r = ds::testing::rms(x, j * step, j * step + block);
    EXPECT_EQ(mask.active[j], 20 * std::log10(r + 1e-300) > -60.0) << j;
  }
  EXPECT_GT(mask.inactive_count(), 0u);
  EXPECT_LT(mask.inactive_count(), mask.size());
}

TEST(ActivityMask, InactivityRestriction) {
  const int rate = 48000;
  const auto bg = ds::testing::noise_clip(3 * rate, rate, 8, 0.2);
  const auto all_inactive = ds::dialog_activity_mask(ds::AudioClip::zeros(3 * rate, rate));
  EXPECT_NEAR(ds::loudness_during_inactivity(bg, all_inactive).value(), ds::integrated_loudness(bg).value(), 1e-12);

  // Background: 2 s at one level, 2 s 10 dB louder; dialog active only in the loud half.
  auto quiet = ds::testing::noise(2 * rate, 1, 0.1);
  auto loud = ds::testing::noise(2 * rate, 2, 0.1 * std::pow(10.0, 0.5));
  std::vector<double> b = quiet;
  b.insert(b.end(), loud.begin(), loud.end());
  std::vector<double> d(2 * rate, 0.0);
  const auto talk = ds::testing::sine(200.0, rate, 2 * rate, 0.5);
  d.insert(d.end(), talk.begin(), talk.end());
  const auto bclip = ds::AudioClip::dual_mono(b, rate);
  const auto mask = ds::dialog_activity_mask(ds::AudioClip::dual_mono(d, rate));
  const double quiet_alone = ds::integrated_loudness(ds::AudioClip::dual_mono(quiet, rate)).value();
  EXPECT_NEAR(ds::loudness_during_inactivity(bclip, mask).value(), quiet_alone, 0.3);
  EXPECT_GT(ds::integrated_loudness(bclip).value(), quiet_alone + 5.0);
}

TEST(ActivityMask, Errors) {
  const int rate = 48000;
  const auto bg = ds::testing::noise_clip(2 * rate, rate, 8, 0.2);
  EXPECT_THROW((void)ds::loudness_during_inactivity(bg, ds::dialog_activity_mask(bg)), ds::NoInactivityError);
  const auto short_mask = ds::dialog_activity_mask(ds::AudioClip::zeros(rate, rate));
  EXPECT_THROW((void)ds::loudness_during_inactivity(bg, short_mask), ds::ArgumentError);
}

TEST(Normalize, HitsTarget) {
  const auto clip = left_only(ds::testing::sine(997.0, 48000, 3 * 48000, std::pow(10.0, -27.0 / 20.0)), 48000);
  const double before = ds::integrated_loudness(clip).value();
  EXPECT_NEAR(before, -30.0, 0.1);
  const auto n = ds::normalize_to_lufs(clip, -23.0);
  EXPECT_NEAR(n.applied_gain_db, -23.0 - before, 1e-12);
  EXPECT_NEAR(n.applied_gain_db, 7.0, 0.1);
  EXPECT_NEAR(ds::integrated_loudness(n.clip).value(), -23.0, 0.1);
  EXPECT_THROW((void)ds::normalize_to_lufs(ds::AudioClip::zeros(48000, 48000), -23.0), ds::CannotNormalizeError);
}
