#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dialogsep/metrics.hpp"
#include "support/rational_projection.hpp"
#include "support/test_signals.hpp"

namespace ds = dialogsep;
using V = std::vector<double>;

namespace {

void expect_vec_near(const V& got, const V& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "i=" << i;
}

}  // namespace

TEST(Decompose, Identity) {
  const auto d = ds::decompose(V{1, 0}, V{1, 0}, V{0, 1});
  expect_vec_near(d.target, {1, 0}, 1e-15);
  expect_vec_near(d.interference, {0, 0}, 1e-15);
  expect_vec_near(d.artifacts, {0, 0}, 1e-15);
}

TEST(Decompose, InterferenceLeak) {
  const auto d = ds::decompose(V{1, 0.5}, V{1, 0}, V{0, 1});
  expect_vec_near(d.target, {1, 0}, 1e-15);
  expect_vec_near(d.interference, {0, 0.5}, 1e-15);
  expect_vec_near(d.artifacts, {0, 0}, 1e-15);
}

TEST(Decompose, ArtifactOutsideSpan) {
  const auto d = ds::decompose(V{1, 1, 1}, V{1, 0, 0}, V{0, 1, 0});
  expect_vec_near(d.artifacts, {0, 0, 1}, 1e-15);
}

TEST(Decompose, Errors) {
  EXPECT_THROW((void)ds::decompose(V{1, 1}, V{0, 0}, V{0, 1}), ds::DegenerateReferenceError);
  EXPECT_THROW((void)ds::decompose(V{1, 1}, V{1, 0, 0}, V{0, 1}), ds::ArgumentError);
}

TEST(Decompose, MatchesExactNormalEquations) {
  std::mt19937 gen(2024);
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_int_distribution<int> val(-6, 6);
  int checked = 0;
  while (checked < 300) {
    const int n = len(gen);
    std::vector<int> e(n), s(n), b(n);
    for (int i = 0; i < n; ++i) {
      e[i] = val(gen);
      s[i] = val(gen);
      b[i] = val(gen);
    }
    if (std::all_of(s.begin(), s.end(), [](int v) { return v == 0; })) continue;
    const V ed(e.begin(), e.end()), sd(s.begin(), s.end()), bd(b.begin(), b.end());
    const auto got = ds::decompose(ed, sd, bd);
    const auto want = ds::testing::exact_decompose(e, s, b);
    expect_vec_near(got.target, want.target, 1e-9);
    expect_vec_near(got.interference, want.interference, 1e-9);
    expect_vec_near(got.artifacts, want.artifacts, 1e-9);
    ++checked;
  }
}

TEST(Decompose, ComponentsSumAndAreOrthogonal) {
  const auto e = ds::testing::noise(500, 1);
  const auto s = ds::testing::noise(500, 2);
  const auto b = ds::testing::noise(500, 3);
  const auto d = ds::decompose(e, s, b);
  double scale = ds::testing::energy(e);
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_NEAR(d.target[i] + d.interference[i] + d.artifacts[i], e[i], 1e-9 * std::abs(e[i]) + 1e-12);
  }
  auto dot = [](const V& a, const V& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  };
  EXPECT_LT(std::abs(dot(d.target, d.interference)), 1e-6 * scale);
  EXPECT_LT(std::abs(dot(d.target, d.artifacts)), 1e-6 * scale);
  EXPECT_LT(std::abs(dot(d.interference, d.artifacts)), 1e-6 * scale);
}

TEST(SiSdr, HandCases) {
  EXPECT_EQ(ds::si_sdr(V{1, 2, 3}, V{1, 2, 3}), 100.0);
  EXPECT_EQ(ds::si_sdr(V{2, 4, 6}, V{1, 2, 3}), 100.0);
  EXPECT_NEAR(ds::si_sdr(V{1, 1}, V{1, 0}), 0.0, 1e-12);
  EXPECT_THROW((void)ds::si_sdr(V{0, 0}, V{1, 0}), ds::DegenerateReferenceError);
  EXPECT_THROW((void)ds::si_sdr(V{1, 0}, V{0, 0}), ds::DegenerateReferenceError);
}

TEST(SiSir, HandCases) {
  EXPECT_NEAR(ds::si_sir(V{1, 0.5}, V{1, 0}, V{0, 1}), 10.0 * std::log10(4.0), 1e-12);
  EXPECT_NEAR(ds::si_sir(V{1, 0.5}, V{1, 0}, V{0, 1}), 6.021, 0.001);
  EXPECT_EQ(ds::si_sir(V{1, 0}, V{1, 0}, V{0, 1}), 100.0);
  EXPECT_EQ(ds::si_sir(V{0, 1}, V{1, 0}, V{0, 1}), -100.0);
}

TEST(SiSdr, ScaleInvarianceProperty) {
  std::mt19937 gen(77);
  for (int i = 0; i < 50; ++i) {
    const auto e = ds::testing::noise(256, gen());
    const auto s = ds::testing::noise(256, gen());
    const double base = ds::si_sdr(e, s);
    for (double c : {0.1, 3.7, 10.0}) {
      V ec = e, sc = s;
      for (auto& v : ec) v *= c;
      for (auto& v : sc) v *= -c;
      EXPECT_NEAR(ds::si_sdr(ec, s), base, 1e-9);
      EXPECT_NEAR(ds::si_sdr(e, sc), base, 1e-9);
    }
  }
}

TEST(SiSdr, NeverExceedsSiSir) {
  std::mt19937 gen(5);
  for (int i = 0; i < 100; ++i) {
    const auto s = ds::testing::noise(64, gen());
    const auto b = ds::testing::noise(64, gen());
    auto e = ds::testing::noise(64, gen(), 0.1);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] += s[k] + 0.3 * b[k];
    EXPECT_LE(ds::si_sdr(e, s), ds::si_sir(e, s, b) + 1e-9);
  }
}

TEST(EvaluateItem, PassThroughHasZeroImprovement) {
  const auto stems = ds::Stems::from_components(ds::testing::noise_clip(4000, 48000, 1),
                                                ds::testing::noise_clip(4000, 48000, 2));
  const auto r = ds::evaluate_item("a", stems, stems.mixture());
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.si_sdri, 0.0);
  EXPECT_EQ(r.si_siri, 0.0);
}

TEST(EvaluateItem, PerfectEstimateClampsOutput) {
  const auto stems = ds::Stems::from_components(ds::testing::noise_clip(4000, 48000, 1),
                                                ds::testing::noise_clip(4000, 48000, 2));
  const auto r = ds::evaluate_item("a", stems, stems.dialog());
  EXPECT_EQ(r.si_sdr_out, 100.0);
  EXPECT_DOUBLE_EQ(r.si_sdri, 100.0 - r.si_sdr_in);
  EXPECT_DOUBLE_EQ(r.si_siri, r.si_sir_out - r.si_sir_in);
}

TEST(EvaluateItem, SilentDialogIsFlagged) {
  const auto b = ds::testing::noise_clip(4000, 48000, 2);
  const auto stems = ds::Stems::from_components(ds::AudioClip::zeros(4000, 48000), b);
  const auto r = ds::evaluate_item("silent", stems, b);
  EXPECT_EQ(r.status, ds::ItemStatus::SilentDialog);
}

TEST(EvaluateItem, SilentEstimateIsFlaggedDegenerate) {
  const auto stems = ds::Stems::from_components(ds::testing::noise_clip(4000, 48000, 1),
                                                ds::testing::noise_clip(4000, 48000, 2));
  const auto r = ds::evaluate_item("zero", stems, ds::AudioClip::zeros(4000, 48000));
  EXPECT_EQ(r.status, ds::ItemStatus::Degenerate);
}

TEST(EvaluateItem, ChannelMeanReduction) {
  // Left channel perfect, right channel equals mixture.
  const auto x = ds::testing::noise_clip(4000, 48000, 1);
  const auto b = ds::testing::noise_clip(4000, 48000, 2);
  const auto stems = ds::Stems::from_components(x, b);
  const ds::AudioClip est(std::vector<double>(x.channel(0).begin(), x.channel(0).end()),
                          std::vector<double>(stems.mixture().channel(1).begin(), stems.mixture().channel(1).end()),
                          48000);
  const auto r = ds::evaluate_item("m", stems, est, ds::StereoReduction::ChannelMean);
  const double right = ds::si_sdr(stems.mixture().channel(1), x.channel(1));
  EXPECT_NEAR(r.si_sdr_out, (100.0 + right) / 2.0, 1e-9);
}

TEST(Aggregate, MeanAndUnbiasedStd) {
  std::vector<ds::MetricReport> reports(2);
  reports[0].si_sdri = 10.0;
  reports[1].si_sdri = 12.0;
  const auto s = ds::aggregate(reports);
  EXPECT_DOUBLE_EQ(s.si_sdri.mean, 11.0);
  EXPECT_NEAR(s.si_sdri.stddev, 1.41421356, 1e-8);
  EXPECT_EQ(s.items, 2u);
}

TEST(Aggregate, SingleReportAndFormatting) {
  std::vector<ds::MetricReport> one(1);
  one[0].si_sdr_in = 6.5;
  const auto s = ds::aggregate(one);
  EXPECT_TRUE(s.si_sdr_in.single());
  EXPECT_EQ(s.si_sdr_in.stddev, 0.0);
  EXPECT_EQ((ds::FieldSummary{6.5, 7.04, 10}.formatted()), "6.5 ± 7.0");
  EXPECT_EQ((ds::FieldSummary{10.3, 4.2, 10}.formatted()), "10.3 ± 4.2");
  EXPECT_THROW((void)ds::aggregate(std::vector<ds::MetricReport>{}), ds::ArgumentError);
}

TEST(Aggregate, FlaggedReportsAreSkipped) {
  std::vector<ds::MetricReport> reports(3);
  reports[0].item_id = "a";
  reports[0].si_siri = 4.0;
  reports[1].item_id = "b";
  reports[1].status = ds::ItemStatus::SilentDialog;
  reports[2].item_id = "c";
  reports[2].si_siri = 6.0;
  const auto s = ds::aggregate(reports);
  EXPECT_EQ(s.items, 2u);
  EXPECT_DOUBLE_EQ(s.si_siri.mean, 5.0);
  EXPECT_EQ(s.skipped, std::vector<std::string>{"b"});

  std::ostringstream csv;
  ds::write_metrics_csv(csv, reports);
  const std::string text = csv.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), ds::kMetricCsvHeader);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}
