#include <gtest/gtest.h>

#include <random>

#include "dialogsep/schedule.hpp"

namespace ds = dialogsep;

namespace {

std::vector<ds::Decision> run(const std::vector<double>& losses, ds::ScheduleConfig cfg = {}) {
  ds::ScheduleState st(cfg);
  std::vector<ds::Decision> out;
  for (double l : losses) {
    out.push_back(ds::observe(st, l));
    if (st.stopped) break;
  }
  return out;
}

}  // namespace

TEST(Schedule, DecreasingLossesContinue) {
  ds::ScheduleState st;
  for (int e = 0; e < 50; ++e) {
    EXPECT_EQ(ds::observe(st, 1.0 - 0.01 * e), ds::Decision{ds::Continue{}});
  }
  EXPECT_EQ(st.lr_factor, 1.0);
  EXPECT_EQ(st.epoch, 50);
}

TEST(Schedule, DecayThenEarlyStop) {
  std::vector<double> losses{1.0};
  for (int i = 0; i < 20; ++i) losses.push_back(1.1);
  const auto d = run(losses);
  ASSERT_EQ(d.size(), 11u);
  for (std::size_t e = 1; e <= 11; ++e) {
    if (e == 6) {
      EXPECT_EQ(d[e - 1], ds::Decision{ds::DecayLr{0.3}});
    } else if (e == 11) {
      EXPECT_EQ(d[e - 1], ds::Decision{ds::Stop{ds::StopReason::EarlyStop}});
    } else {
      EXPECT_EQ(d[e - 1], ds::Decision{ds::Continue{}}) << e;
    }
  }
}

TEST(Schedule, EqualLossIsNotImprovement) {
  std::vector<double> losses(11, 1.0);
  const auto d = run(losses);
  EXPECT_EQ(d.back(), ds::Decision{ds::Stop{ds::StopReason::EarlyStop}});
}

TEST(Schedule, EpochCap) {
  // Improve every 8 epochs so neither counter reaches the stop patience.
  std::vector<double> losses;
  for (int e = 0; e < 120; ++e) losses.push_back(e % 8 == 0 ? 1.0 - 0.001 * e : 5.0);
  const auto d = run(losses);
  ASSERT_EQ(d.size(), 100u);
  EXPECT_EQ(d.back(), ds::Decision{ds::Stop{ds::StopReason::EpochCap}});
}

TEST(Schedule, NanDivergesAndStops) {
  ds::ScheduleState st;
  ds::observe(st, 1.0);
  EXPECT_EQ(ds::observe(st, std::nan("")), ds::Decision{ds::Stop{ds::StopReason::Diverged}});
  EXPECT_TRUE(st.stopped);
  EXPECT_THROW(ds::observe(st, 1.0), ds::ArgumentError);
  ds::ScheduleState fresh;
  EXPECT_THROW(ds::observe(fresh, std::numeric_limits<double>::infinity()), ds::ArgumentError);
}

TEST(Schedule, ConfigValidation) {
  ds::ScheduleConfig bad;
  bad.decay_factor = 0.0;
  EXPECT_THROW(ds::ScheduleState{bad}, ds::ArgumentError);
  bad = {};
  bad.max_epochs = 0;
  EXPECT_THROW(ds::ScheduleState{bad}, ds::ArgumentError);
}

TEST(Schedule, FactorIsPowerOfDecaysProperty) {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    ds::ScheduleState st;
    double level = 1.0;
    int decays = 0;
    while (!st.stopped) {
      // Mostly plateaus with occasional improvements.
      const double loss = noise(gen) < 0.15 ? (level *= 0.99) : level + noise(gen);
      const auto d = ds::observe(st, loss);
      if (const auto* decay = std::get_if<ds::DecayLr>(&d)) {
        ++decays;
        EXPECT_EQ(decay->new_factor, std::pow(0.3, decays));
        EXPECT_EQ(st.epochs_since_improvement, 5);
      }
      EXPECT_EQ(st.lr_factor, std::pow(0.3, decays));
      EXPECT_LE(st.epoch, 100);
      if (const auto* s = std::get_if<ds::Stop>(&d); s && s->reason == ds::StopReason::EarlyStop) {
        EXPECT_EQ(st.epochs_since_improvement, 10);
      }
    }
  }
}

TEST(Schedule, ReplayDeterminism) {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<double> losses(100);
  for (auto& l : losses) l = dist(gen);
  EXPECT_EQ(run(losses), run(losses));
}

TEST(Schedule, DecisionRecord) {
  ds::ScheduleState st;
  const auto d = ds::observe(st, 0.25);
  const auto j = ds::decision_record(st, 0.25, d);
  EXPECT_EQ(j["epoch"], 1);
  EXPECT_EQ(j["loss"], 0.25);
  EXPECT_EQ(j["decision"], "continue");
  EXPECT_EQ(j["lr_factor"], 1.0);
  EXPECT_FALSE(j.contains("reason"));

  const auto nan = std::nan("");
  const auto s = ds::observe(st, nan);
  const auto js = ds::decision_record(st, nan, s);
  EXPECT_TRUE(js["loss"].is_null());
  EXPECT_EQ(js["decision"], "stop");
  EXPECT_EQ(js["reason"], "diverged");
}
