#pragma once

// Scale-invariant SDR / SIR from orthogonal projections of an estimate onto
// the reference dialog and the span of {dialog, background}.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialogsep/audio.hpp"
#include "dialogsep/error.hpp"
#include "dialogsep/irm.hpp"

namespace dialogsep {

inline constexpr double kMetricClampDb = 100.0;

struct ProjectionDecomposition {
  std::vector<double> target;        // alpha * s
  std::vector<double> interference;  // projection onto span{s, b} minus target
  std::vector<double> artifacts;     // estimate minus projection onto span{s, b}
  double alpha = 0.0;
};

namespace metrics_detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double energy(std::span<const double> a) { return dot(a, a); }

inline double ratio_db(double num, double den) {
  if (den <= 0.0) return num > 0.0 ? kMetricClampDb : -kMetricClampDb;
  if (num <= 0.0) return -kMetricClampDb;
  return std::clamp(10.0 * std::log10(num / den), -kMetricClampDb, kMetricClampDb);
}

inline void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw ArgumentError(std::string(what) + ": vectors differ in length (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  }
}

}  // namespace metrics_detail

/// Splits `estimate` into target, interference and artifact components.
inline ProjectionDecomposition decompose(std::span<const double> estimate, std::span<const double> target,
                                         std::span<const double> interference) {
  using namespace metrics_detail;
  require_same_length(estimate, target, "decompose");
  require_same_length(estimate, interference, "decompose");
  const double ss = energy(target);
  if (!(ss > 0.0)) throw DegenerateReferenceError("decompose: reference target has zero energy");

  const double es = dot(estimate, target);
  ProjectionDecomposition d;
  d.alpha = es / ss;

  // Least-squares coefficients (a, c) of estimate onto span{s, b} via the
  // 2x2 normal equations. A (near-)singular Gram matrix means b adds no new
  // direction, so the span projection reduces to the target projection.
  const double bb = energy(interference);
  const double sb = dot(target, interference);
  const double eb = dot(estimate, interference);
  const double det = ss * bb - sb * sb;
  double a = d.alpha;
  double c = 0.0;
  if (bb > 0.0 && det > 1e-12 * ss * bb) {
    a = (es * bb - eb * sb) / det;
    c = (ss * eb - sb * es) / det;
  }

  const std::size_t n = estimate.size();
  d.target.resize(n);
  d.interference.resize(n);
  d.artifacts.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double proj = a * target[i] + c * interference[i];
    d.target[i] = d.alpha * target[i];
    d.interference[i] = proj - d.target[i];
    d.artifacts[i] = estimate[i] - proj;
  }
  return d;
}

/// 10 log10(|alpha s|^2 / |estimate - alpha s|^2), clamped to +-100 dB.
inline double si_sdr(std::span<const double> estimate, std::span<const double> target) {
  using namespace metrics_detail;
  require_same_length(estimate, target, "si_sdr");
  const double ss = energy(target);
  if (!(ss > 0.0)) throw DegenerateReferenceError("si_sdr: reference has zero energy");
  if (!(energy(estimate) > 0.0)) throw DegenerateReferenceError("si_sdr: estimate has zero energy");
  const double alpha = dot(estimate, target) / ss;
  double target_energy = 0.0;
  double error_energy = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = alpha * target[i];
    target_energy += t * t;
    const double e = estimate[i] - t;
    error_energy += e * e;
  }
  return ratio_db(target_energy, error_energy);
}

/// 10 log10(|s_target|^2 / |e_interf|^2), clamped to +-100 dB.
inline double si_sir(std::span<const double> estimate, std::span<const double> target,
                     std::span<const double> interference) {
  using namespace metrics_detail;
  const auto d = decompose(estimate, target, interference);
  const double interf = energy(d.interference);
  if (interf == 0.0) return kMetricClampDb;
  return ratio_db(energy(d.target), interf);
}

enum class StereoReduction {
  Concatenate,  // one projection over [left, right]
  ChannelMean,  // per-channel metric, averaged in dB
};

enum class ItemStatus { Ok, SilentDialog, Degenerate };

inline const char* to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::Ok:
      return "ok";
    case ItemStatus::SilentDialog:
      return "silent_dialog";
    case ItemStatus::Degenerate:
      return "degenerate";
  }
  return "unknown";
}

struct MetricReport {
  std::string item_id;
  double si_sdr_in = 0.0;
  double si_sdr_out = 0.0;
  double si_sdri = 0.0;
  double si_sir_in = 0.0;
  double si_sir_out = 0.0;
  double si_siri = 0.0;
  ItemStatus status = ItemStatus::Ok;
  std::string message;

  [[nodiscard]] bool ok() const noexcept { return status == ItemStatus::Ok; }
};

namespace metrics_detail {

struct SdrSir {
  double sdr;
  double sir;
};

inline SdrSir measure(std::span<const double> estimate, std::span<const double> target,
                      std::span<const double> interference) {
  return {si_sdr(estimate, target), si_sir(estimate, target, interference)};
}

inline SdrSir measure(const AudioClip& estimate, const Stems& stems, StereoReduction reduction) {
  if (reduction == StereoReduction::Concatenate) {
    const auto e = estimate.concatenated();
    const auto s = stems.dialog().concatenated();
    const auto b = stems.background().concatenated();
    return measure(e, s, b);
  }
  SdrSir sum{0.0, 0.0};
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto m = measure(estimate.channel(c), stems.dialog().channel(c), stems.background().channel(c));
    sum.sdr += m.sdr / kChannels;
    sum.sir += m.sir / kChannels;
  }
  return sum;
}

}  // namespace metrics_detail

/// Input metrics use the mixture as the dialog estimate, output metrics use
/// `dialog_estimate`. Silent or degenerate items are flagged, never thrown.
inline MetricReport evaluate_item(const std::string& item_id, const Stems& stems, const AudioClip& dialog_estimate,
                                  StereoReduction reduction = StereoReduction::Concatenate) {
  require_aligned(stems.mixture(), dialog_estimate, "evaluate_item");
  MetricReport r;
  r.item_id = item_id;
  if (stems.dialog().peak() == 0.0) {
    r.status = ItemStatus::SilentDialog;
    r.message = "reference dialog is silent";
    return r;
  }
  try {
    const auto in = metrics_detail::measure(stems.mixture(), stems, reduction);
    const auto out = metrics_detail::measure(dialog_estimate, stems, reduction);
    r.si_sdr_in = in.sdr;
    r.si_sir_in = in.sir;
    r.si_sdr_out = out.sdr;
    r.si_sir_out = out.sir;
    r.si_sdri = r.si_sdr_out - r.si_sdr_in;
    r.si_siri = r.si_sir_out - r.si_sir_in;
  } catch (const DegenerateReferenceError& e) {
    r.status = ItemStatus::Degenerate;
    r.message = e.what();
  }
  return r;
}

inline MetricReport evaluate_item(const std::string& item_id, const Stems& stems, const SeparationResult& estimate,
                                  StereoReduction reduction = StereoReduction::Concatenate) {
  return evaluate_item(item_id, stems, estimate.dialog, reduction);
}

/// Mean and unbiased standard deviation of one metric.
struct FieldSummary {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;

  [[nodiscard]] bool single() const noexcept { return n == 1; }

  /// "M ± S" with one decimal, e.g. "10.3 ± 4.2".
  [[nodiscard]] std::string formatted() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f ± %.1f", mean, stddev);
    return buf;
  }
};

inline FieldSummary summarize(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("summarize: no values");
  FieldSummary s;
  s.n = values.size();
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

struct MetricSummary {
  FieldSummary si_sdr_in, si_sdr_out, si_sdri, si_sir_in, si_sir_out, si_siri;
  std::size_t items = 0;
  std::vector<std::string> skipped;  // flagged item ids
};

/// Aggregates the Ok reports; flagged reports are listed as skipped.
inline MetricSummary aggregate(std::span<const MetricReport> reports) {
  if (reports.empty()) throw ArgumentError("aggregate: no reports");
  MetricSummary out;
  std::vector<double> cols[6];
  for (const auto& r : reports) {
    if (!r.ok()) {
      out.skipped.push_back(r.item_id);
      continue;
    }
    cols[0].push_back(r.si_sdr_in);
    cols[1].push_back(r.si_sdr_out);
    cols[2].push_back(r.si_sdri);
    cols[3].push_back(r.si_sir_in);
    cols[4].push_back(r.si_sir_out);
    cols[5].push_back(r.si_siri);
  }
  if (cols[0].empty()) throw ArgumentError("aggregate: every report is flagged");
  out.items = cols[0].size();
  out.si_sdr_in = summarize(cols[0]);
  out.si_sdr_out = summarize(cols[1]);
  out.si_sdri = summarize(cols[2]);
  out.si_sir_in = summarize(cols[3]);
  out.si_sir_out = summarize(cols[4]);
  out.si_siri = summarize(cols[5]);
  return out;
}

inline constexpr const char* kMetricCsvHeader = "item_id,si_sdr_in,si_sdr_out,si_sdri,si_sir_in,si_sir_out,si_siri";

/// One row per Ok item.
inline void write_metrics_csv(std::ostream& out, std::span<const MetricReport> reports) {
  out << kMetricCsvHeader << '\n';
  char buf[256];
  for (const auto& r : reports) {
    if (!r.ok()) continue;
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.si_sdr_in, r.si_sdr_out, r.si_sdri, r.si_sir_in,
                  r.si_sir_out, r.si_siri);
    out << r.item_id << ',' << buf << '\n';
  }
}

inline nlohmann::json to_json(const FieldSummary& s) {
  return {{"mean", s.mean}, {"std", s.stddev}, {"n", s.n}, {"formatted", s.formatted()}};
}

inline nlohmann::json to_json(const MetricSummary& s) {
  return {{"items", s.items},
          {"si_sdr_in", to_json(s.si_sdr_in)},
          {"si_sdr_out", to_json(s.si_sdr_out)},
          {"si_sdri", to_json(s.si_sdri)},
          {"si_sir_in", to_json(s.si_sir_in)},
          {"si_sir_out", to_json(s.si_sir_out)},
          {"si_siri", to_json(s.si_siri)},
          {"skipped", s.skipped}};
}

}  // namespace dialogsep
