#pragma once

// Chunking, program-level train/validation/test assignment and per-model
// excerpt sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dialogsep/error.hpp"
#include "dialogsep/irm.hpp"
#include "dialogsep/random.hpp"

namespace dialogsep {

inline constexpr double kChunkSeconds = 15.0;

struct ChunkingResult {
  std::vector<Stems> chunks;
  std::size_t chunk_samples = 0;
  std::size_t dropped_samples = 0;
  std::optional<std::string> warning;
};

/// Consecutive non-overlapping chunks starting at sample k * chunk_samples;
/// the trailing remainder is dropped.
inline ChunkingResult chunk(const Stems& stems, double chunk_seconds = kChunkSeconds) {
  if (!(chunk_seconds > 0.0)) throw ArgumentError("chunk: chunk length must be positive");
  ChunkingResult r;
  r.chunk_samples = static_cast<std::size_t>(std::llround(chunk_seconds * stems.sample_rate()));
  if (r.chunk_samples == 0) throw ArgumentError("chunk: chunk length rounds to zero samples");
  const std::size_t count = stems.length() / r.chunk_samples;
  r.dropped_samples = stems.length() - count * r.chunk_samples;
  if (count == 0) {
    r.warning = "item of " + std::to_string(stems.length()) + " samples is shorter than one chunk";
  }
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t begin = k * r.chunk_samples;
    r.chunks.emplace_back(stems.mixture().slice(begin, r.chunk_samples), stems.dialog().slice(begin, r.chunk_samples),
                          stems.background().slice(begin, r.chunk_samples), std::numeric_limits<double>::infinity());
  }
  return r;
}

/// Reference to one chunk on disk.
struct ChunkRef {
  std::string chunk_id;
  std::string source_item;
  std::string program;  // source program; never split across partitions
  std::size_t start_sample = 0;
  std::size_t length = 0;
  int sample_rate = 44100;

  [[nodiscard]] double seconds() const { return static_cast<double>(length) / sample_rate; }
};

inline std::string chunk_id_for(const std::string& item_id, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return item_id + "_c" + buf;
}

enum class Split { Train, Validation, Test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Validation:
      return "validation";
    case Split::Test:
      return "test";
  }
  return "unknown";
}

/// Target durations in hours; only their proportions matter.
struct SplitTargets {
  double train_hours = 15.0;
  double validation_hours = 1.45;
  double test_hours = 0.9;
};

struct DatasetSplit {
  std::map<std::string, Split> membership;  // chunk id -> split
  std::vector<std::string> train, validation, test;
  double train_hours = 0.0;
  double validation_hours = 0.0;
  double test_hours = 0.0;
};

/// Greedy assignment of whole programs: programs are visited longest first
/// (ties by name) and each goes to the split with the largest remaining
/// deficit relative to its target share.
inline DatasetSplit assign_splits(std::span<const ChunkRef> chunks, const SplitTargets& targets = {}) {
  const double target_sum = targets.train_hours + targets.validation_hours + targets.test_hours;
  if (!(target_sum > 0.0) || targets.train_hours < 0 || targets.validation_hours < 0 || targets.test_hours < 0) {
    throw ArgumentError("assign_splits: split targets must be non-negative with a positive sum");
  }
  std::map<std::string, double> program_seconds;
  double total = 0.0;
  for (const auto& c : chunks) {
    program_seconds[c.program] += c.seconds();
    total += c.seconds();
  }
  std::vector<std::pair<std::string, double>> programs(program_seconds.begin(), program_seconds.end());
  std::stable_sort(programs.begin(), programs.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  const double shares[3] = {targets.train_hours / target_sum, targets.validation_hours / target_sum,
                            targets.test_hours / target_sum};
  double assigned[3] = {0.0, 0.0, 0.0};
  std::map<std::string, Split> program_split;
  for (const auto& [name, seconds] : programs) {
    int best = 0;
    double best_deficit = -1e300;
    for (int s = 0; s < 3; ++s) {
      if (shares[s] <= 0.0) continue;
      const double deficit = shares[s] * total - assigned[s];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    assigned[best] += seconds;
    program_split[name] = static_cast<Split>(best);
  }

  DatasetSplit out;
  for (const auto& c : chunks) {
    const Split s = program_split.at(c.program);
    out.membership[c.chunk_id] = s;
    const double hours = c.seconds() / 3600.0;
    switch (s) {
      case Split::Train:
        out.train.push_back(c.chunk_id);
        out.train_hours += hours;
        break;
      case Split::Validation:
        out.validation.push_back(c.chunk_id);
        out.validation_hours += hours;
        break;
      case Split::Test:
        out.test.push_back(c.chunk_id);
        out.test_hours += hours;
        break;
    }
  }
  return out;
}

/// Excerpt length and per-epoch repeat count for one model.
struct SamplerPlan {
  double excerpt_seconds = 12.0;
  std::uint32_t repeats = 1;
  std::uint64_t seed = 0;

  static SamplerPlan umx(std::uint64_t seed = 0) { return {6.0, 2, seed}; }
  static SamplerPlan conv_tasnet(std::uint64_t seed = 0) { return {2.8, 4, seed}; }
  static SamplerPlan spleeter(std::uint64_t seed = 0) { return {12.0, 1, seed}; }

  /// Preset by model name ("umx", "conv-tasnet", "spleeter").
  static std::optional<SamplerPlan> preset(const std::string& model, std::uint64_t seed = 0) {
    if (model == "umx") return umx(seed);
    if (model == "conv-tasnet" || model == "convtasnet") return conv_tasnet(seed);
    if (model == "spleeter") return spleeter(seed);
    return std::nullopt;
  }

  /// Input duration consumed per chunk and epoch.
  [[nodiscard]] double seconds_per_chunk() const { return excerpt_seconds * repeats; }
};

struct ExcerptEntry {
  std::string chunk_id;
  std::size_t offset = 0;  // samples from chunk start
  std::size_t length = 0;  // samples

  friend bool operator==(const ExcerptEntry&, const ExcerptEntry&) = default;
};

/// Every chunk appears `repeats` times with offsets drawn uniformly from
/// [0, chunk_length - excerpt_length]; the entry order is shuffled. Fully
/// determined by (chunks, plan, epoch).
inline std::vector<ExcerptEntry> plan_epoch(std::span<const ChunkRef> chunks, const SamplerPlan& plan,
                                            std::uint64_t epoch = 0) {
  if (!(plan.excerpt_seconds > 0.0)) throw ArgumentError("plan_epoch: excerpt length must be positive");
  if (plan.repeats < 1) throw ArgumentError("plan_epoch: repeats must be >= 1");
  SeededRng rng(plan.seed + 0x9E3779B97F4A7C15ull * epoch);
  std::vector<ExcerptEntry> entries;
  entries.reserve(chunks.size() * plan.repeats);
  for (const auto& c : chunks) {
    const auto excerpt = static_cast<std::size_t>(std::llround(plan.excerpt_seconds * c.sample_rate));
    if (excerpt > c.length) {
      throw ArgumentError("plan_epoch: excerpt of " + std::to_string(plan.excerpt_seconds) + " s exceeds chunk " +
                          c.chunk_id);
    }
    for (std::uint32_t r = 0; r < plan.repeats; ++r) {
      entries.push_back({c.chunk_id, static_cast<std::size_t>(rng.uniform_inclusive(c.length - excerpt)), excerpt});
    }
  }
  rng.shuffle(std::span<ExcerptEntry>(entries));
  return entries;
}

inline nlohmann::json to_json(const ExcerptEntry& e) {
  return {{"chunk_id", e.chunk_id}, {"offset", e.offset}, {"length", e.length}};
}

}  // namespace dialogsep
