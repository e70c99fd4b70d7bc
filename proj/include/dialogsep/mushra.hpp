#pragma once

// MUSHRA session layout, rating ingestion, listener post-screening and
// per-cell Student-t statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "dialogsep/error.hpp"
#include "dialogsep/random.hpp"
#include "dialogsep/remix.hpp"

namespace dialogsep::mushra {

inline constexpr int kScaleMin = 0;
inline constexpr int kScaleMax = 100;

/// One rendered condition file offered to the session builder.
struct StimulusInput {
  std::string item_id;
  std::string condition_id;
  std::string source_path;
};

struct SessionStimulus {
  std::string label;  // opaque, unique within the session
  std::string path;   // path as presented to listeners
};

struct SessionItem {
  std::string item_id;
  std::string reference_label;
  std::string reference_path;
  std::vector<SessionStimulus> stimuli;  // sorted by label
};

struct ListenerOrder {
  std::size_t listener = 0;
  std::vector<std::string> item_order;
  std::map<std::string, std::vector<std::string>> condition_order;  // item -> labels
};

/// Private mapping from opaque labels back to condition identities.
struct LabelKey {
  std::string item_id;
  std::string condition_id;
  std::string source_path;
};

struct MushraSession {
  std::uint64_t seed = 0;
  int scale_min = kScaleMin;
  int scale_max = kScaleMax;
  std::vector<std::string> conditions;  // sorted
  std::vector<SessionItem> items;       // sorted by item id
  std::vector<ListenerOrder> listeners;
  std::map<std::string, LabelKey> key;
  std::map<std::string, std::string> reference_sources;  // item -> source path

  [[nodiscard]] std::size_t stimuli_per_listener() const { return items.size() * conditions.size(); }
};

struct SessionOptions {
  std::size_t listeners = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> expected_conditions;  // e.g. 10
  std::string stimulus_dir = "stimuli";
};

/// Builds a session in which every item carries the identical condition set,
/// including the hidden reference and the low-pass anchor. Labels and all
/// presentation orders derive from `options.seed`.
inline MushraSession build_session(const std::vector<StimulusInput>& inputs,
                                   const std::map<std::string, std::string>& references,
                                   const SessionOptions& options) {
  std::map<std::string, std::map<std::string, std::string>> grid;  // item -> condition -> source
  for (const auto& in : inputs) {
    auto& conditions = grid[in.item_id];
    if (!conditions.emplace(in.condition_id, in.source_path).second) {
      throw ConfigError("item '" + in.item_id + "' lists condition '" + in.condition_id + "' more than once");
    }
  }
  if (grid.empty()) throw ConfigError("session has no items");

  for (const auto& [item, conditions] : grid) {
    for (const char* required : {kHiddenReferenceId, kAnchorId}) {
      if (!conditions.contains(required)) {
        throw ConfigError("item '" + item + "' is missing required condition '" + required + "'");
      }
    }
    if (!references.contains(item)) throw ConfigError("item '" + item + "' has no reference stimulus");
  }

  MushraSession s;
  s.seed = options.seed;
  for (const auto& [condition, _] : grid.begin()->second) s.conditions.push_back(condition);
  for (const auto& [item, conditions] : grid) {
    std::vector<std::string> ids;
    for (const auto& [condition, _] : conditions) ids.push_back(condition);
    if (ids != s.conditions) {
      throw ConfigError("item '" + item + "' has a condition set that differs from item '" + grid.begin()->first + "'");
    }
  }
  if (options.expected_conditions && s.conditions.size() != *options.expected_conditions) {
    throw ConfigError("expected " + std::to_string(*options.expected_conditions) + " conditions per item, found " +
                      std::to_string(s.conditions.size()));
  }

  SeededRng rng(options.seed);
  auto fresh_label = [&] {
    for (;;) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "s%08llx", static_cast<unsigned long long>(rng.next() & 0xFFFFFFFFull));
      std::string label(buf);
      if (!s.key.contains(label) && std::none_of(s.items.begin(), s.items.end(), [&](const SessionItem& it) {
            return it.reference_label == label;
          })) {
        return label;
      }
    }
  };
  auto stimulus_path = [&](const std::string& label) { return options.stimulus_dir + "/" + label + ".wav"; };

  for (const auto& [item, conditions] : grid) {
    SessionItem si;
    si.item_id = item;
    si.reference_label = fresh_label();
    si.reference_path = stimulus_path(si.reference_label);
    s.reference_sources[item] = references.at(item);
    for (const auto& [condition, source] : conditions) {
      const std::string label = fresh_label();
      s.key[label] = {item, condition, source};
      si.stimuli.push_back({label, stimulus_path(label)});
    }
    std::sort(si.stimuli.begin(), si.stimuli.end(),
              [](const SessionStimulus& a, const SessionStimulus& b) { return a.label < b.label; });
    s.items.push_back(std::move(si));
  }

  for (std::size_t l = 0; l < options.listeners; ++l) {
    ListenerOrder order;
    order.listener = l;
    for (const auto& item : s.items) order.item_order.push_back(item.item_id);
    rng.shuffle(std::span<std::string>(order.item_order));
    for (const auto& item : s.items) {
      std::vector<std::string> labels;
      for (const auto& st : item.stimuli) labels.push_back(st.label);
      rng.shuffle(std::span<std::string>(labels));
      order.condition_order[item.item_id] = std::move(labels);
    }
    s.listeners.push_back(std::move(order));
  }
  return s;
}

/// Public session file: no condition identities.
inline nlohmann::json session_to_json(const MushraSession& s) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : s.items) {
    nlohmann::json stimuli = nlohmann::json::array();
    for (const auto& st : item.stimuli) stimuli.push_back({{"label", st.label}, {"path", st.path}});
    items.push_back({{"item_id", item.item_id},
                     {"reference", {{"label", item.reference_label}, {"path", item.reference_path}}},
                     {"stimuli", stimuli}});
  }
  nlohmann::json listeners = nlohmann::json::array();
  for (const auto& l : s.listeners) {
    listeners.push_back({{"listener", l.listener}, {"item_order", l.item_order}, {"condition_order", l.condition_order}});
  }
  return {{"version", 1},
          {"seed", s.seed},
          {"scale", {{"min", s.scale_min}, {"max", s.scale_max}}},
          {"items", items},
          {"listeners", listeners}};
}

/// Private key file mapping labels to conditions.
inline nlohmann::json key_to_json(const MushraSession& s) {
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [label, k] : s.key) {
    labels[label] = {{"item_id", k.item_id}, {"condition_id", k.condition_id}, {"source", k.source_path}};
  }
  return {{"seed", s.seed}, {"conditions", s.conditions}, {"labels", labels}, {"references", s.reference_sources}};
}

inline std::map<std::string, LabelKey> key_from_json(const nlohmann::json& j) {
  std::map<std::string, LabelKey> key;
  for (const auto& [label, v] : j.at("labels").items()) {
    key[label] = {v.at("item_id").get<std::string>(), v.at("condition_id").get<std::string>(),
                  v.value("source", std::string{})};
  }
  return key;
}

struct RatingRecord {
  std::string listener_id;
  std::string item_id;
  std::string condition_id;
  int score = 0;
  std::string timestamp;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

namespace detail {

inline int checked_score(long long v, std::size_t line) {
  if (v < kScaleMin || v > kScaleMax) {
    throw FormatError("ratings line " + std::to_string(line) + ": score " + std::to_string(v) + " outside [" +
                      std::to_string(kScaleMin) + ", " + std::to_string(kScaleMax) + "]");
  }
  return static_cast<int>(v);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

/// JSON-lines ratings, one RatingRecord object per line. Blank lines skipped.
inline std::vector<RatingRecord> parse_ratings_jsonl(std::istream& in) {
  std::vector<RatingRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("ratings line " + std::to_string(n) + ": " + e.what());
    }
    try {
      const auto& score = j.at("score");
      if (!score.is_number_integer()) throw FormatError("ratings line " + std::to_string(n) + ": score must be an integer");
      RatingRecord r{j.at("listener_id").get<std::string>(), j.at("item_id").get<std::string>(),
                     j.at("condition_id").get<std::string>(), detail::checked_score(score.get<long long>(), n),
                     j.value("timestamp", std::string{})};
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("ratings line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

/// CSV ratings with header listener_id,item_id,condition_id,score[,timestamp].
inline std::vector<RatingRecord> parse_ratings_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"listener_id", "item_id", "condition_id", "score"}) {
    if (!col.contains(required)) throw FormatError(std::string("ratings CSV header lacks column ") + required);
  }
  std::vector<RatingRecord> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) throw FormatError("ratings line " + std::to_string(n) + ": wrong field count");
    long long score = 0;
    std::size_t used = 0;
    try {
      score = std::stoll(f[col["score"]], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != f[col["score"]].size()) {
      throw FormatError("ratings line " + std::to_string(n) + ": score is not an integer");
    }
    out.push_back({f[col["listener_id"]], f[col["item_id"]], f[col["condition_id"]], detail::checked_score(score, n),
                   col.contains("timestamp") ? f[col["timestamp"]] : std::string{}});
  }
  return out;
}

inline nlohmann::json to_json(const RatingRecord& r) {
  return {{"listener_id", r.listener_id},
          {"item_id", r.item_id},
          {"condition_id", r.condition_id},
          {"score", r.score},
          {"timestamp", r.timestamp}};
}

/// Replaces opaque labels in condition_id with condition ids. Records that
/// already carry a condition id pass through unchanged.
inline std::vector<RatingRecord> resolve_labels(std::vector<RatingRecord> records,
                                                const std::map<std::string, LabelKey>& key) {
  for (auto& r : records) {
    const auto it = key.find(r.condition_id);
    if (it == key.end()) continue;
    if (it->second.item_id != r.item_id) {
      throw FormatError("label " + r.condition_id + " belongs to item '" + it->second.item_id + "', not '" + r.item_id + "'");
    }
    r.condition_id = it->second.condition_id;
  }
  return records;
}

using CellKey = std::tuple<std::string, std::string, std::string>;  // listener, item, condition

/// Ordered rating log with last-write-wins on resubmission.
class RatingLog {
 public:
  void ingest(const RatingRecord& r) {
    if (r.score < kScaleMin || r.score > kScaleMax) throw ArgumentError("RatingLog: score outside scale");
    records_[{r.listener_id, r.item_id, r.condition_id}] = r;
  }
  void ingest(const std::vector<RatingRecord>& rs) {
    for (const auto& r : rs) ingest(r);
  }

  [[nodiscard]] std::vector<RatingRecord> records() const {
    std::vector<RatingRecord> out;
    out.reserve(records_.size());
    for (const auto& [_, r] : records_) out.push_back(r);
    return out;
  }

 private:
  std::map<CellKey, RatingRecord> records_;
};

struct ScreeningResult {
  std::vector<std::string> kept;
  std::map<std::string, std::string> excluded;  // listener -> reason
};

/// Excludes a listener when any expected (item, condition) cell is missing
/// ("incomplete") or when some condition scores strictly above the hidden
/// reference on any item. Ties with the reference are allowed.
inline ScreeningResult post_screen(const std::vector<RatingRecord>& records, const std::set<std::string>& items,
                                   const std::set<std::string>& conditions) {
  std::map<std::string, std::map<std::pair<std::string, std::string>, int>> by_listener;
  for (const auto& r : records) by_listener[r.listener_id][{r.item_id, r.condition_id}] = r.score;

  ScreeningResult out;
  for (const auto& [listener, cells] : by_listener) {
    std::optional<std::string> reason;
    for (const auto& item : items) {
      for (const auto& condition : conditions) {
        if (!cells.contains({item, condition})) reason = "incomplete";
      }
      if (reason) break;
    }
    if (!reason) {
      for (const auto& item : items) {
        const int ref = cells.at({item, kHiddenReferenceId});
        for (const auto& condition : conditions) {
          const int score = cells.at({item, condition});
          if (condition != kHiddenReferenceId && score > ref) {
            reason = "item " + item + ": condition " + condition + " rated " + std::to_string(score) +
                     " above hidden reference " + std::to_string(ref);
            break;
          }
        }
        if (reason) break;
      }
    }
    if (reason) {
      out.excluded[listener] = *reason;
    } else {
      out.kept.push_back(listener);
    }
  }
  return out;
}

/// Grid inferred from the union of all records.
inline ScreeningResult post_screen(const std::vector<RatingRecord>& records) {
  std::set<std::string> items;
  std::set<std::string> conditions;
  for (const auto& r : records) {
    items.insert(r.item_id);
    conditions.insert(r.condition_id);
  }
  if (!items.empty() && !conditions.contains(kHiddenReferenceId)) {
    throw ConfigError("post_screen: ratings contain no hidden reference condition");
  }
  return post_screen(records, items, conditions);
}

/// Two-sided Student-t quantile t_{1 - (1 - confidence)/2, dof}.
inline double t_quantile(double confidence, std::size_t dof) {
  if (dof == 0) throw ArgumentError("t_quantile: degrees of freedom must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ArgumentError("t_quantile: confidence must be in (0, 1)");
  const boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
}

inline constexpr const char* kAllItems = "ALL";

struct CellStats {
  std::string item_id;
  std::string condition_id;
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  std::optional<double> half_width;  // empty when n < 2

  [[nodiscard]] bool flagged() const noexcept { return !half_width.has_value(); }
  [[nodiscard]] double ci_low() const { return mean - half_width.value_or(0.0); }
  [[nodiscard]] double ci_high() const { return mean + half_width.value_or(0.0); }
};

/// Mean and Student-t confidence half-width t * s / sqrt(n) of `scores`.
inline CellStats cell_stats(const std::vector<double>& scores, double confidence = 0.95) {
  CellStats c;
  c.n = scores.size();
  if (c.n == 0) return c;
  for (double v : scores) c.mean += v;
  c.mean /= static_cast<double>(c.n);
  if (c.n >= 2) {
    double ss = 0.0;
    for (double v : scores) ss += (v - c.mean) * (v - c.mean);
    c.stddev = std::sqrt(ss / static_cast<double>(c.n - 1));
    c.half_width = t_quantile(confidence, c.n - 1) * c.stddev / std::sqrt(static_cast<double>(c.n));
  }
  return c;
}

struct StatsReport {
  std::vector<CellStats> cells;     // per (item, condition)
  std::vector<CellStats> averages;  // per condition over all items, item_id = "ALL"
};

/// Statistics over the ratings of `kept` listeners. The across-item average
/// pools every kept rating of a condition.
inline StatsReport stats(const std::vector<RatingRecord>& records, const std::vector<std::string>& kept,
                         double confidence = 0.95) {
  const std::set<std::string> keep(kept.begin(), kept.end());
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  std::map<std::string, std::vector<double>> pooled;
  for (const auto& r : records) {
    if (!keep.contains(r.listener_id)) continue;
    cells[{r.item_id, r.condition_id}].push_back(r.score);
    pooled[r.condition_id].push_back(r.score);
  }
  StatsReport out;
  for (const auto& [key, scores] : cells) {
    CellStats c = cell_stats(scores, confidence);
    c.item_id = key.first;
    c.condition_id = key.second;
    out.cells.push_back(std::move(c));
  }
  for (const auto& [condition, scores] : pooled) {
    CellStats c = cell_stats(scores, confidence);
    c.item_id = kAllItems;
    c.condition_id = condition;
    out.averages.push_back(std::move(c));
  }
  return out;
}

/// CSV with columns item,condition,mean,ci_low,ci_high,n; CI fields are empty
/// for flagged cells.
inline void write_report_csv(std::ostream& out, const StatsReport& report) {
  out << "item,condition,mean,ci_low,ci_high,n\n";
  char buf[128];
  auto row = [&](const CellStats& c) {
    out << c.item_id << ',' << c.condition_id << ',';
    if (c.flagged()) {
      std::snprintf(buf, sizeof buf, "%.4f,,,%zu", c.mean, c.n);
    } else {
      std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%zu", c.mean, c.ci_low(), c.ci_high(), c.n);
    }
    out << buf << '\n';
  };
  for (const auto& c : report.cells) row(c);
  for (const auto& c : report.averages) row(c);
}

}  // namespace dialogsep::mushra
