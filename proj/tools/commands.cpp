#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "dialogsep/dialogsep.hpp"

namespace dialogsep::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Kind { Path, Text, Integer, Real };

struct KeySpec {
  const char* name;
  Kind kind;
  const char* help;
};

// Every key a config file may carry. A flag --<name> exists for each key a
// command uses, and the config file spells the key the same way.
const std::vector<KeySpec>& all_keys() {
  static const std::vector<KeySpec> keys{
      {"input", Kind::Path, "Input manifest (JSON) or directory of item folders"},
      {"out", Kind::Path, "Output directory"},
      {"estimates", Kind::Path, "Directory of dialog estimates"},
      {"ratings", Kind::Path, "Ratings file (.jsonl or .csv)"},
      {"key", Kind::Path, "Private session key (session_key.json)"},
      {"seed", Kind::Integer, "Random seed"},
      {"workers", Kind::Integer, "Worker threads for item-level parallelism"},
      {"mu-db", Kind::Real, "Background attenuation of the hidden reference in dB"},
      {"target-lufs", Kind::Real, "Loudness normalization target"},
      {"chunk-seconds", Kind::Real, "Chunk length in seconds"},
      {"sample-rate", Kind::Integer, "Rate the chunks are resampled to"},
      {"model", Kind::Text, "Sampler preset: umx, conv-tasnet or spleeter"},
      {"excerpt-seconds", Kind::Real, "Excerpt length override"},
      {"repeats", Kind::Integer, "Excerpts per chunk and epoch override"},
      {"epochs", Kind::Integer, "Number of epochs to plan"},
      {"reduction", Kind::Text, "Stereo reduction: concatenate or channel-mean"},
      {"listeners", Kind::Integer, "Number of listener presentation orders"},
      {"conditions", Kind::Integer, "Expected conditions per item"},
      {"confidence", Kind::Real, "Confidence level of the intervals"},
      {"decay-factor", Kind::Real, "Learning-rate decay factor"},
      {"decay-patience", Kind::Integer, "Epochs without improvement before a decay"},
      {"stop-patience", Kind::Integer, "Epochs without improvement before stopping"},
      {"max-epochs", Kind::Integer, "Epoch cap"},
  };
  return keys;
}

const KeySpec& key_spec(const std::string& name) {
  for (const auto& k : all_keys()) {
    if (name == k.name) return k;
  }
  throw std::logic_error("unknown key " + name);
}

json parse_flag(const KeySpec& spec, const std::string& text) {
  const std::string flag = std::string("--") + spec.name;
  try {
    std::size_t used = 0;
    switch (spec.kind) {
      case Kind::Integer: {
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return v;
        break;
      }
      case Kind::Real: {
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
        break;
      }
      default:
        return text;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError(flag + ": cannot parse '" + text + "'");
}

// Merged view of config file and flags; flags win.
class Settings {
 public:
  void set(const std::string& key, json value) { values_[key] = std::move(value); }

  void load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path.string() + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      const auto it = std::find_if(all_keys().begin(), all_keys().end(),
                                   [&](const KeySpec& k) { return key == k.name; });
      if (it == all_keys().end()) throw ConfigError("config " + path.string() + ": unknown key '" + key + "'");
      if (it->kind == Kind::Path && value.is_string()) {
        values_[key] = (path.parent_path() / value.get<std::string>()).lexically_normal().string();
      } else {
        values_[key] = value;
      }
    }
  }

  [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }

  [[nodiscard]] fs::path path(const std::string& key) const { return text(key); }

  [[nodiscard]] std::string text(const std::string& key) const {
    const json& v = require(key);
    if (!v.is_string()) throw ConfigError(key + " must be a string");
    return v.get<std::string>();
  }
  [[nodiscard]] std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  [[nodiscard]] long long integer(const std::string& key) const {
    const json& v = require(key);
    if (!v.is_number_integer()) throw ConfigError(key + " must be an integer");
    return v.get<long long>();
  }
  [[nodiscard]] long long integer(const std::string& key, long long fallback) const {
    return has(key) ? integer(key) : fallback;
  }
  [[nodiscard]] long long positive(const std::string& key, long long fallback) const {
    const long long v = integer(key, fallback);
    if (v < 1) throw ConfigError(key + " must be >= 1");
    return v;
  }

  [[nodiscard]] double real(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = values_.at(key);
    if (!v.is_number()) throw ConfigError(key + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key + " must be finite");
    return d;
  }

  [[nodiscard]] std::uint64_t seed() const {
    const long long s = integer("seed", 0);
    if (s < 0) throw ConfigError("seed must be >= 0");
    return static_cast<std::uint64_t>(s);
  }

 private:
  const json& require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required setting --" + key);
    return it->second;
  }

  std::map<std::string, json> values_;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::mutex log_mutex;

  template <typename... Parts>
  void note(std::ostream& stream, const Parts&... parts) {
    std::lock_guard lock(log_mutex);
    (stream << ... << parts) << '\n';
  }
};

// Runs fn(i) for i in [0, n) on up to `workers` threads; returns the error
// message of each failed index.
std::vector<std::optional<std::string>> parallel_for(std::size_t n, long long workers,
                                                     const std::function<void(std::size_t)>& fn) {
  std::vector<std::optional<std::string>> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::min<long long>(workers, static_cast<long long>(n)));
  if (threads <= 1) {
    worker();
    return errors;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return errors;
}

int exit_code(std::size_t failed, std::size_t total) {
  if (total == 0 || failed == total) return kExitConfig;
  return failed > 0 ? kExitPartial : kExitOk;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---- items ----

struct ItemSpec {
  std::string id;
  std::string program;
  std::optional<fs::path> mixture;
  fs::path dialog;
  fs::path background;
};

void check_id(const std::string& id) {
  const bool safe = !id.empty() && id != "." && id != ".." && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
  if (!safe) throw ConfigError("item id '" + id + "' must use only letters, digits, '-', '_' and '.'");
}

// A manifest {"items": [{id, program?, mixture?, dialog, background}]} with
// paths relative to the manifest, or a directory whose subfolders hold
// dialog.wav, background.wav and optionally mixture.wav.
std::vector<ItemSpec> load_items(const fs::path& input) {
  std::vector<ItemSpec> items;
  if (fs::is_directory(input)) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(input)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      ItemSpec s;
      s.id = d.filename().string();
      s.program = s.id;
      if (fs::exists(d / "mixture.wav")) s.mixture = d / "mixture.wav";
      s.dialog = d / "dialog.wav";
      s.background = d / "background.wav";
      items.push_back(std::move(s));
    }
  } else if (fs::is_regular_file(input)) {
    const json j = read_json(input);
    const json& list = j.is_array() ? j : j.value("items", json::array());
    if (!list.is_array()) throw ConfigError(input.string() + ": 'items' must be an array");
    const fs::path base = input.parent_path();
    for (const auto& e : list) {
      try {
        ItemSpec s;
        s.id = e.at("id").get<std::string>();
        s.program = e.value("program", s.id);
        if (e.contains("mixture")) s.mixture = base / e.at("mixture").get<std::string>();
        s.dialog = base / e.at("dialog").get<std::string>();
        s.background = base / e.at("background").get<std::string>();
        items.push_back(std::move(s));
      } catch (const json::exception& ex) {
        throw ConfigError(input.string() + ": malformed item entry: " + ex.what());
      }
    }
  } else {
    throw ConfigError("input " + input.string() + " does not exist");
  }
  if (items.empty()) throw ConfigError("no items found in " + input.string());
  std::set<std::string> seen;
  for (const auto& s : items) {
    check_id(s.id);
    if (!seen.insert(s.id).second) throw ConfigError("duplicate item id '" + s.id + "'");
  }
  return items;
}

Stems load_stems(const ItemSpec& item, std::optional<int> rate = std::nullopt) {
  auto get = [&](const fs::path& p) {
    AudioClip clip = load_wav(p);
    return rate ? resample(clip, *rate) : clip;
  };
  AudioClip dialog = get(item.dialog);
  AudioClip background = get(item.background);
  if (!item.mixture) return Stems::from_components(std::move(dialog), std::move(background));
  return Stems(get(*item.mixture), std::move(dialog), std::move(background));
}

void report_failures(Context& ctx, const std::vector<ItemSpec>& items,
                     const std::vector<std::optional<std::string>>& errors) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (errors[i]) ctx.note(ctx.err, "item ", items[i].id, ": ", *errors[i]);
  }
}

std::size_t count_failed(const std::vector<std::optional<std::string>>& errors) {
  return static_cast<std::size_t>(std::count_if(errors.begin(), errors.end(), [](const auto& e) { return e.has_value(); }));
}

// ---- prep ----

int cmd_prep(const Settings& s, Context& ctx) {
  const auto items = load_items(s.path("input"));
  const fs::path out = s.path("out");
  const double chunk_seconds = s.real("chunk-seconds", kChunkSeconds);
  const int rate = static_cast<int>(s.positive("sample-rate", 44100));
  const auto epochs = static_cast<std::uint64_t>(s.positive("epochs", 1));
  const long long workers = s.positive("workers", 1);
  const std::string model = s.text("model", "umx");
  if (!(chunk_seconds > 0.0)) throw ConfigError("chunk-seconds must be positive");

  auto plan = SamplerPlan::preset(model, s.seed());
  if (!plan) throw ConfigError("unknown model '" + model + "' (umx, conv-tasnet, spleeter)");
  plan->excerpt_seconds = s.real("excerpt-seconds", plan->excerpt_seconds);
  plan->repeats = static_cast<std::uint32_t>(s.positive("repeats", plan->repeats));
  if (!(plan->excerpt_seconds > 0.0) || plan->excerpt_seconds > chunk_seconds) {
    throw ConfigError("excerpt-seconds must be in (0, chunk-seconds]");
  }

  for (const char* stem : {"mixture", "dialog", "background"}) fs::create_directories(out / stem);

  struct ItemResult {
    std::vector<ChunkRef> chunks;
    std::size_t dropped = 0;
    std::optional<std::string> warning;
  };
  std::vector<ItemResult> results(items.size());
  const auto errors = parallel_for(items.size(), workers, [&](std::size_t i) {
    const auto& item = items[i];
    const Stems stems = load_stems(item, rate);
    const ChunkingResult cr = chunk(stems, chunk_seconds);
    for (std::size_t k = 0; k < cr.chunks.size(); ++k) {
      const std::string id = chunk_id_for(item.id, k);
      save_wav(cr.chunks[k].mixture(), out / "mixture" / (id + ".wav"), BitDepth::Float32);
      save_wav(cr.chunks[k].dialog(), out / "dialog" / (id + ".wav"), BitDepth::Float32);
      save_wav(cr.chunks[k].background(), out / "background" / (id + ".wav"), BitDepth::Float32);
      results[i].chunks.push_back({id, item.id, item.program, k * cr.chunk_samples, cr.chunk_samples, rate});
    }
    results[i].dropped = cr.dropped_samples;
    results[i].warning = cr.warning;
  });
  report_failures(ctx, items, errors);

  std::vector<ChunkRef> chunks;
  json item_log = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    json e{{"id", items[i].id}, {"program", items[i].program}};
    if (errors[i]) {
      e["status"] = "error";
      e["error"] = *errors[i];
    } else {
      e["status"] = "ok";
      e["chunks"] = results[i].chunks.size();
      e["dropped_samples"] = results[i].dropped;
      if (results[i].warning) {
        e["warning"] = *results[i].warning;
        ctx.note(ctx.err, "item ", items[i].id, ": ", *results[i].warning);
      }
      chunks.insert(chunks.end(), results[i].chunks.begin(), results[i].chunks.end());
    }
    item_log.push_back(std::move(e));
  }

  const DatasetSplit split = assign_splits(chunks);
  json chunk_log = json::array();
  for (const auto& c : chunks) {
    chunk_log.push_back({{"chunk_id", c.chunk_id},
                         {"source_item", c.source_item},
                         {"program", c.program},
                         {"start_sample", c.start_sample},
                         {"length", c.length},
                         {"split", to_string(split.membership.at(c.chunk_id))},
                         {"files",
                          {{"mixture", "mixture/" + c.chunk_id + ".wav"},
                           {"dialog", "dialog/" + c.chunk_id + ".wav"},
                           {"background", "background/" + c.chunk_id + ".wav"}}}});
  }

  std::vector<ChunkRef> train;
  for (const auto& c : chunks) {
    if (split.membership.at(c.chunk_id) == Split::Train) train.push_back(c);
  }
  json epoch_log = json::array();
  for (std::uint64_t e = 0; e < epochs; ++e) {
    json entries = json::array();
    for (const auto& x : plan_epoch(train, *plan, e)) entries.push_back(to_json(x));
    epoch_log.push_back(std::move(entries));
  }

  const json manifest{
      {"sample_rate", rate},
      {"chunk_seconds", chunk_seconds},
      {"seed", s.seed()},
      {"items", item_log},
      {"chunks", chunk_log},
      {"splits",
       {{"train", split.train},
        {"validation", split.validation},
        {"test", split.test},
        {"hours", {{"train", split.train_hours}, {"validation", split.validation_hours}, {"test", split.test_hours}}}}},
      {"epoch_plan",
       {{"model", model},
        {"excerpt_seconds", plan->excerpt_seconds},
        {"repeats", plan->repeats},
        {"seed", plan->seed},
        {"epochs", epoch_log}}}};
  write_json(out / "manifest.json", manifest);
  ctx.note(ctx.out, "prep: ", chunks.size(), " chunks from ", items.size() - count_failed(errors), " of ",
           items.size(), " items -> ", (out / "manifest.json").string());
  return exit_code(count_failed(errors), items.size());
}

// ---- oracle ----

int cmd_oracle(const Settings& s, Context& ctx) {
  const auto items = load_items(s.path("input"));
  const fs::path out = s.path("out");
  fs::create_directories(out);
  const auto errors = parallel_for(items.size(), s.positive("workers", 1), [&](std::size_t i) {
    const Stems stems = load_stems(items[i]);
    const SeparationResult r = separate_oracle(stems);
    save_wav(r.dialog, out / (items[i].id + ".dialog.wav"), BitDepth::Float32);
    save_wav(r.background, out / (items[i].id + ".background.wav"), BitDepth::Float32);
  });
  report_failures(ctx, items, errors);
  ctx.note(ctx.out, "oracle: separated ", items.size() - count_failed(errors), " of ", items.size(), " items -> ",
           out.string());
  return exit_code(count_failed(errors), items.size());
}

// ---- eval ----

fs::path estimate_path(const fs::path& dir, const std::string& item_id) { return dir / (item_id + ".dialog.wav"); }

int cmd_eval(const Settings& s, Context& ctx) {
  const auto items = load_items(s.path("input"));
  const fs::path estimates = s.path("estimates");
  const fs::path out = s.path("out");
  const std::string reduction_name = s.text("reduction", "concatenate");
  StereoReduction reduction;
  if (reduction_name == "concatenate") {
    reduction = StereoReduction::Concatenate;
  } else if (reduction_name == "channel-mean") {
    reduction = StereoReduction::ChannelMean;
  } else {
    throw ConfigError("reduction must be 'concatenate' or 'channel-mean'");
  }

  std::vector<std::string> missing;
  for (const auto& item : items) {
    if (!fs::exists(estimate_path(estimates, item.id))) missing.push_back(item.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw ConfigError("no estimate in " + estimates.string() + " for items: " + list);
  }

  std::vector<MetricReport> reports(items.size());
  const auto errors = parallel_for(items.size(), s.positive("workers", 1), [&](std::size_t i) {
    const Stems stems = load_stems(items[i]);
    reports[i] = evaluate_item(items[i].id, stems, load_wav(estimate_path(estimates, items[i].id)), reduction);
  });
  report_failures(ctx, items, errors);

  std::vector<MetricReport> ok;
  std::size_t failed = 0;
  json failures = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (errors[i]) {
      ++failed;
      failures.push_back({{"item_id", items[i].id}, {"error", *errors[i]}});
      continue;
    }
    if (!reports[i].ok()) {
      ++failed;
      ctx.note(ctx.err, "item ", items[i].id, ": ", to_string(reports[i].status), " ", reports[i].message);
    }
    ok.push_back(reports[i]);
  }

  fs::create_directories(out);
  {
    std::ofstream csv(out / "metrics.csv", std::ios::binary);
    write_metrics_csv(csv, ok);
  }
  if (failed == items.size()) {
    ctx.note(ctx.err, "eval: no item could be evaluated");
    return kExitConfig;
  }
  const MetricSummary summary = aggregate(ok);
  json j = to_json(summary);
  j["failed"] = failures;
  write_json(out / "summary.json", j);
  ctx.note(ctx.out, "eval: SI-SDRi ", summary.si_sdri.formatted(), " dB, SI-SIRi ", summary.si_siri.formatted(),
           " dB over ", summary.items, " items");
  return exit_code(failed, items.size());
}

// ---- remix ----

int cmd_remix(const Settings& s, Context& ctx) {
  const auto items = load_items(s.path("input"));
  const fs::path estimates = s.path("estimates");
  const fs::path out = s.path("out");
  ConditionConfig cfg;
  cfg.reference_attenuation_db = s.real("mu-db", kReferenceAttenuationDb);
  cfg.target_lufs = s.real("target-lufs", kTargetLufs);
  if (cfg.reference_attenuation_db < 0.0) throw ConfigError("mu-db must be >= 0");

  if (!fs::is_directory(estimates)) throw ConfigError("estimates directory " + estimates.string() + " does not exist");
  std::vector<std::string> conditions;
  for (const auto& e : fs::directory_iterator(estimates)) {
    if (!e.is_directory()) continue;
    const std::string name = e.path().filename().string();
    if (name == kHiddenReferenceId || name == kAnchorId) throw ConfigError("condition name '" + name + "' is reserved");
    check_id(name);
    conditions.push_back(name);
  }
  std::sort(conditions.begin(), conditions.end());
  if (conditions.empty()) throw ConfigError("no condition folders in " + estimates.string());

  const fs::path cond_dir = out / "conditions";
  fs::create_directories(cond_dir);
  std::vector<json> entries(items.size());
  const auto errors = parallel_for(items.size(), s.positive("workers", 1), [&](std::size_t i) {
    const auto& id = items[i].id;
    const Stems stems = load_stems(items[i]);
    std::vector<ConditionItem> rendered;
    rendered.push_back(prepare_reference(id, stems, cfg));
    rendered.push_back(prepare_anchor(rendered.front(), cfg));
    for (const auto& c : conditions) {
      const fs::path p = estimates / c / (id + ".dialog.wav");
      if (!fs::exists(p)) throw IoError("condition " + c + " has no estimate " + p.string());
      rendered.push_back(prepare_condition(id, c, stems, load_wav(p), cfg));
    }
    json written = write_conditions(cond_dir, rendered);
    for (auto& e : written) {
      const std::string file = e["file"].get<std::string>();
      const Lufs measured = integrated_loudness(load_wav(cond_dir / file), cfg.loudness);
      e["measured_lufs"] = measured.is_measurable() ? json(measured.value()) : json(nullptr);
      e["file"] = "conditions/" + file;
    }
    entries[i] = std::move(written);
  });
  report_failures(ctx, items, errors);

  std::vector<std::string> all_conditions{kAnchorId, kHiddenReferenceId};
  all_conditions.insert(all_conditions.end(), conditions.begin(), conditions.end());
  std::sort(all_conditions.begin(), all_conditions.end());

  json stimuli = json::array();
  json references = json::object();
  json item_log = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    json e{{"id", items[i].id}};
    if (errors[i]) {
      e["status"] = "error";
      e["error"] = *errors[i];
    } else {
      e["status"] = "ok";
      for (const auto& st : entries[i]) {
        if (st["condition_id"] == kHiddenReferenceId) references[items[i].id] = st["file"];
        stimuli.push_back(st);
      }
    }
    item_log.push_back(std::move(e));
  }
  write_json(out / "manifest.json", {{"target_lufs", cfg.target_lufs},
                                     {"reference_attenuation_db", cfg.reference_attenuation_db},
                                     {"conditions", all_conditions},
                                     {"items", item_log},
                                     {"references", references},
                                     {"stimuli", stimuli}});
  ctx.note(ctx.out, "remix: ", stimuli.size(), " stimuli for ", items.size() - count_failed(errors), " of ",
           items.size(), " items -> ", (out / "manifest.json").string());
  return exit_code(count_failed(errors), items.size());
}

// ---- mushra ----

int cmd_mushra_gen(const Settings& s, Context& ctx) {
  const fs::path manifest_path = s.path("input");
  const fs::path out = s.path("out");
  const json manifest = read_json(manifest_path);
  const fs::path base = manifest_path.parent_path();

  std::vector<mushra::StimulusInput> inputs;
  std::map<std::string, std::string> references;
  try {
    for (const auto& st : manifest.at("stimuli")) {
      inputs.push_back({st.at("item_id").get<std::string>(), st.at("condition_id").get<std::string>(),
                        st.at("file").get<std::string>()});
    }
    references = manifest.at("references").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError(manifest_path.string() + ": not a remix manifest: " + e.what());
  }

  mushra::SessionOptions opt;
  opt.listeners = static_cast<std::size_t>(s.positive("listeners", 1));
  opt.seed = s.seed();
  if (s.has("conditions")) opt.expected_conditions = static_cast<std::size_t>(s.positive("conditions", 1));
  const mushra::MushraSession session = mushra::build_session(inputs, references, opt);

  const fs::path stim_dir = out / opt.stimulus_dir;
  fs::create_directories(stim_dir);
  auto copy = [&](const std::string& source, const std::string& label) {
    const fs::path from = base / source;
    if (!fs::exists(from)) throw ConfigError("stimulus source " + from.string() + " does not exist");
    fs::copy_file(from, stim_dir / (label + ".wav"), fs::copy_options::overwrite_existing);
  };
  for (const auto& [label, k] : session.key) copy(k.source_path, label);
  for (const auto& item : session.items) copy(session.reference_sources.at(item.item_id), item.reference_label);

  write_json(out / "session.json", mushra::session_to_json(session));
  write_json(out / "session_key.json", mushra::key_to_json(session));
  ctx.note(ctx.out, "mushra-gen: ", session.items.size(), " items x ", session.conditions.size(), " conditions = ",
           session.stimuli_per_listener(), " stimuli per listener -> ", (out / "session.json").string());
  return kExitOk;
}

int cmd_mushra_report(const Settings& s, Context& ctx) {
  const fs::path ratings_path = s.path("ratings");
  const fs::path out = s.path("out");
  const double confidence = s.real("confidence", 0.95);
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must be in (0, 1)");

  std::ifstream in(ratings_path);
  if (!in) throw ConfigError("cannot open ratings " + ratings_path.string());
  std::vector<mushra::RatingRecord> records;
  try {
    records = ratings_path.extension() == ".csv" ? mushra::parse_ratings_csv(in) : mushra::parse_ratings_jsonl(in);
  } catch (const FormatError& e) {
    throw ConfigError(ratings_path.string() + ": " + e.what());
  }
  if (records.empty()) throw ConfigError("no ratings in " + ratings_path.string());

  std::optional<std::pair<std::set<std::string>, std::set<std::string>>> grid;
  if (s.has("key")) {
    const json key_json = read_json(s.path("key"));
    const auto key = mushra::key_from_json(key_json);
    try {
      records = mushra::resolve_labels(std::move(records), key);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    std::set<std::string> items;
    for (const auto& [_, k] : key) items.insert(k.item_id);
    const auto conds = key_json.at("conditions").get<std::vector<std::string>>();
    grid.emplace(items, std::set<std::string>(conds.begin(), conds.end()));
  }

  mushra::RatingLog log;
  log.ingest(records);
  records = log.records();
  const mushra::ScreeningResult screening =
      grid ? mushra::post_screen(records, grid->first, grid->second) : mushra::post_screen(records);
  const mushra::StatsReport report = mushra::stats(records, screening.kept, confidence);

  fs::create_directories(out);
  write_json(out / "screening.json",
             {{"listeners", screening.kept.size() + screening.excluded.size()},
              {"kept", screening.kept},
              {"excluded", screening.excluded}});
  {
    std::ofstream csv(out / "report.csv", std::ios::binary);
    mushra::write_report_csv(csv, report);
  }
  for (const auto& [listener, reason] : screening.excluded) ctx.note(ctx.out, "excluded ", listener, ": ", reason);
  ctx.note(ctx.out, "mushra-report: kept ", screening.kept.size(), " of ",
           screening.kept.size() + screening.excluded.size(), " listeners -> ", (out / "report.csv").string());
  return screening.kept.empty() ? kExitPartial : kExitOk;
}

// ---- schedule ----

int cmd_schedule(const Settings& s, Context& ctx) {
  const fs::path input = s.path("input");
  ScheduleConfig cfg;
  cfg.decay_factor = s.real("decay-factor", cfg.decay_factor);
  cfg.decay_patience = static_cast<int>(s.positive("decay-patience", cfg.decay_patience));
  cfg.stop_patience = static_cast<int>(s.positive("stop-patience", cfg.stop_patience));
  cfg.max_epochs = static_cast<int>(s.positive("max-epochs", cfg.max_epochs));
  ScheduleState state(cfg);

  std::ifstream in(input);
  if (!in) throw ConfigError("cannot open losses " + input.string());
  std::vector<double> losses;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    try {
      losses.push_back(word == "nan" || word == "NaN" ? std::nan("") : std::stod(word));
    } catch (const std::exception&) {
      throw ConfigError(input.string() + " line " + std::to_string(n) + ": not a number");
    }
  }

  const fs::path out = s.path("out");
  fs::create_directories(out);
  std::ofstream log(out / "decisions.jsonl", std::ios::binary);
  for (double loss : losses) {
    const Decision d = observe(state, loss);
    log << decision_record(state, loss, d).dump() << '\n';
    if (state.stopped) break;
  }
  ctx.note(ctx.out, "schedule: ", state.epoch, " epochs, lr factor ", state.lr_factor,
           state.stopped ? ", stopped" : ", running");
  return kExitOk;
}

struct Command {
  const char* name;
  const char* help;
  std::vector<const char*> keys;
  std::vector<const char*> required;
  int (*fn)(const Settings&, Context&);
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list{
      {"prep", "Resample, chunk and split stems; plan training excerpts",
       {"input", "out", "seed", "workers", "chunk-seconds", "sample-rate", "model", "excerpt-seconds", "repeats",
        "epochs"},
       {"input", "out"},
       cmd_prep},
      {"oracle", "Separate items with the oracle ideal ratio mask", {"input", "out", "workers"}, {"input", "out"},
       cmd_oracle},
      {"eval", "Score dialog estimates with SI-SDR and SI-SIR",
       {"input", "estimates", "out", "workers", "reduction"},
       {"input", "estimates", "out"},
       cmd_eval},
      {"remix", "Render loudness-matched listening-test conditions",
       {"input", "estimates", "out", "workers", "mu-db", "target-lufs"},
       {"input", "estimates", "out"},
       cmd_remix},
      {"mushra-gen", "Build a blinded MUSHRA session from a remix manifest",
       {"input", "out", "seed", "listeners", "conditions"},
       {"input", "out"},
       cmd_mushra_gen},
      {"mushra-report", "Post-screen listeners and report mean scores with confidence intervals",
       {"ratings", "key", "out", "confidence"},
       {"ratings", "out"},
       cmd_mushra_report},
      {"schedule", "Replay validation losses through the decay and early-stop controller",
       {"input", "out", "decay-factor", "decay-patience", "stop-patience", "max-epochs"},
       {"input", "out"},
       cmd_schedule},
  };
  return list;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dialog separation evaluation toolkit", "dialogsep"};
  app.require_subcommand(1);

  struct Bound {
    const Command* command;
    CLI::App* app;
    std::string config;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<Bound> bound(commands().size());
  for (std::size_t i = 0; i < commands().size(); ++i) {
    Bound& b = bound[i];
    b.command = &commands()[i];
    b.app = app.add_subcommand(b.command->name, b.command->help);
    b.app->add_option("--config", b.config, "JSON config; keys mirror the flag names")->type_name("PATH");
    for (const char* key : b.command->keys) {
      static const char* const type_names[] = {"PATH", "TEXT", "INT", "FLOAT"};
      b.options[key] = b.app->add_option(std::string("--") + key, b.raw[key], key_spec(key).help)
                           ->type_name(type_names[static_cast<int>(key_spec(key).kind)]);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  Context ctx{out, err, {}};
  for (auto& b : bound) {
    if (!b.app->parsed()) continue;
    try {
      Settings settings;
      if (!b.config.empty()) settings.load_config(b.config);
      for (const auto& [key, option] : b.options) {
        if (option->count() > 0) settings.set(key, parse_flag(key_spec(key), b.raw[key]));
      }
      for (const char* key : b.command->required) {
        if (!settings.has(key)) throw ConfigError(std::string(b.command->name) + ": missing required setting --" + key);
      }
      return b.command->fn(settings, ctx);
    } catch (const std::exception& e) {
      ctx.note(err, "error: ", e.what());
      return kExitConfig;
    }
  }
  return kExitConfig;
}

}  // namespace dialogsep::cli
