#pragma once

// On-disk item fixtures for command-level tests.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "dialogsep/dialogsep.hpp"
#include "support/test_signals.hpp"

namespace dialogsep::testing {

namespace fs = std::filesystem;

// Dialog (two tones) talks during the first half only; noise background
// throughout.
inline Stems synthetic_item(double seconds, int rate, unsigned seed) {
  const auto n = static_cast<std::size_t>(seconds * rate);
  auto talk = sine(220.0 + 10.0 * seed, rate, n / 2, 0.3);
  const auto talk2 = sine(1330.0, rate, n / 2, 0.1);
  for (std::size_t i = 0; i < talk.size(); ++i) talk[i] += talk2[i];
  talk.resize(n, 0.0);
  return Stems::from_components(AudioClip::dual_mono(talk, rate), noise_clip(n, rate, 100 + seed, 0.05));
}

struct ItemFiles {
  std::string id;
  Stems stems;
};

// Writes <dir>/<id>/{mixture,dialog,background}.wav (float32) plus
// <dir>/items.json listing them with a program name per item.
inline fs::path write_items(const fs::path& dir, const std::vector<ItemFiles>& items, bool with_mixture = true) {
  fs::create_directories(dir);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& it : items) {
    fs::create_directories(dir / it.id);
    save_wav(it.stems.dialog(), dir / it.id / "dialog.wav", BitDepth::Float32);
    save_wav(it.stems.background(), dir / it.id / "background.wav", BitDepth::Float32);
    nlohmann::json e{{"id", it.id},
                     {"program", "prog_" + it.id},
                     {"dialog", it.id + "/dialog.wav"},
                     {"background", it.id + "/background.wav"}};
    if (with_mixture) {
      save_wav(it.stems.mixture(), dir / it.id / "mixture.wav", BitDepth::Float32);
      e["mixture"] = it.id + "/mixture.wav";
    }
    list.push_back(e);
  }
  std::ofstream(dir / "items.json") << nlohmann::json{{"items", list}}.dump(2);
  return dir / "items.json";
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline nlohmann::json read_json_file(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

inline RunResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Fresh scratch directory under the system temp dir.
inline fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dialogsep_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace dialogsep::testing
