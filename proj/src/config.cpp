// src/config.cpp

// Copyright 2026 The accentvae Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "accentvae/config.hpp"

#include <fstream>
#include <sstream>

namespace accentvae {

namespace {

std::string Trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Keys fixed by the corpus rather than the config file.
bool Derived(const std::string &key) {
  return key == "model.n_mels" || key == "model.num_accents" || key == "model.vocab_size";
}

void Flatten(const nlohmann::json &j, const std::string &prefix,
             std::map<std::string, nlohmann::json> &out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix + it.key();
    if (it->is_object())
      Flatten(*it, key + ".", out);
    else if (!Derived(key))
      out[key] = *it;
  }
}

nlohmann::json ParseTyped(const std::string &key, const std::string &raw,
                          const nlohmann::json &like) {
  auto bad = [&] {
    return UsageError("config key '" + key + "': cannot parse value '" + raw + "'");
  };
  try {
    std::size_t used = 0;
    if (like.is_boolean()) {
      if (raw == "true" || raw == "1") return true;
      if (raw == "false" || raw == "0") return false;
      throw bad();
    }
    if (like.is_number_unsigned()) {
      if (raw.empty() || raw[0] == '-') throw bad();
      const auto v = std::stoull(raw, &used);
      if (used != raw.size()) throw bad();
      return v;
    }
    if (like.is_number_integer()) {
      const auto v = std::stoll(raw, &used);
      if (used != raw.size()) throw bad();
      return v;
    }
    if (like.is_number_float()) {
      const double v = std::stod(raw, &used);
      if (used != raw.size()) throw bad();
      return v;
    }
    if (like.is_array()) {
      nlohmann::json arr = nlohmann::json::array();
      std::stringstream ss(raw);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = Trim(item);
        const auto v = std::stoll(item, &used);
        if (used != item.size()) throw bad();
        arr.push_back(v);
      }
      return arr;
    }
    return raw;
  } catch (const std::invalid_argument &) {
    throw bad();
  } catch (const std::out_of_range &) {
    throw bad();
  }
}

void Unflatten(nlohmann::json &j, const std::string &key, const nlohmann::json &value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos) {
    j[key] = value;
    return;
  }
  Unflatten(j[key.substr(0, dot)], key.substr(dot + 1), value);
}

StftConfig StftFromJson(const nlohmann::json &j) {
  StftConfig s;
  s.sample_rate = j.at("sample_rate");
  s.n_fft = j.at("n_fft");
  s.hop_length = j.at("hop_length");
  s.win_length = j.at("win_length");
  s.n_mels = j.at("n_mels");
  s.fmin = j.at("fmin");
  s.fmax = j.at("fmax");
  s.log_floor = j.at("log_floor");
  return s;
}

}  // namespace

RunConfig RunConfig::Preset(const std::string &name) {
  RunConfig c;
  c.preset = name;
  if (name == "desk") {
    c.training = TrainingConfig::Desk(80, 7);
  } else if (name == "full") {
    c.training = TrainingConfig();
    c.training.model = ModelConfig::Full(7);
  } else {
    throw UsageError("unknown preset '" + name + "' (expected desk or full)");
  }
  return c;
}

nlohmann::json RunConfig::ToJson() const {
  nlohmann::json j = accentvae::ToJson(training);
  j["preset"] = preset;
  j["corpus_dir"] = corpus_dir;
  j["stft"] = {{"sample_rate", stft.sample_rate}, {"n_fft", stft.n_fft},
               {"hop_length", stft.hop_length},   {"win_length", stft.win_length},
               {"n_mels", stft.n_mels},           {"fmin", stft.fmin},
               {"fmax", stft.fmax},               {"log_floor", stft.log_floor}};
  return j;
}

std::map<std::string, std::string> ParseKeyValueText(const std::string &text,
                                                     const std::string &source) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw UsageError(where + ": expected 'key = value'");
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(where + ": empty key");
    if (!out.emplace(key, value).second) throw UsageError(where + ": duplicate key '" + key + "'");
  }
  return out;
}

RunConfig MakeRunConfig(const std::map<std::string, std::string> &values) {
  const auto preset_it = values.find("preset");
  RunConfig base = RunConfig::Preset(preset_it == values.end() ? "full" : preset_it->second);
  nlohmann::json tree = base.ToJson();
  std::map<std::string, nlohmann::json> known;
  Flatten(tree, "", known);
  for (const auto &[key, raw] : values) {
    if (key == "preset") continue;
    const auto it = known.find(key);
    if (it == known.end()) throw UsageError("unknown config key '" + key + "'");
    Unflatten(tree, key, ParseTyped(key, raw, it->second));
  }
  RunConfig c;
  c.preset = base.preset;
  c.training = TrainingConfigFromJson(tree);
  c.stft = StftFromJson(tree.at("stft"));
  c.corpus_dir = tree.at("corpus_dir").get<std::string>();
  c.stft.Validate();
  return c;
}

RunConfig LoadRunConfig(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return MakeRunConfig(ParseKeyValueText(ss.str(), path.string()));
}

}  // namespace accentvae
