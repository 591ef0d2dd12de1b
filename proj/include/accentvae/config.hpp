// include/accentvae/config.hpp

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

// Run configuration file: flat UTF-8 "key = value" lines, '#' comments.
// Training keys use their plain names (gamma, batch_size, ...), architecture
// keys are prefixed "model." and STFT keys "stft.". The key "preset" (desk or
// full, the default) picks the base values and is applied before any other key.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "accentvae/audio.hpp"
#include "accentvae/trainer.hpp"

namespace accentvae {

struct RunConfig {
  std::string preset = "full";
  TrainingConfig training;
  StftConfig stft;
  /// Prepared corpus directory; empty means the run directory itself.
  std::string corpus_dir;

  /// Base values for a preset. n_mels and num_accents are taken from the
  /// corpus at training time.
  static RunConfig Preset(const std::string &name);
  nlohmann::json ToJson() const;
};

/// Parses "key = value" text. Unknown keys, duplicate keys, malformed lines
/// and ill-typed values raise UsageError naming the line.
std::map<std::string, std::string> ParseKeyValueText(const std::string &text,
                                                     const std::string &source = "config");

/// Applies `values` on top of the preset they select.
RunConfig MakeRunConfig(const std::map<std::string, std::string> &values);
RunConfig LoadRunConfig(const std::filesystem::path &path);

}  // namespace accentvae
