// include/accentvae/toy_world.hpp

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

// Synthetic factorized corpus. Each frame is
//   template[token] * speaker_gain + accent_tilt + noise
// and every token lasts base_duration[token] * duration_multiplier[accent]
// frames, so speaker and accent are known, separable factors.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "accentvae/corpus.hpp"

namespace accentvae {

struct ToyWorldSpec {
  int num_speakers = 12;
  int num_accents = 3;
  int token_vocab_size = 8;  // symbols 'a', 'b', ...
  std::uint64_t seed = 0;
  int n_mels = 80;
  double noise_sigma = 0.05;
  int min_tokens = 3;
  int max_tokens = 6;

  // Factor tables, filled by Make() from the seed.
  Eigen::MatrixXf token_templates;  // token_vocab_size x n_mels
  std::vector<int> base_durations;  // frames per token before accent scaling
  Eigen::MatrixXf speaker_gain;     // num_speakers x n_mels, positive
  Eigen::MatrixXf accent_tilt;      // num_accents x n_mels
  std::vector<double> duration_multiplier;  // per accent

  /// Validates the sizes and derives every factor table from `seed`.
  static ToyWorldSpec Make(int num_speakers, int num_accents, std::uint64_t seed, int n_mels = 80,
                           int token_vocab_size = 8);

  int AccentOf(int speaker) const { return speaker % num_accents; }
  static std::string SpeakerId(int speaker);
  static std::string AccentId(int accent);
  char Symbol(int token) const { return static_cast<char>('a' + token); }
};

/// Noise-free mel for symbol indices `symbols` spoken by `speaker` with
/// `accent` (the accent need not be the speaker's own).
Eigen::MatrixXf RenderToyMel(const ToyWorldSpec &spec, int speaker, int accent,
                             const std::vector<int> &symbols);

/// Symbol indices of a toy transcript.
std::vector<int> ToySymbols(const ToyWorldSpec &spec, const std::string &transcript);

/// Generates utterances_per_speaker utterances per speaker with seeded
/// transcripts and noise, then assigns splits.
Corpus GenerateToyCorpus(const ToyWorldSpec &spec, int utterances_per_speaker,
                         SplitCounts splits = {}, std::vector<std::string> *warnings = nullptr);

}  // namespace accentvae
