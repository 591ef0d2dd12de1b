// src/toy_world.cpp

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

#include "accentvae/toy_world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <tuple>

namespace accentvae {

std::string ToyWorldSpec::SpeakerId(int speaker) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%02d", speaker);
  return buf;
}

std::string ToyWorldSpec::AccentId(int accent) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "acc%d", accent);
  return buf;
}

ToyWorldSpec ToyWorldSpec::Make(int num_speakers, int num_accents, std::uint64_t seed, int n_mels,
                                int token_vocab_size) {
  if (num_accents < 2) throw UsageError("toy world: at least 2 accents are required");
  if (num_speakers < num_accents || num_speakers % num_accents != 0)
    throw UsageError("toy world: even assignment required (" + std::to_string(num_speakers) +
                     " speakers over " + std::to_string(num_accents) + " accents)");
  if (n_mels < 2) throw UsageError("toy world: n_mels must be >= 2");
  if (token_vocab_size < 1 || token_vocab_size > 26)
    throw UsageError("toy world: token_vocab_size must be in [1, 26]");

  ToyWorldSpec s;
  s.num_speakers = num_speakers;
  s.num_accents = num_accents;
  s.token_vocab_size = token_vocab_size;
  s.seed = seed;
  s.n_mels = n_mels;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);

  s.token_templates.resize(token_vocab_size, n_mels);
  for (int t = 0; t < token_vocab_size; ++t)
    for (int m = 0; m < n_mels; ++m) s.token_templates(t, m) = static_cast<float>(u(rng));
  for (int t = 0; t < token_vocab_size; ++t) s.base_durations.push_back(t % 2 == 0 ? 2 : 4);

  s.speaker_gain.resize(num_speakers, n_mels);
  for (int k = 0; k < num_speakers; ++k)
    for (int m = 0; m < n_mels; ++m)
      s.speaker_gain(k, m) = static_cast<float>(std::exp(0.3 * n(rng)));

  // Tilt slopes and offsets are spread evenly and then permuted, so accents
  // stay well apart for every seed.
  std::vector<int> slope_order(num_accents), offset_order(num_accents), dur_order(num_accents);
  std::iota(slope_order.begin(), slope_order.end(), 0);
  offset_order = dur_order = slope_order;
  std::shuffle(slope_order.begin(), slope_order.end(), rng);
  std::shuffle(offset_order.begin(), offset_order.end(), rng);
  std::shuffle(dur_order.begin(), dur_order.end(), rng);
  auto spread = [&](int i, double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(num_accents - 1);
  };
  s.accent_tilt.resize(num_accents, n_mels);
  for (int a = 0; a < num_accents; ++a) {
    const double slope = spread(slope_order[a], -1.0, 1.0);
    const double offset = spread(offset_order[a], -0.5, 0.5);
    for (int m = 0; m < n_mels; ++m) {
      const double x = 2.0 * m / static_cast<double>(n_mels - 1) - 1.0;
      s.accent_tilt(a, m) = static_cast<float>(slope * x + offset);
    }
    s.duration_multiplier.push_back(spread(dur_order[a], 0.5, 1.5));
  }
  return s;
}

Eigen::MatrixXf RenderToyMel(const ToyWorldSpec &spec, int speaker, int accent,
                             const std::vector<int> &symbols) {
  if (speaker < 0 || speaker >= spec.num_speakers) throw Error("toy world: speaker out of range");
  if (accent < 0 || accent >= spec.num_accents) throw Error("toy world: accent out of range");
  if (symbols.empty()) throw Error("toy world: empty symbol sequence");
  std::vector<int> durations;
  int frames = 0;
  for (int t : symbols) {
    if (t < 0 || t >= spec.token_vocab_size) throw Error("toy world: symbol out of range");
    const int d = std::max(
        1, static_cast<int>(std::lround(spec.base_durations[t] * spec.duration_multiplier[accent])));
    durations.push_back(d);
    frames += d;
  }
  Eigen::MatrixXf mel(frames, spec.n_mels);
  int row = 0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const Eigen::RowVectorXf frame =
        spec.token_templates.row(symbols[i]).cwiseProduct(spec.speaker_gain.row(speaker)) +
        spec.accent_tilt.row(accent);
    for (int k = 0; k < durations[i]; ++k) mel.row(row++) = frame;
  }
  return mel;
}

std::vector<int> ToySymbols(const ToyWorldSpec &spec, const std::string &transcript) {
  std::vector<int> out;
  for (char c : transcript) {
    const int t = c - 'a';
    if (t < 0 || t >= spec.token_vocab_size)
      throw UsageError(std::string("toy world: unknown symbol '") + c + "'");
    out.push_back(t);
  }
  return out;
}

Corpus GenerateToyCorpus(const ToyWorldSpec &spec, int utterances_per_speaker, SplitCounts splits,
                         std::vector<std::string> *warnings) {
  if (spec.num_speakers % spec.num_accents != 0)
    throw UsageError("toy world: even assignment required");
  if (utterances_per_speaker < 1) throw UsageError("toy world: utterances_per_speaker must be >= 1");
  if (spec.min_tokens < 1 || spec.max_tokens < spec.min_tokens)
    throw UsageError("toy world: invalid token length range");

  std::vector<UtteranceRecord> records;
  std::vector<MelSpectrogram> mels;
  for (int s = 0; s < spec.num_speakers; ++s) {
    const int accent = spec.AccentOf(s);
    for (int i = 0; i < utterances_per_speaker; ++i) {
      std::seed_seq seq{static_cast<std::uint32_t>(spec.seed & 0xffffffffu),
                        static_cast<std::uint32_t>(spec.seed >> 32),
                        static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      std::uniform_int_distribution<int> len(spec.min_tokens, spec.max_tokens);
      std::uniform_int_distribution<int> sym(0, spec.token_vocab_size - 1);
      std::vector<int> symbols(len(rng));
      for (auto &t : symbols) t = sym(rng);

      UtteranceRecord r;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%s_%04d", ToyWorldSpec::SpeakerId(s).c_str(), i);
      r.utterance_id = buf;
      r.speaker_id = ToyWorldSpec::SpeakerId(s);
      r.accent_id = ToyWorldSpec::AccentId(accent);
      for (int t : symbols) r.transcript.push_back(spec.Symbol(t));

      MelSpectrogram mel;
      mel.values = RenderToyMel(spec, s, accent, symbols);
      if (spec.noise_sigma > 0) {
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (Eigen::Index k = 0; k < mel.values.size(); ++k)
          mel.values(k) += static_cast<float>(noise(rng));
      }
      mel.frame_hop_seconds = 256.0 / 22050.0;
      records.push_back(std::move(r));
      mels.push_back(std::move(mel));
    }
  }
  // AssignSplits sorts the records; keep the mels in step with them.
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(records[a].speaker_id, records[a].utterance_id) <
           std::tie(records[b].speaker_id, records[b].utterance_id);
  });
  std::vector<UtteranceRecord> sorted_records;
  std::vector<MelSpectrogram> sorted_mels;
  for (std::size_t i : order) {
    sorted_records.push_back(std::move(records[i]));
    sorted_mels.push_back(std::move(mels[i]));
  }
  records = std::move(sorted_records);
  mels = std::move(sorted_mels);
  auto w = AssignSplits(records, splits);
  if (warnings != nullptr) *warnings = w;
  std::vector<std::string> accent_ids;
  for (int a = 0; a < spec.num_accents; ++a) accent_ids.push_back(ToyWorldSpec::AccentId(a));
  return AssembleCorpus(std::move(records), std::move(mels), AccentVocabulary(accent_ids));
}

}  // namespace accentvae
