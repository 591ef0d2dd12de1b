// include/accentvae/inference.hpp

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

// Embedding extraction, per-speaker / per-accent averaging, synthesis and
// accent conversion.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "accentvae/corpus.hpp"
#include "accentvae/gaussian.hpp"
#include "accentvae/model.hpp"

namespace accentvae {

struct EmbeddingRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string accent_id;
  DiagonalGaussian<float> speaker;  // utterance posterior of z_s
  DiagonalGaussian<float> accent;   // instance posterior of z_a, before grouping
};

/// Posteriors of a reference split plus the derived conditioning vectors:
/// speaker = mean of the speaker's posterior means, accent = mean of the
/// product-of-Gaussians posterior over all of the accent's utterances.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  /// Derives the speaker and accent tables from `records`.
  EmbeddingStore(std::vector<EmbeddingRecord> records, std::uint64_t checkpoint_hash,
                 int latent_dim);

  const std::vector<EmbeddingRecord> &records() const { return records_; }
  std::uint64_t checkpoint_hash() const { return checkpoint_hash_; }
  int latent_dim() const { return latent_dim_; }

  std::vector<std::string> speakers() const;
  std::vector<std::string> accents() const;
  bool has_speaker(const std::string &id) const { return speaker_.count(id) != 0; }
  bool has_accent(const std::string &id) const { return accent_.count(id) != 0; }
  /// Throws UsageError listing the available ids when `id` is unknown.
  const LatentSample<float> &speaker_embedding(const std::string &id) const;
  const LatentSample<float> &accent_embedding(const std::string &id) const;
  /// The accent the speaker's records carry.
  const std::string &native_accent(const std::string &speaker_id) const;

  void Save(const std::filesystem::path &path) const;
  static EmbeddingStore Load(const std::filesystem::path &path);

 private:
  std::vector<EmbeddingRecord> records_;
  std::uint64_t checkpoint_hash_ = 0;
  int latent_dim_ = 0;
  std::map<std::string, LatentSample<float>> speaker_;
  std::map<std::string, LatentSample<float>> accent_;
  std::map<std::string, std::string> native_;
};

inline constexpr std::uint32_t kStoreMagic = 0x54535641;  // "AVST"
inline constexpr std::uint32_t kStoreVersion = 1;

/// Passes every utterance of `split` through the reference encoder and the
/// latent heads (posterior means and log-variances, no sampling). Speakers or
/// accents of the corpus with no utterance in the split are reported in
/// `warnings` and omitted.
EmbeddingStore BuildEmbeddingStore(const Model<float> &model, const Corpus &corpus, Split split,
                                   std::vector<std::string> *warnings = nullptr);

/// Same, over explicit corpus indices.
EmbeddingStore BuildEmbeddingStore(const Model<float> &model, const Corpus &corpus,
                                   const std::vector<int> &indices,
                                   std::vector<std::string> *warnings = nullptr);

/// Throws DataError when the store was built from a different parameter set.
void CheckStoreMatches(const EmbeddingStore &store, const Model<float> &model);

/// Free-running synthesis conditioned on the stored speaker and accent
/// embeddings.
DecoderOutput<float> Synthesize(const Model<float> &model, const EmbeddingStore &store,
                                const std::string &text, const std::string &speaker_id,
                                const std::string &accent_id);

/// Synthesis with the source speaker and a target accent; the native accent
/// delegates to Synthesize.
DecoderOutput<float> ConvertAccent(const Model<float> &model, const EmbeddingStore &store,
                                   const std::string &text, const std::string &speaker_id,
                                   const std::string &target_accent_id);

}  // namespace accentvae
