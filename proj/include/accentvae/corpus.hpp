// include/accentvae/corpus.hpp

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

// Dataset ingestion, tokenization and accent-grouped batching.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "accentvae/common.hpp"

namespace accentvae {

enum class Split { kTrain, kValidation, kTest };

const char *SplitName(Split s);
Split ParseSplit(const std::string &name);

struct UtteranceRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string accent_id;
  std::optional<std::filesystem::path> audio_path;
  std::string transcript;
  Split split = Split::kTrain;
};

/// Ordered accent inventory; index order is the classifier's output order.
class AccentVocabulary {
 public:
  AccentVocabulary() = default;
  explicit AccentVocabulary(std::vector<std::string> ids);

  std::size_t size() const { return ids_.size(); }
  int index(const std::string &id) const;
  bool contains(const std::string &id) const { return lookup_.count(id) != 0; }
  const std::string &id(int index) const { return ids_.at(index); }
  const std::vector<std::string> &ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> lookup_;
};

struct TokenSequence {
  std::vector<int> ids;
  int vocab_size = 0;

  std::size_t size() const { return ids.size(); }
};

/// Log-magnitude mel energies, frames x n_mels.
struct MelSpectrogram {
  Eigen::MatrixXf values;
  double frame_hop_seconds = 0.0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index n_mels() const { return values.cols(); }
};

/// Character-level tokenizer over printable ASCII. Ids 0..2 are reserved for
/// padding, end-of-sequence and unknown characters.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kFirstChar = 3;
  static constexpr int kVocabSize = kFirstChar + 95;

  /// Unknown characters (including every byte of a multi-byte UTF-8
  /// sequence) collapse into a single kUnk per code point.
  static TokenSequence Encode(const std::string &transcript);
  static std::string Decode(const TokenSequence &tokens);
};

struct SplitCounts {
  int test = 10;
  int validation = 20;
};

struct ScanResult {
  std::vector<UtteranceRecord> records;
  AccentVocabulary accents;
  std::vector<std::string> warnings;
};

/// Reads a speaker_id<TAB>accent_id map.
std::map<std::string, std::string> ReadSpeakerAccentMap(const std::filesystem::path &path);

/// Scans root/<speaker>/ for *.wav files (recursively) plus a transcript index
/// root/<speaker>/transcript.tsv with utterance_id<TAB>text lines.
ScanResult ScanDataset(const std::filesystem::path &root,
                       const std::filesystem::path &speaker_accent_map,
                       SplitCounts splits = {});

/// Assigns per-speaker splits by sorted utterance id: the first `test`
/// utterances go to test, the next `validation` to validation.
std::vector<std::string> AssignSplits(std::vector<UtteranceRecord> &records, SplitCounts splits);

/// Builds the accent inventory in sorted order; requires at least 2 accents.
AccentVocabulary MakeAccentVocabulary(const std::vector<UtteranceRecord> &records);

// Manifest: JSON lines, one record per line.
void WriteManifest(const std::filesystem::path &path, const std::vector<UtteranceRecord> &records);
std::vector<UtteranceRecord> ReadManifest(const std::filesystem::path &path);
std::uint64_t ManifestHash(const std::vector<UtteranceRecord> &records);

// Per-utterance mel cache: 16-byte header (magic, version, frames, n_mels as
// little-endian u32) then row-major little-endian float32 values.
inline constexpr std::uint32_t kMelCacheMagic = 0x4C454D41;  // "AMEL"
inline constexpr std::uint32_t kMelCacheVersion = 1;
void WriteMelCache(const std::filesystem::path &path, const MelSpectrogram &mel);
MelSpectrogram ReadMelCache(const std::filesystem::path &path, double frame_hop_seconds);

/// One loaded utterance: record plus model inputs.
struct Utterance {
  UtteranceRecord record;
  TokenSequence tokens;
  MelSpectrogram mel;
  int speaker_index = 0;
  int accent_index = 0;
};

struct Corpus {
  std::vector<Utterance> utterances;
  AccentVocabulary accents;
  std::vector<std::string> speakers;  // sorted; speaker_index refers here

  std::vector<int> SplitIndices(Split split) const;
};

/// Loads manifest.jsonl + mels/<utterance_id>.mel from a prepared directory.
Corpus LoadPreparedCorpus(const std::filesystem::path &dir, double frame_hop_seconds);
/// Writes manifest.jsonl, accents.txt and the mel cache.
void WritePreparedCorpus(const std::filesystem::path &dir, const Corpus &corpus);

/// Builds Utterance entries (tokens, indices) for records with mels supplied.
Corpus AssembleCorpus(std::vector<UtteranceRecord> records, std::vector<MelSpectrogram> mels,
                      const AccentVocabulary &accents);

struct GroupedBatch {
  struct Item {
    TokenSequence tokens;
    MelSpectrogram mel;
    int speaker = 0;
    int accent = 0;
  };
  std::vector<Item> utterances;
  /// accent index -> member positions in `utterances`.
  std::map<int, std::vector<int>> group_index;

  std::size_t size() const { return utterances.size(); }
};

/// Infinite, reproducible stream of accent-grouped batches. Accents are
/// visited round-robin; each contributes runs of min_group_size members drawn
/// without replacement from a per-accent shuffle that is refreshed when spent.
class GroupedBatchStream {
 public:
  GroupedBatchStream(const Corpus &corpus, std::vector<int> pool, int batch_size,
                     int min_group_size, std::uint64_t seed);

  /// Corpus indices of the next batch, grouped by accent.
  std::vector<int> NextIndices();
  GroupedBatch Next();
  void Skip(std::uint64_t batches);

  const std::vector<std::string> &warnings() const { return warnings_; }

 private:
  int Draw(int accent);

  const Corpus *corpus_;
  int batch_size_;
  int min_group_size_;
  std::mt19937_64 rng_;
  std::vector<int> accents_;                 // eligible accents
  std::map<int, std::vector<int>> members_;  // accent -> pool entries
  std::map<int, std::vector<int>> queue_;    // accent -> remaining shuffled
  std::size_t cursor_ = 0;                   // round-robin position
  std::vector<std::string> warnings_;
};

GroupedBatch MaterializeBatch(const Corpus &corpus, const std::vector<int> &indices);

}  // namespace accentvae
