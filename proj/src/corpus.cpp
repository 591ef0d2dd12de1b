// src/corpus.cpp

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

#include "accentvae/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "accentvae/binary_io.hpp"
#include "json.hpp"

namespace accentvae {

namespace fs = std::filesystem;

const char *SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split ParseSplit(const std::string &name) {
  if (name == "train") return Split::kTrain;
  if (name == "val" || name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw UsageError("unknown split '" + name + "' (expected train, val or test)");
}

AccentVocabulary::AccentVocabulary(std::vector<std::string> ids) : ids_(std::move(ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!lookup_.emplace(ids_[i], static_cast<int>(i)).second)
      throw DataError("accent vocabulary: duplicate accent '" + ids_[i] + "'");
  }
}

int AccentVocabulary::index(const std::string &id) const {
  auto it = lookup_.find(id);
  if (it == lookup_.end()) throw DataError("unknown accent '" + id + "'");
  return it->second;
}

TokenSequence Tokenizer::Encode(const std::string &transcript) {
  if (transcript.empty()) throw UsageError("tokenize: transcript is empty");
  TokenSequence seq;
  seq.vocab_size = kVocabSize;
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    const auto c = static_cast<unsigned char>(transcript[i]);
    if (c >= 32 && c < 127) {
      seq.ids.push_back(kFirstChar + (c - 32));
      continue;
    }
    seq.ids.push_back(kUnk);
    // swallow the continuation bytes of a multi-byte code point
    if (c >= 0xC0)
      while (i + 1 < transcript.size() &&
             (static_cast<unsigned char>(transcript[i + 1]) & 0xC0) == 0x80)
        ++i;
  }
  return seq;
}

std::string Tokenizer::Decode(const TokenSequence &tokens) {
  std::string out;
  for (int id : tokens.ids) {
    if (id >= kFirstChar && id < kVocabSize)
      out.push_back(static_cast<char>(id - kFirstChar + 32));
    else if (id == kUnk)
      out += "\xEF\xBF\xBD";  // U+FFFD
  }
  return out;
}

std::map<std::string, std::string> ReadSpeakerAccentMap(const fs::path &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open speaker-accent map " + path.string());
  std::map<std::string, std::string> map;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected speaker_id<TAB>accent_id");
    const std::string spk = line.substr(0, tab), acc = line.substr(tab + 1);
    auto [it, inserted] = map.emplace(spk, acc);
    if (!inserted && it->second != acc)
      throw DataError("speaker '" + spk + "' is mapped to two accents");
  }
  return map;
}

namespace {

std::map<std::string, std::string> ReadTranscriptIndex(const fs::path &path) {
  std::map<std::string, std::string> out;
  std::ifstream is(path);
  if (!is) return out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(path.string() + ": malformed line '" + line + "'");
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

}  // namespace

std::vector<std::string> AssignSplits(std::vector<UtteranceRecord> &records, SplitCounts splits) {
  if (splits.test < 0 || splits.validation < 0) throw UsageError("split counts must be >= 0");
  std::stable_sort(records.begin(), records.end(), [](const auto &a, const auto &b) {
    return std::tie(a.speaker_id, a.utterance_id) < std::tie(b.speaker_id, b.utterance_id);
  });
  std::vector<std::string> warnings;
  std::size_t train = 0;
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    while (j < records.size() && records[j].speaker_id == records[i].speaker_id) ++j;
    std::size_t speaker_train = 0;
    for (std::size_t k = i; k < j; ++k) {
      const auto rank = static_cast<int>(k - i);
      if (rank < splits.test)
        records[k].split = Split::kTest;
      else if (rank < splits.test + splits.validation)
        records[k].split = Split::kValidation;
      else {
        records[k].split = Split::kTrain;
        ++speaker_train;
      }
    }
    if (speaker_train == 0)
      warnings.push_back("speaker '" + records[i].speaker_id +
                         "' has no training utterances after the split");
    train += speaker_train;
    i = j;
  }
  if (train == 0 && !records.empty()) warnings.push_back("split leaves 0 training utterances");
  return warnings;
}

AccentVocabulary MakeAccentVocabulary(const std::vector<UtteranceRecord> &records) {
  std::set<std::string> ids;
  for (const auto &r : records) ids.insert(r.accent_id);
  if (ids.size() < 2)
    throw DataError("at least 2 accents are required, found " + std::to_string(ids.size()));
  return AccentVocabulary(std::vector<std::string>(ids.begin(), ids.end()));
}

ScanResult ScanDataset(const fs::path &root, const fs::path &speaker_accent_map,
                       SplitCounts splits) {
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
  const auto map = ReadSpeakerAccentMap(speaker_accent_map);
  std::vector<fs::path> speaker_dirs;
  for (const auto &e : fs::directory_iterator(root))
    if (e.is_directory()) speaker_dirs.push_back(e.path());
  std::sort(speaker_dirs.begin(), speaker_dirs.end());
  if (speaker_dirs.empty()) throw DataError("no speakers found under " + root.string());

  ScanResult result;
  for (const auto &dir : speaker_dirs) {
    const std::string speaker = dir.filename().string();
    auto acc = map.find(speaker);
    if (acc == map.end()) throw DataError("speaker '" + speaker + "' is absent from the accent map");
    const auto transcripts = ReadTranscriptIndex(dir / "transcript.tsv");
    std::vector<fs::path> wavs;
    for (const auto &e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".wav") wavs.push_back(e.path());
    std::sort(wavs.begin(), wavs.end());
    for (const auto &wav : wavs) {
      const std::string id = wav.stem().string();
      auto t = transcripts.find(id);
      if (t == transcripts.end() || t->second.empty())
        throw DataError("missing transcript for audio file " + wav.string());
      UtteranceRecord r;
      r.utterance_id = id;
      r.speaker_id = speaker;
      r.accent_id = acc->second;
      r.audio_path = wav;
      r.transcript = t->second;
      result.records.push_back(std::move(r));
    }
  }
  result.warnings = AssignSplits(result.records, splits);
  result.accents = MakeAccentVocabulary(result.records);
  return result;
}

namespace {

nlohmann::json ToJson(const UtteranceRecord &r) {
  nlohmann::json j;
  j["utterance_id"] = r.utterance_id;
  j["speaker_id"] = r.speaker_id;
  j["accent_id"] = r.accent_id;
  j["audio_path"] = r.audio_path ? nlohmann::json(r.audio_path->generic_string()) : nlohmann::json();
  j["transcript"] = r.transcript;
  j["split"] = SplitName(r.split);
  return j;
}

void ValidateRecords(const std::vector<UtteranceRecord> &records) {
  std::map<std::string, std::string> accent_of;
  std::set<std::string> ids;
  for (const auto &r : records) {
    if (r.utterance_id.empty() || r.utterance_id.find('/') != std::string::npos)
      throw DataError("invalid utterance id '" + r.utterance_id + "'");
    if (!ids.insert(r.utterance_id).second)
      throw DataError("duplicate utterance id '" + r.utterance_id + "'");
    if (r.transcript.empty()) throw DataError("utterance '" + r.utterance_id + "' has no transcript");
    auto [it, inserted] = accent_of.emplace(r.speaker_id, r.accent_id);
    if (!inserted && it->second != r.accent_id)
      throw DataError("speaker '" + r.speaker_id + "' appears with two accents");
  }
}

}  // namespace

void WriteManifest(const fs::path &path, const std::vector<UtteranceRecord> &records) {
  ValidateRecords(records);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write manifest " + path.string());
  for (const auto &r : records) os << ToJson(r).dump() << '\n';
  if (!os) throw DataError("failed writing manifest " + path.string());
}

std::vector<UtteranceRecord> ReadManifest(const fs::path &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  std::vector<UtteranceRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      UtteranceRecord r;
      r.utterance_id = j.at("utterance_id").get<std::string>();
      r.speaker_id = j.at("speaker_id").get<std::string>();
      r.accent_id = j.at("accent_id").get<std::string>();
      if (j.contains("audio_path") && !j["audio_path"].is_null())
        r.audio_path = fs::path(j["audio_path"].get<std::string>());
      r.transcript = j.at("transcript").get<std::string>();
      r.split = ParseSplit(j.value("split", std::string("train")));
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception &e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  ValidateRecords(records);
  return records;
}

std::uint64_t ManifestHash(const std::vector<UtteranceRecord> &records) {
  std::uint64_t h = Fnv1a(nullptr, 0);
  for (const auto &r : records) {
    const std::string line = ToJson(r).dump() + "\n";
    h = Fnv1a(line.data(), line.size(), h);
  }
  return h;
}

void WriteMelCache(const fs::path &path, const MelSpectrogram &mel) {
  if (mel.frames() < 1) throw DataError("mel cache: mel has no frames");
  auto os = io::OpenOut(path);
  io::WriteU32(os, kMelCacheMagic);
  io::WriteU32(os, kMelCacheVersion);
  io::WriteU32(os, static_cast<std::uint32_t>(mel.frames()));
  io::WriteU32(os, static_cast<std::uint32_t>(mel.n_mels()));
  for (Eigen::Index t = 0; t < mel.frames(); ++t)
    for (Eigen::Index m = 0; m < mel.n_mels(); ++m) io::WriteF32(os, mel.values(t, m));
  if (!os) throw DataError("failed writing mel cache " + path.string());
}

MelSpectrogram ReadMelCache(const fs::path &path, double frame_hop_seconds) {
  auto is = io::OpenIn(path);
  io::Reader rd(is, "mel cache " + path.string());
  if (rd.U32() != kMelCacheMagic) throw DataError("mel cache " + path.string() + ": bad magic");
  const std::uint32_t version = rd.U32();
  if (version != kMelCacheVersion)
    throw DataError("mel cache " + path.string() + ": unsupported version " + std::to_string(version));
  const std::uint32_t frames = rd.U32(), n_mels = rd.U32();
  if (frames < 1 || n_mels < 1) throw DataError("mel cache " + path.string() + ": empty mel");
  MelSpectrogram mel;
  mel.frame_hop_seconds = frame_hop_seconds;
  mel.values.resize(frames, n_mels);
  for (std::uint32_t t = 0; t < frames; ++t)
    for (std::uint32_t m = 0; m < n_mels; ++m) mel.values(t, m) = rd.F32();
  if (!mel.values.allFinite()) throw DataError("mel cache " + path.string() + ": non-finite values");
  if (!rd.AtEnd()) throw DataError("mel cache " + path.string() + ": trailing bytes");
  return mel;
}

std::vector<int> Corpus::SplitIndices(Split split) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < utterances.size(); ++i)
    if (utterances[i].record.split == split) out.push_back(static_cast<int>(i));
  return out;
}

Corpus AssembleCorpus(std::vector<UtteranceRecord> records, std::vector<MelSpectrogram> mels,
                      const AccentVocabulary &accents) {
  if (records.size() != mels.size()) throw Error("assemble corpus: record/mel count mismatch");
  ValidateRecords(records);
  Corpus c;
  c.accents = accents;
  std::set<std::string> speakers;
  for (const auto &r : records) speakers.insert(r.speaker_id);
  c.speakers.assign(speakers.begin(), speakers.end());
  Eigen::Index n_mels = -1;
  for (std::size_t i = 0; i < records.size(); ++i) {
    Utterance u;
    u.tokens = Tokenizer::Encode(records[i].transcript);
    if (mels[i].frames() < 1) throw DataError("utterance '" + records[i].utterance_id + "' has no frames");
    if (n_mels >= 0 && mels[i].n_mels() != n_mels)
      throw DataError("utterance '" + records[i].utterance_id + "' has inconsistent n_mels");
    n_mels = mels[i].n_mels();
    u.speaker_index = static_cast<int>(
        std::lower_bound(c.speakers.begin(), c.speakers.end(), records[i].speaker_id) -
        c.speakers.begin());
    u.accent_index = accents.index(records[i].accent_id);
    u.record = std::move(records[i]);
    u.mel = std::move(mels[i]);
    c.utterances.push_back(std::move(u));
  }
  return c;
}

Corpus LoadPreparedCorpus(const fs::path &dir, double frame_hop_seconds) {
  auto records = ReadManifest(dir / "manifest.jsonl");
  AccentVocabulary accents;
  if (fs::exists(dir / "accents.txt")) {
    std::ifstream is(dir / "accents.txt");
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) ids.push_back(line);
    accents = AccentVocabulary(std::move(ids));
    if (accents.size() < 2) throw DataError("accents.txt lists fewer than 2 accents");
  } else {
    accents = MakeAccentVocabulary(records);
  }
  std::vector<MelSpectrogram> mels;
  mels.reserve(records.size());
  for (const auto &r : records)
    mels.push_back(ReadMelCache(dir / "mels" / (r.utterance_id + ".mel"), frame_hop_seconds));
  return AssembleCorpus(std::move(records), std::move(mels), accents);
}

void WritePreparedCorpus(const fs::path &dir, const Corpus &corpus) {
  fs::create_directories(dir / "mels");
  std::vector<UtteranceRecord> records;
  for (const auto &u : corpus.utterances) records.push_back(u.record);
  WriteManifest(dir / "manifest.jsonl", records);
  {
    std::ofstream os(dir / "accents.txt", std::ios::trunc);
    for (const auto &id : corpus.accents.ids()) os << id << '\n';
    if (!os) throw DataError("cannot write " + (dir / "accents.txt").string());
  }
  for (const auto &u : corpus.utterances)
    WriteMelCache(dir / "mels" / (u.record.utterance_id + ".mel"), u.mel);
}

GroupedBatchStream::GroupedBatchStream(const Corpus &corpus, std::vector<int> pool, int batch_size,
                                       int min_group_size, std::uint64_t seed)
    : corpus_(&corpus), batch_size_(batch_size), min_group_size_(min_group_size), rng_(seed) {
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (min_group_size < 1) throw UsageError("min_group_size must be >= 1");
  if (min_group_size > batch_size) throw UsageError("min_group_size exceeds batch_size");
  for (int i : pool) {
    if (i < 0 || static_cast<std::size_t>(i) >= corpus.utterances.size())
      throw Error("batch stream: pool index out of range");
    members_[corpus.utterances[i].accent_index].push_back(i);
  }
  for (const auto &[accent, m] : members_) {
    if (static_cast<int>(m.size()) >= min_group_size)
      accents_.push_back(accent);
    else
      warnings_.push_back("accent '" + corpus.accents.id(accent) + "' has only " +
                          std::to_string(m.size()) + " utterances (< min_group_size); skipped");
  }
  if (accents_.empty())
    throw DataError("no accent has at least min_group_size=" + std::to_string(min_group_size) +
                    " utterances");
}

int GroupedBatchStream::Draw(int accent) {
  auto &q = queue_[accent];
  if (q.empty()) {
    q = members_[accent];
    std::shuffle(q.begin(), q.end(), rng_);
  }
  const int v = q.back();
  q.pop_back();
  return v;
}

std::vector<int> GroupedBatchStream::NextIndices() {
  const int chunks = batch_size_ / min_group_size_;
  const int extra = batch_size_ - chunks * min_group_size_;
  std::map<int, std::vector<int>> groups;
  for (int c = 0; c < chunks; ++c) {
    const int accent = accents_[cursor_ % accents_.size()];
    ++cursor_;
    const int take = min_group_size_ + (c + 1 == chunks ? extra : 0);
    for (int k = 0; k < take; ++k) groups[accent].push_back(Draw(accent));
  }
  std::vector<int> out;
  out.reserve(batch_size_);
  for (const auto &[accent, g] : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

GroupedBatch GroupedBatchStream::Next() { return MaterializeBatch(*corpus_, NextIndices()); }

void GroupedBatchStream::Skip(std::uint64_t batches) {
  for (std::uint64_t i = 0; i < batches; ++i) NextIndices();
}

GroupedBatch MaterializeBatch(const Corpus &corpus, const std::vector<int> &indices) {
  GroupedBatch b;
  for (int i : indices) {
    const Utterance &u = corpus.utterances.at(i);
    b.group_index[u.accent_index].push_back(static_cast<int>(b.utterances.size()));
    b.utterances.push_back({u.tokens, u.mel, u.speaker_index, u.accent_index});
  }
  return b;
}

}  // namespace accentvae
