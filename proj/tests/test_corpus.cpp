// tests/test_corpus.cpp

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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "accentvae/audio.hpp"
#include "accentvae/corpus.hpp"
#include "accentvae/toy_world.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace accentvae;
using namespace accentvae::testing;
namespace fs = std::filesystem;

namespace {

std::vector<float> Tone(int n, double hz, int rate = 22050) {
  std::vector<float> x(n);
  for (int i = 0; i < n; ++i) x[i] = static_cast<float>(0.3 * std::sin(2 * M_PI * hz * i / rate));
  return x;
}

// root/<speaker>/wav/<id>.wav plus root/<speaker>/transcript.tsv
void MakeDataset(const fs::path &root, int speakers, int utts, bool with_transcripts = true) {
  std::string map;
  for (int s = 0; s < speakers; ++s) {
    const std::string spk = "S" + std::to_string(s);
    map += spk + "\tA" + std::to_string(s % 2) + "\n";
    std::string tsv;
    for (int u = 0; u < utts; ++u) {
      const std::string id = spk + "_u" + std::to_string(u);
      fs::create_directories(root / spk / "wav");
      WriteWav(root / spk / "wav" / (id + ".wav"), Tone(2048, 200 + 50 * u), 22050);
      tsv += id + "\thello number " + std::to_string(u) + "\n";
    }
    if (with_transcripts) WriteText(root / spk / "transcript.tsv", tsv);
  }
  WriteText(root / "map.tsv", "# speaker\taccent\n" + map);
}

}  // namespace

TEST_CASE("tokenizer: known characters, unknown code points and errors") {
  const auto ab = Tokenizer::Encode("ab");
  CHECK(ab.ids == std::vector<int>{Tokenizer::kFirstChar + ('a' - ' '), Tokenizer::kFirstChar + ('b' - ' ')});
  CHECK(ab.vocab_size == Tokenizer::kVocabSize);
  const auto snow = Tokenizer::Encode("a\xE2\x98\x83" "b");  // a, snowman, b
  CHECK(snow.ids == std::vector<int>{ab.ids[0], Tokenizer::kUnk, ab.ids[1]});
  CHECK_THROWS_AS(Tokenizer::Encode(""), UsageError);
  CHECK(Tokenizer::Decode(snow) == "a\xEF\xBF\xBD" "b");
}

TEST_CASE("property: tokenize then decode is the identity on printable ASCII") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> ch(32, 126), len(1, 40);
  for (int trial = 0; trial < 300; ++trial) {
    std::string s(len(rng), ' ');
    for (auto &c : s) c = static_cast<char>(ch(rng));
    const auto t = Tokenizer::Encode(s);
    CHECK(t.size() == s.size());
    for (int id : t.ids) CHECK((id >= 0 && id < t.vocab_size));
    CHECK(Tokenizer::Decode(t) == s);
  }
}

TEST_CASE("accent vocabulary: lookup, duplicates and minimum size") {
  AccentVocabulary v({"x", "y"});
  CHECK(v.index("y") == 1);
  CHECK(v.id(0) == "x");
  CHECK_THROWS_AS(AccentVocabulary({"x", "x"}), DataError);
  CHECK_THROWS_AS(v.index("z"), DataError);
  std::vector<UtteranceRecord> one{{"u1", "s1", "only", std::nullopt, "t", Split::kTrain}};
  CHECK_THROWS_AS(MakeAccentVocabulary(one), DataError);
}

TEST_CASE("split names parse") {
  CHECK(ParseSplit("train") == Split::kTrain);
  CHECK(ParseSplit("val") == Split::kValidation);
  CHECK(ParseSplit(SplitName(Split::kTest)) == Split::kTest);
  CHECK_THROWS_AS(ParseSplit("dev"), UsageError);
}

TEST_CASE("scan dataset: sorted manifest, splits and vocabulary") {
  TempDir dir;
  MakeDataset(dir.path(), 4, 5);
  const ScanResult scan = ScanDataset(dir.path(), dir / "map.tsv", {1, 2});
  CHECK(scan.records.size() == 20);
  CHECK(scan.accents.size() == 2);
  CHECK(std::is_sorted(scan.records.begin(), scan.records.end(), [](const auto &a, const auto &b) {
    return std::tie(a.speaker_id, a.utterance_id) < std::tie(b.speaker_id, b.utterance_id);
  }));
  int test = 0, val = 0;
  for (const auto &r : scan.records) {
    test += r.split == Split::kTest;
    val += r.split == Split::kValidation;
    CHECK(r.audio_path.has_value());
    CHECK(r.transcript.rfind("hello number", 0) == 0);
  }
  CHECK(test == 4);
  CHECK(val == 8);
  CHECK(scan.warnings.empty());
  // rescanning yields the same manifest
  CHECK(ManifestHash(ScanDataset(dir.path(), dir / "map.tsv", {1, 2}).records) ==
        ManifestHash(scan.records));
}

TEST_CASE("scan dataset: seven accents give a seven-entry vocabulary") {
  TempDir dir;
  std::string map;
  for (int s = 0; s < 28; ++s) {
    const std::string spk = "spk" + std::to_string(s);
    map += spk + "\tacc" + std::to_string(s % 7) + "\n";
    fs::create_directories(dir / spk);
    WriteWav(dir / spk / "a.wav", Tone(512, 300), 22050);
    WriteText(dir / spk / "transcript.tsv", "a\tsome text\n");
  }
  WriteText(dir / "map.tsv", map);
  CHECK(ScanDataset(dir.path(), dir / "map.tsv", {0, 0}).accents.size() == 7);
}

TEST_CASE("scan dataset: error cases") {
  TempDir empty;
  WriteText(empty / "map.tsv", "S0\tA0\n");
  fs::create_directories(empty / "root");
  CHECK_THROWS_WITH_AS(ScanDataset(empty / "root", empty / "map.tsv"),
                       doctest::Contains("no speakers found"), DataError);

  TempDir missing;
  MakeDataset(missing.path(), 2, 2, /*with_transcripts=*/false);
  WriteText(missing / "S0" / "transcript.tsv", "S0_u0\thi\n");
  CHECK_THROWS_WITH_AS(ScanDataset(missing.path(), missing / "map.tsv"),
                       doctest::Contains("missing transcript for audio file"), DataError);

  TempDir unmapped;
  MakeDataset(unmapped.path(), 2, 2);
  WriteText(unmapped / "map.tsv", "S0\tA0\n");
  CHECK_THROWS_WITH_AS(ScanDataset(unmapped.path(), unmapped / "map.tsv"),
                       doctest::Contains("absent from the accent map"), DataError);

  TempDir conflict;
  WriteText(conflict / "map.tsv", "S0\tA0\nS0\tA1\n");
  CHECK_THROWS_AS(ReadSpeakerAccentMap(conflict / "map.tsv"), DataError);
}

TEST_CASE("split assignment: 2 speakers x 30 utterances with 10/20 leaves no training data") {
  std::vector<UtteranceRecord> records;
  for (int s = 0; s < 2; ++s)
    for (int u = 0; u < 30; ++u)
      records.push_back({"s" + std::to_string(s) + "_" + std::to_string(100 + u), "s" + std::to_string(s),
                         "a" + std::to_string(s), std::nullopt, "text", Split::kTrain});
  const auto warnings = AssignSplits(records, {10, 20});
  CHECK(std::none_of(records.begin(), records.end(), [](const auto &r) { return r.split == Split::kTrain; }));
  CHECK(std::any_of(warnings.begin(), warnings.end(),
                    [](const auto &w) { return w.find("0 training utterances") != std::string::npos; }));
}

TEST_CASE("manifest: JSON lines round trip and validation") {
  TempDir dir;
  std::vector<UtteranceRecord> records{
      {"a1", "s1", "x", fs::path("/data/a1.wav"), "hello \"world\"", Split::kTrain},
      {"a2", "s2", "y", std::nullopt, "caf\xC3\xA9", Split::kTest}};
  WriteManifest(dir / "m.jsonl", records);
  const auto back = ReadManifest(dir / "m.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].audio_path == records[0].audio_path);
  CHECK_FALSE(back[1].audio_path.has_value());
  CHECK(back[1].transcript == records[1].transcript);
  CHECK(back[1].split == Split::kTest);
  CHECK(ManifestHash(back) == ManifestHash(records));

  auto dup = records;
  dup[1].utterance_id = "a1";
  CHECK_THROWS_AS(WriteManifest(dir / "d.jsonl", dup), DataError);
  auto two_accents = records;
  two_accents[1].speaker_id = "s1";
  CHECK_THROWS_AS(WriteManifest(dir / "t.jsonl", two_accents), DataError);
  auto empty = records;
  empty[0].transcript = "";
  CHECK_THROWS_AS(WriteManifest(dir / "e.jsonl", empty), DataError);
}

TEST_CASE("mel cache: round trip, header layout and corruption") {
  TempDir dir;
  MelSpectrogram mel{Eigen::MatrixXf::Random(7, 5), 0.01};
  WriteMelCache(dir / "x.mel", mel);
  CHECK(fs::file_size(dir / "x.mel") == 16 + 7 * 5 * 4);
  const std::string bytes = ReadBytes(dir / "x.mel");
  CHECK(bytes.substr(0, 4) == "AMEL");
  CHECK(static_cast<unsigned char>(bytes[8]) == 7);
  CHECK(static_cast<unsigned char>(bytes[12]) == 5);
  const MelSpectrogram back = ReadMelCache(dir / "x.mel", 0.01);
  CHECK(back.values == mel.values);
  Truncate(dir / "x.mel", 3);
  CHECK_THROWS_WITH_AS(ReadMelCache(dir / "x.mel", 0.01), doctest::Contains("truncated"), DataError);
  WriteText(dir / "bad.mel", "nope");
  CHECK_THROWS_AS(ReadMelCache(dir / "bad.mel", 0.01), DataError);
}

TEST_CASE("grouped batches: group sizes, coverage and determinism") {
  const Corpus corpus = GenerateToyCorpus(ToyWorldSpec::Make(14, 7, 0, 20), 8, {0, 0});
  const auto pool = corpus.SplitIndices(Split::kTrain);
  GroupedBatchStream a(corpus, pool, 64, 2, 7), b(corpus, pool, 64, 2, 7);
  for (int k = 0; k < 20; ++k) {
    const auto ia = a.NextIndices();
    CHECK(ia == b.NextIndices());
    const GroupedBatch batch = MaterializeBatch(corpus, ia);
    CHECK(batch.size() == 64);
    std::vector<int> seen;
    for (const auto &[accent, members] : batch.group_index) {
      CHECK(members.size() >= 2);
      for (int m : members) {
        CHECK(batch.utterances[m].accent == accent);
        seen.push_back(m);
      }
    }
    std::sort(seen.begin(), seen.end());
    std::vector<int> all(64);
    std::iota(all.begin(), all.end(), 0);
    CHECK(seen == all);
  }
}

TEST_CASE("grouped batches: singletons, ineligible accents and resume by skipping") {
  const Corpus corpus = GenerateToyCorpus(ToyWorldSpec::Make(6, 3, 1, 20), 4, {0, 0});
  const auto pool = corpus.SplitIndices(Split::kTrain);
  GroupedBatchStream single(corpus, pool, 1, 1, 0);
  for (int k = 0; k < 5; ++k) {
    const auto batch = single.Next();
    CHECK(batch.size() == 1);
    CHECK(batch.group_index.size() == 1);
  }
  GroupedBatchStream full(corpus, pool, 8, 2, 3), skipped(corpus, pool, 8, 2, 3);
  for (int k = 0; k < 4; ++k) full.NextIndices();
  skipped.Skip(4);
  CHECK(full.NextIndices() == skipped.NextIndices());

  // keep one utterance of accent 0 only
  std::vector<int> thin;
  bool kept = false;
  for (int i : pool) {
    if (corpus.utterances[i].accent_index != 0) thin.push_back(i);
    else if (!kept) {
      thin.push_back(i);
      kept = true;
    }
  }
  GroupedBatchStream partial(corpus, thin, 8, 2, 0);
  CHECK(partial.warnings().size() == 1);
  for (int k = 0; k < 5; ++k) CHECK(partial.Next().group_index.count(0) == 0);
  std::vector<int> lone{pool[0]};
  CHECK_THROWS_AS(GroupedBatchStream(corpus, lone, 8, 2, 0), DataError);
}

TEST_CASE("prepared corpus directory round trip") {
  TempDir dir;
  const Corpus corpus = GenerateToyCorpus(ToyWorldSpec::Make(6, 3, 2, 20), 3, {1, 1});
  WritePreparedCorpus(dir.path(), corpus);
  const Corpus back = LoadPreparedCorpus(dir.path(), 256.0 / 22050.0);
  REQUIRE(back.utterances.size() == corpus.utterances.size());
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    CHECK(back.utterances[i].mel.values == corpus.utterances[i].mel.values);
    CHECK(back.utterances[i].record.utterance_id == corpus.utterances[i].record.utterance_id);
    CHECK(back.utterances[i].accent_index == corpus.utterances[i].accent_index);
  }
  CHECK(back.accents.ids() == corpus.accents.ids());
}
