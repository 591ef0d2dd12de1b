// tests/test_inference.cpp

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
#include <random>

#include "accentvae/inference.hpp"
#include "accentvae/toy_world.hpp"
#include "accentvae/trainer.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace accentvae;
using namespace accentvae::testing;

namespace {

DiagonalGaussian<float> G(std::initializer_list<float> mean, std::initializer_list<float> var) {
  DiagonalGaussian<float> g;
  g.mean = Eigen::Map<const Eigen::VectorXf>(mean.begin(), mean.size());
  g.log_variance = Eigen::Map<const Eigen::VectorXf>(var.begin(), var.size()).array().log().matrix();
  return g;
}

EmbeddingRecord R(const std::string &utt, const std::string &spk, const std::string &acc,
                  DiagonalGaussian<float> s, DiagonalGaussian<float> a) {
  return {utt, spk, acc, std::move(s), std::move(a)};
}

struct Fixture {
  Corpus corpus = GenerateToyCorpus(ToyWorldSpec::Make(6, 3, 9, 20), 3, {1, 0});
  Model<float> model;
  EmbeddingStore store;
  Fixture() {
    ModelConfig c = ModelConfig::Desk(20, 3);
    c.max_decoder_steps = 12;
    model = Model<float>(c, 3);
    store = BuildEmbeddingStore(model, corpus, Split::kTrain);
  }
};

}  // namespace

TEST_CASE("store: accent embedding is the product-of-Gaussians mean") {
  const EmbeddingStore store({R("u1", "s1", "x", G({0}, {1}), G({0}, {1})),
                              R("u2", "s2", "x", G({5}, {1}), G({2}, {1}))},
                             7, 1);
  CHECK(store.accent_embedding("x").vector(0) == doctest::Approx(1.0));
  CHECK(store.accent_embedding("x").source == LatentSource::kAccent);
  // precision-weighted: N(0, 1) and N(3, 1/2) combine to mean 2
  const EmbeddingStore weighted({R("u1", "s1", "x", G({0}, {1}), G({0}, {1})),
                                 R("u2", "s1", "x", G({0}, {1}), G({3}, {0.5f}))},
                                7, 1);
  CHECK(weighted.accent_embedding("x").vector(0) == doctest::Approx(2.0));
}

TEST_CASE("store: speaker embedding is the mean of the posterior means") {
  const EmbeddingStore single({R("u1", "s1", "x", G({0.25f, -1}, {0.1f, 4}), G({0, 0}, {1, 1}))}, 1, 2);
  CHECK(single.speaker_embedding("s1").vector == Eigen::Vector2f(0.25f, -1));
  const EmbeddingStore two({R("u1", "s1", "x", G({1, 0}, {1, 1}), G({0, 0}, {1, 1})),
                            R("u2", "s1", "x", G({3, 2}, {9, 9}), G({0, 0}, {1, 1}))},
                           1, 2);
  CHECK(two.speaker_embedding("s1").vector.isApprox(Eigen::Vector2f(2, 1)));
  CHECK(two.native_accent("s1") == "x");
}

TEST_CASE("store: inconsistent records and unknown ids") {
  CHECK_THROWS_AS(EmbeddingStore({R("u1", "s1", "x", G({0}, {1}), G({0}, {1})),
                                  R("u2", "s1", "y", G({0}, {1}), G({0}, {1}))},
                                 1, 1),
                  DataError);
  CHECK_THROWS_AS(EmbeddingStore({R("u1", "s1", "x", G({0, 1}, {1, 1}), G({0}, {1}))}, 1, 1),
                  DataError);
  const EmbeddingStore store({R("u1", "s1", "x", G({0}, {1}), G({0}, {1})),
                              R("u2", "s2", "y", G({0}, {1}), G({0}, {1}))},
                             1, 1);
  CHECK_THROWS_WITH_AS(store.speaker_embedding("nobody"), doctest::Contains("available: s1, s2"),
                       UsageError);
  CHECK_THROWS_WITH_AS(store.accent_embedding("z"), doctest::Contains("x, y"), UsageError);
}

TEST_CASE("property: accent embeddings do not depend on record order") {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n;
  std::vector<EmbeddingRecord> records;
  for (int i = 0; i < 30; ++i)
    records.push_back(R("u" + std::to_string(i), "s" + std::to_string(i % 6),
                        "a" + std::to_string(i % 6 % 3), G({n(rng), n(rng)}, {1, 1}),
                        G({n(rng), n(rng)}, {std::exp(n(rng)), std::exp(n(rng))})));
  const EmbeddingStore base(records, 0, 2);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(records.begin(), records.end(), rng);
    const EmbeddingStore shuffled(records, 0, 2);
    for (const auto &a : base.accents())
      CHECK(shuffled.accent_embedding(a).vector.isApprox(base.accent_embedding(a).vector, 1e-5f));
    for (const auto &s : base.speakers())
      CHECK(shuffled.speaker_embedding(s).vector.isApprox(base.speaker_embedding(s).vector, 1e-5f));
  }
}

TEST_CASE("store: save and load are lossless, corruption is detected") {
  TempDir dir;
  Fixture f;
  CHECK(f.store.records().size() == 12);
  CHECK(f.store.speakers().size() == 6);
  CHECK(f.store.accents().size() == 3);
  f.store.Save(dir / "s.avst");
  const EmbeddingStore back = EmbeddingStore::Load(dir / "s.avst");
  CHECK(back.checkpoint_hash() == f.store.checkpoint_hash());
  REQUIRE(back.records().size() == f.store.records().size());
  for (std::size_t i = 0; i < back.records().size(); ++i) {
    CHECK(back.records()[i].speaker.mean == f.store.records()[i].speaker.mean);
    CHECK(back.records()[i].accent.log_variance == f.store.records()[i].accent.log_variance);
  }
  for (const auto &a : back.accents())
    CHECK(back.accent_embedding(a).vector == f.store.accent_embedding(a).vector);
  std::filesystem::copy_file(dir / "s.avst", dir / "cut.avst");
  Truncate(dir / "cut.avst", 5);
  CHECK_THROWS_AS(EmbeddingStore::Load(dir / "cut.avst"), DataError);
}

TEST_CASE("store: a different checkpoint is rejected") {
  Fixture f;
  CHECK_NOTHROW(CheckStoreMatches(f.store, f.model));
  Model<float> other(f.model.config(), 4);
  CHECK_THROWS_WITH_AS(CheckStoreMatches(f.store, other),
                       doctest::Contains("store built from different checkpoint"), DataError);
}

TEST_CASE("store: speakers missing from the split are reported") {
  Fixture f;
  std::vector<std::string> warnings;
  const EmbeddingStore test = BuildEmbeddingStore(f.model, f.corpus, Split::kTest, &warnings);
  CHECK(test.speakers().size() == 6);
  CHECK(warnings.empty());
  CHECK_THROWS_AS(BuildEmbeddingStore(f.model, f.corpus, Split::kValidation), DataError);
}

TEST_CASE("synthesis: native conversion equals synthesis and targets change the output") {
  Fixture f;
  const std::string spk = f.store.speakers()[0];
  const std::string native = f.store.native_accent(spk);
  const auto synth = Synthesize(f.model, f.store, "abc", spk, native);
  const auto conv = ConvertAccent(f.model, f.store, "abc", spk, native);
  CHECK(synth.mel_post == conv.mel_post);
  CHECK(synth.mel_post.cols() == 20);
  CHECK(synth.mel_post.rows() >= 1);
  CHECK(synth.mel_post.rows() <= 12);
  CHECK(synth.mel_post.allFinite());
  for (const auto &target : f.store.accents()) {
    if (target == native) continue;
    const auto other = ConvertAccent(f.model, f.store, "abc", spk, target);
    const Eigen::Index rows = std::min(other.mel_post.rows(), synth.mel_post.rows());
    CHECK(other.mel_post.topRows(rows) != synth.mel_post.topRows(rows));
  }
  CHECK_THROWS_WITH_AS(ConvertAccent(f.model, f.store, "abc", "nobody", native),
                       doctest::Contains("available"), UsageError);
  CHECK_THROWS_WITH_AS(Synthesize(f.model, f.store, "abc", spk, "nowhere"),
                       doctest::Contains("available"), UsageError);
  CHECK_THROWS_AS(Synthesize(f.model, f.store, "", spk, native), UsageError);
}
