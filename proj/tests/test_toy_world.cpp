// tests/test_toy_world.cpp

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

#include <cmath>
#include <set>

#include "accentvae/toy_world.hpp"
#include "doctest.h"

using namespace accentvae;

TEST_CASE("toy world: even assignment is required") {
  CHECK_THROWS_WITH_AS(ToyWorldSpec::Make(10, 3, 0), doctest::Contains("even assignment required"),
                       UsageError);
  CHECK_THROWS_AS(ToyWorldSpec::Make(4, 1, 0), UsageError);
  CHECK_NOTHROW(ToyWorldSpec::Make(12, 3, 0));
}

TEST_CASE("toy world: regeneration from the same seed is bit-identical") {
  const auto spec = ToyWorldSpec::Make(6, 3, 11, 20);
  const Corpus a = GenerateToyCorpus(spec, 5, {1, 1});
  const Corpus b = GenerateToyCorpus(ToyWorldSpec::Make(6, 3, 11, 20), 5, {1, 1});
  REQUIRE(a.utterances.size() == b.utterances.size());
  for (std::size_t i = 0; i < a.utterances.size(); ++i) {
    CHECK(a.utterances[i].mel.values == b.utterances[i].mel.values);
    CHECK(a.utterances[i].record.transcript == b.utterances[i].record.transcript);
    CHECK(a.utterances[i].record.split == b.utterances[i].record.split);
  }
  const Corpus c = GenerateToyCorpus(ToyWorldSpec::Make(6, 3, 12, 20), 5, {1, 1});
  CHECK(c.utterances[0].mel.values != a.utterances[0].mel.values);
}

TEST_CASE("toy world: speakers of one accent differ only through their gain") {
  const auto spec = ToyWorldSpec::Make(6, 3, 3, 20);
  const std::vector<int> symbols{0, 2, 1, 3};
  // speakers 0 and 3 share accent 0
  const Eigen::MatrixXf m0 = RenderToyMel(spec, 0, 0, symbols);
  const Eigen::MatrixXf m3 = RenderToyMel(spec, 3, 0, symbols);
  REQUIRE(m0.rows() == m3.rows());
  const Eigen::RowVectorXf dg = spec.speaker_gain.row(0) - spec.speaker_gain.row(3);
  int row = 0;
  for (int t : symbols) {
    const Eigen::RowVectorXf expected = spec.token_templates.row(t).cwiseProduct(dg);
    const int d = static_cast<int>(std::lround(spec.base_durations[t] * spec.duration_multiplier[0]));
    for (int k = 0; k < std::max(1, d); ++k, ++row)
      CHECK((m0.row(row) - m3.row(row) - expected).cwiseAbs().maxCoeff() < 1e-5f);
  }
  CHECK(row == m0.rows());
}

TEST_CASE("toy world: accents change the frame count by their duration multiplier") {
  const auto spec = ToyWorldSpec::Make(6, 3, 4, 20);
  std::vector<int> symbols;
  for (int k = 0; k < 40; ++k) symbols.push_back(k % spec.token_vocab_size);
  const double f0 = RenderToyMel(spec, 0, 0, symbols).rows();
  for (int a = 1; a < 3; ++a) {
    const double fa = RenderToyMel(spec, 0, a, symbols).rows();
    const double ratio = spec.duration_multiplier[a] / spec.duration_multiplier[0];
    // per-token rounding contributes at most one frame per token
    CHECK(std::abs(fa - f0 * ratio) <= symbols.size() * (1.0 + ratio));
  }
  std::set<double> multipliers(spec.duration_multiplier.begin(), spec.duration_multiplier.end());
  CHECK(multipliers.size() == 3);
}

TEST_CASE("toy world: speaker to accent assignment and transcripts") {
  const auto spec = ToyWorldSpec::Make(12, 3, 0, 20);
  const Corpus corpus = GenerateToyCorpus(spec, 4, {0, 0});
  CHECK(corpus.accents.size() == 3);
  for (const auto &u : corpus.utterances) {
    const auto symbols = ToySymbols(spec, u.record.transcript);
    CHECK(static_cast<int>(symbols.size()) >= spec.min_tokens);
    CHECK(static_cast<int>(symbols.size()) <= spec.max_tokens);
    CHECK(u.mel.n_mels() == 20);
    CHECK(u.mel.values.allFinite());
  }
  CHECK_THROWS_AS(ToySymbols(spec, "z"), UsageError);
  CHECK_THROWS_AS(RenderToyMel(spec, 0, 0, {}), Error);
}
