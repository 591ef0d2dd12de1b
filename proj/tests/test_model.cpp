// tests/test_model.cpp

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

#include <set>

#include "doctest.h"

#include "accentvae/losses.hpp"
#include "block_gradients.hpp"

using namespace accentvae;
using namespace accentvae::testing;

namespace {

TokenSequence Tokens(std::vector<int> ids) { return TokenSequence{std::move(ids), 10}; }

}  // namespace

TEST_CASE("gradient check: token encoder") {
  const GradientReport report = TokenEncoderGradients();
  MESSAGE(report.worst_tensor << " " << report.worst_relative_error);
  CHECK(report.tensors_checked > 0);
  CHECK(report.worst_relative_error < 1e-4);
}

TEST_CASE("gradient check: reference encoder") {
  const GradientReport report = ReferenceEncoderGradients();
  MESSAGE(report.worst_tensor << " " << report.worst_relative_error);
  CHECK(report.tensors_checked > 0);
  CHECK(report.worst_relative_error < 1e-4);
}

TEST_CASE("gradient check: decoder") {
  const GradientReport report = DecoderGradients();
  MESSAGE(report.worst_tensor << " " << report.worst_relative_error);
  CHECK(report.tensors_checked > 0);
  CHECK(report.worst_relative_error < 1e-4);
}

TEST_CASE("gradient check: mlvae heads through group posterior, sampling and KL") {
  const GradientReport report = MlvaeHeadsGradients();
  MESSAGE(report.worst_tensor << " " << report.worst_relative_error);
  CHECK(report.tensors_checked > 0);
  CHECK(report.worst_relative_error < 1e-4);
}

TEST_CASE("gradient check: accent classifier through cross-entropy and adversarial loss") {
  const GradientReport report = ClassifierGradients();
  MESSAGE(report.worst_tensor << " " << report.worst_relative_error);
  CHECK(report.tensors_checked > 0);
  CHECK(report.worst_relative_error < 1e-4);
}

namespace {

LatentSample<double> Latent(int dim, std::uint64_t seed) {
  return {RandomMatrix(dim, 1, seed), LatentSource::kSpeaker};
}

}  // namespace

TEST_CASE("token encoder: shapes, determinism and order sensitivity") {
  Model<double> model(TinyConfig(), 21);
  const ModelConfig c = TinyConfig();
  CHECK(model.EncodeTokens(Tokens({4})).rows() == 1);
  CHECK(model.EncodeTokens(Tokens({4})).cols() == c.enc_dim);
  const auto a = model.EncodeTokens(Tokens({3, 4, 5, 6}));
  CHECK(a.rows() == 4);
  CHECK((a - model.EncodeTokens(Tokens({3, 4, 5, 6}))).norm() == 0.0);
  CHECK((a - model.EncodeTokens(Tokens({6, 5, 4, 3})).colwise().reverse()).norm() > 1e-6);
}

TEST_CASE("reference encoder: fixed output size, finite on silence, order-aware summary") {
  Model<double> model(TinyConfig(), 22);
  const ModelConfig c = TinyConfig();
  const auto one = model.EncodeReference(RandomMatrix(1, c.n_mels, 1));
  const auto many = model.EncodeReference(RandomMatrix(100, c.n_mels, 2));
  CHECK(one.size() == c.ref_dim);
  CHECK(many.size() == c.ref_dim);
  const Eigen::MatrixXd silence = Eigen::MatrixXd::Constant(30, c.n_mels, std::log(1e-5));
  CHECK(model.EncodeReference(silence).allFinite());
  const Eigen::MatrixXd m = RandomMatrix(8, c.n_mels, 3);
  Eigen::MatrixXd doubled(16, c.n_mels);
  for (int t = 0; t < 8; ++t) doubled.row(2 * t) = doubled.row(2 * t + 1) = m.row(t);
  CHECK((model.EncodeReference(m) - model.EncodeReference(doubled)).norm() > 1e-6);
}

TEST_CASE("latent heads: sizes, zero input and distinct utterances") {
  Model<float> full(ModelConfig::Full(7), 1);
  const auto [s, a] = full.MlvaeHeads(Eigen::VectorXf::Zero(ModelConfig::Full(7).ref_dim));
  CHECK(s.dim() == 128);
  CHECK(a.dim() == 128);
  CHECK(s.mean.allFinite());
  CHECK(a.log_variance.allFinite());

  Model<double> model(TinyConfig(), 23);
  Jitter(model, 23);
  const ModelConfig c = TinyConfig();
  const auto h1 = model.MlvaeHeads(model.EncodeReference(RandomMatrix(6, c.n_mels, 4)));
  const auto h2 = model.MlvaeHeads(model.EncodeReference(RandomMatrix(9, c.n_mels, 5)));
  CHECK((h1.second.mean - h2.second.mean).norm() > 1e-8);
  CHECK((h1.first.log_variance.array() >= kLogVarMin).all());
  CHECK((h1.first.log_variance.array() <= kLogVarMax).all());
}

TEST_CASE("decoder: teacher-forced frame count, alignments and free-running stop") {
  Model<double> model(TinyConfig(), 24);
  Jitter(model, 24);
  const ModelConfig c = TinyConfig();
  const auto states = model.EncodeTokens(Tokens({3, 4, 5}));
  const auto zs = Latent(c.latent_dim, 1), za = Latent(c.latent_dim, 2);
  const Eigen::MatrixXd teacher = RandomMatrix(40, c.n_mels, 6);
  const auto out = model.Decode(states, zs, za, &teacher);
  CHECK(out.mel_pre.rows() == 40);
  CHECK(out.mel_post.rows() == 40);
  CHECK(out.mel_pre.cols() == c.n_mels);
  CHECK(out.stop_logits.size() == 40);
  CHECK((out.alignments.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-5);
  const auto again = model.Decode(states, zs, za, &teacher);
  CHECK((out.mel_post - again.mel_post).norm() == 0.0);

  // swapping the accent latent changes the output
  const auto other = model.Decode(states, zs, Latent(c.latent_dim, 3), &teacher);
  CHECK((out.mel_post - other.mel_post).norm() > 1e-8);

  // a stop bias far below zero never fires: the output is flagged truncated
  model.Find("decoder.stop.bias")->value.setConstant(-50);
  const auto runaway = model.Decode(states, zs, za, nullptr);
  CHECK(runaway.truncated);
  CHECK(runaway.mel_post.rows() == c.max_decoder_steps);
  // far above zero it fires on the first frame
  model.Find("decoder.stop.bias")->value.setConstant(50);
  const auto quick = model.Decode(states, zs, za, nullptr);
  CHECK_FALSE(quick.truncated);
  CHECK(quick.mel_post.rows() == 1);
}

TEST_CASE("accent classifier: valid distribution, size and uniform logits") {
  Model<double> model(TinyConfig(), 25);
  Jitter(model, 25);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = model.ClassifyAccent(Latent(TinyConfig().latent_dim, seed));
    CHECK(p.probabilities.size() == TinyConfig().num_accents);
    CHECK((p.probabilities.array() >= 0).all());
    CHECK(std::abs(p.probabilities.sum() - 1.0) < 1e-6);
  }
  Model<float> seven(ModelConfig::Desk(20, 7), 2);
  seven.Find("accent_classifier.fc2.weight")->value.setZero();
  seven.Find("accent_classifier.fc2.bias")->value.setZero();
  const auto u = seven.ClassifyAccent({Eigen::VectorXf::Ones(16), LatentSource::kSpeaker});
  CHECK(u.probabilities.size() == 7);
  CHECK((u.probabilities.array() - 1.0f / 7).abs().maxCoeff() < 1e-6);
}

TEST_CASE("parameter names are unique and partitioned by submodule") {
  Model<float> model(ModelConfig::Desk(20, 3), 0);
  std::set<std::string> names;
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const auto &name = model.parameters()[i].name;
    CHECK(names.insert(name).second);
    CHECK(name.rfind(std::string(SubmoduleName(model.submodule(i))) + ".", 0) == 0);
  }
  ModelConfig plain = ModelConfig::Desk(20, 3);
  plain.use_classifier = false;
  Model<float> baseline(plain, 0);
  for (const auto &p : baseline.parameters()) CHECK(p.name.rfind("accent_classifier.", 0) != 0);
}
