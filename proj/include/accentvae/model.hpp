// include/accentvae/model.hpp

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

// The trainable network: token encoder, reference encoder, MLVAE heads,
// attention decoder with postnet, and the adversarial accent classifier.
//
// Model<Scalar> is instantiated for float (training, inference) and double
// (finite-difference gradient checks). Every forward pass is a pure function
// of parameters, inputs and explicitly supplied noise.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "accentvae/autodiff.hpp"
#include "accentvae/corpus.hpp"
#include "accentvae/gaussian.hpp"

namespace accentvae {

enum class Submodule : int {
  kTokenEncoder = 0,
  kReferenceEncoder = 1,
  kMlvaeHeads = 2,
  kDecoder = 3,
  kAccentClassifier = 4,
};
inline constexpr int kNumSubmodules = 5;
const char *SubmoduleName(Submodule s);

/// Which submodules receive gradients on a given tape.
class TrainableSet {
 public:
  static TrainableSet None() { return TrainableSet(false); }
  static TrainableSet All() { return TrainableSet(true); }
  static TrainableSet Only(Submodule s) {
    TrainableSet t(false);
    t.flags_[static_cast<int>(s)] = true;
    return t;
  }
  static TrainableSet AllExcept(Submodule s) {
    TrainableSet t(true);
    t.flags_[static_cast<int>(s)] = false;
    return t;
  }
  bool operator()(Submodule s) const { return flags_[static_cast<int>(s)]; }

 private:
  explicit TrainableSet(bool v) { flags_.fill(v); }
  std::array<bool, kNumSubmodules> flags_{};
};

struct ModelConfig {
  int vocab_size = Tokenizer::kVocabSize;
  int num_accents = 7;
  int n_mels = 80;
  int embedding_dim = 256;
  int enc_dim = 256;  // bidirectional, enc_dim / 2 per direction
  int enc_conv_taps = 5;
  std::vector<int> ref_channels = {32, 32, 64, 64, 128, 128};
  int ref_dim = 128;
  int latent_dim = 128;
  int prenet_dim = 256;
  int attention_rnn_dim = 512;
  int attention_dim = 128;
  int location_taps = 31;
  int postnet_channels = 256;
  int postnet_taps = 5;
  int classifier_hidden = 128;
  int max_decoder_steps = 1000;
  /// When false the accent classifier is not instantiated (plain MLVAE).
  bool use_classifier = true;

  static ModelConfig Desk(int n_mels, int num_accents);
  static ModelConfig Full(int num_accents);

  /// Decoder memory row width: encoder state plus both latents.
  int memory_dim() const { return enc_dim + 2 * latent_dim; }
  bool operator==(const ModelConfig &) const = default;
};

template <typename Scalar>
struct DecoderOutput {
  MatrixX<Scalar> mel_pre;     // frames x n_mels
  MatrixX<Scalar> mel_post;    // frames x n_mels
  VectorX<Scalar> stop_logits;  // per frame
  MatrixX<Scalar> alignments;  // decoder steps x encoder steps
  bool truncated = false;
};

template <typename Scalar>
struct AccentPrediction {
  VectorX<Scalar> probabilities;
  VectorX<Scalar> logits;
};

/// Padded token batch; ids are time-major (row t*B + b), padding uses kPad.
struct TokenBatch {
  Eigen::Index batch = 0;
  Eigen::Index steps = 0;
  std::vector<int> ids_time_major;
  std::vector<int> lengths;
};
TokenBatch MakeTokenBatch(const std::vector<const TokenSequence *> &sequences);

/// Padded mel batch; frames beyond an item's length are zero.
template <typename Scalar>
struct MelBatch {
  Eigen::Index batch = 0;
  Eigen::Index frames = 0;
  Eigen::Index n_mels = 0;
  MatrixX<Scalar> time_major;  // (T*B x M)
  MatrixX<Scalar> frame_mask;  // (T*B x 1)
  std::vector<int> lengths;
};
template <typename Scalar>
MelBatch<Scalar> MakeMelBatch(const std::vector<const MatrixX<Scalar> *> &mels);

namespace detail {

struct GruIds {
  int w_ih = -1, w_hh = -1, b_ih = -1, b_hh = -1;
};

/// Parameter indices; identical across scalar instantiations.
struct ModelIds {
  int embedding, enc_conv_w, enc_conv_b;
  GruIds enc_fwd, enc_bwd;
  std::vector<int> ref_conv_w, ref_conv_b;
  GruIds ref_gru;
  int spk_mean_w, spk_mean_b, spk_lv_w, spk_lv_b, acc_mean_w, acc_mean_b, acc_lv_w, acc_lv_b;
  int prenet1_w, prenet1_b, prenet2_w, prenet2_b;
  GruIds att_rnn;
  int query_w, memory_w, loc_prev_w, loc_cum_w, att_b, att_v;
  int out_w, out_b, stop_w, stop_b;
  int post1_w, post1_b, post2_w, post2_b;
  int cls1_w = -1, cls1_b = -1, cls2_w = -1, cls2_b = -1;
};

}  // namespace detail

template <typename Scalar>
class Model {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using Var = ad::Var<Scalar>;
  using Tape = ad::Tape<Scalar>;
  using Bound = std::vector<Var>;

  struct HeadVars {
    Var speaker_mean, speaker_log_var, accent_mean, accent_log_var;
  };

  struct DecoderVars {
    Var mel_pre;   // (T*B x M) time-major
    Var mel_post;  // (T*B x M)
    Var stop;      // (T*B x 1)
    std::vector<Matrix> alignments;  // per step (B x Tenc)
  };

  Model() = default;
  Model(const ModelConfig &config, std::uint64_t seed);

  const ModelConfig &config() const { return config_; }
  std::vector<Parameter<Scalar>> &parameters() { return params_; }
  const std::vector<Parameter<Scalar>> &parameters() const { return params_; }
  Submodule submodule(std::size_t i) const { return owners_[i]; }
  const Parameter<Scalar> *Find(const std::string &name) const;
  Parameter<Scalar> *Find(const std::string &name);
  void ZeroGrad();

  template <typename Other>
  Model<Other> Cast() const;

  // Tape-level forward pieces, batched.
  Bound Bind(Tape &tape, TrainableSet trainable);
  Bound BindFrozen(Tape &tape) const;

  /// Per time step (B x enc_dim) encoder states.
  std::vector<Var> EncodeTokensBatch(const Bound &p, Tape &tape, const TokenBatch &tokens) const;
  /// (B x ref_dim) summary of each mel.
  Var EncodeReferenceBatch(const Bound &p, Tape &tape, const MelBatch<Scalar> &mels) const;
  HeadVars HeadsBatch(const Bound &p, Var reference) const;
  Var ClassifierLogitsBatch(const Bound &p, Var speaker_latent) const;
  /// Teacher-forced decoding. conditioning: (B x 2*latent_dim).
  DecoderVars DecodeTeacherForcedBatch(const Bound &p, Tape &tape, const std::vector<Var> &states,
                                       const TokenBatch &tokens, Var conditioning,
                                       const MelBatch<Scalar> &teacher) const;

  // Single-utterance API.
  Matrix EncodeTokens(const TokenSequence &tokens) const;
  Vector EncodeReference(const Matrix &mel) const;
  std::pair<DiagonalGaussian<Scalar>, DiagonalGaussian<Scalar>> MlvaeHeads(
      const Vector &reference) const;
  /// teacher == nullptr selects free-running mode.
  DecoderOutput<Scalar> Decode(const Matrix &encoder_states, const LatentSample<Scalar> &speaker,
                               const LatentSample<Scalar> &accent, const Matrix *teacher) const;
  AccentPrediction<Scalar> ClassifyAccent(const LatentSample<Scalar> &speaker) const;

 private:
  using GruIds = detail::GruIds;
  using Ids = detail::ModelIds;

  struct DecoderState {
    Var rnn, context, alignment, cumulative;
  };
  struct DecoderMemory {
    Var memory;     // (B*T x D) batch-major
    Var processed;  // (B*T x A)
    Matrix token_mask;  // (B x T)
    Eigen::Index batch, steps;
  };

  template <typename Rng>
  int AddParam(const std::string &name, Submodule owner, Eigen::Index rows, Eigen::Index cols,
          Scalar bound, Rng &rng);
  template <typename Rng>
  GruIds AddGru(const std::string &name, Submodule owner, int input, int hidden, Rng &rng);

  Var Gru(const Bound &p, const GruIds &g, Var x, Var h) const;
  DecoderMemory BuildMemory(const Bound &p, Tape &tape, const std::vector<Var> &states,
                            const TokenBatch &tokens, Var conditioning) const;
  DecoderState InitialState(Tape &tape, Eigen::Index batch, Eigen::Index steps) const;
  std::pair<Var, Var> Step(const Bound &p, const DecoderMemory &mem, DecoderState &state,
                           Var previous_frame) const;
  Var Postnet(const Bound &p, Var mel_pre, Eigen::Index batch, const Matrix &frame_mask) const;

  ModelConfig config_;
  std::vector<Parameter<Scalar>> params_;
  std::vector<Submodule> owners_;
  Ids ids_{};

  template <typename Other>
  friend class Model;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace accentvae
