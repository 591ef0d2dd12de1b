// src/model.cpp

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

#include "accentvae/model.hpp"

#include <cmath>
#include <random>

namespace accentvae {

const char *SubmoduleName(Submodule s) {
  switch (s) {
    case Submodule::kTokenEncoder: return "token_encoder";
    case Submodule::kReferenceEncoder: return "reference_encoder";
    case Submodule::kMlvaeHeads: return "mlvae";
    case Submodule::kDecoder: return "decoder";
    case Submodule::kAccentClassifier: return "accent_classifier";
  }
  return "?";
}

ModelConfig ModelConfig::Desk(int n_mels, int num_accents) {
  ModelConfig c;
  c.num_accents = num_accents;
  c.n_mels = n_mels;
  c.embedding_dim = 32;
  c.enc_dim = 32;
  c.enc_conv_taps = 3;
  c.ref_channels = {8, 8, 16, 16};
  c.ref_dim = 32;
  c.latent_dim = 16;
  c.prenet_dim = 32;
  c.attention_rnn_dim = 64;
  c.attention_dim = 32;
  c.location_taps = 7;
  c.postnet_channels = 32;
  c.postnet_taps = 5;
  c.classifier_hidden = 32;
  c.max_decoder_steps = 200;
  return c;
}

ModelConfig ModelConfig::Full(int num_accents) {
  ModelConfig c;
  c.num_accents = num_accents;
  return c;
}

TokenBatch MakeTokenBatch(const std::vector<const TokenSequence *> &sequences) {
  TokenBatch tb;
  tb.batch = static_cast<Eigen::Index>(sequences.size());
  for (const auto *s : sequences) {
    if (s->ids.empty()) throw Error("token batch: empty token sequence");
    tb.lengths.push_back(static_cast<int>(s->ids.size()));
    tb.steps = std::max<Eigen::Index>(tb.steps, static_cast<Eigen::Index>(s->ids.size()));
  }
  tb.ids_time_major.assign(tb.steps * tb.batch, Tokenizer::kPad);
  for (Eigen::Index b = 0; b < tb.batch; ++b)
    for (std::size_t t = 0; t < sequences[b]->ids.size(); ++t)
      tb.ids_time_major[t * tb.batch + b] = sequences[b]->ids[t];
  return tb;
}

template <typename Scalar>
MelBatch<Scalar> MakeMelBatch(const std::vector<const MatrixX<Scalar> *> &mels) {
  MelBatch<Scalar> mb;
  mb.batch = static_cast<Eigen::Index>(mels.size());
  mb.n_mels = mels.front()->cols();
  for (const auto *m : mels) {
    if (m->rows() < 1) throw Error("mel batch: empty mel");
    if (m->cols() != mb.n_mels) throw Error("mel batch: inconsistent n_mels");
    mb.lengths.push_back(static_cast<int>(m->rows()));
    mb.frames = std::max(mb.frames, m->rows());
  }
  mb.time_major = MatrixX<Scalar>::Zero(mb.frames * mb.batch, mb.n_mels);
  mb.frame_mask = MatrixX<Scalar>::Zero(mb.frames * mb.batch, 1);
  for (Eigen::Index b = 0; b < mb.batch; ++b)
    for (Eigen::Index t = 0; t < mels[b]->rows(); ++t) {
      mb.time_major.row(t * mb.batch + b) = mels[b]->row(t);
      mb.frame_mask(t * mb.batch + b, 0) = Scalar(1);
    }
  return mb;
}

template MelBatch<float> MakeMelBatch(const std::vector<const MatrixX<float> *> &);
template MelBatch<double> MakeMelBatch(const std::vector<const MatrixX<double> *> &);

namespace {

template <typename Scalar>
Scalar Xavier(Eigen::Index fan_in, Eigen::Index fan_out) {
  return static_cast<Scalar>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

}  // namespace

template <typename Scalar>
template <typename Rng>
int Model<Scalar>::AddParam(const std::string &name, Submodule owner, Eigen::Index rows,
                       Eigen::Index cols, Scalar bound, Rng &rng) {
  Parameter<Scalar> p;
  p.name = std::string(SubmoduleName(owner)) + "." + name;
  p.value = Matrix::Zero(rows, cols);
  if (bound > Scalar(0)) {
    std::uniform_real_distribution<double> u(-static_cast<double>(bound),
                                             static_cast<double>(bound));
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) p.value(r, c) = static_cast<Scalar>(u(rng));
  }
  p.grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  owners_.push_back(owner);
  return static_cast<int>(params_.size()) - 1;
}

template <typename Scalar>
template <typename Rng>
typename Model<Scalar>::GruIds Model<Scalar>::AddGru(const std::string &name, Submodule owner,
                                                     int input, int hidden, Rng &rng) {
  const Scalar k = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(hidden)));
  GruIds g;
  g.w_ih = AddParam(name + ".w_ih", owner, input, 3 * hidden, k, rng);
  g.w_hh = AddParam(name + ".w_hh", owner, hidden, 3 * hidden, k, rng);
  g.b_ih = AddParam(name + ".b_ih", owner, 1, 3 * hidden, k, rng);
  g.b_hh = AddParam(name + ".b_hh", owner, 1, 3 * hidden, k, rng);
  return g;
}

template <typename Scalar>
Model<Scalar>::Model(const ModelConfig &config, std::uint64_t seed) : config_(config) {
  const ModelConfig &c = config_;
  if (c.enc_dim % 2 != 0) throw UsageError("enc_dim must be even");
  if (c.num_accents < 2) throw UsageError("at least two accents are required");
  std::mt19937_64 rng(seed);
  const Scalar zero(0);

  const auto te = Submodule::kTokenEncoder;
  ids_.embedding = AddParam("embedding", te, c.vocab_size, c.embedding_dim,
                       Xavier<Scalar>(c.vocab_size, c.embedding_dim), rng);
  ids_.enc_conv_w =
      AddParam("conv.weight", te, c.enc_conv_taps * c.embedding_dim, c.embedding_dim,
          Xavier<Scalar>(c.enc_conv_taps * c.embedding_dim, c.embedding_dim), rng);
  ids_.enc_conv_b = AddParam("conv.bias", te, 1, c.embedding_dim, zero, rng);
  ids_.enc_fwd = AddGru("gru_fwd", te, c.embedding_dim, c.enc_dim / 2, rng);
  ids_.enc_bwd = AddGru("gru_bwd", te, c.embedding_dim, c.enc_dim / 2, rng);

  const auto re = Submodule::kReferenceEncoder;
  int in_ch = 1;
  for (std::size_t l = 0; l < c.ref_channels.size(); ++l) {
    const int out_ch = c.ref_channels[l];
    ids_.ref_conv_w.push_back(AddParam("conv" + std::to_string(l) + ".weight", re, in_ch * 9, out_ch,
                                  Xavier<Scalar>(in_ch * 9, out_ch * 9), rng));
    ids_.ref_conv_b.push_back(AddParam("conv" + std::to_string(l) + ".bias", re, 1, out_ch, zero, rng));
    in_ch = out_ch;
  }
  int width = c.n_mels;
  for (std::size_t l = 0; l < c.ref_channels.size(); ++l) width = (width + 1) / 2;
  ids_.ref_gru = AddGru("gru", re, in_ch * width, c.ref_dim, rng);

  const auto mh = Submodule::kMlvaeHeads;
  const Scalar hb = Xavier<Scalar>(c.ref_dim, c.latent_dim);
  ids_.spk_mean_w = AddParam("speaker_mean.weight", mh, c.ref_dim, c.latent_dim, hb, rng);
  ids_.spk_mean_b = AddParam("speaker_mean.bias", mh, 1, c.latent_dim, zero, rng);
  ids_.spk_lv_w = AddParam("speaker_log_var.weight", mh, c.ref_dim, c.latent_dim, hb, rng);
  ids_.spk_lv_b = AddParam("speaker_log_var.bias", mh, 1, c.latent_dim, zero, rng);
  ids_.acc_mean_w = AddParam("accent_mean.weight", mh, c.ref_dim, c.latent_dim, hb, rng);
  ids_.acc_mean_b = AddParam("accent_mean.bias", mh, 1, c.latent_dim, zero, rng);
  ids_.acc_lv_w = AddParam("accent_log_var.weight", mh, c.ref_dim, c.latent_dim, hb, rng);
  ids_.acc_lv_b = AddParam("accent_log_var.bias", mh, 1, c.latent_dim, zero, rng);

  const auto de = Submodule::kDecoder;
  const int d = c.memory_dim();
  ids_.prenet1_w = AddParam("prenet1.weight", de, c.n_mels, c.prenet_dim,
                       Xavier<Scalar>(c.n_mels, c.prenet_dim), rng);
  ids_.prenet1_b = AddParam("prenet1.bias", de, 1, c.prenet_dim, zero, rng);
  ids_.prenet2_w = AddParam("prenet2.weight", de, c.prenet_dim, c.prenet_dim,
                       Xavier<Scalar>(c.prenet_dim, c.prenet_dim), rng);
  ids_.prenet2_b = AddParam("prenet2.bias", de, 1, c.prenet_dim, zero, rng);
  ids_.att_rnn = AddGru("attention_rnn", de, c.prenet_dim + d, c.attention_rnn_dim, rng);
  ids_.query_w = AddParam("attention.query", de, c.attention_rnn_dim, c.attention_dim,
                     Xavier<Scalar>(c.attention_rnn_dim, c.attention_dim), rng);
  ids_.memory_w = AddParam("attention.memory", de, d, c.attention_dim,
                      Xavier<Scalar>(d, c.attention_dim), rng);
  ids_.loc_prev_w = AddParam("attention.location_prev", de, c.location_taps, c.attention_dim,
                        Xavier<Scalar>(c.location_taps, c.attention_dim), rng);
  ids_.loc_cum_w = AddParam("attention.location_cum", de, c.location_taps, c.attention_dim,
                       Xavier<Scalar>(c.location_taps, c.attention_dim), rng);
  ids_.att_b = AddParam("attention.bias", de, 1, c.attention_dim, zero, rng);
  ids_.att_v = AddParam("attention.v", de, c.attention_dim, 1, Xavier<Scalar>(c.attention_dim, 1), rng);
  ids_.out_w = AddParam("frame.weight", de, c.attention_rnn_dim + d, c.n_mels,
                   Xavier<Scalar>(c.attention_rnn_dim + d, c.n_mels), rng);
  ids_.out_b = AddParam("frame.bias", de, 1, c.n_mels, zero, rng);
  ids_.stop_w = AddParam("stop.weight", de, c.attention_rnn_dim + d, 1,
                    Xavier<Scalar>(c.attention_rnn_dim + d, 1), rng);
  ids_.stop_b = AddParam("stop.bias", de, 1, 1, zero, rng);
  ids_.post1_w = AddParam("postnet1.weight", de, c.postnet_taps * c.n_mels, c.postnet_channels,
                     Xavier<Scalar>(c.postnet_taps * c.n_mels, c.postnet_channels), rng);
  ids_.post1_b = AddParam("postnet1.bias", de, 1, c.postnet_channels, zero, rng);
  ids_.post2_w = AddParam("postnet2.weight", de, c.postnet_taps * c.postnet_channels, c.n_mels,
                     Xavier<Scalar>(c.postnet_taps * c.postnet_channels, c.n_mels), rng);
  ids_.post2_b = AddParam("postnet2.bias", de, 1, c.n_mels, zero, rng);

  // Created last so the rest of the initialization does not depend on it.
  if (c.use_classifier) {
    const auto ac = Submodule::kAccentClassifier;
    ids_.cls1_w = AddParam("fc1.weight", ac, c.latent_dim, c.classifier_hidden,
                      Xavier<Scalar>(c.latent_dim, c.classifier_hidden), rng);
    ids_.cls1_b = AddParam("fc1.bias", ac, 1, c.classifier_hidden, zero, rng);
    ids_.cls2_w = AddParam("fc2.weight", ac, c.classifier_hidden, c.num_accents,
                      Xavier<Scalar>(c.classifier_hidden, c.num_accents), rng);
    ids_.cls2_b = AddParam("fc2.bias", ac, 1, c.num_accents, zero, rng);
  }
}

template <typename Scalar>
const Parameter<Scalar> *Model<Scalar>::Find(const std::string &name) const {
  for (const auto &p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename Scalar>
Parameter<Scalar> *Model<Scalar>::Find(const std::string &name) {
  for (auto &p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename Scalar>
void Model<Scalar>::ZeroGrad() {
  for (auto &p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

template <typename Scalar>
template <typename Other>
Model<Other> Model<Scalar>::Cast() const {
  Model<Other> m;
  m.config_ = config_;
  m.owners_ = owners_;
  m.ids_ = ids_;
  for (const auto &p : params_) {
    Parameter<Other> q;
    q.name = p.name;
    q.value = p.value.template cast<Other>();
    q.grad = MatrixX<Other>::Zero(p.value.rows(), p.value.cols());
    m.params_.push_back(std::move(q));
  }
  return m;
}

template <typename Scalar>
typename Model<Scalar>::Bound Model<Scalar>::Bind(Tape &tape, TrainableSet trainable) {
  Bound b;
  b.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i)
    b.push_back(tape.Bind(params_[i], trainable(owners_[i])));
  return b;
}

template <typename Scalar>
typename Model<Scalar>::Bound Model<Scalar>::BindFrozen(Tape &tape) const {
  Bound b;
  b.reserve(params_.size());
  for (const auto &p : params_) b.push_back(tape.Constant(p.value));
  return b;
}

template <typename Scalar>
typename Model<Scalar>::Var Model<Scalar>::Gru(const Bound &p, const GruIds &g, Var x,
                                               Var h) const {
  return ad::GruCell(x, h, p[g.w_ih], p[g.w_hh], p[g.b_ih], p[g.b_hh]);
}

template <typename Scalar>
std::vector<typename Model<Scalar>::Var> Model<Scalar>::EncodeTokensBatch(
    const Bound &p, Tape &tape, const TokenBatch &tokens) const {
  using namespace ad;
  const Eigen::Index B = tokens.batch, T = tokens.steps;
  const int half = config_.enc_dim / 2;
  for (int id : tokens.ids_time_major)
    if (id < 0 || id >= config_.vocab_size) throw Error("token id out of range");

  Matrix mask = Matrix::Zero(T * B, config_.embedding_dim);
  std::vector<Vector> step_mask(T, Vector::Zero(B));
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index t = 0; t < tokens.lengths[b]; ++t) {
      mask.row(t * B + b).setOnes();
      step_mask[t](b) = Scalar(1);
    }

  Var x = GatherRows(p[ids_.embedding], tokens.ids_time_major);
  x = AddRow(ConvTime(x, p[ids_.enc_conv_w], B), p[ids_.enc_conv_b]);
  x = Mul(Relu(x), tape.Constant(std::move(mask)));

  std::vector<Var> steps(T);
  for (Eigen::Index t = 0; t < T; ++t) steps[t] = SliceRows(x, t * B, B);

  std::vector<Var> fwd(T), bwd(T);
  Var h = tape.Constant(Matrix::Zero(B, half));
  for (Eigen::Index t = 0; t < T; ++t) {
    h = SelectRows(Gru(p, ids_.enc_fwd, steps[t], h), h, step_mask[t]);
    fwd[t] = h;
  }
  h = tape.Constant(Matrix::Zero(B, half));
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    h = SelectRows(Gru(p, ids_.enc_bwd, steps[t], h), h, step_mask[t]);
    bwd[t] = h;
  }
  std::vector<Var> out(T);
  for (Eigen::Index t = 0; t < T; ++t) out[t] = ConcatCols<Scalar>({fwd[t], bwd[t]});
  return out;
}

template <typename Scalar>
typename Model<Scalar>::Var Model<Scalar>::EncodeReferenceBatch(const Bound &p, Tape &tape,
                                                                const MelBatch<Scalar> &mels) const {
  using namespace ad;
  const Eigen::Index B = mels.batch, T = mels.frames, M = mels.n_mels;
  if (M != config_.n_mels) throw Error("reference encoder: n_mels mismatch");

  Matrix flat(B, T * M);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index t = 0; t < T; ++t) flat.row(b).segment(t * M, M) = mels.time_major.row(t * B + b);
  Var x = tape.Constant(std::move(flat));

  ad::Conv2dShape shape{1, T, M};
  std::vector<int> lengths = mels.lengths;
  for (std::size_t l = 0; l < config_.ref_channels.size(); ++l) {
    x = Relu(Conv2dStride2(x, p[ids_.ref_conv_w[l]], p[ids_.ref_conv_b[l]], shape));
    const Eigen::Index c = config_.ref_channels[l], h = shape.out_height(), w = shape.out_width();
    for (auto &len : lengths) len = (len + 1) / 2;
    Matrix mask = Matrix::Zero(B, c * h * w);
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index ch = 0; ch < c; ++ch)
        mask.row(b).segment(ch * h * w, lengths[b] * w).setOnes();
    x = Mul(x, tape.Constant(std::move(mask)));
    shape = {c, h, w};
  }

  Var h = tape.Constant(Matrix::Zero(B, config_.ref_dim));
  for (Eigen::Index y = 0; y < shape.height; ++y) {
    std::vector<int> cols;
    for (Eigen::Index ch = 0; ch < shape.channels; ++ch)
      for (Eigen::Index w = 0; w < shape.width; ++w)
        cols.push_back(static_cast<int>(ch * shape.height * shape.width + y * shape.width + w));
    Vector m(B);
    for (Eigen::Index b = 0; b < B; ++b) m(b) = y < lengths[b] ? Scalar(1) : Scalar(0);
    h = SelectRows(Gru(p, ids_.ref_gru, GatherCols(x, std::move(cols)), h), h, m);
  }
  return h;
}

template <typename Scalar>
typename Model<Scalar>::HeadVars Model<Scalar>::HeadsBatch(const Bound &p, Var reference) const {
  using namespace ad;
  const Scalar lo(kLogVarMin), hi(kLogVarMax);
  HeadVars h;
  h.speaker_mean = AddRow(MatMul(reference, p[ids_.spk_mean_w]), p[ids_.spk_mean_b]);
  h.speaker_log_var =
      Clamp(AddRow(MatMul(reference, p[ids_.spk_lv_w]), p[ids_.spk_lv_b]), lo, hi);
  h.accent_mean = AddRow(MatMul(reference, p[ids_.acc_mean_w]), p[ids_.acc_mean_b]);
  h.accent_log_var =
      Clamp(AddRow(MatMul(reference, p[ids_.acc_lv_w]), p[ids_.acc_lv_b]), lo, hi);
  return h;
}

template <typename Scalar>
typename Model<Scalar>::Var Model<Scalar>::ClassifierLogitsBatch(const Bound &p,
                                                                 Var speaker_latent) const {
  using namespace ad;
  if (!config_.use_classifier) throw Error("model was built without an accent classifier");
  Var h = Relu(AddRow(MatMul(speaker_latent, p[ids_.cls1_w]), p[ids_.cls1_b]));
  return AddRow(MatMul(h, p[ids_.cls2_w]), p[ids_.cls2_b]);
}

template <typename Scalar>
typename Model<Scalar>::DecoderMemory Model<Scalar>::BuildMemory(const Bound &p, Tape &tape,
                                                                 const std::vector<Var> &states,
                                                                 const TokenBatch &tokens,
                                                                 Var conditioning) const {
  using namespace ad;
  (void)tape;
  const Eigen::Index B = tokens.batch, T = tokens.steps;
  std::vector<Var> rows;
  rows.reserve(T);
  for (Eigen::Index t = 0; t < T; ++t) rows.push_back(ConcatCols<Scalar>({states[t], conditioning}));
  std::vector<int> perm(B * T);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index t = 0; t < T; ++t) perm[b * T + t] = static_cast<int>(t * B + b);
  DecoderMemory mem;
  mem.memory = GatherRows(ConcatRows(rows), std::move(perm));
  mem.processed = MatMul(mem.memory, p[ids_.memory_w]);
  mem.token_mask = Matrix::Zero(B, T);
  for (Eigen::Index b = 0; b < B; ++b) mem.token_mask.row(b).head(tokens.lengths[b]).setOnes();
  mem.batch = B;
  mem.steps = T;
  return mem;
}

template <typename Scalar>
typename Model<Scalar>::DecoderState Model<Scalar>::InitialState(Tape &tape, Eigen::Index batch,
                                                                 Eigen::Index steps) const {
  DecoderState s;
  s.rnn = tape.Constant(Matrix::Zero(batch, config_.attention_rnn_dim));
  s.context = tape.Constant(Matrix::Zero(batch, config_.memory_dim()));
  s.alignment = tape.Constant(Matrix::Zero(batch, steps));
  s.cumulative = tape.Constant(Matrix::Zero(batch, steps));
  return s;
}

template <typename Scalar>
std::pair<typename Model<Scalar>::Var, typename Model<Scalar>::Var> Model<Scalar>::Step(
    const Bound &p, const DecoderMemory &mem, DecoderState &state, Var previous_frame) const {
  using namespace ad;
  Var pre = Relu(AddRow(MatMul(previous_frame, p[ids_.prenet1_w]), p[ids_.prenet1_b]));
  pre = Relu(AddRow(MatMul(pre, p[ids_.prenet2_w]), p[ids_.prenet2_b]));
  state.rnn = Gru(p, ids_.att_rnn, ConcatCols<Scalar>({pre, state.context}), state.rnn);

  Var query = RepeatRows(MatMul(state.rnn, p[ids_.query_w]), mem.steps);
  Var location = Add(LocationConv(state.alignment, p[ids_.loc_prev_w]),
                     LocationConv(state.cumulative, p[ids_.loc_cum_w]));
  Var energy = Tanh(AddRow(Add(Add(query, mem.processed), location), p[ids_.att_b]));
  Var scores = FoldColumn(MatMul(energy, p[ids_.att_v]), mem.batch);
  Var weights = SoftmaxRows(scores, &mem.token_mask);

  state.context = Attend(weights, mem.memory);
  state.alignment = weights;
  state.cumulative = Add(state.cumulative, weights);

  Var joined = ConcatCols<Scalar>({state.rnn, state.context});
  Var frame = AddRow(MatMul(joined, p[ids_.out_w]), p[ids_.out_b]);
  Var stop = AddRow(MatMul(joined, p[ids_.stop_w]), p[ids_.stop_b]);
  return {frame, stop};
}

template <typename Scalar>
typename Model<Scalar>::Var Model<Scalar>::Postnet(const Bound &p, Var mel_pre, Eigen::Index batch,
                                                   const Matrix &frame_mask) const {
  using namespace ad;
  Tape &tape = *mel_pre.tape();
  Var h = Tanh(AddRow(ConvTime(mel_pre, p[ids_.post1_w], batch), p[ids_.post1_b]));
  h = Mul(h, tape.Constant(frame_mask.replicate(1, config_.postnet_channels)));
  Var r = AddRow(ConvTime(h, p[ids_.post2_w], batch), p[ids_.post2_b]);
  r = Mul(r, tape.Constant(frame_mask.replicate(1, config_.n_mels)));
  return Add(mel_pre, r);
}

template <typename Scalar>
typename Model<Scalar>::DecoderVars Model<Scalar>::DecodeTeacherForcedBatch(
    const Bound &p, Tape &tape, const std::vector<Var> &states, const TokenBatch &tokens,
    Var conditioning, const MelBatch<Scalar> &teacher) const {
  using namespace ad;
  const Eigen::Index B = tokens.batch, M = config_.n_mels;
  if (teacher.batch != B) throw Error("decoder: teacher batch mismatch");
  if (teacher.n_mels != M) throw Error("decoder: teacher n_mels mismatch");
  DecoderMemory mem = BuildMemory(p, tape, states, tokens, conditioning);
  DecoderState state = InitialState(tape, B, tokens.steps);

  DecoderVars out;
  std::vector<Var> frames, stops;
  Var previous = tape.Constant(Matrix::Zero(B, M));
  for (Eigen::Index t = 0; t < teacher.frames; ++t) {
    if (t > 0) previous = tape.Constant(teacher.time_major.middleRows((t - 1) * B, B));
    auto [frame, stop] = Step(p, mem, state, previous);
    frames.push_back(frame);
    stops.push_back(stop);
    out.alignments.push_back(state.alignment.value());
  }
  out.mel_pre = ConcatRows(frames);
  out.stop = ConcatRows(stops);
  out.mel_post = Postnet(p, out.mel_pre, B, teacher.frame_mask);
  return out;
}

template <typename Scalar>
typename Model<Scalar>::Matrix Model<Scalar>::EncodeTokens(const TokenSequence &tokens) const {
  Tape tape;
  Bound p = BindFrozen(tape);
  TokenBatch tb = MakeTokenBatch({&tokens});
  auto states = EncodeTokensBatch(p, tape, tb);
  Matrix out(tb.steps, config_.enc_dim);
  for (Eigen::Index t = 0; t < tb.steps; ++t) out.row(t) = states[t].value().row(0);
  return out;
}

template <typename Scalar>
typename Model<Scalar>::Vector Model<Scalar>::EncodeReference(const Matrix &mel) const {
  if (mel.rows() < 1) throw Error("reference encoder: mel must have at least one frame");
  Tape tape;
  Bound p = BindFrozen(tape);
  auto mb = MakeMelBatch<Scalar>({&mel});
  return EncodeReferenceBatch(p, tape, mb).value().row(0).transpose();
}

template <typename Scalar>
std::pair<DiagonalGaussian<Scalar>, DiagonalGaussian<Scalar>> Model<Scalar>::MlvaeHeads(
    const Vector &reference) const {
  Tape tape;
  Bound p = BindFrozen(tape);
  HeadVars h = HeadsBatch(p, tape.Constant(reference.transpose()));
  DiagonalGaussian<Scalar> s{h.speaker_mean.value().row(0).transpose(),
                             h.speaker_log_var.value().row(0).transpose()};
  DiagonalGaussian<Scalar> a{h.accent_mean.value().row(0).transpose(),
                             h.accent_log_var.value().row(0).transpose()};
  return {s, a};
}

template <typename Scalar>
DecoderOutput<Scalar> Model<Scalar>::Decode(const Matrix &encoder_states,
                                            const LatentSample<Scalar> &speaker,
                                            const LatentSample<Scalar> &accent,
                                            const Matrix *teacher) const {
  using namespace ad;
  if (encoder_states.rows() < 1) throw Error("decoder: empty encoder states");
  if (speaker.vector.size() != config_.latent_dim || accent.vector.size() != config_.latent_dim)
    throw Error("decoder: latent dimension mismatch");
  Tape tape;
  Bound p = BindFrozen(tape);
  const Eigen::Index T = encoder_states.rows(), M = config_.n_mels;
  std::vector<Var> states;
  for (Eigen::Index t = 0; t < T; ++t) states.push_back(tape.Constant(encoder_states.row(t)));
  TokenBatch tb;
  tb.batch = 1;
  tb.steps = T;
  tb.lengths = {static_cast<int>(T)};
  Matrix cond(1, 2 * config_.latent_dim);
  cond << speaker.vector.transpose(), accent.vector.transpose();
  Var conditioning = tape.Constant(cond);

  DecoderOutput<Scalar> out;
  if (teacher != nullptr) {
    auto mb = MakeMelBatch<Scalar>({teacher});
    DecoderVars dv = DecodeTeacherForcedBatch(p, tape, states, tb, conditioning, mb);
    out.mel_pre = dv.mel_pre.value();
    out.mel_post = dv.mel_post.value();
    out.stop_logits = dv.stop.value().col(0);
    out.alignments.resize(static_cast<Eigen::Index>(dv.alignments.size()), T);
    for (std::size_t i = 0; i < dv.alignments.size(); ++i) out.alignments.row(i) = dv.alignments[i];
    return out;
  }

  DecoderMemory mem = BuildMemory(p, tape, states, tb, conditioning);
  DecoderState state = InitialState(tape, 1, T);
  std::vector<Var> frames;
  std::vector<Scalar> stops;
  std::vector<Matrix> aligns;
  Var previous = tape.Constant(Matrix::Zero(1, M));
  out.truncated = true;
  for (int step = 0; step < config_.max_decoder_steps; ++step) {
    auto [frame, stop] = Step(p, mem, state, previous);
    frames.push_back(frame);
    stops.push_back(stop.value()(0, 0));
    aligns.push_back(state.alignment.value());
    previous = frame;
    if (stop.value()(0, 0) > Scalar(0)) {  // sigmoid > 0.5
      out.truncated = false;
      break;
    }
  }
  Var pre = ConcatRows(frames);
  const Eigen::Index F = pre.rows();
  Var post = Postnet(p, pre, 1, Matrix::Ones(F, 1));
  out.mel_pre = pre.value();
  out.mel_post = post.value();
  out.stop_logits = Eigen::Map<const Vector>(stops.data(), F);
  out.alignments.resize(F, T);
  for (Eigen::Index i = 0; i < F; ++i) out.alignments.row(i) = aligns[i];
  return out;
}

template <typename Scalar>
AccentPrediction<Scalar> Model<Scalar>::ClassifyAccent(const LatentSample<Scalar> &speaker) const {
  Tape tape;
  Bound p = BindFrozen(tape);
  Var logits = ClassifierLogitsBatch(p, tape.Constant(speaker.vector.transpose()));
  AccentPrediction<Scalar> out;
  out.logits = logits.value().row(0).transpose();
  const Scalar mx = out.logits.maxCoeff();
  out.probabilities = (out.logits.array() - mx).exp().matrix();
  out.probabilities /= out.probabilities.sum();
  return out;
}

template class Model<float>;
template class Model<double>;
template Model<float> Model<double>::Cast<float>() const;
template Model<double> Model<float>::Cast<double>() const;
template Model<float> Model<float>::Cast<float>() const;
template Model<double> Model<double>::Cast<double>() const;

}  // namespace accentvae
