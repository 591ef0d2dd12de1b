// src/trainer.cpp

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

#include "accentvae/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "accentvae/binary_io.hpp"

namespace accentvae {

namespace fs = std::filesystem;
using FVar = ad::Var<float>;
using FTape = ad::Tape<float>;

TrainingConfig TrainingConfig::Desk(int n_mels, int num_accents) {
  TrainingConfig c;
  c.batch_size = 32;
  c.total_steps = 2000;
  c.model = ModelConfig::Desk(n_mels, num_accents);
  return c;
}

void TrainingConfig::Validate() const {
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (total_steps < 0) throw UsageError("total_steps must be >= 0");
  if (!(alpha > 0)) throw UsageError("alpha must be > 0");
  if (!(learning_rate > 0)) throw UsageError("learning_rate must be > 0");
  if (!(gamma >= 0)) throw UsageError("gamma must be >= 0");
  if (!force && gamma != 0 && (gamma < 1e-4 || gamma > 0.5))
    throw UsageError("gamma " + std::to_string(gamma) +
                     " is outside [1e-4, 0.5]; pass --force to override");
  if (min_group_size < 1 || min_group_size > batch_size)
    throw UsageError("min_group_size must be in [1, batch_size]");
  if (d_steps_per_g_step < 0) throw UsageError("d_steps_per_g_step must be >= 0");
  if (checkpoint_interval < 1) throw UsageError("checkpoint_interval must be >= 1");
  beta.Validate();
  if (gamma > 0 && !model.use_classifier)
    throw UsageError("gamma > 0 requires the accent classifier");
}

nlohmann::json ToJson(const ModelConfig &c) {
  return {{"vocab_size", c.vocab_size},
          {"num_accents", c.num_accents},
          {"n_mels", c.n_mels},
          {"embedding_dim", c.embedding_dim},
          {"enc_dim", c.enc_dim},
          {"enc_conv_taps", c.enc_conv_taps},
          {"ref_channels", c.ref_channels},
          {"ref_dim", c.ref_dim},
          {"latent_dim", c.latent_dim},
          {"prenet_dim", c.prenet_dim},
          {"attention_rnn_dim", c.attention_rnn_dim},
          {"attention_dim", c.attention_dim},
          {"location_taps", c.location_taps},
          {"postnet_channels", c.postnet_channels},
          {"postnet_taps", c.postnet_taps},
          {"classifier_hidden", c.classifier_hidden},
          {"max_decoder_steps", c.max_decoder_steps},
          {"use_classifier", c.use_classifier}};
}

ModelConfig ModelConfigFromJson(const nlohmann::json &j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size");
  c.num_accents = j.at("num_accents");
  c.n_mels = j.at("n_mels");
  c.embedding_dim = j.at("embedding_dim");
  c.enc_dim = j.at("enc_dim");
  c.enc_conv_taps = j.at("enc_conv_taps");
  c.ref_channels = j.at("ref_channels").get<std::vector<int>>();
  c.ref_dim = j.at("ref_dim");
  c.latent_dim = j.at("latent_dim");
  c.prenet_dim = j.at("prenet_dim");
  c.attention_rnn_dim = j.at("attention_rnn_dim");
  c.attention_dim = j.at("attention_dim");
  c.location_taps = j.at("location_taps");
  c.postnet_channels = j.at("postnet_channels");
  c.postnet_taps = j.at("postnet_taps");
  c.classifier_hidden = j.at("classifier_hidden");
  c.max_decoder_steps = j.at("max_decoder_steps");
  c.use_classifier = j.at("use_classifier");
  return c;
}

nlohmann::json ToJson(const TrainingConfig &c) {
  return {{"batch_size", c.batch_size},
          {"total_steps", c.total_steps},
          {"alpha", c.alpha},
          {"gamma", c.gamma},
          {"learning_rate", c.learning_rate},
          {"beta_start", c.beta.start_value},
          {"beta_end", c.beta.end_value},
          {"beta_ramp_start", c.beta.ramp_start_step},
          {"beta_ramp_end", c.beta.ramp_end_step},
          {"seed", c.seed},
          {"recon_mode", ReconModeName(c.recon_mode)},
          {"optimizer", c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"grad_clip_norm", c.grad_clip_norm},
          {"min_group_size", c.min_group_size},
          {"d_steps_per_g_step", c.d_steps_per_g_step},
          {"checkpoint_interval", c.checkpoint_interval},
          {"force", c.force},
          {"model", ToJson(c.model)}};
}

TrainingConfig TrainingConfigFromJson(const nlohmann::json &j) {
  TrainingConfig c;
  c.batch_size = j.at("batch_size");
  c.total_steps = j.at("total_steps");
  c.alpha = j.at("alpha");
  c.gamma = j.at("gamma");
  c.learning_rate = j.at("learning_rate");
  c.beta.start_value = j.at("beta_start");
  c.beta.end_value = j.at("beta_end");
  c.beta.ramp_start_step = j.at("beta_ramp_start");
  c.beta.ramp_end_step = j.at("beta_ramp_end");
  c.seed = j.at("seed");
  c.recon_mode = ParseReconMode(j.at("recon_mode"));
  c.optimizer = j.at("optimizer") == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
  c.adam_beta1 = j.at("adam_beta1");
  c.adam_beta2 = j.at("adam_beta2");
  c.adam_epsilon = j.at("adam_epsilon");
  c.grad_clip_norm = j.at("grad_clip_norm");
  c.min_group_size = j.at("min_group_size");
  c.d_steps_per_g_step = j.at("d_steps_per_g_step");
  c.checkpoint_interval = j.at("checkpoint_interval");
  c.force = j.at("force");
  c.model = ModelConfigFromJson(j.at("model"));
  return c;
}

TrainState TrainState::Initial(const TrainingConfig &config) {
  TrainState s;
  s.model = Model<float>(config.model, config.seed);
  for (const auto &p : s.model.parameters()) {
    s.adam_m.push_back(Eigen::MatrixXf::Zero(p.value.rows(), p.value.cols()));
    s.adam_v.push_back(Eigen::MatrixXf::Zero(p.value.rows(), p.value.cols()));
  }
  s.rng.seed(config.seed ^ 0x5eed0f0a11ce5ULL);
  return s;
}

namespace {

struct BatchInputs {
  TokenBatch tokens;
  MelBatch<float> mels;
  std::vector<std::vector<int>> groups;  // member rows per accent group
  std::vector<int> group_of;             // row -> group
  std::vector<int> accents;              // row -> accent label
};

BatchInputs PrepareBatch(const GroupedBatch &batch) {
  if (batch.utterances.empty()) throw Error("empty batch");
  BatchInputs in;
  std::vector<const TokenSequence *> toks;
  std::vector<const Eigen::MatrixXf *> mels;
  for (const auto &u : batch.utterances) {
    toks.push_back(&u.tokens);
    mels.push_back(&u.mel.values);
    in.accents.push_back(u.accent);
  }
  in.tokens = MakeTokenBatch(toks);
  in.mels = MakeMelBatch<float>(mels);
  in.group_of.assign(batch.utterances.size(), -1);
  for (const auto &[accent, members] : batch.group_index) {
    if (members.empty()) throw Error("batch has an empty accent group");
    for (int m : members) {
      if (batch.utterances.at(m).accent != accent) throw Error("batch group label mismatch");
      in.group_of[m] = static_cast<int>(in.groups.size());
    }
    in.groups.push_back(members);
  }
  for (int g : in.group_of)
    if (g < 0) throw Error("batch member outside every accent group");
  return in;
}

Eigen::MatrixXf StandardNormal(std::mt19937_64 &rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  Eigen::MatrixXf e(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) e(r, c) = n(rng);
  return e;
}

FVar Sample(FTape &tape, FVar mean, FVar log_var, Eigen::MatrixXf noise) {
  using namespace ad;
  return Add(mean, Mul(Exp(Scale(log_var, 0.5f)), tape.Constant(std::move(noise))));
}

double ClipAndNorm(Model<float> &model, TrainableSet trainable, double max_norm, long &events) {
  double sq = 0;
  auto &ps = model.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (trainable(model.submodule(i))) sq += ps[i].grad.cast<double>().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const float scale = static_cast<float>(max_norm / norm);
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (trainable(model.submodule(i))) ps[i].grad *= scale;
    ++events;
  }
  return norm;
}

void ApplyUpdate(TrainState &state, TrainableSet trainable, const TrainingConfig &config, long t) {
  auto &ps = state.model.parameters();
  const float lr = static_cast<float>(config.learning_rate);
  if (config.optimizer == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (trainable(state.model.submodule(i))) ps[i].value -= lr * ps[i].grad;
    return;
  }
  const float b1 = static_cast<float>(config.adam_beta1), b2 = static_cast<float>(config.adam_beta2);
  const float eps = static_cast<float>(config.adam_epsilon);
  const float c1 = 1.0f - static_cast<float>(std::pow(config.adam_beta1, static_cast<double>(t)));
  const float c2 = 1.0f - static_cast<float>(std::pow(config.adam_beta2, static_cast<double>(t)));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!trainable(state.model.submodule(i))) continue;
    auto &m = state.adam_m[i];
    auto &v = state.adam_v[i];
    const auto &g = ps[i].grad;
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
    ps[i].value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

void CheckFinite(const LossBreakdown &l, const char *which) {
  if (!l.AllFinite())
    throw NumericalError(std::string("non-finite loss in ") + which + ": " + l.ToString());
}

}  // namespace

LossBreakdown GStep(TrainState &state, const GroupedBatch &batch, const TrainingConfig &config) {
  using namespace ad;
  const BatchInputs in = PrepareBatch(batch);
  Model<float> &model = state.model;
  const ModelConfig &mc = model.config();
  const Eigen::Index B = in.tokens.batch, L = mc.latent_dim;
  const auto trainable = TrainableSet::AllExcept(Submodule::kAccentClassifier);

  model.ZeroGrad();
  FTape tape;
  auto p = model.Bind(tape, trainable);
  auto states = model.EncodeTokensBatch(p, tape, in.tokens);
  FVar ref = model.EncodeReferenceBatch(p, tape, in.mels);
  auto heads = model.HeadsBatch(p, ref);
  auto [group_mean, group_lv] = GroupPosterior(heads.accent_mean, heads.accent_log_var, in.groups);

  Eigen::MatrixXf eps_s = StandardNormal(state.rng, B, L);
  Eigen::MatrixXf eps_a = StandardNormal(state.rng, static_cast<Eigen::Index>(in.groups.size()), L);
  FVar z_s = Sample(tape, heads.speaker_mean, heads.speaker_log_var, std::move(eps_s));
  FVar z_a = GatherRows(Sample(tape, group_mean, group_lv, std::move(eps_a)), in.group_of);

  auto dec = model.DecodeTeacherForcedBatch(p, tape, states, in.tokens,
                                            ConcatCols<float>({z_s, z_a}), in.mels);
  FVar recon = ReconstructionLoss(dec.mel_pre, dec.mel_post, in.mels.time_major,
                                 in.mels.frame_mask, B, config.recon_mode);
  FVar stop = StopTokenLoss(dec.stop, in.mels.lengths, in.mels.frames);
  FVar kl = Add(KlStandardNormal(heads.speaker_mean, heads.speaker_log_var),
               KlStandardNormal(group_mean, group_lv));

  LossBreakdown lb;
  lb.beta = BetaAt(state.g_steps, config.beta);
  FVar total = Add(Add(recon, Scale(kl, static_cast<float>(lb.beta))), stop);
  if (mc.use_classifier) {
    FVar logits = model.ClassifierLogitsBatch(p, z_s);
    FVar adv = AdversarialUniformLoss(logits);
    lb.adv = adv.value()(0, 0);
    lb.ce = CrossEntropyLoss<float>(logits.value(), in.accents);
    // With gamma = 0 the term stays out of the graph entirely, so the update
    // is the plain MLVAE update.
    if (config.gamma > 0) total = Add(total, Scale(adv, static_cast<float>(config.gamma)));
  }
  lb.recon = recon.value()(0, 0);
  lb.kl = kl.value()(0, 0);
  lb.stop = stop.value()(0, 0);
  lb.total_g = lb.recon + lb.beta * lb.kl + config.gamma * lb.adv + lb.stop;
  lb.total_d = config.alpha * lb.ce;
  CheckFinite(lb, "g_step");

  tape.Backward(total);
  ClipAndNorm(model, trainable, config.grad_clip_norm, state.clip_events);
  ApplyUpdate(state, trainable, config, state.g_steps + 1);
  ++state.g_steps;
  ++state.global_step;
  return lb;
}

LossBreakdown DStep(TrainState &state, const GroupedBatch &batch, const TrainingConfig &config) {
  using namespace ad;
  Model<float> &model = state.model;
  if (!model.config().use_classifier) throw UsageError("d_step requires the accent classifier");
  const BatchInputs in = PrepareBatch(batch);
  const Eigen::Index B = in.tokens.batch, L = model.config().latent_dim;
  const auto trainable = TrainableSet::Only(Submodule::kAccentClassifier);

  model.ZeroGrad();
  FTape tape;
  auto p = model.Bind(tape, trainable);
  FVar ref = model.EncodeReferenceBatch(p, tape, in.mels);
  auto heads = model.HeadsBatch(p, ref);
  FVar z_s = Sample(tape, heads.speaker_mean, heads.speaker_log_var, StandardNormal(state.rng, B, L));
  FVar logits = model.ClassifierLogitsBatch(p, z_s);
  FVar ce = CrossEntropy(logits, in.accents);

  LossBreakdown lb;
  lb.ce = ce.value()(0, 0);
  lb.total_d = config.alpha * lb.ce;
  lb.beta = BetaAt(state.g_steps, config.beta);
  CheckFinite(lb, "d_step");

  tape.Backward(Scale(ce, static_cast<float>(config.alpha)));
  ClipAndNorm(model, trainable, config.grad_clip_norm, state.clip_events);
  ApplyUpdate(state, trainable, config, state.d_steps + 1);
  ++state.d_steps;
  ++state.global_step;
  return lb;
}

void WriteLogHeader(std::ostream &os) {
  os << "step,recon,kl,beta,adv,ce,stop,total_g,total_d\n";
}

void WriteLogRow(std::ostream &os, const LogRow &r) {
  const auto &l = r.loss;
  os << r.step << std::setprecision(9) << ',' << l.recon << ',' << l.kl << ',' << l.beta << ','
     << l.adv << ',' << l.ce << ',' << l.stop << ',' << l.total_g << ',' << l.total_d << '\n';
}

namespace {

void WriteRunManifest(const fs::path &path, const TrainingConfig &config, const Corpus &corpus,
                      const nlohmann::json &extra) {
  std::vector<UtteranceRecord> records;
  for (const auto &u : corpus.utterances) records.push_back(u.record);
  nlohmann::json j;
  j["config"] = ToJson(config);
  j["seed"] = config.seed;
  j["corpus_hash"] = HexDigest(ManifestHash(records));
  j["accents"] = corpus.accents.ids();
  if (extra.is_object())
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = *it;
  std::ofstream os(path, std::ios::trunc);
  os << j.dump(2) << '\n';
  if (!os) throw DataError("cannot write run manifest " + path.string());
}

std::string CheckpointName(long step) {
  std::ostringstream os;
  os << "step_" << std::setw(8) << std::setfill('0') << step << ".ckpt";
  return os.str();
}

}  // namespace

TrainResult Train(const TrainingConfig &config, const Corpus &corpus, const TrainState *start,
                  const TrainOptions &options) {
  config.Validate();
  if (config.model.num_accents != static_cast<int>(corpus.accents.size()))
    throw UsageError("model num_accents does not match the corpus accent inventory");
  TrainResult result{start != nullptr ? *start : TrainState::Initial(config), {}};
  TrainState &state = result.state;
  const auto pool = corpus.SplitIndices(Split::kTrain);
  if (pool.empty()) throw DataError("corpus has no training utterances");

  std::ofstream csv;
  if (!options.run_dir.empty()) {
    fs::create_directories(options.run_dir / "checkpoints");
    fs::create_directories(options.run_dir / "logs");
    WriteRunManifest(options.run_dir / "run_manifest.json", config, corpus, options.manifest_extra);
    const fs::path log_path = options.run_dir / "logs" / "train.csv";
    const bool fresh = state.g_steps == 0 || !fs::exists(log_path);
    csv.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) WriteLogHeader(csv);
  }
  if (state.g_steps >= config.total_steps) return result;

  GroupedBatchStream stream(corpus, pool, config.batch_size, config.min_group_size,
                            config.seed ^ 0xba7c4e5ULL);
  for (const auto &w : stream.warnings()) Warn(w);
  stream.Skip(static_cast<std::uint64_t>(state.g_steps));

  auto checkpoint = [&]() {
    if (options.run_dir.empty()) return;
    const fs::path dir = options.run_dir / "checkpoints";
    SaveCheckpoint(dir / CheckpointName(state.g_steps), state, config);
    SaveCheckpoint(dir / "latest.ckpt", state, config);
  };

  while (state.g_steps < config.total_steps) {
    const GroupedBatch batch = stream.Next();
    const long clips_before = state.clip_events;
    LogRow row;
    row.loss = GStep(state, batch, config);
    for (int k = 0; k < config.d_steps_per_g_step && config.model.use_classifier; ++k) {
      const LossBreakdown d = DStep(state, batch, config);
      row.loss.ce = d.ce;
      row.loss.total_d = d.total_d;
    }
    row.step = state.g_steps;
    if (state.clip_events != clips_before && !options.run_dir.empty()) {
      std::ofstream clip_log(options.run_dir / "logs" / "clipping.log", std::ios::app);
      clip_log << "step " << row.step << ": gradient norm clipped to " << config.grad_clip_norm
               << '\n';
    }
    result.log.push_back(row);
    if (csv.is_open()) WriteLogRow(csv, row);
    if (options.on_step) options.on_step(row);
    if (state.g_steps % config.checkpoint_interval == 0) checkpoint();
  }
  if (state.g_steps % config.checkpoint_interval != 0) checkpoint();
  return result;
}

void SaveCheckpoint(const fs::path &path, const TrainState &state, const TrainingConfig &config) {
  const fs::path tmp = path.string() + ".tmp";
  {
    auto os = io::OpenOut(tmp);
    io::WriteU32(os, kCheckpointMagic);
    io::WriteU32(os, kCheckpointVersion);
    io::WriteString(os, ToJson(config).dump());
    io::WriteU64(os, static_cast<std::uint64_t>(state.global_step));
    io::WriteU64(os, static_cast<std::uint64_t>(state.g_steps));
    io::WriteU64(os, static_cast<std::uint64_t>(state.d_steps));
    io::WriteU64(os, static_cast<std::uint64_t>(state.clip_events));
    std::ostringstream rng;
    rng << state.rng;
    io::WriteString(os, rng.str());
    const auto &ps = state.model.parameters();
    auto tensor = [&](const std::string &name, const Eigen::MatrixXf &m) {
      io::WriteString(os, name);
      io::WriteU32(os, static_cast<std::uint32_t>(m.rows()));
      io::WriteU32(os, static_cast<std::uint32_t>(m.cols()));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) io::WriteF32(os, m(r, c));
    };
    io::WriteU32(os, static_cast<std::uint32_t>(3 * ps.size()));
    for (const auto &p : ps) tensor(p.name, p.value);
    for (std::size_t i = 0; i < ps.size(); ++i) tensor("adam.m/" + ps[i].name, state.adam_m[i]);
    for (std::size_t i = 0; i < ps.size(); ++i) tensor("adam.v/" + ps[i].name, state.adam_v[i]);
    io::WriteU32(os, kCheckpointMagic);  // end marker
    os.flush();
    if (!os) throw DataError("failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move checkpoint into place: " + path.string());
}

namespace {

LoadedCheckpoint ReadCheckpoint(const fs::path &path, const ModelConfig *expected) {
  auto is = io::OpenIn(path);
  io::Reader rd(is, "checkpoint " + path.string());
  if (rd.U32() != kCheckpointMagic) throw DataError("checkpoint " + path.string() + ": bad magic");
  const std::uint32_t version = rd.U32();
  if (version != kCheckpointVersion)
    throw DataError("checkpoint " + path.string() + ": unsupported version " +
                    std::to_string(version));
  LoadedCheckpoint out;
  try {
    out.config = TrainingConfigFromJson(nlohmann::json::parse(rd.String()));
  } catch (const nlohmann::json::exception &e) {
    throw DataError("checkpoint " + path.string() + ": bad config echo: " + e.what());
  }
  if (expected != nullptr) out.config.model = *expected;
  out.state = TrainState::Initial(out.config);
  TrainState &s = out.state;
  s.global_step = static_cast<long>(rd.U64());
  s.g_steps = static_cast<long>(rd.U64());
  s.d_steps = static_cast<long>(rd.U64());
  s.clip_events = static_cast<long>(rd.U64());
  {
    std::istringstream rng(rd.String());
    rng >> s.rng;
    if (!rng) throw DataError("checkpoint " + path.string() + ": bad rng state");
  }
  auto &ps = s.model.parameters();
  std::vector<std::pair<std::string, Eigen::MatrixXf *>> slots;
  for (auto &p : ps) slots.emplace_back(p.name, &p.value);
  for (std::size_t i = 0; i < ps.size(); ++i) slots.emplace_back("adam.m/" + ps[i].name, &s.adam_m[i]);
  for (std::size_t i = 0; i < ps.size(); ++i) slots.emplace_back("adam.v/" + ps[i].name, &s.adam_v[i]);

  const std::uint32_t count = rd.U32();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = rd.String(1 << 16);
    const std::uint32_t rows = rd.U32(), cols = rd.U32();
    if (k >= slots.size())
      throw DataError("checkpoint tensor mismatch: unexpected tensor '" + name + "'");
    auto &[want, dst] = slots[k];
    if (name != want)
      throw DataError("checkpoint tensor mismatch: expected '" + want + "', found '" + name + "'");
    if (rows != dst->rows() || cols != dst->cols())
      throw DataError("checkpoint tensor mismatch: '" + name + "' has shape " +
                      std::to_string(rows) + "x" + std::to_string(cols) + ", model expects " +
                      std::to_string(dst->rows()) + "x" + std::to_string(dst->cols()));
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) (*dst)(r, c) = rd.F32();
  }
  if (count < slots.size())
    throw DataError("checkpoint tensor mismatch: missing tensor '" + slots[count].first + "'");
  if (rd.U32() != kCheckpointMagic) throw DataError("checkpoint " + path.string() + ": corrupt end marker");
  return out;
}

}  // namespace

LoadedCheckpoint LoadCheckpoint(const fs::path &path) { return ReadCheckpoint(path, nullptr); }

LoadedCheckpoint LoadCheckpoint(const fs::path &path, const ModelConfig &expected) {
  return ReadCheckpoint(path, &expected);
}

std::uint64_t ParameterHash(const Model<float> &model) {
  std::uint64_t h = Fnv1a(nullptr, 0);
  for (const auto &p : model.parameters()) {
    h = Fnv1a(p.name.data(), p.name.size(), h);
    const std::int64_t shape[2] = {p.value.rows(), p.value.cols()};
    h = Fnv1a(shape, sizeof(shape), h);
    h = Fnv1a(p.value.data(), sizeof(float) * static_cast<std::size_t>(p.value.size()), h);
  }
  return h;
}

}  // namespace accentvae
