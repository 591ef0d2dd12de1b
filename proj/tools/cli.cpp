// tools/cli.cpp

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

#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "accentvae/audio.hpp"
#include "accentvae/config.hpp"
#include "accentvae/corpus.hpp"
#include "accentvae/evaluation.hpp"
#include "accentvae/inference.hpp"
#include "accentvae/toy_world.hpp"
#include "accentvae/trainer.hpp"

namespace accentvae {

namespace fs = std::filesystem;

namespace {

struct PrepareArgs {
  std::string out, root, map, config;
  bool toy = false;
  int speakers = 12, accents = 3, utterances = 60, n_mels = 20;
  std::uint64_t seed = 0;
  int test = -1, val = -1;
};

struct TrainArgs {
  std::string out_dir, config, resume;
  double gamma = -1;
  long steps = -1;
  bool force = false;
};

struct StoreArgs {
  std::string out_dir, checkpoint, config, split = "train", store;
};

struct SynthArgs {
  std::string checkpoint, store, text, speaker, accent, out_dir, mel_out, wav_out, config;
  int griffin_lim_iters = 32;
};

struct EvalArgs {
  std::string checkpoint, store, out_dir, config, split = "test", hyp_dir, recognizer_cmd;
  bool self_check = false, probes = false;
  int griffin_lim_iters = 32;
};

struct PlotArgs {
  std::string store, out_dir, which = "accent", method = "tsne";
  std::uint64_t seed = 0;
  double perplexity = 0;
};

RunConfig LoadConfigOrDefault(const std::string &path) {
  return path.empty() ? MakeRunConfig({}) : LoadRunConfig(path);
}

fs::path CorpusDir(const RunConfig &rc, const std::string &out_dir) {
  return rc.corpus_dir.empty() ? fs::path(out_dir) : fs::path(rc.corpus_dir);
}

Corpus LoadCorpus(const RunConfig &rc, const std::string &out_dir) {
  const fs::path dir = CorpusDir(rc, out_dir);
  if (!fs::exists(dir / "manifest.jsonl"))
    throw DataError("no prepared corpus in " + dir.string() + " (run prepare-data first)");
  return LoadPreparedCorpus(dir, rc.stft.frame_hop_seconds());
}

void PrintCorpusSummary(const Corpus &corpus) {
  double seconds = 0;
  for (const auto &u : corpus.utterances)
    seconds += static_cast<double>(u.mel.frames()) * u.mel.frame_hop_seconds;
  std::cout << "utterances: " << corpus.utterances.size() << '\n'
            << "speakers: " << corpus.speakers.size() << '\n'
            << "accents: " << corpus.accents.size() << '\n'
            << "hours: " << std::fixed << std::setprecision(4) << seconds / 3600.0 << '\n'
            << std::defaultfloat;
}

int CmdPrepare(const PrepareArgs &a) {
  const bool real = !a.root.empty() || !a.map.empty();
  if (real == a.toy) throw UsageError("prepare-data: choose exactly one of --toy or --root/--map");
  if (a.out.empty()) throw UsageError("prepare-data: --out is required");
  std::vector<std::string> warnings;
  Corpus corpus;
  if (a.toy) {
    const ToyWorldSpec spec = ToyWorldSpec::Make(a.speakers, a.accents, a.seed, a.n_mels);
    SplitCounts splits{a.test < 0 ? 1 : a.test, a.val < 0 ? 10 : a.val};
    corpus = GenerateToyCorpus(spec, a.utterances, splits, &warnings);
  } else {
    if (a.root.empty() || a.map.empty()) throw UsageError("prepare-data: --root and --map go together");
    const RunConfig rc = LoadConfigOrDefault(a.config);
    SplitCounts splits;
    if (a.test >= 0) splits.test = a.test;
    if (a.val >= 0) splits.validation = a.val;
    ScanResult scan = ScanDataset(a.root, a.map, splits);
    warnings = scan.warnings;
    std::vector<MelSpectrogram> mels;
    for (const auto &r : scan.records) {
      try {
        mels.push_back(ComputeMel(ReadWav(*r.audio_path), rc.stft));
      } catch (const DataError &e) {
        throw DataError(r.audio_path->string() + ": " + e.what());
      }
    }
    corpus = AssembleCorpus(std::move(scan.records), std::move(mels), scan.accents);
  }
  for (const auto &w : warnings) Warn(w);
  WritePreparedCorpus(a.out, corpus);
  std::vector<UtteranceRecord> records;
  for (const auto &u : corpus.utterances) records.push_back(u.record);
  PrintCorpusSummary(corpus);
  std::cout << "manifest_hash: " << HexDigest(ManifestHash(records)) << '\n';
  return kExitOk;
}

int CmdTrain(const TrainArgs &a) {
  RunConfig rc = LoadConfigOrDefault(a.config);
  const Corpus corpus = LoadCorpus(rc, a.out_dir);
  TrainingConfig &tc = rc.training;
  tc.model.n_mels = static_cast<int>(corpus.utterances.at(0).mel.n_mels());
  tc.model.num_accents = static_cast<int>(corpus.accents.size());
  if (a.gamma >= 0) tc.gamma = a.gamma;
  if (a.steps >= 0) tc.total_steps = a.steps;
  if (a.force) tc.force = true;
  tc.Validate();

  std::unique_ptr<TrainState> start;
  if (!a.resume.empty()) {
    const fs::path path =
        a.resume == "latest" ? fs::path(a.out_dir) / "checkpoints" / "latest.ckpt" : fs::path(a.resume);
    start = std::make_unique<TrainState>(LoadCheckpoint(path, tc.model).state);
    std::cout << "resuming from " << path.string() << " at step " << start->g_steps << '\n';
  }
  TrainOptions options;
  options.run_dir = a.out_dir;
  options.manifest_extra = {{"run_config", rc.ToJson()}};
  const long report_every = std::max<long>(1, tc.total_steps / 20);
  options.on_step = [&](const LogRow &row) {
    if (row.step % report_every == 0) std::cout << "step " << row.step << ' ' << row.loss.ToString() << '\n';
  };
  const TrainResult result = Train(tc, corpus, start.get(), options);
  std::cout << "finished at step " << result.state.g_steps << ", clip events "
            << result.state.clip_events << ", parameters "
            << HexDigest(ParameterHash(result.state.model)) << '\n';
  return kExitOk;
}

int CmdBuildStore(const StoreArgs &a) {
  if (a.checkpoint.empty()) throw UsageError("build-store: --checkpoint is required");
  const RunConfig rc = LoadConfigOrDefault(a.config);
  const Corpus corpus = LoadCorpus(rc, a.out_dir);
  const LoadedCheckpoint ck = LoadCheckpoint(a.checkpoint);
  std::vector<std::string> warnings;
  const EmbeddingStore store =
      BuildEmbeddingStore(ck.state.model, corpus, ParseSplit(a.split), &warnings);
  for (const auto &w : warnings) Warn(w);
  const fs::path path = a.store.empty() ? fs::path(a.out_dir) / "store.avst" : fs::path(a.store);
  store.Save(path);
  std::cout << "store: " << path.string() << " (" << store.records().size() << " utterances, "
            << store.speakers().size() << " speakers, " << store.accents().size() << " accents)\n";
  return kExitOk;
}

struct Inference {
  LoadedCheckpoint checkpoint;
  EmbeddingStore store;
};

Inference LoadInference(const std::string &checkpoint, const std::string &store) {
  if (checkpoint.empty() || store.empty()) throw UsageError("--checkpoint and --store are required");
  Inference inf{LoadCheckpoint(checkpoint), EmbeddingStore::Load(store)};
  CheckStoreMatches(inf.store, inf.checkpoint.state.model);
  return inf;
}

void WriteOutputs(const DecoderOutput<float> &out, const fs::path &mel_path, const fs::path &wav_path,
                  const RunConfig &rc, int gl_iters) {
  MelSpectrogram mel{out.mel_post, rc.stft.frame_hop_seconds()};
  if (!mel_path.empty()) {
    if (mel_path.has_parent_path()) fs::create_directories(mel_path.parent_path());
    WriteMelCache(mel_path, mel);
    std::cout << "mel: " << mel_path.string() << " (" << mel.frames() << " frames)\n";
  }
  if (!wav_path.empty()) {
    StftConfig stft = rc.stft;
    stft.n_mels = static_cast<int>(mel.n_mels());
    const GriffinLimResult gl = GriffinLim(mel, gl_iters, stft);
    if (wav_path.has_parent_path()) fs::create_directories(wav_path.parent_path());
    WriteWav(wav_path, gl.waveform, stft.sample_rate);
    std::cout << "wav: " << wav_path.string() << '\n';
  }
}

int CmdSynth(const SynthArgs &a, bool convert) {
  if (a.text.empty()) throw UsageError("--text is required");
  if (a.speaker.empty()) throw UsageError("--speaker is required");
  if (convert && a.accent.empty()) throw UsageError("convert: --accent is required (an id or 'all')");
  const RunConfig rc = LoadConfigOrDefault(a.config);
  const Inference inf = LoadInference(a.checkpoint, a.store);
  const Model<float> &model = inf.checkpoint.state.model;

  std::vector<std::string> targets;
  if (convert && a.accent == "all") {
    const std::string &native = inf.store.native_accent(a.speaker);
    for (const auto &id : inf.store.accents())
      if (id != native) targets.push_back(id);
  } else {
    targets.push_back(a.accent.empty() ? inf.store.native_accent(a.speaker) : a.accent);
  }
  const bool many = targets.size() > 1;
  if (many && (!a.mel_out.empty() || !a.wav_out.empty()))
    throw UsageError("convert --accent all writes into --out-dir; drop --mel-out/--wav-out");
  for (const auto &accent : targets) {
    const DecoderOutput<float> out = convert ? ConvertAccent(model, inf.store, a.text, a.speaker, accent)
                                             : Synthesize(model, inf.store, a.text, a.speaker, accent);
    fs::path mel_path = a.mel_out, wav_path = a.wav_out;
    if (mel_path.empty() && wav_path.empty()) {
      if (a.out_dir.empty()) throw UsageError("give --out-dir, --mel-out or --wav-out");
      const fs::path stem = fs::path(a.out_dir) / "wav" / (a.speaker + "__" + accent);
      mel_path = stem.string() + ".mel";
      wav_path = stem.string() + ".wav";
    }
    WriteOutputs(out, mel_path, wav_path, rc, a.griffin_lim_iters);
  }
  return kExitOk;
}

std::string RunRecognizer(const std::string &command, const fs::path &wav) {
  const std::string line = command + " '" + wav.string() + "'";
  std::unique_ptr<FILE, int (*)(FILE *)> pipe(popen(line.c_str(), "r"), pclose);
  if (!pipe) throw DataError("cannot run recognizer: " + command);
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe.get())) out += buf;
  const int status = pclose(pipe.release());
  if (status != 0) throw DataError("recognizer failed on " + wav.string());
  return out;
}

int CmdEval(const EvalArgs &a) {
  const int modes = (!a.hyp_dir.empty()) + (!a.recognizer_cmd.empty()) + a.self_check;
  if (modes != 1) throw UsageError("eval: choose exactly one of --hyp-dir, --recognizer-cmd, --self-check");
  if (a.out_dir.empty()) throw UsageError("eval: --out-dir is required");
  const RunConfig rc = LoadConfigOrDefault(a.config);
  const Corpus corpus = LoadCorpus(rc, a.out_dir);
  const Inference inf = LoadInference(a.checkpoint, a.store);
  const Model<float> &model = inf.checkpoint.state.model;
  const Split split = ParseSplit(a.split);

  MetricReport report;
  report.split = SplitName(split);
  report.checkpoint_hash = HexDigest(inf.store.checkpoint_hash());
  std::vector<std::string> missing;
  for (int idx : corpus.SplitIndices(split)) {
    const Utterance &u = corpus.utterances[idx];
    const std::string &id = u.record.utterance_id;
    Eigen::MatrixXf predicted;
    if (a.self_check) {
      predicted = u.mel.values;
    } else {
      if (!inf.store.has_speaker(u.record.speaker_id) || !inf.store.has_accent(u.record.accent_id)) {
        report.skipped.push_back(id);
        Warn("skipping " + id + ": speaker or accent not in the store");
        continue;
      }
      predicted = Synthesize(model, inf.store, u.record.transcript, u.record.speaker_id,
                             u.record.accent_id)
                      .mel_post;
    }
    report.mcd.push_back({id, Mcd(MelCepstra(u.mel.values), MelCepstra(predicted))});

    std::string hyp;
    if (a.self_check) {
      hyp = u.record.transcript;
    } else if (!a.hyp_dir.empty()) {
      const fs::path hp = fs::path(a.hyp_dir) / (id + ".txt");
      if (!fs::exists(hp)) {
        missing.push_back(id);
        continue;
      }
      std::ifstream is(hp);
      std::stringstream ss;
      ss << is.rdbuf();
      hyp = ss.str();
    } else {
      const fs::path wav = fs::path(a.out_dir) / "wav" / "eval" / (id + ".wav");
      WriteOutputs({predicted, predicted, {}, {}, false}, {}, wav, rc, a.griffin_lim_iters);
      hyp = RunRecognizer(a.recognizer_cmd, wav);
    }
    report.wer.push_back({id, u.record.transcript, hyp, Wer(u.record.transcript, hyp)});
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto &m : missing) list += (list.empty() ? "" : ", ") + m;
    Warn("missing hypothesis files (skipped for WER): " + list);
  }
  if (report.mcd.empty()) throw DataError("eval: no utterances evaluated in split " + a.split);
  if (a.probes) {
    try {
      report.probes = ProbeDisentanglement(inf.store, 0);
    } catch (const DataError &e) {
      Warn(std::string("probes skipped: ") + e.what());
    }
  }
  report.Finalize();
  const fs::path dir = fs::path(a.out_dir) / "reports";
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "metrics.json", std::ios::trunc);
    os << report.ToJson().dump(2) << '\n';
    if (!os) throw DataError("cannot write " + (dir / "metrics.json").string());
  }
  report.WriteCsv(dir / "mcd.csv", dir / "wer.csv");
  std::cout << "mean_mcd: " << report.mean_mcd << '\n'
            << "corpus_wer: " << report.corpus_wer << '\n'
            << "report: " << (dir / "metrics.json").string() << '\n';
  return kExitOk;
}

int CmdPlot(const PlotArgs &a) {
  if (a.store.empty() || a.out_dir.empty()) throw UsageError("plot: --store and --out-dir are required");
  const EmbeddingStore store = EmbeddingStore::Load(a.store);
  const Projection2D proj = ProjectEmbeddings(store, ParseEmbeddingKind(a.which),
                                              ParseProjectionMethod(a.method), a.seed, a.perplexity);
  const fs::path dir = fs::path(a.out_dir) / "plots";
  fs::create_directories(dir);
  const std::string stem = a.which + "_" + a.method;
  WriteProjectionCsv(dir / (stem + ".csv"), proj);
  WriteProjectionPng(dir / (stem + ".png"), proj, a.which == "accent");
  std::cout << "plot: " << (dir / (stem + ".png")).string() << '\n'
            << "csv: " << (dir / (stem + ".csv")).string() << '\n';
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string> &args) {
  CLI::App app{"Accented speech synthesis with disentangled speaker and accent latents", "accentvae"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto *p = app.add_subcommand("prepare-data", "ingest a corpus or generate the toy corpus");
  p->add_option("--out", prep.out, "output directory");
  p->add_option("--root", prep.root, "dataset root (one directory per speaker)");
  p->add_option("--map", prep.map, "speaker<TAB>accent map");
  p->add_option("--config", prep.config, "run config (STFT settings)");
  p->add_flag("--toy", prep.toy, "generate the synthetic toy corpus");
  p->add_option("--speakers", prep.speakers, "toy speakers");
  p->add_option("--accents", prep.accents, "toy accents");
  p->add_option("--seed", prep.seed, "toy seed");
  p->add_option("--utterances-per-speaker", prep.utterances, "toy utterances per speaker");
  p->add_option("--n-mels", prep.n_mels, "toy mel bands");
  p->add_option("--test", prep.test, "test utterances per speaker");
  p->add_option("--val", prep.val, "validation utterances per speaker");

  TrainArgs train;
  auto *t = app.add_subcommand("train", "train a model");
  t->add_option("--out-dir", train.out_dir, "run directory")->required();
  t->add_option("--config", train.config, "run config file");
  t->add_option("--resume", train.resume, "checkpoint to resume from, or 'latest'");
  t->add_option("--gamma", train.gamma, "adversarial weight override");
  t->add_option("--steps", train.steps, "G-step budget override");
  t->add_flag("--force", train.force, "allow gamma outside [1e-4, 0.5]");

  StoreArgs st;
  auto *b = app.add_subcommand("build-store", "extract embeddings for a split");
  b->add_option("--out-dir", st.out_dir, "run directory")->required();
  b->add_option("--checkpoint", st.checkpoint, "checkpoint")->required();
  b->add_option("--config", st.config, "run config file");
  b->add_option("--split", st.split, "train, val or test");
  b->add_option("--store", st.store, "output path (default <out-dir>/store.avst)");

  SynthArgs sy, cv;
  auto add_synth = [](CLI::App *c, SynthArgs &s) {
    c->add_option("--checkpoint", s.checkpoint, "checkpoint")->required();
    c->add_option("--store", s.store, "embedding store")->required();
    c->add_option("--text", s.text, "text to speak")->required();
    c->add_option("--speaker", s.speaker, "speaker id")->required();
    c->add_option("--accent", s.accent, "accent id");
    c->add_option("--out-dir", s.out_dir, "run directory (outputs under wav/)");
    c->add_option("--mel-out", s.mel_out, "mel output path");
    c->add_option("--wav-out", s.wav_out, "Griffin-Lim WAV output path");
    c->add_option("--config", s.config, "run config file (STFT settings)");
    c->add_option("--griffin-lim-iters", s.griffin_lim_iters, "phase reconstruction rounds");
  };
  auto *s = app.add_subcommand("synth", "synthesize with a speaker's native accent");
  add_synth(s, sy);
  auto *c = app.add_subcommand("convert", "synthesize with a target accent (or 'all')");
  add_synth(c, cv);

  EvalArgs ev;
  auto *e = app.add_subcommand("eval", "MCD / WER report on a split");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint")->required();
  e->add_option("--store", ev.store, "embedding store")->required();
  e->add_option("--out-dir", ev.out_dir, "run directory")->required();
  e->add_option("--config", ev.config, "run config file");
  e->add_option("--split", ev.split, "train, val or test");
  e->add_option("--hyp-dir", ev.hyp_dir, "directory of <utterance_id>.txt hypotheses");
  e->add_option("--recognizer-cmd", ev.recognizer_cmd, "command run as: CMD <wav path>");
  e->add_flag("--self-check", ev.self_check, "score ground truth against itself");
  e->add_flag("--probes", ev.probes, "add linear probe accuracies on the store");
  e->add_option("--griffin-lim-iters", ev.griffin_lim_iters, "phase reconstruction rounds");

  PlotArgs pl;
  auto *g = app.add_subcommand("plot", "2-D projection of stored embeddings");
  g->add_option("--store", pl.store, "embedding store")->required();
  g->add_option("--out-dir", pl.out_dir, "run directory")->required();
  g->add_option("--which", pl.which, "speaker or accent");
  g->add_option("--method", pl.method, "tsne or pca");
  g->add_option("--seed", pl.seed, "t-SNE seed");
  g->add_option("--perplexity", pl.perplexity, "t-SNE perplexity (default min(30, n/4))");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError &err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    if (p->parsed()) return CmdPrepare(prep);
    if (t->parsed()) return CmdTrain(train);
    if (b->parsed()) return CmdBuildStore(st);
    if (s->parsed()) return CmdSynth(sy, false);
    if (c->parsed()) return CmdSynth(cv, true);
    if (e->parsed()) return CmdEval(ev);
    if (g->parsed()) return CmdPlot(pl);
  } catch (const UsageError &err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError &err) {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception &err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace accentvae
