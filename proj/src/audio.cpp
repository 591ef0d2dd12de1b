// src/audio.cpp

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

#include "accentvae/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/QR>
#include <unsupported/Eigen/FFT>

#include "accentvae/binary_io.hpp"

namespace accentvae {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> HannWindow(const StftConfig &c) {
  // periodic Hann of win_length, centred inside n_fft
  std::vector<double> w(c.n_fft, 0.0);
  const int offset = (c.n_fft - c.win_length) / 2;
  for (int i = 0; i < c.win_length; ++i)
    w[offset + i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / c.win_length);
  return w;
}

long FrameStart(int t, const StftConfig &c) {
  return static_cast<long>(t) * c.hop_length + c.hop_length / 2 - c.n_fft / 2;
}

}  // namespace

void StftConfig::Validate() const {
  if (sample_rate <= 0) throw UsageError("sample_rate must be > 0");
  if (n_fft < 2 || (n_fft & (n_fft - 1)) != 0) throw UsageError("n_fft must be a power of two");
  if (hop_length < 1) throw UsageError("hop_length must be >= 1");
  if (win_length < 1 || win_length > n_fft) throw UsageError("win_length must be in [1, n_fft]");
  if (n_mels < 1) throw UsageError("n_mels must be >= 1");
  if (!(fmin >= 0) || !(fmax > fmin) || fmax > sample_rate / 2.0)
    throw UsageError("need 0 <= fmin < fmax <= sample_rate / 2");
  if (!(log_floor > 0)) throw UsageError("log_floor must be > 0");
}

Waveform ReadWav(const std::filesystem::path &path) {
  auto is = io::OpenIn(path);
  io::Reader rd(is, "wav " + path.string());
  char tag[4];
  rd.Bytes(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) throw DataError(path.string() + ": not a RIFF file");
  rd.U32();
  rd.Bytes(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) throw DataError(path.string() + ": not a WAVE file");
  Waveform w;
  int bits = 0, format = 0;
  bool have_fmt = false;
  while (true) {
    rd.Bytes(tag, 4);
    const std::uint32_t size = rd.U32();
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      std::vector<char> buf(size);
      rd.Bytes(buf.data(), size);
      if (size < 16) throw DataError(path.string() + ": short fmt chunk");
      auto u16 = [&](int o) {
        return static_cast<int>(static_cast<unsigned char>(buf[o]) |
                                (static_cast<unsigned char>(buf[o + 1]) << 8));
      };
      format = u16(0);
      w.channels = u16(2);
      w.sample_rate = static_cast<int>(static_cast<unsigned char>(buf[4]) |
                                       (static_cast<unsigned char>(buf[5]) << 8) |
                                       (static_cast<unsigned char>(buf[6]) << 16) |
                                       (static_cast<unsigned char>(buf[7]) << 24));
      bits = u16(14);
      have_fmt = true;
      if (size % 2 == 1) rd.Bytes(buf.data(), 1);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw DataError(path.string() + ": data chunk before fmt chunk");
      if (format != 1 || bits != 16)
        throw DataError(path.string() + ": only 16-bit PCM WAV is supported");
      if (w.channels < 1) throw DataError(path.string() + ": invalid channel count");
      std::vector<char> buf(size);
      rd.Bytes(buf.data(), size);
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        std::int16_t v;
        std::memcpy(&v, buf.data() + 2 * i, 2);
        w.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return w;
    } else {
      std::vector<char> skip(size + (size % 2));
      rd.Bytes(skip.data(), skip.size());
    }
  }
}

void WriteWav(const std::filesystem::path &path, const std::vector<float> &samples,
              int sample_rate) {
  auto os = io::OpenOut(path);
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  io::WriteU32(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  io::WriteU32(os, 16);
  io::WriteU32(os, 1u | (1u << 16));  // PCM, mono
  io::WriteU32(os, static_cast<std::uint32_t>(sample_rate));
  io::WriteU32(os, static_cast<std::uint32_t>(sample_rate * 2));
  io::WriteU32(os, 2u | (16u << 16));  // block align, bits per sample
  os.write("data", 4);
  io::WriteU32(os, data_bytes);
  for (float s : samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    const auto v = static_cast<std::int16_t>(std::lround(c * 32767.0f));
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff)};
    os.write(reinterpret_cast<const char *>(b), 2);
  }
  if (!os) throw DataError("failed writing " + path.string());
}

std::vector<float> Resample(const std::vector<float> &samples, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw Error("resample: rates must be > 0");
  if (from_rate == to_rate || samples.empty()) return samples;
  const std::size_t n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(samples.size()) * to_rate /
                                               from_rate)));
  std::vector<float> out(n);
  const double step = static_cast<double>(from_rate) / to_rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = i * step;
    const auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= samples.size()) {
      out[i] = samples.back();
      continue;
    }
    const double f = pos - static_cast<double>(k);
    out[i] = static_cast<float>((1.0 - f) * samples[k] + f * samples[k + 1]);
  }
  return out;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> MelEdges(const StftConfig &c) {
  const double lo = HzToMel(c.fmin), hi = HzToMel(c.fmax);
  std::vector<double> edges(c.n_mels + 2);
  for (int i = 0; i < c.n_mels + 2; ++i) edges[i] = MelToHz(lo + (hi - lo) * i / (c.n_mels + 1));
  return edges;
}

}  // namespace

std::vector<double> MelBandCenters(const StftConfig &config) {
  auto e = MelEdges(config);
  return std::vector<double>(e.begin() + 1, e.end() - 1);
}

Eigen::MatrixXd MelFilterbank(const StftConfig &c) {
  c.Validate();
  const auto edges = MelEdges(c);
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(c.n_mels, c.num_bins());
  for (int m = 0; m < c.n_mels; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < c.num_bins(); ++k) {
      const double f = static_cast<double>(k) * c.sample_rate / c.n_fft;
      if (f > left && f < centre)
        fb(m, k) = (f - left) / (centre - left);
      else if (f >= centre && f < right)
        fb(m, k) = (right - f) / (right - centre);
    }
  }
  return fb;
}

int NumFrames(std::size_t num_samples, int hop_length) {
  return static_cast<int>((num_samples + hop_length - 1) / hop_length);
}

Eigen::MatrixXcd Stft(const std::vector<float> &samples, const StftConfig &c) {
  const int frames = NumFrames(samples.size(), c.hop_length);
  const auto window = HannWindow(c);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  Eigen::MatrixXcd out(frames, c.num_bins());
  std::vector<double> buf(c.n_fft);
  std::vector<std::complex<double>> spec;
  const long n = static_cast<long>(samples.size());
  for (int t = 0; t < frames; ++t) {
    const long start = FrameStart(t, c);
    for (int i = 0; i < c.n_fft; ++i) {
      const long s = start + i;
      buf[i] = (s >= 0 && s < n) ? window[i] * samples[s] : 0.0;
    }
    fft.fwd(spec, buf);
    for (int k = 0; k < c.num_bins(); ++k) out(t, k) = spec[k];
  }
  return out;
}

std::vector<float> Istft(const Eigen::MatrixXcd &spectrum, const StftConfig &c) {
  const int frames = static_cast<int>(spectrum.rows());
  if (spectrum.cols() != c.num_bins()) throw Error("istft: bin count mismatch");
  const auto window = HannWindow(c);
  const long n = static_cast<long>(frames) * c.hop_length;
  std::vector<double> acc(n, 0.0), norm(n, 0.0);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> spec(c.num_bins());
  std::vector<double> buf;
  for (int t = 0; t < frames; ++t) {
    for (int k = 0; k < c.num_bins(); ++k) spec[k] = spectrum(t, k);
    fft.inv(buf, spec, c.n_fft);
    const long start = FrameStart(t, c);
    for (int i = 0; i < c.n_fft; ++i) {
      const long s = start + i;
      if (s < 0 || s >= n) continue;
      acc[s] += window[i] * buf[i];
      norm[s] += window[i] * window[i];
    }
  }
  std::vector<float> out(n);
  for (long s = 0; s < n; ++s) out[s] = norm[s] > 1e-10 ? static_cast<float>(acc[s] / norm[s]) : 0.0f;
  return out;
}

MelSpectrogram ComputeMel(const Waveform &wave, const StftConfig &config) {
  config.Validate();
  if (wave.channels != 1) throw DataError("compute_mel: waveform must be mono");
  if (wave.samples.empty()) throw DataError("compute_mel: empty waveform");
  const std::vector<float> x = Resample(wave.samples, wave.sample_rate, config.sample_rate);
  const Eigen::MatrixXd mag = Stft(x, config).cwiseAbs();
  const Eigen::MatrixXd mel = mag * MelFilterbank(config).transpose();
  MelSpectrogram out;
  out.frame_hop_seconds = config.frame_hop_seconds();
  out.values = mel.cwiseMax(config.log_floor).array().log().matrix().cast<float>();
  return out;
}

GriffinLimResult GriffinLim(const MelSpectrogram &mel, int iterations, const StftConfig &config) {
  config.Validate();
  if (iterations < 1) throw UsageError("griffin_lim: iterations must be >= 1");
  if (mel.n_mels() != config.n_mels) throw Error("griffin_lim: n_mels mismatch");
  if (mel.frames() < 1) throw Error("griffin_lim: empty mel");
  const Eigen::MatrixXd fb = MelFilterbank(config);
  const Eigen::MatrixXd pinv = fb.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd energies = mel.values.cast<double>().array().exp().matrix();
  const Eigen::MatrixXd target = (energies * pinv.transpose()).cwiseMax(0.0);

  Eigen::MatrixXcd spec = target.cast<std::complex<double>>();
  std::vector<float> x;
  for (int it = 0; it < iterations; ++it) {
    x = Istft(spec, config);
    const Eigen::MatrixXcd c = Stft(x, config);
    for (Eigen::Index i = 0; i < spec.size(); ++i) {
      const double a = std::abs(c(i));
      spec(i) = a > 0 ? target(i) * (c(i) / a) : std::complex<double>(target(i), 0.0);
    }
  }
  x = Istft(spec, config);

  GriffinLimResult r;
  const Eigen::MatrixXd achieved = Stft(x, config).cwiseAbs();
  const double denom = target.norm();
  r.spectral_error = denom > 0 ? (target - achieved).norm() / denom : 0.0;
  for (float s : x) r.raw_peak = std::max(r.raw_peak, static_cast<double>(std::abs(s)));
  if (r.raw_peak > 0) {
    const float scale = static_cast<float>(0.95 / r.raw_peak);
    for (auto &s : x) s *= scale;
  }
  r.waveform = std::move(x);
  return r;
}

}  // namespace accentvae
