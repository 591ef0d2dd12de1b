// include/accentvae/audio.hpp

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

// WAV I/O, STFT, log-mel analysis and Griffin-Lim resynthesis.
//
// Frame t of the STFT is centred on sample t * hop + hop / 2 and windowed
// with a periodic Hann window; samples outside the signal are zero. A signal
// of n samples has ceil(n / hop) frames.

#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include "accentvae/corpus.hpp"

namespace accentvae {

struct StftConfig {
  int sample_rate = 22050;
  int n_fft = 1024;
  int hop_length = 256;
  int win_length = 1024;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-5;

  void Validate() const;
  double frame_hop_seconds() const { return static_cast<double>(hop_length) / sample_rate; }
  int num_bins() const { return n_fft / 2 + 1; }
};

struct Waveform {
  std::vector<float> samples;  // interleaved when channels > 1
  int sample_rate = 0;
  int channels = 1;
};

/// Reads 16-bit PCM WAV.
Waveform ReadWav(const std::filesystem::path &path);
/// Writes mono 16-bit PCM WAV; samples are clipped to [-1, 1].
void WriteWav(const std::filesystem::path &path, const std::vector<float> &samples, int sample_rate);

/// Linear-interpolation resampling of a mono signal.
std::vector<float> Resample(const std::vector<float> &samples, int from_rate, int to_rate);

double HzToMel(double hz);
double MelToHz(double mel);

/// Triangular HTK-mel filterbank with unit peaks, (n_mels x num_bins).
Eigen::MatrixXd MelFilterbank(const StftConfig &config);
/// Centre frequency (Hz) of every mel band.
std::vector<double> MelBandCenters(const StftConfig &config);

/// Complex STFT, (frames x num_bins).
Eigen::MatrixXcd Stft(const std::vector<float> &samples, const StftConfig &config);
/// Least-squares inverse STFT; output has frames * hop samples.
std::vector<float> Istft(const Eigen::MatrixXcd &spectrum, const StftConfig &config);

int NumFrames(std::size_t num_samples, int hop_length);

/// Log-mel of a mono waveform, resampled to config.sample_rate first.
/// Values are floored at log(log_floor).
MelSpectrogram ComputeMel(const Waveform &wave, const StftConfig &config);

struct GriffinLimResult {
  std::vector<float> waveform;  // peak-normalized to 0.95 when non-silent
  double raw_peak = 0.0;        // peak before normalization
  double spectral_error = 0.0;  // ||S - |STFT(x)||| / ||S|| before normalization
};

/// Inverts a log-mel via the filterbank pseudo-inverse, then refines the
/// phase for `iterations` rounds starting from zero phase.
GriffinLimResult GriffinLim(const MelSpectrogram &mel, int iterations, const StftConfig &config);

}  // namespace accentvae
