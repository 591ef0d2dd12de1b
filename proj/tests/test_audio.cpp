// tests/test_audio.cpp

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

#include "accentvae/audio.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace accentvae;
using namespace accentvae::testing;

namespace {

Waveform Sine(double hz, int n, int rate = 22050, double amp = 0.5) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (int i = 0; i < n; ++i) w.samples[i] = static_cast<float>(amp * std::sin(2 * M_PI * hz * i / rate));
  return w;
}

}  // namespace

TEST_CASE("mel: silence sits at the log floor") {
  StftConfig c;
  Waveform w;
  w.sample_rate = c.sample_rate;
  w.samples.assign(4096, 0.0f);
  const MelSpectrogram mel = ComputeMel(w, c);
  CHECK(mel.n_mels() == 80);
  CHECK(mel.frames() == NumFrames(4096, c.hop_length));
  CHECK((mel.values.array() - std::log(1e-5f)).abs().maxCoeff() < 1e-4f);
}

TEST_CASE("mel: a 440 Hz tone peaks in the band whose centre is closest") {
  StftConfig c;
  const MelSpectrogram mel = ComputeMel(Sine(440, 22050), c);
  const auto centres = MelBandCenters(c);
  int nearest = 0;
  for (int i = 1; i < c.n_mels; ++i)
    if (std::abs(centres[i] - 440) < std::abs(centres[nearest] - 440)) nearest = i;
  Eigen::Index argmax = 0;
  mel.values.row(mel.frames() / 2).maxCoeff(&argmax);
  CHECK(std::abs(static_cast<int>(argmax) - nearest) <= 1);
}

TEST_CASE("mel: frame counts") {
  StftConfig c;
  CHECK(ComputeMel(Sine(300, c.hop_length), c).frames() == 1);
  CHECK(NumFrames(1, 256) == 1);
  CHECK(NumFrames(257, 256) == 2);
  int previous = 1 << 30;
  for (int hop : {64, 128, 200, 256, 512}) {
    StftConfig h = c;
    h.hop_length = hop;
    const int frames = static_cast<int>(ComputeMel(Sine(300, 5000), h).frames());
    CHECK(frames <= previous);
    previous = frames;
  }
}

TEST_CASE("mel: resampling and invalid input") {
  StftConfig c;
  const MelSpectrogram m = ComputeMel(Sine(440, 16000, 16000), c);
  CHECK(m.frames() == NumFrames(22050, c.hop_length));
  Waveform stereo = Sine(440, 1000);
  stereo.channels = 2;
  CHECK_THROWS_AS(ComputeMel(stereo, c), DataError);
  Waveform empty;
  empty.sample_rate = 22050;
  CHECK_THROWS_AS(ComputeMel(empty, c), DataError);
  StftConfig bad = c;
  bad.n_fft = 1000;
  CHECK_THROWS_AS(bad.Validate(), UsageError);
}

TEST_CASE("mel scale round trip and filterbank shape") {
  for (double hz : {0.0, 100.0, 1000.0, 8000.0}) CHECK(MelToHz(HzToMel(hz)) == doctest::Approx(hz));
  StftConfig c;
  const Eigen::MatrixXd fb = MelFilterbank(c);
  CHECK(fb.rows() == 80);
  CHECK(fb.cols() == c.num_bins());
  CHECK(fb.minCoeff() >= 0.0);
  CHECK(fb.maxCoeff() <= 1.0 + 1e-12);
}

TEST_CASE("wav: 16-bit round trip and bad files") {
  TempDir dir;
  const Waveform w = Sine(440, 1000);
  WriteWav(dir / "a.wav", w.samples, 22050);
  const Waveform back = ReadWav(dir / "a.wav");
  CHECK(back.sample_rate == 22050);
  CHECK(back.channels == 1);
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::abs(back.samples[i] - w.samples[i]) <= 1.0f / 32767);
  WriteText(dir / "junk.wav", "not a wav file at all");
  CHECK_THROWS_AS(ReadWav(dir / "junk.wav"), DataError);
}

TEST_CASE("stft and inverse stft reconstruct the interior") {
  StftConfig c;
  const Waveform w = Sine(523, 8192);
  const auto y = Istft(Stft(w.samples, c), c);
  REQUIRE(y.size() >= 6000);
  double err = 0;
  for (int i = 1024; i < 6000; ++i) err = std::max(err, std::abs<double>(y[i] - w.samples[i]));
  CHECK(err < 1e-3);
}

TEST_CASE("griffin-lim: silence, output length and non-increasing error") {
  StftConfig c;
  c.n_mels = 20;
  MelSpectrogram silent{Eigen::MatrixXf::Constant(10, 20, std::log(1e-5f)), c.frame_hop_seconds()};
  const auto quiet = GriffinLim(silent, 4, c);
  CHECK(quiet.raw_peak < 1e-2);
  CHECK(static_cast<int>(quiet.waveform.size()) == 10 * c.hop_length);

  const MelSpectrogram mel = ComputeMel(Sine(700, 11025), c);
  double previous = 1e300;
  for (int iterations : {1, 8, 32}) {
    const auto r = GriffinLim(mel, iterations, c);
    CHECK(static_cast<int>(r.waveform.size()) == mel.frames() * c.hop_length);
    CHECK(r.spectral_error <= previous + 1e-9);
    previous = r.spectral_error;
    const float peak = *std::max_element(r.waveform.begin(), r.waveform.end(),
                                         [](float a, float b) { return std::abs(a) < std::abs(b); });
    CHECK(std::abs(peak) == doctest::Approx(0.95).epsilon(1e-3));
  }
  CHECK_THROWS_AS(GriffinLim(mel, 0, c), UsageError);
}
