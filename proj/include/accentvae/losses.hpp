// include/accentvae/losses.hpp

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

// Training losses and the KL annealing schedule. Value-level functions take
// plain Eigen objects; the ad:: overloads build the same quantities on a tape.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "accentvae/autodiff.hpp"
#include "accentvae/gaussian.hpp"
#include "accentvae/model.hpp"

namespace accentvae {

enum class ReconMode { kMse, kL2Norm };

ReconMode ParseReconMode(const std::string &name);
const char *ReconModeName(ReconMode mode);

struct BetaSchedule {
  double start_value = 1e-6;
  double end_value = 1e-4;
  long ramp_start_step = 5000;
  long ramp_end_step = 15000;

  void Validate() const;
};

/// start_value before the ramp, end_value from ramp_end_step on, linear in
/// between.
double BetaAt(long step, const BetaSchedule &schedule);

struct LossBreakdown {
  double recon = 0, kl = 0, beta = 0, adv = 0, ce = 0, stop = 0, total_g = 0, total_d = 0;

  bool AllFinite() const;
  std::string ToString() const;
};

/// Squared error of one prediction against the target, per mode: mse gives
/// mean((pre - x)^2) + mean((post - x)^2), l2_norm gives
/// ||pre - x||_F + ||post - x||_F.
template <typename S>
S ReconstructionLoss(const MatrixX<S> &mel_pre, const MatrixX<S> &mel_post,
                     const MatrixX<S> &target, ReconMode mode) {
  if (mel_pre.rows() != target.rows() || mel_pre.cols() != target.cols() ||
      mel_post.rows() != target.rows() || mel_post.cols() != target.cols())
    throw Error("reconstruction loss: shape mismatch");
  if (mode == ReconMode::kMse)
    return (mel_pre - target).squaredNorm() / static_cast<S>(target.size()) +
           (mel_post - target).squaredNorm() / static_cast<S>(target.size());
  return (mel_pre - target).norm() + (mel_post - target).norm();
}

template <typename S>
S ReconstructionLoss(const DecoderOutput<S> &predicted, const MatrixX<S> &target, ReconMode mode) {
  return ReconstructionLoss<S>(predicted.mel_pre, predicted.mel_post, target, mode);
}

/// Mean KL to N(0, I) over utterance posteriors plus mean over group
/// posteriors (each group counted once).
template <typename S>
S KlLoss(const std::vector<DiagonalGaussian<S>> &speaker,
         const std::vector<DiagonalGaussian<S>> &accent_groups) {
  if (speaker.empty() || accent_groups.empty()) throw Error("kl loss: empty posterior list");
  S s(0), a(0);
  for (const auto &q : speaker) s += KlToStandardNormal(q);
  for (const auto &q : accent_groups) a += KlToStandardNormal(q);
  return s / static_cast<S>(speaker.size()) + a / static_cast<S>(accent_groups.size());
}

/// ||e - p||^2 with e the uniform distribution.
template <typename S>
S AdversarialUniformLoss(const VectorX<S> &probabilities) {
  if (probabilities.size() < 1) throw Error("adversarial loss: empty distribution");
  const S e = S(1) / static_cast<S>(probabilities.size());
  return (probabilities.array() - e).square().sum();
}

/// Mean negative log-softmax of the true label; logits are (N x |A|).
template <typename S>
S CrossEntropyLoss(const MatrixX<S> &logits, const std::vector<int> &labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw Error("cross entropy: label count mismatch");
  if (logits.rows() == 0) throw Error("cross entropy: empty batch");
  S loss(0);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || y >= logits.cols()) throw Error("cross entropy: label out of range");
    const S mx = logits.row(r).maxCoeff();
    const S lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    loss += lse - logits(r, y);
  }
  return loss / static_cast<S>(logits.rows());
}

/// Mean per-frame BCE against an indicator that is 1 on the last frame.
template <typename S>
S StopTokenLoss(const VectorX<S> &stop_logits, Eigen::Index true_length) {
  if (stop_logits.size() < 1 || true_length < 1 || true_length > stop_logits.size())
    throw Error("stop token loss: invalid lengths");
  S loss(0);
  for (Eigen::Index t = 0; t < true_length; ++t) {
    const S x = stop_logits(t);
    const S y = t + 1 == true_length ? S(1) : S(0);
    loss += std::max(x, S(0)) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  return loss / static_cast<S>(true_length);
}

namespace ad {

/// Masked reconstruction loss over a time-major batch.
/// pre, post: (T*B x M); target: (T*B x M) padded with zeros; frame_mask: (T*B x 1).
template <typename S>
Var<S> ReconstructionLoss(Var<S> pre, Var<S> post, const MatrixX<S> &target,
                          const MatrixX<S> &frame_mask, Eigen::Index batch, ReconMode mode) {
  Tape<S> &t = *pre.tape();
  const Eigen::Index M = target.cols();
  Var<S> mask = t.Constant(frame_mask.replicate(1, M));
  Var<S> x = t.Constant(target);
  Var<S> e_pre = Mul(Sub(pre, x), mask);
  Var<S> e_post = Mul(Sub(post, x), mask);
  if (mode == ReconMode::kMse) {
    const S count = frame_mask.sum() * static_cast<S>(M);
    return Scale(Add(SumAll(Mul(e_pre, e_pre)), SumAll(Mul(e_post, e_post))), S(1) / count);
  }
  auto norms = [&](Var<S> e) { return Sqrt(TimeSum(SumCols(Mul(e, e)), batch)); };
  return Scale(Add(SumAll(norms(e_pre)), SumAll(norms(e_post))), S(1) / static_cast<S>(batch));
}

/// Mean over rows of ||softmax(logits) - e||^2.
template <typename S>
Var<S> AdversarialUniformLoss(Var<S> logits) {
  const Eigen::Index n = logits.rows(), k = logits.cols();
  Var<S> d = AddScalar(SoftmaxRows(logits), -S(1) / static_cast<S>(k));
  return Scale(SumAll(Mul(d, d)), S(1) / static_cast<S>(n));
}

/// Stop-token BCE over a time-major batch with per-item lengths.
template <typename S>
Var<S> StopTokenLoss(Var<S> stop_logits, const std::vector<int> &lengths, Eigen::Index steps) {
  const Eigen::Index B = static_cast<Eigen::Index>(lengths.size());
  MatrixX<S> target = MatrixX<S>::Zero(steps * B, 1), mask = MatrixX<S>::Zero(steps * B, 1);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index t = 0; t < lengths[b]; ++t) mask(t * B + b, 0) = S(1);
    target((lengths[b] - 1) * B + b, 0) = S(1);
  }
  return BinaryCrossEntropyWithLogits(stop_logits, std::move(target), std::move(mask));
}

}  // namespace ad
}  // namespace accentvae
