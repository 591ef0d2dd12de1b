// include/accentvae/gaussian.hpp

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

#pragma once

#include <span>
#include <vector>

#include "accentvae/autodiff.hpp"
#include "accentvae/common.hpp"

namespace accentvae {

inline constexpr double kLogVarMin = -14.0;
inline constexpr double kLogVarMax = 14.0;

/// Diagonal Gaussian posterior, parameterized by mean and log-variance.
template <typename Scalar>
struct DiagonalGaussian {
  VectorX<Scalar> mean;
  VectorX<Scalar> log_variance;

  Eigen::Index dim() const { return mean.size(); }
  VectorX<Scalar> variance() const { return log_variance.array().exp().matrix(); }

  static DiagonalGaussian Standard(Eigen::Index dim) {
    return {VectorX<Scalar>::Zero(dim), VectorX<Scalar>::Zero(dim)};
  }

  template <typename Other>
  DiagonalGaussian<Other> cast() const {
    return {mean.template cast<Other>(), log_variance.template cast<Other>()};
  }
};

enum class LatentSource { kSpeaker, kAccent };

template <typename Scalar>
struct LatentSample {
  VectorX<Scalar> vector;
  LatentSource source = LatentSource::kSpeaker;
};

template <typename Scalar>
VectorX<Scalar> ClampLogVariance(const VectorX<Scalar> &lv) {
  return lv.cwiseMax(Scalar(kLogVarMin)).cwiseMin(Scalar(kLogVarMax));
}

/// Group evidence accumulation: the normalized product of the member
/// Gaussians. Precisions add; the mean is the precision-weighted average.
template <typename Scalar>
DiagonalGaussian<Scalar> AccumulateGroupEvidence(
    std::span<const DiagonalGaussian<Scalar>> members) {
  if (members.empty()) throw Error("accumulate_group_evidence: empty group");
  const Eigen::Index dim = members.front().dim();
  VectorX<Scalar> precision = VectorX<Scalar>::Zero(dim);
  VectorX<Scalar> weighted = VectorX<Scalar>::Zero(dim);
  for (const auto &m : members) {
    if (m.dim() != dim || m.log_variance.size() != dim)
      throw Error("accumulate_group_evidence: dimension mismatch");
    const VectorX<Scalar> p = (-m.log_variance.array()).exp().matrix();
    precision += p;
    weighted += p.cwiseProduct(m.mean);
  }
  DiagonalGaussian<Scalar> out;
  out.mean = weighted.cwiseQuotient(precision);
  out.log_variance = ClampLogVariance<Scalar>((-precision.array().log()).matrix());
  return out;
}

template <typename Scalar>
DiagonalGaussian<Scalar> AccumulateGroupEvidence(
    const std::vector<DiagonalGaussian<Scalar>> &members) {
  return AccumulateGroupEvidence<Scalar>(
      std::span<const DiagonalGaussian<Scalar>>(members.data(), members.size()));
}

/// mean + exp(0.5 * log_variance) * noise.
template <typename Scalar>
LatentSample<Scalar> Reparameterize(const DiagonalGaussian<Scalar> &posterior,
                                    const VectorX<Scalar> &noise,
                                    LatentSource source = LatentSource::kSpeaker) {
  if (noise.size() != posterior.dim()) throw Error("reparameterize: noise dimension mismatch");
  LatentSample<Scalar> s;
  s.vector = posterior.mean +
             (posterior.log_variance.array() * Scalar(0.5)).exp().matrix().cwiseProduct(noise);
  s.source = source;
  return s;
}

/// KL(q || N(0, I)) = 0.5 * sum_d (mu^2 + sigma^2 - 1 - log sigma^2).
template <typename Scalar>
Scalar KlToStandardNormal(const DiagonalGaussian<Scalar> &q) {
  const auto lv = q.log_variance.array();
  return Scalar(0.5) * (q.mean.array().square() + lv.exp() - Scalar(1) - lv).sum();
}

namespace ad {

/// Tape form of AccumulateGroupEvidence over the rows of a batch.
/// mean, log_var: (B x L); groups: member rows per group -> (G x L) each.
template <typename S>
std::pair<Var<S>, Var<S>> GroupPosterior(Var<S> mean, Var<S> log_var,
                                         const std::vector<std::vector<int>> &groups) {
  Var<S> precision = Exp(Scale(log_var, S(-1)));
  Var<S> sum_precision = SegmentSum(precision, groups);
  Var<S> sum_weighted = SegmentSum(Mul(precision, mean), groups);
  Var<S> group_mean = Div(sum_weighted, sum_precision);
  Var<S> group_log_var =
      Clamp(Scale(Log(sum_precision), S(-1)), S(kLogVarMin), S(kLogVarMax));
  return {group_mean, group_log_var};
}

}  // namespace ad
}  // namespace accentvae
