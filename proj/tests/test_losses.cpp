// tests/test_losses.cpp

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

#include <cmath>
#include <random>

#include "accentvae/losses.hpp"
#include "doctest.h"
#include "gradient_check.hpp"

using namespace accentvae;
using namespace accentvae::testing;

namespace {

Eigen::VectorXd OneHot(int k, int i) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
  v(i) = 1;
  return v;
}

}  // namespace

TEST_CASE("reconstruction loss: hand-computed values") {
  const Eigen::MatrixXd pred = Eigen::MatrixXd::Constant(1, 1, 3.0);
  const Eigen::MatrixXd target = Eigen::MatrixXd::Constant(1, 1, 1.0);
  CHECK(ReconstructionLoss<double>(pred, pred, target, ReconMode::kMse) == 8.0);
  CHECK(ReconstructionLoss<double>(pred, pred, target, ReconMode::kL2Norm) == 4.0);
  CHECK(ReconstructionLoss<double>(target, target, target, ReconMode::kMse) == 0.0);
  CHECK(ReconstructionLoss<double>(target, target, target, ReconMode::kL2Norm) == 0.0);
  CHECK_THROWS_AS(ReconstructionLoss<double>(pred, pred, Eigen::MatrixXd::Zero(2, 1), ReconMode::kMse),
                  Error);
}

TEST_CASE("reconstruction loss: mse is homogeneous of degree two") {
  const Eigen::MatrixXd x = RandomMatrix(5, 4, 1), e1 = RandomMatrix(5, 4, 2), e2 = RandomMatrix(5, 4, 3);
  const double base = ReconstructionLoss<double>(x + e1, x + e2, x, ReconMode::kMse);
  for (double c : {0.5, 2.0, 3.0})
    CHECK(ReconstructionLoss<double>(x + c * e1, x + c * e2, x, ReconMode::kMse) ==
          doctest::Approx(c * c * base).epsilon(1e-12));
}

TEST_CASE("recon mode names round trip") {
  CHECK(ParseReconMode(ReconModeName(ReconMode::kMse)) == ReconMode::kMse);
  CHECK(ParseReconMode(ReconModeName(ReconMode::kL2Norm)) == ReconMode::kL2Norm);
  CHECK_THROWS_AS(ParseReconMode("l1"), UsageError);
}

TEST_CASE("KL loss: utterance mean plus group mean") {
  using G = DiagonalGaussian<double>;
  const G std1 = G::Standard(1);
  const G shifted{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)};  // KL 0.5
  CHECK(KlLoss<double>({std1, std1}, {std1}) == 0.0);
  CHECK(KlLoss<double>({shifted}, {std1}) == doctest::Approx(0.5));
  CHECK(KlLoss<double>({shifted, std1}, {shifted}) == doctest::Approx(0.25 + 0.5));
  CHECK_THROWS_AS(KlLoss<double>({}, {std1}), Error);
}

TEST_CASE("adversarial loss: uniform, two-class and one-hot values") {
  for (int k = 2; k <= 10; ++k) {
    CHECK(AdversarialUniformLoss<double>(Eigen::VectorXd::Constant(k, 1.0 / k)) ==
          doctest::Approx(0.0));
    CHECK(std::abs(AdversarialUniformLoss<double>(OneHot(k, k - 1)) - (1.0 - 1.0 / k)) < 1e-12);
  }
  CHECK(AdversarialUniformLoss<double>(OneHot(2, 0)) == doctest::Approx(0.5));
  CHECK(AdversarialUniformLoss<double>(OneHot(7, 3)) == doctest::Approx(6.0 / 7.0));
}

TEST_CASE("property: adversarial loss lies in [0, 1 - 1/k]") {
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> ex(1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + trial % 9;
    Eigen::VectorXd p(k);
    for (int i = 0; i < k; ++i) p(i) = ex(rng);
    p /= p.sum();
    const double v = AdversarialUniformLoss<double>(p);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 - 1.0 / k + 1e-12);
  }
}

TEST_CASE("cross entropy: uniform logits, margins and mean reduction") {
  CHECK(CrossEntropyLoss<double>(Eigen::MatrixXd::Zero(1, 7), {3}) ==
        doctest::Approx(std::log(7.0)).epsilon(1e-14));
  Eigen::MatrixXd binary = Eigen::MatrixXd::Zero(1, 2);
  binary(0, 1) = 20;
  CHECK(CrossEntropyLoss<double>(binary, {1}) < 1e-8);
  // margin 20 over k classes leaves log(1 + (k - 1) e^-20)
  Eigen::MatrixXd confident = Eigen::MatrixXd::Zero(1, 7);
  confident(0, 2) = 20;
  CHECK(CrossEntropyLoss<double>(confident, {2}) ==
        doctest::Approx(std::log1p(6 * std::exp(-20.0))).epsilon(1e-10));
  const Eigen::MatrixXd one = RandomMatrix(1, 4, 9);
  Eigen::MatrixXd two(2, 4);
  two << one, one;
  CHECK(CrossEntropyLoss<double>(two, {1, 1}) == doctest::Approx(CrossEntropyLoss<double>(one, {1})));
  CHECK_THROWS_AS(CrossEntropyLoss<double>(one, {4}), Error);
  CHECK_THROWS_AS(CrossEntropyLoss<double>(one, {-1}), Error);
}

TEST_CASE("stop token loss: perfect logits and ln 2 at zero") {
  Eigen::VectorXd perfect = Eigen::VectorXd::Constant(6, -20.0);
  perfect(5) = 20.0;
  CHECK(StopTokenLoss<double>(perfect, 6) < 1e-8);
  CHECK(StopTokenLoss<double>(Eigen::VectorXd::Zero(6), 6) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(StopTokenLoss<double>(Eigen::VectorXd::Zero(3), 0), Error);
}

TEST_CASE("beta schedule: endpoints, midpoint and monotonicity") {
  const BetaSchedule s;
  CHECK(BetaAt(0, s) == 1e-6);
  CHECK(BetaAt(5000, s) == 1e-6);
  CHECK(BetaAt(15000, s) == 1e-4);
  CHECK(BetaAt(200000, s) == 1e-4);
  CHECK(BetaAt(10000, s) == doctest::Approx(5.05e-5).epsilon(1e-12));
  double prev = 0;
  for (long step = 0; step <= 20000; step += 37) {
    const double b = BetaAt(step, s);
    CHECK(b >= prev);
    prev = b;
  }
  CHECK(std::abs(BetaAt(5001, s) - 1e-6) < 1e-8);
  CHECK(std::abs(BetaAt(14999, s) - 1e-4) < 1e-8);
  CHECK_THROWS_AS(BetaAt(-1, s), Error);
  BetaSchedule bad;
  bad.ramp_end_step = bad.ramp_start_step;
  CHECK_THROWS_AS(bad.Validate(), Error);
}

TEST_CASE("loss breakdown finiteness") {
  LossBreakdown lb;
  CHECK(lb.AllFinite());
  lb.kl = std::nan("");
  CHECK_FALSE(lb.AllFinite());
}

TEST_CASE("tape losses agree with the value-level forms") {
  // one item of 3 frames, 2 bands
  const Eigen::MatrixXd target = RandomMatrix(3, 2, 10), pre = RandomMatrix(3, 2, 11),
                        post = RandomMatrix(3, 2, 12);
  const Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(3, 1);
  for (ReconMode mode : {ReconMode::kMse, ReconMode::kL2Norm}) {
    ad::Tape<double> t;
    const double tape_value =
        ad::ReconstructionLoss(t.Constant(pre), t.Constant(post), target, mask, 1, mode).value()(0, 0);
    CHECK(tape_value == doctest::Approx(ReconstructionLoss<double>(pre, post, target, mode)));
  }
  const Eigen::MatrixXd logits = RandomMatrix(4, 3, 13);
  ad::Tape<double> t;
  double mean_adv = 0;
  for (int r = 0; r < 4; ++r) {
    Eigen::VectorXd p = (logits.row(r).array() - logits.row(r).maxCoeff()).exp().transpose();
    mean_adv += AdversarialUniformLoss<double>(p / p.sum()) / 4;
  }
  CHECK(ad::AdversarialUniformLoss(t.Constant(logits)).value()(0, 0) == doctest::Approx(mean_adv));
  CHECK(ad::CrossEntropy(t.Constant(logits), {0, 2, 1, 1}).value()(0, 0) ==
        doctest::Approx(CrossEntropyLoss<double>(logits, {0, 2, 1, 1})));
  const Eigen::VectorXd stop = RandomMatrix(5, 1, 14);
  CHECK(ad::StopTokenLoss(t.Constant(Eigen::MatrixXd(stop)), {5}, 5).value()(0, 0) ==
        doctest::Approx(StopTokenLoss<double>(stop, 5)));
}

TEST_CASE("property: tape losses are permutation invariant over the batch") {
  const Eigen::MatrixXd logits = RandomMatrix(5, 4, 15);
  Eigen::MatrixXd permuted = logits;
  permuted.row(0).swap(permuted.row(3));
  ad::Tape<double> t;
  CHECK(ad::AdversarialUniformLoss(t.Constant(logits)).value()(0, 0) ==
        doctest::Approx(ad::AdversarialUniformLoss(t.Constant(permuted)).value()(0, 0)).epsilon(1e-14));
  CHECK(ad::CrossEntropy(t.Constant(logits), {0, 1, 2, 3, 1}).value()(0, 0) ==
        doctest::Approx(ad::CrossEntropy(t.Constant(permuted), {3, 1, 2, 0, 1}).value()(0, 0)).epsilon(1e-14));
}

TEST_CASE("gradient check: every loss with respect to its inputs") {
  // time-major batch of 2 items with lengths 3 and 2, 4 bands
  const int B = 2, T = 3, M = 4;
  const Eigen::MatrixXd target = RandomMatrix(T * B, M, 20);
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(T * B, 1);
  mask(2 * B + 1, 0) = 0;
  const Eigen::MatrixXd other = RandomMatrix(T * B, M, 22);
  for (ReconMode mode : {ReconMode::kMse, ReconMode::kL2Norm}) {
    const double err = CheckInputGradient(RandomMatrix(T * B, M, 21), [&](auto &tape, auto x) {
      return ad::ReconstructionLoss(x, tape.Constant(other), target, mask, B, mode);
    });
    CHECK(err < 1e-4);
  }
  CHECK(CheckInputGradient(RandomMatrix(5, 3, 23), [](auto &, auto x) {
          return ad::AdversarialUniformLoss(x);
        }) < 1e-4);
  CHECK(CheckInputGradient(RandomMatrix(5, 3, 24), [](auto &, auto x) {
          return ad::CrossEntropy(x, {0, 1, 2, 2, 0});
        }) < 1e-4);
  CHECK(CheckInputGradient(RandomMatrix(T * B, 1, 25), [&](auto &, auto x) {
          return ad::StopTokenLoss(x, {3, 2}, T);
        }) < 1e-4);
  const Eigen::MatrixXd lv = RandomMatrix(4, 3, 27, 0.5);
  CHECK(CheckInputGradient(RandomMatrix(4, 3, 26), [&](auto &tape, auto x) {
          return ad::KlStandardNormal(x, tape.Constant(lv));
        }) < 1e-4);
  const Eigen::MatrixXd mu = RandomMatrix(4, 3, 28);
  CHECK(CheckInputGradient(lv, [&](auto &tape, auto x) {
          return ad::KlStandardNormal(tape.Constant(mu), x);
        }) < 1e-4);
}
