// tests/gradient_check.hpp

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

// Central finite differences against tape gradients, float64.

#pragma once

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "accentvae/model.hpp"

namespace accentvae::testing {

struct GradientReport {
  double worst_relative_error = 0.0;
  std::string worst_tensor;
  int tensors_checked = 0;
};

inline double RelativeError(const Eigen::MatrixXd &analytic, const Eigen::MatrixXd &numeric) {
  const double denom = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / denom;
}

/// Scalar objective built on a fresh tape from the model's current values.
using Objective = std::function<ad::Var<double>(Model<double> &, ad::Tape<double> &,
                                                const Model<double>::Bound &)>;

/// Compares analytic and numeric gradients for every parameter owned by
/// `owner` (step 1e-5, central differences).
inline GradientReport CheckParameterGradients(Model<double> &model, Submodule owner,
                                              const Objective &objective, double step = 1e-5) {
  model.ZeroGrad();
  {
    ad::Tape<double> tape;
    auto bound = model.Bind(tape, TrainableSet::Only(owner));
    auto loss = objective(model, tape, bound);
    tape.Backward(loss);
  }
  auto eval = [&]() {
    ad::Tape<double> tape;
    auto bound = model.BindFrozen(tape);
    return objective(model, tape, bound).value()(0, 0);
  };
  GradientReport report;
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    if (model.submodule(i) != owner) continue;
    auto &p = model.parameters()[i];
    Eigen::MatrixXd numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double orig = p.value(k);
      p.value(k) = orig + step;
      const double up = eval();
      p.value(k) = orig - step;
      const double down = eval();
      p.value(k) = orig;
      numeric(k) = (up - down) / (2 * step);
    }
    const double err = RelativeError(p.grad, numeric);
    ++report.tensors_checked;
    if (err >= report.worst_relative_error) {
      report.worst_relative_error = err;
      report.worst_tensor = p.name;
    }
  }
  return report;
}

/// Central-difference check of d f / d x for a scalar tape function of one
/// input matrix. Returns the relative error.
inline double CheckInputGradient(const Eigen::MatrixXd &x0,
                                 const std::function<ad::Var<double>(ad::Tape<double> &,
                                                                     ad::Var<double>)> &f,
                                 double step = 1e-5) {
  Eigen::MatrixXd analytic;
  {
    ad::Tape<double> tape;
    auto x = tape.Variable(x0);
    tape.Backward(f(tape, x));
    analytic = tape.Grad(x.id());
  }
  Eigen::MatrixXd numeric(x0.rows(), x0.cols());
  for (Eigen::Index k = 0; k < x0.size(); ++k) {
    Eigen::MatrixXd xp = x0, xm = x0;
    xp(k) += step;
    xm(k) -= step;
    ad::Tape<double> a, b;
    numeric(k) = (f(a, a.Constant(xp)).value()(0, 0) - f(b, b.Constant(xm)).value()(0, 0)) /
                 (2 * step);
  }
  return RelativeError(analytic, numeric);
}

/// Fixed random weighting so that every output element reaches the loss.
inline ad::Var<double> RandomProjection(ad::Tape<double> &tape, ad::Var<double> x,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd w(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = n(rng);
  return ad::SumAll(ad::Mul(x, tape.Constant(w)));
}

/// Moves every parameter off exact zeros so no ReLU sits on its kink.
inline void Jitter(Model<double> &model, std::uint64_t seed, double scale = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto &p : model.parameters())
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value(k) += n(rng);
}

inline ModelConfig TinyConfig() {
  ModelConfig c;
  c.vocab_size = 10;
  c.num_accents = 3;
  c.n_mels = 6;
  c.embedding_dim = 4;
  c.enc_dim = 4;
  c.enc_conv_taps = 3;
  c.ref_channels = {2, 3};
  c.ref_dim = 4;
  c.latent_dim = 3;
  c.prenet_dim = 4;
  c.attention_rnn_dim = 5;
  c.attention_dim = 4;
  c.location_taps = 3;
  c.postnet_channels = 3;
  c.postnet_taps = 3;
  c.classifier_hidden = 4;
  c.max_decoder_steps = 20;
  return c;
}

inline Eigen::MatrixXd RandomMatrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                    double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m(k) = n(rng);
  return m;
}

}  // namespace accentvae::testing
